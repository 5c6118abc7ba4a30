// SPDX-License-Identifier: Apache-2.0
//
// mmaoa: beam-specific CIR simulation and angle-of-arrival estimation for 60 GHz links
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include "mmaoa/beams.hpp"
#include "mmaoa/common.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mmaoa
{
    struct BeamMeasurement
    {
        int beam_id = 0;
        cdouble h_hat;
    };

    // h_hat of one dominant CIR component under each receive beam, in sweep order
    struct MeasurementSet
    {
        int kappa = 1;
        std::vector<BeamMeasurement> measurements;
        const Codebook *codebook = nullptr;

        std::size_t size() const { return measurements.size(); }

        // Throws std::invalid_argument if the codebook is missing or a beam id is unknown
        void validate() const;
    };

    struct WeightPolicy
    {
        double nu = 0.1; // gate threshold factor
        // Prior direction range: mask[i] true keeps grid angle i. Empty means no prior.
        std::vector<bool> prior_mask;
    };

    // Which two measurements the confidence check compares
    enum class ConfidencePair
    {
        kLastTwo, // the last two swept beams
        kBestTwo  // the two strongest measurements
    };

    struct ConfidenceOptions
    {
        double epsilon = 0.3;
        ConfidencePair pair = ConfidencePair::kLastTwo;
    };

    struct ScoreTable
    {
        std::vector<double> scores; // one per grid angle
        std::vector<int> used_beams; // beam ids, in processing order
        // Beam-id pairs (numerator, denominator) that passed the magnitude gate
        std::vector<std::pair<int, int>> accumulated_pairs;
    };

    struct EstimationResult
    {
        double theta_hat_deg = 0.0;
        bool confident = false;
        ScoreTable score_table;
        double epsilon = 0.3;
        std::string scheme;
    };

    // Accumulated pairwise mismatch between measured amplitude ratios and gain ratios; the estimate
    // is the grid angle with the smallest score (ties: smallest angle). Each pair is oriented with the
    // stronger measurement in the numerator, so the table does not depend on processing order.
    // Throws InsufficientMeasurements when fewer than two measurements are given.
    EstimationResult vae_cir(const MeasurementSet &meas, const AngleGrid &grid, const WeightPolicy &policy = {},
                             const ConfidenceOptions &confidence = {});

    // | |h(weak)| / |h(strong)| - |G_weak(theta)| / |G_strong(theta)| | <= epsilon for the selected pair
    bool check_confidence(const MeasurementSet &meas, double theta_hat_deg, double epsilon,
                          ConfidencePair pair = ConfidencePair::kLastTwo);

    // Detection-score baseline: each beam adds (detected) or subtracts (missed) its peak-normalized
    // power pattern; detected means |h| >= mu * max |h|. Estimate is the argmax.
    EstimationResult rice_baseline(const MeasurementSet &meas, const AngleGrid &grid, double mu,
                                   const ConfidenceOptions &confidence = {});

    // Top-5 amplitude-weighted baseline: the five strongest beams add |h| * |G(theta)| / max |G|; the
    // estimate is the centre of the span of the five best-scoring directions, snapped to the grid.
    // Throws InsufficientMeasurements when fewer than five measurements are given.
    EstimationResult hp_baseline(const MeasurementSet &meas, const AngleGrid &grid,
                                 const ConfidenceOptions &confidence = {});

    // |G_l(theta)| for each measurement (rows) and grid angle (columns)
    std::vector<std::vector<double>> gain_magnitudes(const MeasurementSet &meas, const AngleGrid &grid);
}
