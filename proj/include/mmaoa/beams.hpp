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

#include "mmaoa/common.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

namespace mmaoa
{
    // Uniform, strictly increasing set of directions in degrees (the search space)
    class AngleGrid
    {
    public:
        AngleGrid() : AngleGrid(-90.0, 90.0, 1.0) {}
        AngleGrid(double min_deg, double max_deg, double resolution_deg);

        // Throws std::invalid_argument unless the angles are uniform and strictly increasing
        static AngleGrid from_angles(std::vector<double> angles);

        std::size_t size() const { return angles_.size(); }
        double operator[](std::size_t i) const { return angles_[i]; }
        const std::vector<double> &angles() const { return angles_; }
        double min() const { return angles_.front(); }
        double max() const { return angles_.back(); }
        double resolution() const { return resolution_; }

        bool contains(double theta_deg) const;

        // Index of the grid angle closest to theta; ties go to the smaller angle
        std::size_t nearest_index(double theta_deg) const;

        bool operator==(const AngleGrid &) const = default;

    private:
        std::vector<double> angles_;
        double resolution_ = 1.0;
    };

    // Complex directional gain (amplitude) of one beam at every grid angle
    struct BeamPattern
    {
        int beam_id = 0;
        std::vector<cdouble> gains;

        bool operator==(const BeamPattern &) const = default;
    };

    struct Codebook
    {
        std::vector<BeamPattern> beams;
        AngleGrid grid;
        double normalization_db = 15.0;
        bool power_only = false; // source had no phase column, phases were set to zero

        std::size_t size() const { return beams.size(); }

        // Position of a beam id in `beams`, or nullopt
        std::optional<std::size_t> find(int beam_id) const;

        // Throws std::invalid_argument on size mismatch or non-finite gains
        void validate() const;
    };

    // Pattern file could be parsed but does not cover the requested grid
    class CoverageError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    // Linear interpolation of magnitude and unwrapped phase between neighbouring grid points.
    // Throws std::domain_error if theta lies outside the grid span.
    cdouble gain_at(const BeamPattern &pattern, const AngleGrid &grid, double theta_deg);

    // Isotropic unit gain
    BeamPattern quasi_omni(const AngleGrid &grid, int beam_id = 0);

    // Scale all gains so the largest power gain over beams and angles equals normalization_db
    void normalize(Codebook &codebook, double normalization_db);

    double max_power_gain_db(const Codebook &codebook);

    // CSV `beam_id,angle_deg,mag_db,phase_deg` (mag_db is power gain in dB). A three-column
    // header without phase_deg is accepted and marks the codebook power_only.
    Codebook read_codebook(std::istream &in, const AngleGrid &grid, double normalization_db = 15.0);
    Codebook load_codebook(const std::filesystem::path &path, const AngleGrid &grid, double normalization_db = 15.0);

    void write_codebook(std::ostream &out, const Codebook &codebook);
    void save_codebook(const std::filesystem::path &path, const Codebook &codebook);

    // Sentinel for synth_codebook: continuous phase shifters
    inline constexpr int kUnquantizedPhase = 0;

    // Uniform linear array with half-wavelength spacing and isotropic elements. Beam i is steered to
    // min + (i + 1/2) * span / n_beams. Each beam draws a common phase dither from `seed` before the
    // steering phases are rounded to 2^phase_bits levels; phase_error_deg adds independent Gaussian
    // per-element phase errors. Normalized to 15 dB peak power gain.
    Codebook synth_codebook(int n_elements, int phase_bits, int n_beams, const AngleGrid &grid,
                            std::uint64_t seed, double phase_error_deg = 0.0);

    // Steering direction of beam i in a codebook produced by synth_codebook
    double synth_steering_deg(int beam_index, int n_beams, const AngleGrid &grid);
}
