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

#include "mmaoa/aoa.hpp"
#include "mmaoa/beams.hpp"
#include "mmaoa/cir.hpp"
#include "mmaoa/preamble.hpp"
#include "mmaoa/propagation.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmaoa
{
    // Invalid or inconsistent experiment configuration; `field` names the offending key
    class ConfigError : public std::invalid_argument
    {
    public:
        ConfigError(const std::string &field, const std::string &what)
            : std::invalid_argument(field + ": " + what), field_(field)
        {
        }
        const std::string &field() const { return field_; }

    private:
        std::string field_;
    };

    struct SynthCodebookParams
    {
        int n_elements = 8;
        int phase_bits = 4;
        int n_beams = 32;
        std::uint64_t seed = 1;
        double phase_error_deg = 0.0;
    };

    // Order in which the selected receive beams are swept
    enum class SweepOrder
    {
        kAscending, // increasing beam index
        kNested     // the order in which beams enter the nested subsets
    };

    struct ExperimentConfig
    {
        std::string scenario_path;       // resolved relative to the config file
        std::optional<Scenario> scenario; // inline alternative to scenario_path
        std::string codebook_path;       // empty: synthesize
        SynthCodebookParams synth;
        double grid_min_deg = -90.0, grid_max_deg = 90.0, grid_res_deg = 1.0;
        double tx_power_dbm = 25.0;
        std::vector<std::optional<double>> noise_power_dbm{std::nullopt}; // nullopt: noiseless
        int n_trials = 100;
        double xi_deg = 2.0;
        std::vector<double> nu{0.1};
        double epsilon = 0.3;
        std::vector<double> mu_list{0.1, 0.3, 0.5};
        std::vector<int> beams_used;     // empty: every beam of the codebook
        std::vector<std::string> schemes{"vae_cir"};
        std::uint64_t seed = 1;
        std::optional<ClusterConfig> cluster = ClusterConfig{};
        double detect_threshold_rel = 0.1;
        std::vector<int> paths;          // kappa values to evaluate; empty: all reference paths
        GolayMode golay_mode = GolayMode::kStandard;
        RotationMode rotation = RotationMode::kContinuous;
        ConfidencePair confidence_pair = ConfidencePair::kLastTwo;
        SweepOrder sweep_order = SweepOrder::kNested;
        int threads = 1;

        // Throws ConfigError
        void validate() const;
    };

    // Throws ConfigError for unknown keys, wrong types or invalid values
    ExperimentConfig parse_config(const std::string &json_text, const std::filesystem::path &base_dir = {});
    ExperimentConfig load_config(const std::filesystem::path &path);
    std::string config_to_json(const ExperimentConfig &config);

    struct TrialRecord
    {
        int trial_id = 0;
        int path_kappa = 0;
        int tap_index = 0;
        double true_aoa_deg = 0.0;
        std::string scheme;
        double param = 0.0; // nu for vae_cir, mu for rice, unused for hp
        std::optional<double> noise_dbm;
        int beams_used = 0;
        bool detected = false;
        std::optional<double> theta_hat_deg; // nullopt when the path was not detected
        bool correct = false;
        bool confident = false;
    };

    struct SummaryRow
    {
        std::string scheme;
        double param = 0.0;
        std::optional<double> noise_dbm;
        int beams_used = 0;
        int path_kappa = 0;
        int n_trials = 0;
        int n_correct = 0;
        int n_inaccurate_confident = 0;
        int n_accurate_confident = 0;
        double p_correct = 0.0;
        std::optional<double> p_f; // nullopt when no trial was inaccurate
        std::optional<double> p_d; // nullopt when no trial was accurate
    };

    // Dominant path of the noiseless reference channel
    struct ReferencePath
    {
        int kappa = 0;
        int tap_index = 0;
        double true_aoa_deg = 0.0;
    };

    struct ExperimentResult
    {
        std::vector<ReferencePath> reference;
        std::vector<TrialRecord> trials;
        std::vector<SummaryRow> summary;
        std::vector<std::string> warnings;
    };

    // Beam indices (0-based) in the order they join the nested subsets: bit-reversed index order,
    // so every prefix of length n_beams / 2^k is evenly spaced.
    std::vector<std::size_t> nested_beam_order(std::size_t n_beams);

    // Receive beams swept for a given subset size, in sweep order
    std::vector<std::size_t> sweep_beams(std::size_t n_beams, std::size_t beams_used, SweepOrder order);

    // Mixes (seed, a, b, c) into an independent 64-bit stream seed
    std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

    Codebook build_codebook(const ExperimentConfig &config);
    Scenario resolve_scenario(const ExperimentConfig &config);

    // Throws ConfigError for configuration problems and std::runtime_error for failures while running
    ExperimentResult run_experiment(const ExperimentConfig &config);

    // Groups by (scheme, param, noise, beams_used, path) in first-appearance order
    std::vector<SummaryRow> summarize(const std::vector<TrialRecord> &trials);

    void write_trials_csv(std::ostream &out, const std::vector<TrialRecord> &trials);
    void write_summary_csv(std::ostream &out, const std::vector<SummaryRow> &rows);
    std::string summary_to_json(const ExperimentResult &result);

    // Writes trials.csv, summary.csv, summary.json and config.echo.json
    void write_outputs(const std::filesystem::path &out_dir, const ExperimentConfig &config,
                       const ExperimentResult &result);

    // The two evaluation rooms: 4 x 3 m, wall dielectric 2, endpoints facing each other
    Scenario scenario_a();
    Scenario scenario_b();
}
