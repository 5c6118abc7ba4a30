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

// Command-line front end: run experiments, export scenarios, estimate AOA from exported CIRs and
// synthesize codebooks.

#include "mmaoa/harness.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <fstream>
#include <iostream>

namespace
{
    constexpr int kExitConfig = 1;
    constexpr int kExitRuntime = 2;

    int cmd_run(const std::string &config_path, const std::string &out_dir, int threads_override)
    {
        mmaoa::ExperimentConfig cfg;
        try
        {
            cfg = mmaoa::load_config(config_path);
            if (threads_override > 0)
                cfg.threads = threads_override;
        }
        catch (const mmaoa::ConfigError &e)
        {
            std::cerr << "config error: " << config_path << ": " << e.what() << "\n";
            return kExitConfig;
        }
        try
        {
            const auto result = mmaoa::run_experiment(cfg);
            mmaoa::write_outputs(out_dir, cfg, result);
            for (const auto &w : result.warnings)
                std::cerr << "warning: " << w << "\n";
            std::cout << "wrote " << result.trials.size() << " trial records to " << out_dir << "\n";
        }
        catch (const mmaoa::ConfigError &e)
        {
            std::cerr << "config error: " << config_path << ": " << e.what() << "\n";
            return kExitConfig;
        }
        return 0;
    }

    int cmd_transcribe(const std::string &which, const std::string &out)
    {
        mmaoa::Scenario s;
        if (which == "A")
            s = mmaoa::scenario_a();
        else if (which == "B")
            s = mmaoa::scenario_b();
        else
        {
            std::cerr << "config error: --scenario must be A or B\n";
            return kExitConfig;
        }
        const auto text = mmaoa::scenario_to_json(s);
        if (out.empty() || out == "-")
            std::cout << text;
        else
        {
            std::ofstream f(out);
            if (!f)
                throw std::runtime_error("cannot write " + out);
            f << text;
        }
        return 0;
    }

    struct EstimateArgs
    {
        std::string cir_path, codebook_path, scheme = "vae_cir";
        double nu = 0.1, mu = 0.3, epsilon = 0.3, threshold = 0.1;
        double grid_min = -90.0, grid_max = 90.0, grid_res = 1.0;
        bool best_two = false;
    };

    int cmd_estimate(const EstimateArgs &a)
    {
        const mmaoa::AngleGrid grid(a.grid_min, a.grid_max, a.grid_res);
        const auto codebook = mmaoa::load_codebook(a.codebook_path, grid);
        const auto estimates = mmaoa::load_cir_csv(a.cir_path);
        const mmaoa::ConfidenceOptions conf{a.epsilon, a.best_two ? mmaoa::ConfidencePair::kBestTwo
                                                                  : mmaoa::ConfidencePair::kLastTwo};
        for (const auto &path : mmaoa::detect_and_aggregate(estimates, a.threshold))
        {
            mmaoa::MeasurementSet meas;
            meas.kappa = path.kappa;
            meas.codebook = &codebook;
            for (const auto &e : estimates)
            {
                const auto it = e.taps.find(path.tap_index);
                if (it != e.taps.end())
                    meas.measurements.push_back({e.rx_beam_id, it->second});
            }
            mmaoa::EstimationResult r;
            try
            {
                if (a.scheme == "vae_cir")
                    r = mmaoa::vae_cir(meas, grid, mmaoa::WeightPolicy{a.nu, {}}, conf);
                else if (a.scheme == "rice")
                    r = mmaoa::rice_baseline(meas, grid, a.mu, conf);
                else
                    r = mmaoa::hp_baseline(meas, grid, conf);
            }
            catch (const mmaoa::InsufficientMeasurements &e)
            {
                // a sparse export may hold a tap for only a few beams; report it and carry on
                std::cout << nlohmann::ordered_json{{"kappa", path.kappa}, {"scheme", a.scheme}, {"error", e.what()}}.dump()
                          << "\n";
                continue;
            }
            nlohmann::ordered_json j{{"kappa", path.kappa},
                                     {"theta_hat_deg", r.theta_hat_deg},
                                     {"confident", r.confident},
                                     {"epsilon", r.epsilon},
                                     {"scheme", r.scheme}};
            std::cout << j.dump() << "\n";
        }
        return 0;
    }

    struct SynthArgs
    {
        int n_elements = 8, phase_bits = 4, n_beams = 32;
        std::uint64_t seed = 1;
        double phase_error_deg = 0.0;
        double grid_min = -90.0, grid_max = 90.0, grid_res = 1.0;
        std::string out;
    };

    int cmd_synth(const SynthArgs &a)
    {
        const mmaoa::AngleGrid grid(a.grid_min, a.grid_max, a.grid_res);
        const auto cb = mmaoa::synth_codebook(a.n_elements, a.phase_bits, a.n_beams, grid, a.seed, a.phase_error_deg);
        if (a.out.empty() || a.out == "-")
            mmaoa::write_codebook(std::cout, cb);
        else
            mmaoa::save_codebook(a.out, cb);
        return 0;
    }

    void add_grid(CLI::App *app, double &lo, double &hi, double &res)
    {
        app->add_option("--grid-min", lo, "Smallest search angle in degrees")->capture_default_str();
        app->add_option("--grid-max", hi, "Largest search angle in degrees")->capture_default_str();
        app->add_option("--grid-res", res, "Search grid step in degrees")->capture_default_str();
    }
}

int main(int argc, char **argv)
{
    CLI::App app{"mmaoa: 60 GHz beam-sweep simulation and angle-of-arrival estimation"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    int threads = 0;
    auto *run = app.add_subcommand("run", "Run a Monte Carlo experiment from a JSON config");
    run->add_option("--config", config_path, "Experiment config file")->required();
    run->add_option("--out-dir", out_dir, "Directory for trials.csv, summary.csv, summary.json")->required();
    run->add_option("--threads", threads, "Override the worker count from the config");

    std::string which, scenario_out;
    auto *tr = app.add_subcommand("transcribe", "Write a built-in evaluation scenario as JSON");
    tr->add_option("--scenario", which, "A or B")->required();
    tr->add_option("--out", scenario_out, "Output file (default stdout)");

    EstimateArgs ea;
    auto *est = app.add_subcommand("estimate", "Estimate AOA of every dominant path in an exported CIR CSV");
    est->add_option("--cir", ea.cir_path, "CSV rx_beam_id,tap_index,re,im")->required()->check(CLI::ExistingFile);
    est->add_option("--codebook", ea.codebook_path, "Codebook CSV")->required()->check(CLI::ExistingFile);
    est->add_option("--scheme", ea.scheme, "vae_cir, rice or hp")
        ->check(CLI::IsMember({"vae_cir", "rice", "hp"}))
        ->capture_default_str();
    est->add_option("--nu", ea.nu, "Gate threshold factor")->capture_default_str();
    est->add_option("--mu", ea.mu, "Detection factor for rice")->capture_default_str();
    est->add_option("--epsilon", ea.epsilon, "Confidence tolerance")->capture_default_str();
    est->add_option("--detect-threshold", ea.threshold, "Relative tap detection threshold")->capture_default_str();
    est->add_flag("--best-two", ea.best_two, "Check confidence on the two strongest beams");
    add_grid(est, ea.grid_min, ea.grid_max, ea.grid_res);

    SynthArgs sa;
    auto *syn = app.add_subcommand("synth-codebook", "Write a synthetic quantized-phase ULA codebook");
    syn->add_option("--elements", sa.n_elements)->capture_default_str();
    syn->add_option("--phase-bits", sa.phase_bits, "0 for continuous phase")->capture_default_str();
    syn->add_option("--beams", sa.n_beams)->capture_default_str();
    syn->add_option("--seed", sa.seed)->capture_default_str();
    syn->add_option("--phase-error-deg", sa.phase_error_deg)->capture_default_str();
    syn->add_option("--out", sa.out, "Output file (default stdout)");
    add_grid(syn, sa.grid_min, sa.grid_max, sa.grid_res);

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try
    {
        if (*run)
            return cmd_run(config_path, out_dir, threads);
        if (*tr)
            return cmd_transcribe(which, scenario_out);
        if (*est)
            return cmd_estimate(ea);
        if (*syn)
            return cmd_synth(sa);
    }
    catch (const mmaoa::ParseError &e)
    {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitConfig;
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return 0;
}
