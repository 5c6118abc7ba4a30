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

#include "mmaoa/harness.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

namespace mmaoa
{
    using nlohmann::json;
    using nlohmann::ordered_json;

    namespace
    {
        const std::set<std::string> kSchemes{"vae_cir", "rice", "hp"};

        std::string fmt(const char *f, double v)
        {
            char buf[64];
            std::snprintf(buf, sizeof(buf), f, v);
            return buf;
        }

        template <typename T>
        T get_as(const json &j, const std::string &field)
        {
            try
            {
                return j.get<T>();
            }
            catch (const json::exception &)
            {
                throw ConfigError(field, "wrong type (" + std::string(j.type_name()) + ")");
            }
        }

        double get_number(const json &j, const std::string &field)
        {
            if (!j.is_number())
                throw ConfigError(field, "expected a number");
            return j.get<double>();
        }

        int get_int(const json &j, const std::string &field)
        {
            if (!j.is_number_integer())
                throw ConfigError(field, "expected an integer");
            return j.get<int>();
        }

        // A scalar or a list of scalars
        std::vector<double> number_list(const json &j, const std::string &field)
        {
            std::vector<double> out;
            if (j.is_array())
            {
                for (std::size_t i = 0; i < j.size(); ++i)
                    out.push_back(get_number(j[i], field + "[" + std::to_string(i) + "]"));
                if (out.empty())
                    throw ConfigError(field, "empty list");
            }
            else
                out.push_back(get_number(j, field));
            return out;
        }

        std::vector<int> int_list(const json &j, const std::string &field)
        {
            std::vector<int> out;
            if (j.is_array())
            {
                for (std::size_t i = 0; i < j.size(); ++i)
                    out.push_back(get_int(j[i], field + "[" + std::to_string(i) + "]"));
            }
            else
                out.push_back(get_int(j, field));
            return out;
        }

        std::optional<double> optional_number(const json &j, const std::string &field)
        {
            if (j.is_null())
                return std::nullopt;
            return get_number(j, field);
        }

        void reject_unknown(const json &j, const std::set<std::string> &known, const std::string &prefix)
        {
            for (auto it = j.begin(); it != j.end(); ++it)
                if (!known.count(it.key()))
                    throw ConfigError(prefix + it.key(), "unknown key");
        }

        std::string noise_label(const std::optional<double> &n) { return n ? fmt("%g", *n) : std::string("none"); }

        struct Channel
        {
            std::vector<CorrelatorOutput> signal; // per codebook beam, noiseless
            std::vector<CorrelatorOutput> noise;  // per codebook beam, unit-power noise only
        };

        CorrelatorOutput combine(const CorrelatorOutput &s, const CorrelatorOutput &z, double sigma)
        {
            CorrelatorOutput out = s;
            for (std::size_t i = 0; i < out.r_ru.size(); ++i)
            {
                out.r_ru[i] += sigma * z.r_ru[i];
                out.r_rv[i] += sigma * z.r_rv[i];
            }
            return out;
        }

        // Paths whose directions fall outside the beam grids cannot be evaluated by the pattern model
        PathSet keep_in_grid(const PathSet &in, const AngleGrid &grid, std::size_t *dropped = nullptr)
        {
            PathSet out = in;
            out.paths.clear();
            for (const auto &p : in.paths)
                if (grid.contains(p.aoa) && grid.contains(p.aod))
                    out.paths.push_back(p);
            if (dropped)
                *dropped = in.paths.size() - out.paths.size();
            return out;
        }

        struct Prepared
        {
            ExperimentConfig config;
            Scenario scenario;
            Codebook codebook;
            AngleGrid grid;
            BeamPattern tx_beam;
            Preamble preamble;
            PathSet base_paths;
            std::vector<ReferencePath> reference;
            std::vector<ReferencePath> evaluated;
            std::vector<std::size_t> sweep_union; // codebook indices needed by any cell
            std::map<int, std::vector<std::size_t>> sweeps; // beams_used -> sweep
        };

        std::vector<TrialRecord> run_trial(const Prepared &P, const GolayCorrelator &corr, int trial_id)
        {
            const auto &cfg = P.config;
            const auto t = static_cast<std::uint64_t>(trial_id);

            PathSet paths = P.base_paths;
            if (cfg.cluster)
                paths = keep_in_grid(blur_clusters(P.base_paths, *cfg.cluster, derive_seed(cfg.seed, t, 1)), P.grid);

            std::vector<CorrelatorOutput> sig(P.codebook.size()), noi(P.codebook.size());
            for (std::size_t b : P.sweep_union)
            {
                auto taps = channel_taps(paths, P.tx_beam, P.codebook.beams[b], P.grid, cfg.tx_power_dbm);
                // taps beyond the estimation window only add a tail to the frame
                const auto len = frame_length(taps, P.preamble.samples.size());
                sig[b] = corr.correlate_and_combine(synthesize_frame(taps, P.preamble.samples, len));
                ComplexSequence z;
                z.sample_period = kChipTime;
                z.values = unit_noise(len, derive_seed(cfg.seed, t, 2, b));
                noi[b] = corr.correlate_and_combine(z);
            }

            std::vector<TrialRecord> out;
            for (const auto &noise : cfg.noise_power_dbm)
            {
                const double sigma = noise ? std::sqrt(dbm_to_watts(*noise)) : 0.0;
                std::vector<CirEstimate> est(P.codebook.size());
                for (std::size_t b : P.sweep_union)
                    est[b] = estimate_all_taps(sigma > 0.0 ? combine(sig[b], noi[b], sigma) : sig[b],
                                               P.codebook.beams[b].beam_id);

                for (const auto &[n_used, sweep] : P.sweeps)
                {
                    std::vector<CirEstimate> swept;
                    for (std::size_t b : sweep)
                        swept.push_back(est[b]);
                    std::set<int> detected_taps;
                    for (const auto &d : detect_and_aggregate(swept, cfg.detect_threshold_rel))
                        detected_taps.insert(d.tap_index);

                    for (const auto &ref : P.evaluated)
                    {
                        TrialRecord base;
                        base.trial_id = trial_id;
                        base.path_kappa = ref.kappa;
                        base.tap_index = ref.tap_index;
                        base.true_aoa_deg = ref.true_aoa_deg;
                        base.noise_dbm = noise;
                        base.beams_used = n_used;
                        base.detected = detected_taps.count(ref.tap_index) > 0;

                        MeasurementSet meas;
                        meas.kappa = ref.kappa;
                        meas.codebook = &P.codebook;
                        for (const auto &e : swept)
                            meas.measurements.push_back({e.rx_beam_id, e.taps.at(ref.tap_index)});

                        const ConfidenceOptions conf{cfg.epsilon, cfg.confidence_pair};
                        const auto record = [&](const std::string &scheme, double param,
                                                const std::optional<EstimationResult> &r) {
                            TrialRecord rec = base;
                            rec.scheme = scheme;
                            rec.param = param;
                            if (rec.detected && r)
                            {
                                rec.theta_hat_deg = r->theta_hat_deg;
                                rec.correct = std::abs(r->theta_hat_deg - ref.true_aoa_deg) <= cfg.xi_deg + 1e-9;
                                rec.confident = r->confident;
                            }
                            out.push_back(rec);
                        };

                        for (const auto &scheme : cfg.schemes)
                        {
                            if (scheme == "vae_cir")
                                for (double nu : cfg.nu)
                                {
                                    std::optional<EstimationResult> r;
                                    if (base.detected)
                                        r = vae_cir(meas, P.grid, WeightPolicy{nu, {}}, conf);
                                    record(scheme, nu, r);
                                }
                            else if (scheme == "rice")
                                for (double mu : cfg.mu_list)
                                {
                                    std::optional<EstimationResult> r;
                                    if (base.detected)
                                        r = rice_baseline(meas, P.grid, mu, conf);
                                    record(scheme, mu, r);
                                }
                            else if (scheme == "hp")
                            {
                                std::optional<EstimationResult> r;
                                if (base.detected)
                                    r = hp_baseline(meas, P.grid, conf);
                                record(scheme, 0.0, r);
                            }
                        }
                    }
                }
            }
            return out;
        }
    }

    void ExperimentConfig::validate() const
    {
        if (scenario_path.empty() && !scenario)
            throw ConfigError("scenario_path", "missing");
        if (n_trials < 1)
            throw ConfigError("n_trials", "must be >= 1");
        if (!(xi_deg > 0.0))
            throw ConfigError("xi_deg", "must be > 0");
        for (double v : nu)
            if (!(v >= 0.0 && v <= 1.0))
                throw ConfigError("nu", "must lie in [0, 1]");
        for (double v : mu_list)
            if (!(v >= 0.0 && v <= 1.0))
                throw ConfigError("mu_list", "must lie in [0, 1]");
        if (!(epsilon >= 0.0))
            throw ConfigError("epsilon", "must be >= 0");
        if (!(grid_res_deg > 0.0) || !(grid_max_deg > grid_min_deg))
            throw ConfigError("grid", "needs min < max and res > 0");
        if (schemes.empty())
            throw ConfigError("schemes", "empty");
        for (const auto &s : schemes)
            if (!kSchemes.count(s))
                throw ConfigError("schemes", "unknown scheme '" + s + "'");
        if (mu_list.empty())
            throw ConfigError("mu_list", "empty");
        if (nu.empty())
            throw ConfigError("nu", "empty");
        if (noise_power_dbm.empty())
            throw ConfigError("noise_power_dbm", "empty");
        for (int b : beams_used)
        {
            if (b < 2)
                throw ConfigError("beams_used", "needs at least two beams");
            if (b < 5 && std::find(schemes.begin(), schemes.end(), "hp") != schemes.end())
                throw ConfigError("beams_used", "hp needs at least five beams");
        }
        for (int k : paths)
            if (k < 1)
                throw ConfigError("paths", "kappa values start at 1");
        if (!(detect_threshold_rel > 0.0 && detect_threshold_rel <= 1.0))
            throw ConfigError("detect_threshold_rel", "must lie in (0, 1]");
        if (threads < 1)
            throw ConfigError("threads", "must be >= 1");
        if (codebook_path.empty())
        {
            if (synth.n_elements < 2)
                throw ConfigError("codebook.synth.n_elements", "must be >= 2");
            if (synth.n_beams < 2)
                throw ConfigError("codebook.synth.n_beams", "must be >= 2");
            if (synth.phase_bits != kUnquantizedPhase && (synth.phase_bits < 2 || synth.phase_bits > 4))
                throw ConfigError("codebook.synth.phase_bits", "must be 0 (unquantized), 2, 3 or 4");
            if (synth.phase_error_deg < 0.0)
                throw ConfigError("codebook.synth.phase_error_deg", "must be >= 0");
        }
        if (cluster)
        {
            if (cluster->n_rays < 0)
                throw ConfigError("cluster.n_rays", "must be >= 0");
            if (!(cluster->gamma_ns > 0.0) || !(cluster->ray_spacing_ns > 0.0) || cluster->sigma_deg < 0.0)
                throw ConfigError("cluster", "gamma_ns and ray_spacing_ns must be > 0, sigma_deg >= 0");
        }
    }

    ExperimentConfig parse_config(const std::string &json_text, const std::filesystem::path &base_dir)
    {
        json j;
        try
        {
            j = json::parse(json_text);
        }
        catch (const json::parse_error &e)
        {
            throw ConfigError("<config>", std::string("invalid JSON: ") + e.what());
        }
        if (!j.is_object())
            throw ConfigError("<config>", "top level must be an object");
        reject_unknown(j,
                       {"scenario_path", "scenario", "codebook", "grid", "tx_power_dbm", "noise_power_dbm", "n_trials",
                        "xi_deg", "nu", "epsilon", "mu_list", "beams_used", "schemes", "seed", "cluster",
                        "detect_threshold_rel", "paths", "golay_mode", "rotation", "confidence_pair", "sweep_order",
                        "threads"},
                       "");

        const auto resolve = [&](const std::string &p) {
            std::filesystem::path fp(p);
            return (fp.is_relative() && !base_dir.empty() ? base_dir / fp : fp).string();
        };

        ExperimentConfig c;
        if (j.contains("scenario_path"))
            c.scenario_path = resolve(get_as<std::string>(j["scenario_path"], "scenario_path"));
        if (j.contains("scenario"))
        {
            const auto &s = j["scenario"];
            if (s.is_string())
            {
                const auto name = s.get<std::string>();
                if (name == "A")
                    c.scenario = scenario_a();
                else if (name == "B")
                    c.scenario = scenario_b();
                else
                    throw ConfigError("scenario", "built-in scenarios are \"A\" and \"B\"");
            }
            else
            {
                std::istringstream in(s.dump());
                try
                {
                    c.scenario = read_scenario(in);
                }
                catch (const std::exception &e)
                {
                    throw ConfigError("scenario", e.what());
                }
            }
        }

        if (j.contains("codebook"))
        {
            const auto &cb = j["codebook"];
            if (!cb.is_object())
                throw ConfigError("codebook", "expected an object with 'path' or 'synth'");
            reject_unknown(cb, {"path", "synth"}, "codebook.");
            if (cb.contains("path") == cb.contains("synth"))
                throw ConfigError("codebook", "give exactly one of 'path' and 'synth'");
            if (cb.contains("path"))
                c.codebook_path = resolve(get_as<std::string>(cb["path"], "codebook.path"));
            else
            {
                const auto &s = cb["synth"];
                if (!s.is_object())
                    throw ConfigError("codebook.synth", "expected an object");
                reject_unknown(s, {"n_elements", "phase_bits", "n_beams", "seed", "phase_error_deg"}, "codebook.synth.");
                if (s.contains("n_elements"))
                    c.synth.n_elements = get_int(s["n_elements"], "codebook.synth.n_elements");
                if (s.contains("phase_bits"))
                    c.synth.phase_bits = get_int(s["phase_bits"], "codebook.synth.phase_bits");
                if (s.contains("n_beams"))
                    c.synth.n_beams = get_int(s["n_beams"], "codebook.synth.n_beams");
                if (s.contains("seed"))
                    c.synth.seed = get_as<std::uint64_t>(s["seed"], "codebook.synth.seed");
                if (s.contains("phase_error_deg"))
                    c.synth.phase_error_deg = get_number(s["phase_error_deg"], "codebook.synth.phase_error_deg");
            }
        }
        if (j.contains("grid"))
        {
            const auto &g = j["grid"];
            if (!g.is_object())
                throw ConfigError("grid", "expected an object {min, max, res}");
            reject_unknown(g, {"min", "max", "res"}, "grid.");
            if (g.contains("min"))
                c.grid_min_deg = get_number(g["min"], "grid.min");
            if (g.contains("max"))
                c.grid_max_deg = get_number(g["max"], "grid.max");
            if (g.contains("res"))
                c.grid_res_deg = get_number(g["res"], "grid.res");
        }
        if (j.contains("tx_power_dbm"))
            c.tx_power_dbm = get_number(j["tx_power_dbm"], "tx_power_dbm");
        if (j.contains("noise_power_dbm"))
        {
            const auto &n = j["noise_power_dbm"];
            c.noise_power_dbm.clear();
            if (n.is_array())
            {
                for (std::size_t i = 0; i < n.size(); ++i)
                    c.noise_power_dbm.push_back(optional_number(n[i], "noise_power_dbm[" + std::to_string(i) + "]"));
            }
            else
                c.noise_power_dbm.push_back(optional_number(n, "noise_power_dbm"));
        }
        if (j.contains("n_trials"))
            c.n_trials = get_int(j["n_trials"], "n_trials");
        if (j.contains("xi_deg"))
            c.xi_deg = get_number(j["xi_deg"], "xi_deg");
        if (j.contains("nu"))
            c.nu = number_list(j["nu"], "nu");
        if (j.contains("epsilon"))
            c.epsilon = get_number(j["epsilon"], "epsilon");
        if (j.contains("mu_list"))
            c.mu_list = number_list(j["mu_list"], "mu_list");
        if (j.contains("beams_used") && !j["beams_used"].is_null())
            c.beams_used = int_list(j["beams_used"], "beams_used");
        if (j.contains("schemes"))
        {
            const auto &s = j["schemes"];
            c.schemes.clear();
            if (s.is_string())
                c.schemes.push_back(s.get<std::string>());
            else if (s.is_array())
                for (std::size_t i = 0; i < s.size(); ++i)
                    c.schemes.push_back(get_as<std::string>(s[i], "schemes[" + std::to_string(i) + "]"));
            else
                throw ConfigError("schemes", "expected a string or a list of strings");
        }
        if (j.contains("seed"))
            c.seed = get_as<std::uint64_t>(j["seed"], "seed");
        if (j.contains("cluster"))
        {
            const auto &cl = j["cluster"];
            if (cl.is_null())
                c.cluster.reset();
            else
            {
                if (!cl.is_object())
                    throw ConfigError("cluster", "expected an object or null");
                reject_unknown(cl, {"n_rays", "gamma_ns", "sigma_deg", "k_factor_db", "ray_spacing_ns"}, "cluster.");
                ClusterConfig cc;
                if (cl.contains("n_rays"))
                    cc.n_rays = get_int(cl["n_rays"], "cluster.n_rays");
                if (cl.contains("gamma_ns"))
                    cc.gamma_ns = get_number(cl["gamma_ns"], "cluster.gamma_ns");
                if (cl.contains("sigma_deg"))
                    cc.sigma_deg = get_number(cl["sigma_deg"], "cluster.sigma_deg");
                if (cl.contains("k_factor_db"))
                    cc.k_factor_db = get_number(cl["k_factor_db"], "cluster.k_factor_db");
                if (cl.contains("ray_spacing_ns"))
                    cc.ray_spacing_ns = get_number(cl["ray_spacing_ns"], "cluster.ray_spacing_ns");
                c.cluster = cc;
            }
        }
        if (j.contains("detect_threshold_rel"))
            c.detect_threshold_rel = get_number(j["detect_threshold_rel"], "detect_threshold_rel");
        if (j.contains("paths") && !j["paths"].is_null())
            c.paths = int_list(j["paths"], "paths");

        const auto choice = [&](const char *key, std::initializer_list<const char *> names) -> int {
            if (!j.contains(key))
                return -1;
            const auto v = get_as<std::string>(j[key], key);
            int i = 0;
            for (const char *n : names)
            {
                if (v == n)
                    return i;
                ++i;
            }
            throw ConfigError(key, "unknown value '" + v + "'");
        };
        if (int v = choice("golay_mode", {"standard", "any_valid"}); v >= 0)
            c.golay_mode = v == 0 ? GolayMode::kStandard : GolayMode::kAnyValid;
        if (int v = choice("rotation", {"continuous", "reset_per_field"}); v >= 0)
            c.rotation = v == 0 ? RotationMode::kContinuous : RotationMode::kResetPerField;
        if (int v = choice("confidence_pair", {"last_two", "best_two"}); v >= 0)
            c.confidence_pair = v == 0 ? ConfidencePair::kLastTwo : ConfidencePair::kBestTwo;
        if (int v = choice("sweep_order", {"ascending", "nested"}); v >= 0)
            c.sweep_order = v == 0 ? SweepOrder::kAscending : SweepOrder::kNested;
        if (j.contains("threads"))
            c.threads = get_int(j["threads"], "threads");

        c.validate();
        return c;
    }

    ExperimentConfig load_config(const std::filesystem::path &path)
    {
        std::ifstream in(path);
        if (!in)
            throw ConfigError("<config>", "cannot open " + path.string());
        std::stringstream ss;
        ss << in.rdbuf();
        return parse_config(ss.str(), path.parent_path());
    }

    std::string config_to_json(const ExperimentConfig &c)
    {
        ordered_json j;
        if (!c.scenario_path.empty())
            j["scenario_path"] = c.scenario_path;
        if (c.scenario)
            j["scenario"] = ordered_json::parse(scenario_to_json(*c.scenario));
        if (!c.codebook_path.empty())
            j["codebook"] = {{"path", c.codebook_path}};
        else
            j["codebook"] = {{"synth",
                              {{"n_elements", c.synth.n_elements},
                               {"phase_bits", c.synth.phase_bits},
                               {"n_beams", c.synth.n_beams},
                               {"seed", c.synth.seed},
                               {"phase_error_deg", c.synth.phase_error_deg}}}};
        j["grid"] = {{"min", c.grid_min_deg}, {"max", c.grid_max_deg}, {"res", c.grid_res_deg}};
        j["tx_power_dbm"] = c.tx_power_dbm;
        j["noise_power_dbm"] = ordered_json::array();
        for (const auto &n : c.noise_power_dbm)
            j["noise_power_dbm"].push_back(n ? ordered_json(*n) : ordered_json(nullptr));
        j["n_trials"] = c.n_trials;
        j["xi_deg"] = c.xi_deg;
        j["nu"] = c.nu;
        j["epsilon"] = c.epsilon;
        j["mu_list"] = c.mu_list;
        j["beams_used"] = c.beams_used.empty() ? ordered_json(nullptr) : ordered_json(c.beams_used);
        j["schemes"] = c.schemes;
        j["seed"] = c.seed;
        if (c.cluster)
            j["cluster"] = {{"n_rays", c.cluster->n_rays},
                            {"gamma_ns", c.cluster->gamma_ns},
                            {"sigma_deg", c.cluster->sigma_deg},
                            {"k_factor_db", c.cluster->k_factor_db},
                            {"ray_spacing_ns", c.cluster->ray_spacing_ns}};
        else
            j["cluster"] = nullptr;
        j["detect_threshold_rel"] = c.detect_threshold_rel;
        j["paths"] = c.paths.empty() ? ordered_json(nullptr) : ordered_json(c.paths);
        j["golay_mode"] = c.golay_mode == GolayMode::kStandard ? "standard" : "any_valid";
        j["rotation"] = c.rotation == RotationMode::kContinuous ? "continuous" : "reset_per_field";
        j["confidence_pair"] = c.confidence_pair == ConfidencePair::kLastTwo ? "last_two" : "best_two";
        j["sweep_order"] = c.sweep_order == SweepOrder::kAscending ? "ascending" : "nested";
        j["threads"] = c.threads;
        return j.dump(2) + "\n";
    }

    std::vector<std::size_t> nested_beam_order(std::size_t n_beams)
    {
        unsigned bits = 0;
        while ((std::size_t{1} << bits) < n_beams)
            ++bits;
        std::vector<std::size_t> order;
        for (std::size_t i = 0; i < (std::size_t{1} << bits); ++i)
        {
            std::size_t r = 0;
            for (unsigned b = 0; b < bits; ++b)
                if (i & (std::size_t{1} << b))
                    r |= std::size_t{1} << (bits - 1 - b);
            if (r < n_beams)
                order.push_back(r);
        }
        return order;
    }

    std::vector<std::size_t> sweep_beams(std::size_t n_beams, std::size_t beams_used, SweepOrder order)
    {
        if (beams_used > n_beams)
            throw std::invalid_argument("sweep_beams: beams_used exceeds the codebook size");
        auto all = nested_beam_order(n_beams);
        std::vector<std::size_t> out(all.begin(), all.begin() + static_cast<long>(beams_used));
        if (order == SweepOrder::kAscending)
            std::sort(out.begin(), out.end());
        return out;
    }

    std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c)
    {
        // splitmix64 finalizer applied to each word in turn
        const auto mix = [](std::uint64_t z) {
            z += 0x9E3779B97F4A7C15ULL;
            z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
            z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
            return z ^ (z >> 31);
        };
        std::uint64_t h = mix(seed);
        h = mix(h ^ a);
        h = mix(h ^ (b + 0x632BE59BD9B4E019ULL));
        h = mix(h ^ (c + 0x85157AF5ULL));
        return h;
    }

    Codebook build_codebook(const ExperimentConfig &config)
    {
        const AngleGrid grid(config.grid_min_deg, config.grid_max_deg, config.grid_res_deg);
        if (!config.codebook_path.empty())
            return load_codebook(config.codebook_path, grid);
        return synth_codebook(config.synth.n_elements, config.synth.phase_bits, config.synth.n_beams, grid,
                              config.synth.seed, config.synth.phase_error_deg);
    }

    Scenario resolve_scenario(const ExperimentConfig &config)
    {
        if (config.scenario)
            return *config.scenario;
        return load_scenario(config.scenario_path);
    }

    ExperimentResult run_experiment(const ExperimentConfig &config)
    {
        config.validate();
        Prepared P;
        P.config = config;
        P.scenario = resolve_scenario(config);
        P.codebook = build_codebook(config);
        P.grid = P.codebook.grid;
        P.tx_beam = quasi_omni(P.grid, 0);
        P.preamble = build_preamble(config.golay_mode, config.rotation);

        ExperimentResult result;
        std::size_t dropped = 0;
        auto traced = trace_paths(P.scenario);
        P.base_paths = keep_in_grid(traced, P.grid, &dropped);
        result.warnings = traced.warnings;
        if (dropped)
            result.warnings.push_back(std::to_string(dropped) + " path(s) arrive or depart outside the beam grid and were ignored");
        if (P.base_paths.paths.empty())
            throw std::runtime_error("run_experiment: no propagation path inside the beam grid");

        const std::size_t n_beams = P.codebook.size();
        std::vector<int> used = config.beams_used;
        if (used.empty())
            used.push_back(static_cast<int>(n_beams));
        for (int n : used)
            if (static_cast<std::size_t>(n) > n_beams)
                throw ConfigError("beams_used", std::to_string(n) + " exceeds the codebook size " + std::to_string(n_beams));
        std::set<std::size_t> uni;
        for (int n : used)
        {
            P.sweeps[n] = sweep_beams(n_beams, static_cast<std::size_t>(n), config.sweep_order);
            uni.insert(P.sweeps[n].begin(), P.sweeps[n].end());
        }
        P.sweep_union.assign(uni.begin(), uni.end());

        // Reference dominant paths: noiseless, unblurred, every codebook beam
        const int max_tap = static_cast<int>(P.preamble.layout.peak_index()) - 1;
        std::vector<CirEstimate> ref_est;
        for (const auto &beam : P.codebook.beams)
        {
            CirEstimate e;
            e.rx_beam_id = beam.beam_id;
            for (const auto &[d, h] : channel_taps(P.base_paths, P.tx_beam, beam, P.grid, config.tx_power_dbm))
                if (d >= 0 && d <= max_tap)
                    e.taps[d] = h;
            ref_est.push_back(std::move(e));
        }
        for (const auto &d : detect_and_aggregate(ref_est, config.detect_threshold_rel))
        {
            const Path *best = nullptr;
            for (const auto &p : P.base_paths.paths)
                if (tap_index(p.tau) == d.tap_index && (!best || std::abs(p.alpha) > std::abs(best->alpha)))
                    best = &p;
            if (best)
                P.reference.push_back({d.kappa, d.tap_index, best->aoa});
        }
        result.reference = P.reference;

        if (config.paths.empty())
            P.evaluated = P.reference;
        else
            for (int k : config.paths)
            {
                if (static_cast<std::size_t>(k) > P.reference.size())
                    throw ConfigError("paths", "path " + std::to_string(k) + " requested but the scenario has " +
                                                   std::to_string(P.reference.size()) + " dominant paths");
                P.evaluated.push_back(P.reference[static_cast<std::size_t>(k - 1)]);
            }

        const GolayCorrelator corr(P.preamble);
        std::vector<std::vector<TrialRecord>> per_trial(static_cast<std::size_t>(config.n_trials));
        std::atomic<int> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        const auto worker = [&] {
            for (int t = next++; t < config.n_trials; t = next++)
            {
                try
                {
                    per_trial[static_cast<std::size_t>(t)] = run_trial(P, corr, t);
                }
                catch (...)
                {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure)
                        failure = std::current_exception();
                    next = config.n_trials;
                }
            }
        };
        const int n_threads = std::min(config.threads, config.n_trials);
        if (n_threads <= 1)
            worker();
        else
        {
            std::vector<std::thread> pool;
            for (int i = 0; i < n_threads; ++i)
                pool.emplace_back(worker);
            for (auto &th : pool)
                th.join();
        }
        if (failure)
            std::rethrow_exception(failure);

        for (auto &v : per_trial)
            for (auto &r : v)
                result.trials.push_back(std::move(r));
        result.summary = summarize(result.trials);
        return result;
    }

    std::vector<SummaryRow> summarize(const std::vector<TrialRecord> &trials)
    {
        using Key = std::tuple<std::string, double, std::optional<double>, int, int>;
        std::map<Key, std::size_t> index;
        std::vector<SummaryRow> rows;
        for (const auto &t : trials)
        {
            const Key key{t.scheme, t.param, t.noise_dbm, t.beams_used, t.path_kappa};
            auto it = index.find(key);
            if (it == index.end())
            {
                it = index.emplace(key, rows.size()).first;
                SummaryRow r;
                r.scheme = t.scheme;
                r.param = t.param;
                r.noise_dbm = t.noise_dbm;
                r.beams_used = t.beams_used;
                r.path_kappa = t.path_kappa;
                rows.push_back(r);
            }
            auto &r = rows[it->second];
            ++r.n_trials;
            if (t.correct)
            {
                ++r.n_correct;
                r.n_accurate_confident += t.confident;
            }
            else
                r.n_inaccurate_confident += t.confident;
        }
        for (auto &r : rows)
        {
            r.p_correct = static_cast<double>(r.n_correct) / r.n_trials;
            const int inaccurate = r.n_trials - r.n_correct;
            if (inaccurate > 0)
                r.p_f = static_cast<double>(r.n_inaccurate_confident) / inaccurate;
            if (r.n_correct > 0)
                r.p_d = static_cast<double>(r.n_accurate_confident) / r.n_correct;
        }
        return rows;
    }

    void write_trials_csv(std::ostream &out, const std::vector<TrialRecord> &trials)
    {
        out << "trial_id,path_kappa,tap_index,true_aoa_deg,scheme,param,noise_dbm,beams_used,detected,theta_hat_deg,"
               "correct,confident\n";
        for (const auto &t : trials)
        {
            out << t.trial_id << ',' << t.path_kappa << ',' << t.tap_index << ',' << fmt("%.6f", t.true_aoa_deg) << ','
                << t.scheme << ',' << fmt("%g", t.param) << ',' << noise_label(t.noise_dbm) << ',' << t.beams_used << ','
                << int(t.detected) << ',' << (t.theta_hat_deg ? fmt("%.6f", *t.theta_hat_deg) : std::string()) << ','
                << int(t.correct) << ',' << int(t.confident) << '\n';
        }
    }

    void write_summary_csv(std::ostream &out, const std::vector<SummaryRow> &rows)
    {
        out << "scheme,param,noise_dbm,beams_used,path_kappa,n_trials,p_correct,p_f,p_d\n";
        for (const auto &r : rows)
            out << r.scheme << ',' << fmt("%g", r.param) << ',' << noise_label(r.noise_dbm) << ',' << r.beams_used << ','
                << r.path_kappa << ',' << r.n_trials << ',' << fmt("%.6f", r.p_correct) << ','
                << (r.p_f ? fmt("%.6f", *r.p_f) : std::string()) << ',' << (r.p_d ? fmt("%.6f", *r.p_d) : std::string())
                << '\n';
    }

    std::string summary_to_json(const ExperimentResult &result)
    {
        ordered_json j;
        j["reference_paths"] = ordered_json::array();
        for (const auto &p : result.reference)
            j["reference_paths"].push_back(
                {{"kappa", p.kappa}, {"tap_index", p.tap_index}, {"true_aoa_deg", p.true_aoa_deg}});
        j["warnings"] = result.warnings;
        j["summary"] = ordered_json::array();
        const auto opt = [](const std::optional<double> &v) { return v ? ordered_json(*v) : ordered_json(nullptr); };
        for (const auto &r : result.summary)
            j["summary"].push_back({{"scheme", r.scheme},
                                    {"param", r.param},
                                    {"noise_dbm", opt(r.noise_dbm)},
                                    {"beams_used", r.beams_used},
                                    {"path_kappa", r.path_kappa},
                                    {"n_trials", r.n_trials},
                                    {"p_correct", r.p_correct},
                                    {"p_f", opt(r.p_f)},
                                    {"p_d", opt(r.p_d)}});
        return j.dump(2) + "\n";
    }

    void write_outputs(const std::filesystem::path &out_dir, const ExperimentConfig &config,
                       const ExperimentResult &result)
    {
        std::filesystem::create_directories(out_dir);
        const auto open = [&](const char *name) {
            std::ofstream f(out_dir / name, std::ios::binary);
            if (!f)
                throw std::runtime_error("cannot write " + (out_dir / name).string());
            return f;
        };
        {
            auto f = open("trials.csv");
            write_trials_csv(f, result.trials);
        }
        {
            auto f = open("summary.csv");
            write_summary_csv(f, result.summary);
        }
        {
            auto f = open("summary.json");
            f << summary_to_json(result);
        }
        {
            auto f = open("config.echo.json");
            f << config_to_json(config);
        }
    }

    namespace
    {
        Scenario facing(Vec2 tx, Vec2 rx, std::vector<SceneObject> objects)
        {
            Scenario s;
            s.room_length = 4.0;
            s.room_width = 3.0;
            s.wall_dielectric = 2.0;
            s.tx = tx;
            s.rx = rx;
            s.tx_boresight_deg = rad2deg(std::atan2(rx.y - tx.y, rx.x - tx.x));
            s.rx_boresight_deg = rad2deg(std::atan2(tx.y - rx.y, tx.x - rx.x));
            s.objects = std::move(objects);
            return s;
        }
    }

    Scenario scenario_a()
    {
        return facing({-2.0, 0.0}, {2.0, 0.0},
                      {{0.1, 1.0, 0.4, 0.2, 0.0, 3.24}, {-0.4, -1.0, 0.6, 0.2, 180.0, 3.24}, {0.0, 1.45, 0.6, 0.1, 0.0, 3.24}});
    }

    Scenario scenario_b()
    {
        return facing({-0.6, 1.4}, {0.6, -1.4},
                      {{1.8, -0.2, 0.2, 0.6, 0.0, 3.24}, {-2.0, -0.5, 0.2, 0.5, 180.0, 3.24}, {-1.2, 0.8, 0.4, 0.4, 45.0, 3.24}});
    }
}
