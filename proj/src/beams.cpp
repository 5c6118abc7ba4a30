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

#include "mmaoa/beams.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

namespace mmaoa
{
    namespace
    {
        constexpr double kAngleTol = 1e-9;

        std::vector<std::string> split_csv(const std::string &line)
        {
            std::vector<std::string> out;
            std::string field;
            std::istringstream ss(line);
            while (std::getline(ss, field, ','))
                out.push_back(field);
            if (!line.empty() && line.back() == ',')
                out.emplace_back();
            return out;
        }

        double parse_double(const std::string &s, std::size_t line)
        {
            try
            {
                std::size_t used = 0;
                const double v = std::stod(s, &used);
                if (used != s.size())
                    throw ParseError("trailing characters in number '" + s + "'", line);
                return v;
            }
            catch (const std::logic_error &)
            {
                throw ParseError("invalid number '" + s + "'", line);
            }
        }

        struct Sample
        {
            double angle;
            double amplitude;
            double phase_rad;
        };

        // Magnitude/unwrapped-phase interpolation between two complex samples
        cdouble interpolate(cdouble g0, cdouble g1, double t)
        {
            const double m = (1.0 - t) * std::abs(g0) + t * std::abs(g1);
            const double p0 = std::arg(g0);
            double dp = std::arg(g1) - p0;
            dp = std::remainder(dp, 2.0 * kPi);
            return std::polar(m, p0 + t * dp);
        }
    }

    AngleGrid::AngleGrid(double min_deg, double max_deg, double resolution_deg)
    {
        if (!(resolution_deg > 0.0) || !(max_deg > min_deg))
            throw std::invalid_argument("AngleGrid: need max > min and resolution > 0");
        const double steps = (max_deg - min_deg) / resolution_deg;
        const auto n = static_cast<std::size_t>(std::llround(steps));
        if (std::abs(steps - static_cast<double>(n)) > 1e-6)
            throw std::invalid_argument("AngleGrid: span is not a multiple of the resolution");
        angles_.resize(n + 1);
        for (std::size_t i = 0; i <= n; ++i)
            angles_[i] = min_deg + static_cast<double>(i) * resolution_deg;
        angles_.back() = max_deg;
        resolution_ = resolution_deg;
    }

    AngleGrid AngleGrid::from_angles(std::vector<double> angles)
    {
        if (angles.size() < 2)
            throw std::invalid_argument("AngleGrid: need at least two angles");
        const double res = angles[1] - angles[0];
        if (!(res > 0.0))
            throw std::invalid_argument("AngleGrid: angles must be strictly increasing");
        for (std::size_t i = 1; i < angles.size(); ++i)
            if (std::abs((angles[i] - angles[i - 1]) - res) > 1e-6 * std::max(1.0, res))
                throw std::invalid_argument("AngleGrid: angles are not uniformly spaced");
        AngleGrid g;
        g.angles_ = std::move(angles);
        g.resolution_ = res;
        return g;
    }

    bool AngleGrid::contains(double theta_deg) const
    {
        return theta_deg >= min() - kAngleTol && theta_deg <= max() + kAngleTol;
    }

    std::size_t AngleGrid::nearest_index(double theta_deg) const
    {
        const double pos = (theta_deg - min()) / resolution_;
        if (pos <= 0.0)
            return 0;
        const auto last = static_cast<double>(size() - 1);
        if (pos >= last)
            return size() - 1;
        const double lo = std::floor(pos);
        // exact halfway goes to the smaller angle
        return static_cast<std::size_t>(pos - lo > 0.5 ? lo + 1.0 : lo);
    }

    std::optional<std::size_t> Codebook::find(int beam_id) const
    {
        for (std::size_t i = 0; i < beams.size(); ++i)
            if (beams[i].beam_id == beam_id)
                return i;
        return std::nullopt;
    }

    void Codebook::validate() const
    {
        for (const auto &b : beams)
        {
            if (b.gains.size() != grid.size())
                throw std::invalid_argument("Codebook: beam " + std::to_string(b.beam_id) + " has " +
                                            std::to_string(b.gains.size()) + " gains for " +
                                            std::to_string(grid.size()) + " grid angles");
            for (const auto &g : b.gains)
                if (!std::isfinite(g.real()) || !std::isfinite(g.imag()))
                    throw std::invalid_argument("Codebook: beam " + std::to_string(b.beam_id) + " has a non-finite gain");
        }
    }

    cdouble gain_at(const BeamPattern &pattern, const AngleGrid &grid, double theta_deg)
    {
        if (!grid.contains(theta_deg))
            throw std::domain_error("gain_at: angle " + std::to_string(theta_deg) + " outside grid span");
        if (pattern.gains.size() != grid.size())
            throw std::invalid_argument("gain_at: pattern does not match grid");

        const double pos = std::clamp((theta_deg - grid.min()) / grid.resolution(), 0.0,
                                      static_cast<double>(grid.size() - 1));
        const auto i0 = static_cast<std::size_t>(std::floor(pos));
        const double t = pos - static_cast<double>(i0);
        if (i0 + 1 >= grid.size() || t < 1e-12)
            return pattern.gains[std::min(i0, grid.size() - 1)];
        return interpolate(pattern.gains[i0], pattern.gains[i0 + 1], t);
    }

    BeamPattern quasi_omni(const AngleGrid &grid, int beam_id)
    {
        return {beam_id, std::vector<cdouble>(grid.size(), cdouble(1.0, 0.0))};
    }

    double max_power_gain_db(const Codebook &codebook)
    {
        double peak = 0.0;
        for (const auto &b : codebook.beams)
            for (const auto &g : b.gains)
                peak = std::max(peak, std::norm(g));
        return 10.0 * std::log10(peak);
    }

    void normalize(Codebook &codebook, double normalization_db)
    {
        double peak = 0.0;
        for (const auto &b : codebook.beams)
            for (const auto &g : b.gains)
                peak = std::max(peak, std::norm(g));
        if (!(peak > 0.0))
            throw std::invalid_argument("normalize: codebook has no non-zero gain");
        const double scale = std::sqrt(std::pow(10.0, normalization_db / 10.0) / peak);
        codebook.normalization_db = normalization_db;
        if (scale == 1.0)
            return;
        for (auto &b : codebook.beams)
            for (auto &g : b.gains)
                g *= scale;
    }

    Codebook read_codebook(std::istream &in, const AngleGrid &grid, double normalization_db)
    {
        std::string line;
        std::size_t line_no = 0;
        if (!std::getline(in, line))
            throw ParseError("codebook: empty file", 1);
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();

        bool power_only = false;
        if (line == "beam_id,angle_deg,mag_db")
            power_only = true;
        else if (line != "beam_id,angle_deg,mag_db,phase_deg")
            throw ParseError("codebook: unexpected header '" + line + "'", line_no);

        const std::size_t n_fields = power_only ? 3 : 4;
        std::map<int, std::vector<Sample>> samples;
        std::vector<int> order;
        while (std::getline(in, line))
        {
            ++line_no;
            if (!line.empty() && line.back() == '\r')
                line.pop_back();
            if (line.empty())
                continue;
            const auto f = split_csv(line);
            if (f.size() != n_fields)
                throw ParseError("codebook: expected " + std::to_string(n_fields) + " fields", line_no);
            const double id_d = parse_double(f[0], line_no);
            if (id_d != std::floor(id_d))
                throw ParseError("codebook: beam_id must be an integer", line_no);
            const int id = static_cast<int>(id_d);
            const double angle = parse_double(f[1], line_no);
            const double mag_db = parse_double(f[2], line_no);
            const double phase = power_only ? 0.0 : parse_double(f[3], line_no);
            if (std::isnan(mag_db) || mag_db == std::numeric_limits<double>::infinity() || !std::isfinite(phase))
                throw ParseError("codebook: non-finite gain", line_no);

            auto &vec = samples[id];
            if (vec.empty())
                order.push_back(id);
            else if (angle <= vec.back().angle)
                throw ParseError("codebook: angles must be ascending within beam " + std::to_string(id), line_no);
            vec.push_back({angle, std::pow(10.0, mag_db / 20.0), deg2rad(phase)});
        }
        if (samples.empty())
            throw ParseError("codebook: no data rows", line_no);

        Codebook cb;
        cb.grid = grid;
        cb.power_only = power_only;
        for (int id : order)
        {
            const auto &s = samples[id];
            BeamPattern bp;
            bp.beam_id = id;
            bp.gains.resize(grid.size());
            for (std::size_t gi = 0; gi < grid.size(); ++gi)
            {
                const double theta = grid[gi];
                auto hi = std::lower_bound(s.begin(), s.end(), theta - kAngleTol,
                                           [](const Sample &a, double t) { return a.angle < t; });
                double nearest = std::numeric_limits<double>::infinity();
                if (hi != s.end())
                    nearest = std::min(nearest, std::abs(hi->angle - theta));
                if (hi != s.begin())
                    nearest = std::min(nearest, std::abs(std::prev(hi)->angle - theta));
                if (nearest > grid.resolution() + kAngleTol)
                    throw CoverageError("codebook: beam " + std::to_string(id) + " has no sample within " +
                                        std::to_string(grid.resolution()) + " deg of " + std::to_string(theta));

                const auto to_c = [](const Sample &x) { return std::polar(x.amplitude, x.phase_rad); };
                if (hi != s.end() && std::abs(hi->angle - theta) <= kAngleTol)
                    bp.gains[gi] = to_c(*hi);
                else if (hi == s.end())
                    bp.gains[gi] = to_c(s.back());
                else if (hi == s.begin())
                    bp.gains[gi] = to_c(s.front());
                else
                {
                    const Sample &a = *std::prev(hi);
                    const Sample &b = *hi;
                    bp.gains[gi] = interpolate(to_c(a), to_c(b), (theta - a.angle) / (b.angle - a.angle));
                }
            }
            cb.beams.push_back(std::move(bp));
        }
        cb.validate();
        normalize(cb, normalization_db);
        return cb;
    }

    Codebook load_codebook(const std::filesystem::path &path, const AngleGrid &grid, double normalization_db)
    {
        std::ifstream in(path);
        if (!in)
            throw std::runtime_error("load_codebook: cannot open " + path.string());
        return read_codebook(in, grid, normalization_db);
    }

    void write_codebook(std::ostream &out, const Codebook &codebook)
    {
        out << "beam_id,angle_deg,mag_db,phase_deg\n";
        char buf[128];
        for (const auto &b : codebook.beams)
            for (std::size_t i = 0; i < codebook.grid.size(); ++i)
            {
                const double p = std::norm(b.gains[i]);
                const double mag_db = 10.0 * std::log10(p);
                const double phase = p > 0.0 ? rad2deg(std::arg(b.gains[i])) : 0.0;
                std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%.6f\n", b.beam_id, codebook.grid[i], mag_db, phase);
                out << buf;
            }
    }

    void save_codebook(const std::filesystem::path &path, const Codebook &codebook)
    {
        std::ofstream out(path, std::ios::binary);
        if (!out)
            throw std::runtime_error("save_codebook: cannot write " + path.string());
        write_codebook(out, codebook);
    }

    double synth_steering_deg(int beam_index, int n_beams, const AngleGrid &grid)
    {
        const double span = grid.max() - grid.min();
        return grid.min() + (static_cast<double>(beam_index) + 0.5) * span / static_cast<double>(n_beams);
    }

    Codebook synth_codebook(int n_elements, int phase_bits, int n_beams, const AngleGrid &grid,
                            std::uint64_t seed, double phase_error_deg)
    {
        if (n_elements < 2)
            throw std::invalid_argument("synth_codebook: n_elements must be >= 2");
        if (phase_bits != kUnquantizedPhase && (phase_bits < 2 || phase_bits > 4))
            throw std::invalid_argument("synth_codebook: phase_bits must be 2, 3 or 4");
        if (n_beams < 2)
            throw std::invalid_argument("synth_codebook: n_beams must be >= 2");

        std::mt19937_64 rng(seed);
        const double step = phase_bits == kUnquantizedPhase ? 0.0 : 2.0 * kPi / static_cast<double>(1 << phase_bits);
        std::uniform_real_distribution<double> dither(0.0, step > 0.0 ? step : 1.0);
        std::normal_distribution<double> perr(0.0, deg2rad(phase_error_deg));

        Codebook cb;
        cb.grid = grid;
        for (int b = 0; b < n_beams; ++b)
        {
            const double steer = deg2rad(synth_steering_deg(b, n_beams, grid));
            const double offset = step > 0.0 ? dither(rng) : 0.0;

            std::vector<cdouble> weights(static_cast<std::size_t>(n_elements));
            for (int n = 0; n < n_elements; ++n)
            {
                double phase = -kPi * n * std::sin(steer) + offset;
                if (step > 0.0)
                    phase = step * std::round(phase / step);
                if (phase_error_deg > 0.0)
                    phase += perr(rng);
                weights[static_cast<std::size_t>(n)] = std::polar(1.0, phase);
            }

            BeamPattern bp;
            bp.beam_id = b + 1;
            bp.gains.resize(grid.size());
            for (std::size_t i = 0; i < grid.size(); ++i)
            {
                const double u = kPi * std::sin(deg2rad(grid[i]));
                cdouble af = 0.0;
                for (int n = 0; n < n_elements; ++n)
                    af += weights[static_cast<std::size_t>(n)] * std::polar(1.0, u * n);
                bp.gains[i] = af;
            }
            cb.beams.push_back(std::move(bp));
        }
        normalize(cb, 15.0);
        return cb;
    }
}
