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

#include "mmaoa/aoa.hpp"

#include <algorithm>
#include <numeric>

namespace mmaoa
{
    namespace
    {
        std::vector<double> magnitudes(const MeasurementSet &meas)
        {
            std::vector<double> m(meas.size());
            for (std::size_t i = 0; i < meas.size(); ++i)
                m[i] = std::abs(meas.measurements[i].h_hat);
            return m;
        }

        bool masked_in(const WeightPolicy &policy, std::size_t i)
        {
            return policy.prior_mask.empty() || policy.prior_mask[i];
        }

        // First index with the extreme value among allowed entries; smallest angle wins ties
        template <typename Better>
        std::optional<std::size_t> extreme_index(const std::vector<double> &v, const std::vector<bool> &allowed, Better better)
        {
            std::optional<std::size_t> best;
            for (std::size_t i = 0; i < v.size(); ++i)
            {
                if (!allowed.empty() && !allowed[i])
                    continue;
                if (!best || better(v[i], v[*best]))
                    best = i;
            }
            return best;
        }

        std::size_t center_index(const AngleGrid &grid, const std::vector<bool> &allowed)
        {
            const double mid = 0.5 * (grid.min() + grid.max());
            std::size_t best = grid.nearest_index(mid);
            if (allowed.empty() || allowed[best])
                return best;
            double best_dist = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < grid.size(); ++i)
                if (allowed[i] && std::abs(grid[i] - mid) < best_dist)
                {
                    best_dist = std::abs(grid[i] - mid);
                    best = i;
                }
            return best;
        }

        EstimationResult finish(const MeasurementSet &meas, ScoreTable table, double theta, const char *scheme,
                                const ConfidenceOptions &confidence)
        {
            EstimationResult r;
            r.theta_hat_deg = theta;
            r.score_table = std::move(table);
            r.epsilon = confidence.epsilon;
            r.scheme = scheme;
            r.confident = meas.size() >= 2 && check_confidence(meas, theta, confidence.epsilon, confidence.pair);
            return r;
        }
    }

    void MeasurementSet::validate() const
    {
        if (codebook == nullptr)
            throw std::invalid_argument("MeasurementSet: no codebook");
        for (const auto &m : measurements)
            if (!codebook->find(m.beam_id))
                throw std::invalid_argument("MeasurementSet: beam " + std::to_string(m.beam_id) + " not in codebook");
    }

    std::vector<std::vector<double>> gain_magnitudes(const MeasurementSet &meas, const AngleGrid &grid)
    {
        meas.validate();
        const Codebook &cb = *meas.codebook;
        const bool same_grid = cb.grid == grid;
        std::vector<std::vector<double>> g(meas.size(), std::vector<double>(grid.size()));
        for (std::size_t l = 0; l < meas.size(); ++l)
        {
            const BeamPattern &bp = cb.beams[*cb.find(meas.measurements[l].beam_id)];
            for (std::size_t i = 0; i < grid.size(); ++i)
                g[l][i] = same_grid ? std::abs(bp.gains[i]) : std::abs(gain_at(bp, cb.grid, grid[i]));
        }
        return g;
    }

    EstimationResult vae_cir(const MeasurementSet &meas, const AngleGrid &grid, const WeightPolicy &policy,
                             const ConfidenceOptions &confidence)
    {
        if (meas.size() < 2)
            throw InsufficientMeasurements("vae_cir: need at least two beam measurements");
        if (!policy.prior_mask.empty() && policy.prior_mask.size() != grid.size())
            throw std::invalid_argument("vae_cir: prior mask does not match the search grid");

        const auto mag = magnitudes(meas);
        const auto gain = gain_magnitudes(meas, grid);
        const double h_max = *std::max_element(mag.begin(), mag.end());
        const double h_bar = policy.nu * h_max;
        const auto &ms = meas.measurements;

        ScoreTable table;
        table.scores.assign(grid.size(), 0.0);
        table.used_beams.push_back(ms[0].beam_id);

        for (std::size_t ell = 1; ell < ms.size(); ++ell)
        {
            for (std::size_t l = 0; l < ell; ++l)
            {
                if (!(mag[ell] >= h_bar && mag[l] >= h_bar) || mag[ell] <= 0.0 || mag[l] <= 0.0)
                    continue;

                // stronger measurement on top; equal magnitudes fall back to the lower beam id
                std::size_t num = ell, den = l;
                if (mag[l] > mag[ell] || (mag[l] == mag[ell] && ms[l].beam_id < ms[ell].beam_id))
                    std::swap(num, den);

                const double ratio = mag[num] / mag[den];
                table.accumulated_pairs.emplace_back(ms[num].beam_id, ms[den].beam_id);
                const auto &gn = gain[num];
                const auto &gd = gain[den];
                for (std::size_t i = 0; i < grid.size(); ++i)
                {
                    if (!masked_in(policy, i) || gd[i] <= 0.0)
                        continue;
                    table.scores[i] += std::abs(ratio - gn[i] / gd[i]);
                }
            }
            table.used_beams.push_back(ms[ell].beam_id);
        }

        double theta;
        if (table.accumulated_pairs.empty())
            theta = grid[center_index(grid, policy.prior_mask)];
        else
        {
            const auto best = extreme_index(table.scores, policy.prior_mask, std::less<double>());
            theta = best ? grid[*best] : grid[center_index(grid, {})];
        }

        auto r = finish(meas, std::move(table), theta, "vae_cir", confidence);
        if (r.score_table.accumulated_pairs.empty())
            r.confident = false;
        return r;
    }

    bool check_confidence(const MeasurementSet &meas, double theta_hat_deg, double epsilon, ConfidencePair pair)
    {
        if (meas.size() < 2)
            throw InsufficientMeasurements("check_confidence: need at least two beam measurements");
        meas.validate();
        const auto mag = magnitudes(meas);

        std::size_t a = meas.size() - 2, b = meas.size() - 1;
        if (pair == ConfidencePair::kBestTwo)
        {
            std::vector<std::size_t> idx(meas.size());
            std::iota(idx.begin(), idx.end(), std::size_t{0});
            std::stable_sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return mag[x] > mag[y]; });
            a = std::min(idx[0], idx[1]);
            b = std::max(idx[0], idx[1]);
        }
        // strong = argmax, weak = argmin over {a, b}; a tie keeps the earlier one as strong
        const std::size_t strong = mag[b] > mag[a] ? b : a;
        const std::size_t weak = strong == a ? b : a;
        if (!(mag[strong] > 0.0))
            return false;

        const Codebook &cb = *meas.codebook;
        const auto gain = [&](std::size_t k) {
            return std::abs(gain_at(cb.beams[*cb.find(meas.measurements[k].beam_id)], cb.grid, theta_hat_deg));
        };
        const double g_strong = gain(strong);
        if (!(g_strong > 0.0))
            return false;
        return std::abs(mag[weak] / mag[strong] - gain(weak) / g_strong) <= epsilon;
    }

    EstimationResult rice_baseline(const MeasurementSet &meas, const AngleGrid &grid, double mu,
                                   const ConfidenceOptions &confidence)
    {
        if (meas.size() < 1)
            throw InsufficientMeasurements("rice_baseline: need at least one beam measurement");
        const auto mag = magnitudes(meas);
        const auto gain = gain_magnitudes(meas, grid);
        const double h_max = *std::max_element(mag.begin(), mag.end());

        ScoreTable table;
        table.scores.assign(grid.size(), 0.0);
        for (std::size_t l = 0; l < meas.size(); ++l)
        {
            table.used_beams.push_back(meas.measurements[l].beam_id);
            double peak = 0.0;
            for (double g : gain[l])
                peak = std::max(peak, g * g);
            if (!(peak > 0.0))
                continue;
            const double sign = mag[l] >= mu * h_max ? 1.0 : -1.0;
            for (std::size_t i = 0; i < grid.size(); ++i)
                table.scores[i] += sign * gain[l][i] * gain[l][i] / peak;
        }
        const auto best = extreme_index(table.scores, {}, std::greater<double>());
        return finish(meas, std::move(table), grid[*best], "rice", confidence);
    }

    EstimationResult hp_baseline(const MeasurementSet &meas, const AngleGrid &grid, const ConfidenceOptions &confidence)
    {
        constexpr std::size_t kTop = 5;
        if (meas.size() < kTop)
            throw InsufficientMeasurements("hp_baseline: need at least five beam measurements");
        const auto mag = magnitudes(meas);
        const auto gain = gain_magnitudes(meas, grid);

        std::vector<std::size_t> order(meas.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return mag[a] > mag[b]; });

        ScoreTable table;
        table.scores.assign(grid.size(), 0.0);
        for (std::size_t k = 0; k < kTop; ++k)
        {
            const std::size_t l = order[k];
            table.used_beams.push_back(meas.measurements[l].beam_id);
            const double peak = *std::max_element(gain[l].begin(), gain[l].end());
            if (!(peak > 0.0))
                continue;
            for (std::size_t i = 0; i < grid.size(); ++i)
                table.scores[i] += mag[l] * gain[l][i] / peak;
        }

        std::vector<std::size_t> dirs(grid.size());
        std::iota(dirs.begin(), dirs.end(), std::size_t{0});
        std::stable_sort(dirs.begin(), dirs.end(),
                         [&](std::size_t a, std::size_t b) { return table.scores[a] > table.scores[b]; });
        const std::size_t n = std::min(kTop, dirs.size());
        const auto [lo, hi] = std::minmax_element(dirs.begin(), dirs.begin() + static_cast<long>(n));
        const double center = 0.5 * (grid[*lo] + grid[*hi]);
        return finish(meas, std::move(table), grid[grid.nearest_index(center)], "hp", confidence);
    }
}
