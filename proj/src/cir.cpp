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

#include "mmaoa/cir.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace mmaoa
{
    namespace
    {
        // sum_n r[n] conj(ref[n - lag]) for lag in [lag0, lag0 + count), accumulated into out
        void accumulate_correlation(const std::vector<cdouble> &r, const std::vector<cdouble> &ref, long lag0,
                                    std::size_t count, std::vector<cdouble> &out)
        {
            const long nr = static_cast<long>(r.size());
            const long m = static_cast<long>(ref.size());
            for (std::size_t k = 0; k < count; ++k)
            {
                const long lag = lag0 + static_cast<long>(k);
                const long n0 = std::max(0L, lag);
                const long n1 = std::min(nr, lag + m);
                double re = 0.0, im = 0.0;
                for (long n = n0; n < n1; ++n)
                {
                    const cdouble a = r[static_cast<std::size_t>(n)];
                    const cdouble b = ref[static_cast<std::size_t>(n - lag)];
                    re += a.real() * b.real() + a.imag() * b.imag();
                    im += a.imag() * b.real() - a.real() * b.imag();
                }
                out[k] += cdouble(re, im);
            }
        }
    }

    GolayCorrelator::GolayCorrelator(const Preamble &preamble)
        : layout_(preamble.layout), gau_(preamble.ref_gau().values), gbu_(preamble.ref_gbu().values),
          gav_(preamble.ref_gav().values), gbv_(preamble.ref_gbv().values)
    {
    }

    CorrelatorOutput GolayCorrelator::correlate_and_combine(const ComplexSequence &r) const
    {
        if (r.size() < layout_.total_length)
            throw std::invalid_argument("correlate_and_combine: received frame shorter than the preamble");

        CorrelatorOutput out;
        out.i_p = layout_.peak_index();
        out.peak = 2.0 * static_cast<double>(gau_.size());
        const std::size_t n = 2 * out.i_p;
        const long base = static_cast<long>(layout_.gau_start());
        const long off_bu = static_cast<long>(layout_.gbu_start()) - base;
        const long off_av = static_cast<long>(layout_.gav_start()) - base;
        const long off_bv = static_cast<long>(layout_.gbv_start()) - base;

        out.r_ru.assign(n, cdouble(0.0, 0.0));
        out.r_rv.assign(n, cdouble(0.0, 0.0));
        accumulate_correlation(r.values, gau_, 0, n, out.r_ru);
        accumulate_correlation(r.values, gbu_, off_bu, n, out.r_ru);
        accumulate_correlation(r.values, gav_, off_av, n, out.r_rv);
        accumulate_correlation(r.values, gbv_, off_bv, n, out.r_rv);
        return out;
    }

    CorrelatorOutput correlate_and_combine(const ComplexSequence &r, const Preamble &preamble)
    {
        return GolayCorrelator(preamble).correlate_and_combine(r);
    }

    CirEstimate estimate_taps(const CorrelatorOutput &out, const std::vector<int> &tap_indices, int rx_beam_id)
    {
        CirEstimate est;
        est.rx_beam_id = rx_beam_id;
        const double peak = out.peak;
        for (int d : tap_indices)
        {
            if (d < 0 || d > out.max_tap())
                throw std::domain_error("estimate_taps: tap " + std::to_string(d) + " outside [0, " +
                                        std::to_string(out.max_tap()) + "]");
            const auto i = out.i_p + static_cast<std::size_t>(d);
            const cdouble hu = out.r_ru[i] / peak;
            const cdouble hv = out.r_rv[i] / peak;
            est.taps[d] = 0.5 * (hu + hv);
        }
        return est;
    }

    CirEstimate estimate_all_taps(const CorrelatorOutput &out, int rx_beam_id)
    {
        std::vector<int> taps(static_cast<std::size_t>(out.max_tap() + 1));
        for (std::size_t i = 0; i < taps.size(); ++i)
            taps[i] = static_cast<int>(i);
        return estimate_taps(out, taps, rx_beam_id);
    }

    std::vector<DominantPathIndex> detect_and_aggregate(const std::vector<CirEstimate> &estimates,
                                                        double detect_threshold_rel)
    {
        if (estimates.empty())
            throw std::invalid_argument("detect_and_aggregate: no estimates");

        std::map<int, std::vector<int>> merged;
        for (const auto &est : estimates)
        {
            double peak = 0.0;
            for (const auto &[d, h] : est.taps)
                peak = std::max(peak, std::abs(h));
            if (!(peak > 0.0))
                continue;
            const double thr = detect_threshold_rel * peak;
            for (const auto &[d, h] : est.taps)
                if (std::abs(h) >= thr)
                    merged[d].push_back(est.rx_beam_id);
        }

        std::vector<DominantPathIndex> out;
        int kappa = 1;
        for (auto &[d, beams] : merged)
            out.push_back({kappa++, d, std::move(beams)});
        return out;
    }

    void write_cir_csv(std::ostream &out, const std::vector<CirEstimate> &estimates)
    {
        out << "rx_beam_id,tap_index,re,im\n";
        char buf[160];
        for (const auto &est : estimates)
            for (const auto &[d, h] : est.taps)
            {
                std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g\n", est.rx_beam_id, d, h.real(), h.imag());
                out << buf;
            }
    }

    std::vector<CirEstimate> read_cir_csv(std::istream &in)
    {
        std::string line;
        std::size_t line_no = 1;
        if (!std::getline(in, line))
            throw ParseError("cir csv: empty file", 1);
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line != "rx_beam_id,tap_index,re,im")
            throw ParseError("cir csv: unexpected header '" + line + "'", 1);

        std::vector<CirEstimate> out;
        std::map<int, std::size_t> index;
        while (std::getline(in, line))
        {
            ++line_no;
            if (!line.empty() && line.back() == '\r')
                line.pop_back();
            if (line.empty())
                continue;
            std::istringstream ss(line);
            std::string f[4];
            for (int k = 0; k < 4; ++k)
                if (!std::getline(ss, f[k], ','))
                    throw ParseError("cir csv: expected 4 fields", line_no);
            std::string extra;
            if (std::getline(ss, extra, ','))
                throw ParseError("cir csv: expected 4 fields", line_no);
            int beam = 0, tap = 0;
            double re = 0.0, im = 0.0;
            try
            {
                std::size_t u0 = 0, u1 = 0, u2 = 0, u3 = 0;
                beam = std::stoi(f[0], &u0);
                tap = std::stoi(f[1], &u1);
                re = std::stod(f[2], &u2);
                im = std::stod(f[3], &u3);
                if (u0 != f[0].size() || u1 != f[1].size() || u2 != f[2].size() || u3 != f[3].size())
                    throw std::invalid_argument("trailing");
            }
            catch (const std::logic_error &)
            {
                throw ParseError("cir csv: malformed number", line_no);
            }
            auto it = index.find(beam);
            if (it == index.end())
            {
                it = index.emplace(beam, out.size()).first;
                out.push_back({beam, {}});
            }
            out[it->second].taps[tap] = {re, im};
        }
        return out;
    }

    std::vector<CirEstimate> load_cir_csv(const std::filesystem::path &path)
    {
        std::ifstream in(path);
        if (!in)
            throw std::runtime_error("load_cir_csv: cannot open " + path.string());
        return read_cir_csv(in);
    }
}
