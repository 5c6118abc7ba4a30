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

#include "mmaoa/golay.hpp"

#include <algorithm>
#include <array>

namespace mmaoa
{
    BipolarSequence::BipolarSequence(std::vector<int> values) : values_(std::move(values))
    {
        for (std::size_t i = 0; i < values_.size(); ++i)
            if (values_[i] != 1 && values_[i] != -1)
                throw std::invalid_argument("BipolarSequence: element " + std::to_string(i) + " is not +1/-1");
    }

    BipolarSequence BipolarSequence::operator-() const
    {
        BipolarSequence out = *this;
        for (int &v : out.values_)
            v = -v;
        return out;
    }

    BipolarSequence concat(const BipolarSequence &a, const BipolarSequence &b)
    {
        BipolarSequence out = a;
        out.values_.insert(out.values_.end(), b.values_.begin(), b.values_.end());
        return out;
    }

    GolayPair golay_recursion(std::span<const int> delays, std::span<const int> weights)
    {
        if (delays.size() != weights.size() || delays.empty())
            throw std::invalid_argument("golay_recursion: delay and weight vectors must have equal non-zero length");

        std::size_t n = 1;
        for (int d : delays)
            n += static_cast<std::size_t>(d);

        std::vector<int> a(n, 0), b(n, 0);
        a[0] = 1;
        b[0] = 1;
        for (std::size_t k = 0; k < delays.size(); ++k)
        {
            const auto d = static_cast<std::size_t>(delays[k]);
            const int w = weights[k];
            std::vector<int> na(n), nb(n);
            for (std::size_t i = 0; i < n; ++i)
            {
                const int bd = i >= d ? b[i - d] : 0;
                na[i] = w * a[i] + bd;
                nb[i] = w * a[i] - bd;
            }
            a.swap(na);
            b.swap(nb);
        }
        return {BipolarSequence(std::move(a)), BipolarSequence(std::move(b))};
    }

    GolayPair generate_ga128_gb128(GolayMode mode)
    {
        if (mode == GolayMode::kStandard)
        {
            static constexpr std::array<int, 7> delays = {1, 8, 2, 4, 16, 32, 64};
            static constexpr std::array<int, 7> weights = {-1, -1, -1, -1, 1, -1, -1};
            return golay_recursion(delays, weights);
        }

        // a -> [a b], b -> [a -b], starting from [1], [1]
        BipolarSequence a({1}), b({1});
        while (a.size() < 128)
        {
            BipolarSequence na = concat(a, b);
            BipolarSequence nb = concat(a, -b);
            a = std::move(na);
            b = std::move(nb);
        }
        return {a, b};
    }

    std::vector<std::int64_t> autocorrelation(const BipolarSequence &x)
    {
        const long n = static_cast<long>(x.size());
        if (n == 0)
            return {};
        std::vector<std::int64_t> r(static_cast<std::size_t>(2 * n - 1), 0);
        for (long lag = -(n - 1); lag <= n - 1; ++lag)
        {
            std::int64_t acc = 0;
            for (long i = std::max(0L, lag); i <= std::min(n - 1 + lag, n - 1); ++i)
                acc += x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i - lag)];
            r[static_cast<std::size_t>(lag + n - 1)] = acc;
        }
        return r;
    }

    bool is_complementary(const BipolarSequence &a, const BipolarSequence &b)
    {
        if (a.size() != b.size() || a.size() == 0)
            return false;
        const auto ra = autocorrelation(a);
        const auto rb = autocorrelation(b);
        const std::size_t zero = a.size() - 1;
        for (std::size_t i = 0; i < ra.size(); ++i)
        {
            const std::int64_t expected = (i == zero) ? static_cast<std::int64_t>(2 * a.size()) : 0;
            if (ra[i] + rb[i] != expected)
                return false;
        }
        return true;
    }

    CompositeSequences build_composites(const BipolarSequence &ga, const BipolarSequence &gb)
    {
        if (ga.size() != 128 || gb.size() != 128)
            throw std::invalid_argument("build_composites: Ga128/Gb128 must have length 128");
        if (!is_complementary(ga, gb))
            throw std::invalid_argument("build_composites: Ga128/Gb128 are not a complementary pair");

        CompositeSequences c;
        c.gau256 = concat(-gb, -ga);
        c.gbu256 = concat(gb, -ga);
        c.gav256 = concat(-gb, ga);
        c.gbv256 = concat(-gb, -ga);
        c.gu512 = concat(c.gau256, c.gbu256);
        c.gv512 = concat(c.gav256, c.gbv256);
        return c;
    }

    cdouble Correlation::at(long lag) const
    {
        if (lag < first_lag || lag > last_lag())
            return {0.0, 0.0};
        return values[static_cast<std::size_t>(lag - first_lag)];
    }

    Correlation correlate_lags(std::span<const cdouble> x, std::span<const cdouble> y, long lag_begin, long lag_end)
    {
        if (x.empty() || y.empty())
            throw std::invalid_argument("correlate: inputs must be non-empty");
        Correlation out;
        out.first_lag = lag_begin;
        if (lag_end <= lag_begin)
            return out;
        out.values.assign(static_cast<std::size_t>(lag_end - lag_begin), cdouble(0.0, 0.0));

        const long nx = static_cast<long>(x.size());
        const long ny = static_cast<long>(y.size());
        for (long lag = lag_begin; lag < lag_end; ++lag)
        {
            // n ranges over the overlap of [0, nx) and [lag, lag + ny)
            const long n0 = std::max(0L, lag);
            const long n1 = std::min(nx, lag + ny);
            double re = 0.0, im = 0.0;
            for (long n = n0; n < n1; ++n)
            {
                const cdouble a = x[static_cast<std::size_t>(n)];
                const cdouble b = y[static_cast<std::size_t>(n - lag)];
                re += a.real() * b.real() + a.imag() * b.imag();
                im += a.imag() * b.real() - a.real() * b.imag();
            }
            out.values[static_cast<std::size_t>(lag - lag_begin)] = {re, im};
        }
        return out;
    }

    Correlation correlate(std::span<const cdouble> x, std::span<const cdouble> y)
    {
        if (x.empty() || y.empty())
            throw std::invalid_argument("correlate: inputs must be non-empty");
        return correlate_lags(x, y, -static_cast<long>(y.size()) + 1, static_cast<long>(x.size()));
    }

    std::vector<cdouble> to_complex(const BipolarSequence &x)
    {
        std::vector<cdouble> out(x.size());
        for (std::size_t i = 0; i < x.size(); ++i)
            out[i] = static_cast<double>(x[i]);
        return out;
    }
}
