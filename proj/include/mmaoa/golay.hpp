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
#include <span>
#include <vector>

namespace mmaoa
{
    // Sequence of +1/-1 symbols
    class BipolarSequence
    {
    public:
        BipolarSequence() = default;

        // Throws std::invalid_argument if any value is not exactly +1 or -1
        explicit BipolarSequence(std::vector<int> values);

        std::size_t size() const { return values_.size(); }
        int operator[](std::size_t i) const { return values_[i]; }
        const std::vector<int> &values() const { return values_; }

        BipolarSequence operator-() const;
        bool operator==(const BipolarSequence &) const = default;

        // Concatenation
        friend BipolarSequence concat(const BipolarSequence &a, const BipolarSequence &b);

    private:
        std::vector<int> values_;
    };

    struct GolayPair
    {
        BipolarSequence a;
        BipolarSequence b;
    };

    // kStandard runs the 802.11ad delay/weight recursion; kAnyValid uses plain
    // Golay concatenation. Both produce complementary pairs.
    enum class GolayMode
    {
        kStandard,
        kAnyValid
    };

    // Length-128 pair used by the DMG preamble
    GolayPair generate_ga128_gb128(GolayMode mode = GolayMode::kStandard);

    // Golay recursion A_k(n) = W_k A_{k-1}(n) + B_{k-1}(n - D_k), B_k(n) = W_k A_{k-1}(n) - B_{k-1}(n - D_k)
    GolayPair golay_recursion(std::span<const int> delays, std::span<const int> weights);

    struct CompositeSequences
    {
        BipolarSequence gau256, gbu256;
        BipolarSequence gav256, gbv256;
        BipolarSequence gu512, gv512;
    };

    // Builds the CE-field composites: Gu512 = [-Gb, -Ga, Gb, -Ga], Gv512 = [-Gb, Ga, -Gb, -Ga].
    // Throws std::invalid_argument unless (ga, gb) is a complementary pair of length 128.
    CompositeSequences build_composites(const BipolarSequence &ga, const BipolarSequence &gb);

    // Aperiodic autocorrelation in integer arithmetic, lags -(N-1)..(N-1) stored at index lag + N - 1
    std::vector<std::int64_t> autocorrelation(const BipolarSequence &x);

    // True iff R_a[0] + R_b[0] = 2N and R_a[i] + R_b[i] = 0 for every other lag
    bool is_complementary(const BipolarSequence &a, const BipolarSequence &b);

    // Correlation (x * y)[i] = sum_n x[n] conj(y[n - i]) over lags [first_lag, first_lag + values.size())
    struct Correlation
    {
        std::vector<cdouble> values;
        long first_lag = 0;

        long last_lag() const { return first_lag + static_cast<long>(values.size()) - 1; }
        cdouble at(long lag) const;
    };

    // Full support: lags -(|y|-1) .. |x|-1. Throws std::invalid_argument on empty inputs.
    Correlation correlate(std::span<const cdouble> x, std::span<const cdouble> y);

    // Only the lags in [lag_begin, lag_end); lags outside the support evaluate to 0
    Correlation correlate_lags(std::span<const cdouble> x, std::span<const cdouble> y, long lag_begin, long lag_end);

    std::vector<cdouble> to_complex(const BipolarSequence &x);
}
