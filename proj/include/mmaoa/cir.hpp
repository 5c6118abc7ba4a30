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
#include "mmaoa/preamble.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <vector>

namespace mmaoa
{
    // Combined Golay correlations. Both branches are indexed in the same tap coordinates:
    //   r_ru[i] = (r * Gau)[i] + (r * Gbu)[i + (gbu_start - gau_start)]
    //   r_rv[i] = (r * Gav)[i + (gav_start - gau_start)] + (r * Gbv)[i + (gbv_start - gau_start)]
    // so a path at tap d peaks at i = i_p + d in both.
    struct CorrelatorOutput
    {
        std::vector<cdouble> r_ru;
        std::vector<cdouble> r_rv;
        std::size_t i_p = 0;
        double peak = 512.0; // |R_su[i_p]|, twice the Golay pair length

        // Largest tap index inside the zero-correlation zone
        int max_tap() const { return static_cast<int>(i_p) - 1; }
    };

    // Precomputed correlator references for one preamble
    class GolayCorrelator
    {
    public:
        explicit GolayCorrelator(const Preamble &preamble);

        // Evaluates lags i in [0, 2 i_p), i.e. the peak and the zero-correlation zone on either side.
        // Throws std::invalid_argument if r is shorter than the preamble.
        CorrelatorOutput correlate_and_combine(const ComplexSequence &r) const;

        const PreambleLayout &layout() const { return layout_; }

    private:
        PreambleLayout layout_;
        std::vector<cdouble> gau_, gbu_, gav_, gbv_;
    };

    CorrelatorOutput correlate_and_combine(const ComplexSequence &r, const Preamble &preamble);

    struct CirEstimate
    {
        int rx_beam_id = 0;
        std::map<int, cdouble> taps; // tap index (ceil(tau / Tc)) -> h_hat
    };

    // h_hat(d) = (r_ru[i_p + d] + r_rv[i_p + d]) / 2 / peak, peak = 512 for 256-chip pairs.
    // Throws std::domain_error for taps outside [0, i_p - 1].
    CirEstimate estimate_taps(const CorrelatorOutput &out, const std::vector<int> &tap_indices, int rx_beam_id = 0);

    // Every tap in the validity window
    CirEstimate estimate_all_taps(const CorrelatorOutput &out, int rx_beam_id = 0);

    struct DominantPathIndex
    {
        int kappa = 0;
        int tap_index = 0;
        std::vector<int> detected_by; // beam ids, in input order
    };

    // Per beam, flag taps with |h| >= threshold * max |h| of that beam; merge by tap index; label
    // kappa = 1, 2, ... in tap order.
    std::vector<DominantPathIndex> detect_and_aggregate(const std::vector<CirEstimate> &estimates,
                                                        double detect_threshold_rel = 0.1);

    // CSV `rx_beam_id,tap_index,re,im`
    void write_cir_csv(std::ostream &out, const std::vector<CirEstimate> &estimates);
    std::vector<CirEstimate> read_cir_csv(std::istream &in);
    std::vector<CirEstimate> load_cir_csv(const std::filesystem::path &path);
}
