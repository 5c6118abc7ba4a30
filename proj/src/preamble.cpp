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

#include "mmaoa/preamble.hpp"

namespace mmaoa
{
    namespace
    {
        // j^k for integer k
        cdouble rotation(long k)
        {
            switch (((k % 4) + 4) % 4)
            {
            case 0:
                return {1.0, 0.0};
            case 1:
                return {0.0, 1.0};
            case 2:
                return {-1.0, 0.0};
            default:
                return {0.0, -1.0};
            }
        }
    }

    const PreambleSegment &PreambleLayout::segment(std::string_view name) const
    {
        for (const auto &s : segments)
            if (s.name == name)
                return s;
        throw std::out_of_range("PreambleLayout: no segment named '" + std::string(name) + "'");
    }

    ComplexSequence modulate_pi2bpsk(const BipolarSequence &x, long phase_offset_index)
    {
        ComplexSequence out;
        out.values.resize(x.size());
        for (std::size_t n = 0; n < x.size(); ++n)
            out.values[n] = static_cast<double>(x[n]) * rotation(static_cast<long>(n) + phase_offset_index);
        return out;
    }

    BipolarSequence demodulate_pi2bpsk(const ComplexSequence &x, long phase_offset_index)
    {
        std::vector<int> bits(x.size());
        for (std::size_t n = 0; n < x.size(); ++n)
        {
            const cdouble v = x.values[n] * std::conj(rotation(static_cast<long>(n) + phase_offset_index));
            bits[n] = v.real() >= 0.0 ? 1 : -1;
        }
        return BipolarSequence(std::move(bits));
    }

    long Preamble::rotation_index(std::size_t position) const
    {
        if (rotation == RotationMode::kContinuous)
            return static_cast<long>(position);
        for (const auto &s : layout.segments)
            if (position >= s.start && position < s.start + s.length)
                return static_cast<long>(position - s.start);
        throw std::out_of_range("Preamble::rotation_index: position outside the preamble");
    }

    ComplexSequence Preamble::ref_gau() const { return modulate_pi2bpsk(codes.gau256, rotation_index(layout.gau_start())); }
    ComplexSequence Preamble::ref_gbu() const { return modulate_pi2bpsk(codes.gbu256, rotation_index(layout.gbu_start())); }
    ComplexSequence Preamble::ref_gav() const { return modulate_pi2bpsk(codes.gav256, rotation_index(layout.gav_start())); }
    ComplexSequence Preamble::ref_gbv() const { return modulate_pi2bpsk(codes.gbv256, rotation_index(layout.gbv_start())); }

    Preamble build_preamble(GolayMode mode, RotationMode rotation)
    {
        const GolayPair pair = generate_ga128_gb128(mode);
        Preamble p;
        p.codes = build_composites(pair.a, pair.b);
        p.rotation = rotation;

        const std::vector<std::pair<std::string, BipolarSequence>> fields = {
            {"-Ga128", -pair.a},
            {"Gu512", p.codes.gu512},
            {"Gv512", p.codes.gv512},
            {"-Gb128", -pair.b},
        };

        std::size_t pos = 0;
        for (const auto &[name, seq] : fields)
        {
            p.layout.segments.push_back({name, pos, seq.size()});
            const long offset = rotation == RotationMode::kContinuous ? static_cast<long>(pos) : 0;
            const ComplexSequence mod = modulate_pi2bpsk(seq, offset);
            p.samples.values.insert(p.samples.values.end(), mod.values.begin(), mod.values.end());
            pos += seq.size();
        }
        p.layout.total_length = pos;
        p.samples.sample_period = kChipTime;
        return p;
    }
}
