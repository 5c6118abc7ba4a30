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
#include "mmaoa/golay.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace mmaoa
{
    struct PreambleSegment
    {
        std::string name;
        std::size_t start = 0;
        std::size_t length = 0;
    };

    // Position of every field inside the channel-estimation part of the control PHY preamble:
    // -Ga128 (end of STF), Gu512, Gv512, -Gb128
    struct PreambleLayout
    {
        std::vector<PreambleSegment> segments;
        std::size_t total_length = 0;

        // Throws std::out_of_range for unknown names
        const PreambleSegment &segment(std::string_view name) const;

        std::size_t gau_start() const { return segment("Gu512").start; }
        std::size_t gbu_start() const { return segment("Gu512").start + 256; }
        std::size_t gav_start() const { return segment("Gv512").start; }
        std::size_t gbv_start() const { return segment("Gv512").start + 256; }

        // Correlator peak base index i_p: where Gau256 begins inside s
        std::size_t peak_index() const { return gau_start(); }
    };

    // Whether the pi/2 rotation index runs continuously over the whole preamble or restarts at every field
    enum class RotationMode
    {
        kContinuous,
        kResetPerField
    };

    // output[n] = x[n] * exp(j*pi*(n + phase_offset_index)/2)
    ComplexSequence modulate_pi2bpsk(const BipolarSequence &x, long phase_offset_index = 0);

    // Inverse rotation followed by sign decision; exact for noiseless input
    BipolarSequence demodulate_pi2bpsk(const ComplexSequence &x, long phase_offset_index = 0);

    struct Preamble
    {
        ComplexSequence samples; // unit-magnitude chips
        PreambleLayout layout;
        CompositeSequences codes;
        RotationMode rotation = RotationMode::kContinuous;

        // Rotation index applied to sample `position` of the preamble
        long rotation_index(std::size_t position) const;

        // Modulated correlator references with the same rotation they carry inside s
        ComplexSequence ref_gau() const;
        ComplexSequence ref_gbu() const;
        ComplexSequence ref_gav() const;
        ComplexSequence ref_gbv() const;
    };

    Preamble build_preamble(GolayMode mode = GolayMode::kStandard, RotationMode rotation = RotationMode::kContinuous);
}
