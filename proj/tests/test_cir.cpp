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

#include "catch_amalgamated.hpp"

#include "mmaoa/cir.hpp"
#include "mmaoa/propagation.hpp"
#include "support/generators.hpp"

#include <sstream>

using namespace mmaoa;

namespace
{
    // Received frame built by hand: sum of delayed, scaled preamble copies
    ComplexSequence multipath_frame(const Preamble &pre, const std::map<int, cdouble> &taps, std::size_t extra = 256)
    {
        ComplexSequence r;
        r.values.assign(pre.samples.size() + extra, cdouble(0.0));
        for (const auto &[d, h] : taps)
            for (std::size_t n = 0; n < pre.samples.size(); ++n)
                r[n + static_cast<std::size_t>(d)] += h * pre.samples[n];
        return r;
    }

    CirEstimate cir(int beam, std::map<int, cdouble> taps)
    {
        CirEstimate e;
        e.rx_beam_id = beam;
        e.taps = std::move(taps);
        return e;
    }
}

TEST_CASE("Single path is recovered exactly")
{
    const auto pre = build_preamble();
    const GolayCorrelator corr(pre);
    const cdouble h = std::polar(0.3, kPi / 4.0);
    const auto out = corr.correlate_and_combine(multipath_frame(pre, {{24, h}}));
    CHECK(out.i_p == 128);
    CHECK(out.max_tap() == 127);
    const auto est = estimate_all_taps(out, 7);
    CHECK(est.rx_beam_id == 7);
    REQUIRE(est.taps.size() == 128);
    for (const auto &[d, v] : est.taps)
    {
        if (d == 24)
            CHECK(std::abs(v - h) < 1e-12);
        else
            CHECK(std::abs(v) < 1e-12);
    }
}

TEST_CASE("Multipath channels inside the zero-correlation zone are recovered exactly")
{
    testgen::Gen gen(7);
    for (const auto rotation : {RotationMode::kContinuous, RotationMode::kResetPerField})
    {
        const auto pre = build_preamble(GolayMode::kStandard, rotation);
        const GolayCorrelator corr(pre);
        for (int trial = 0; trial < 25; ++trial)
        {
            std::map<int, cdouble> taps;
            for (int d : gen.distinct(gen.integer(1, 8), 0, 127))
                taps[d] = gen.complex_unit_box();
            const auto est = estimate_all_taps(corr.correlate_and_combine(multipath_frame(pre, taps)));
            for (const auto &[d, v] : est.taps)
            {
                const auto it = taps.find(d);
                const cdouble want = it == taps.end() ? cdouble(0.0) : it->second;
                REQUIRE(std::abs(v - want) < 1e-12);
            }
        }
    }
}

TEST_CASE("Tap estimates match the frame produced by the channel model")
{
    const auto pre = build_preamble();
    const AngleGrid g;
    const auto cb = synth_codebook(8, 2, 8, g, 3);
    PathSet paths;
    paths.paths.push_back({std::polar(2e-4, 1.1), 30.4 * kChipTime, 5.0, -12.0, 0, 0, 0.0});
    paths.paths.push_back({std::polar(7e-5, -0.3), 41.9 * kChipTime, -20.0, 33.0, 1, 1, 0.0});
    const auto want = channel_taps(paths, cb.beams[1], cb.beams[6], g, 25.0);
    const auto frame = apply_channel(paths, cb.beams[1], cb.beams[6], g, pre.samples, 25.0, std::nullopt, 0);
    const auto est = estimate_all_taps(correlate_and_combine(frame.samples, pre));
    for (const auto &[d, v] : est.taps)
    {
        const auto it = want.find(d);
        const cdouble w = it == want.end() ? cdouble(0.0) : it->second;
        CHECK(std::abs(v - w) < 1e-12 * std::abs(want.begin()->second) + 1e-18);
    }
}

TEST_CASE("Correlation is linear in the received frame")
{
    testgen::Gen gen(19);
    const auto pre = build_preamble();
    const GolayCorrelator corr(pre);
    for (int trial = 0; trial < 10; ++trial)
    {
        ComplexSequence a, b, c;
        a.values = gen.complex_vector(pre.samples.size() + 256);
        b.values = gen.complex_vector(pre.samples.size() + 256);
        const cdouble s = gen.complex_unit_box();
        c.values.resize(a.size());
        for (std::size_t i = 0; i < a.size(); ++i)
            c[i] = a[i] + s * b[i];
        const auto oa = corr.correlate_and_combine(a);
        const auto ob = corr.correlate_and_combine(b);
        const auto oc = corr.correlate_and_combine(c);
        for (std::size_t i = 0; i < oc.r_ru.size(); ++i)
        {
            REQUIRE(std::abs(oc.r_ru[i] - (oa.r_ru[i] + s * ob.r_ru[i])) < 1e-9);
            REQUIRE(std::abs(oc.r_rv[i] - (oa.r_rv[i] + s * ob.r_rv[i])) < 1e-9);
        }
    }
}

TEST_CASE("Tap estimate averages the u and v branches")
{
    testgen::Gen gen(23);
    const auto pre = build_preamble();
    ComplexSequence r;
    r.values = gen.complex_vector(pre.samples.size() + 256);
    const auto out = correlate_and_combine(r, pre);
    const auto est = estimate_taps(out, {0, 5, 127});
    REQUIRE(est.taps.size() == 3);
    for (const auto &[d, v] : est.taps)
    {
        const std::size_t i = out.i_p + static_cast<std::size_t>(d);
        CHECK(std::abs(v - (out.r_ru[i] + out.r_rv[i]) / 2.0 / 512.0) < 1e-15);
    }
}

TEST_CASE("Branch correlations agree with a direct sum over the reference fields")
{
    testgen::Gen gen(29);
    const auto pre = build_preamble();
    const auto &lay = pre.layout;
    ComplexSequence r;
    r.values = gen.complex_vector(pre.samples.size() + 256);
    const auto out = correlate_and_combine(r, pre);

    const auto xcorr = [&](const ComplexSequence &ref, long lag) {
        cdouble acc = 0.0;
        for (std::size_t k = 0; k < ref.size(); ++k)
        {
            const long n = lag + static_cast<long>(k);
            if (n >= 0 && n < static_cast<long>(r.size()))
                acc += r[static_cast<std::size_t>(n)] * std::conj(ref[k]);
        }
        return acc;
    };
    const long base = static_cast<long>(lay.gau_start()) - static_cast<long>(out.i_p);
    for (long i : {0L, 1L, 64L, 127L, 128L, 129L, 200L, 255L})
    {
        const cdouble u = xcorr(pre.ref_gau(), base + i) + xcorr(pre.ref_gbu(), base + i + 256);
        const cdouble v = xcorr(pre.ref_gav(), base + i + 512) + xcorr(pre.ref_gbv(), base + i + 768);
        CHECK(std::abs(out.r_ru[static_cast<std::size_t>(i)] - u) < 1e-9);
        CHECK(std::abs(out.r_rv[static_cast<std::size_t>(i)] - v) < 1e-9);
    }
}

TEST_CASE("Noise on each tap estimate has variance sigma^2 / 1024")
{
    const auto pre = build_preamble();
    const GolayCorrelator corr(pre);
    const double sigma2 = 4.0;
    double acc = 0.0;
    std::size_t n = 0;
    for (std::uint64_t seed = 1; seed <= 40; ++seed)
    {
        ComplexSequence r;
        r.values = unit_noise(pre.samples.size() + 256, seed);
        for (auto &x : r.values)
            x *= std::sqrt(sigma2);
        for (const auto &[d, v] : estimate_all_taps(corr.correlate_and_combine(r)).taps)
        {
            acc += std::norm(v);
            ++n;
        }
    }
    const double var = acc / static_cast<double>(n);
    // 5120 samples of an exponential variable: relative standard error about 1.4%
    CHECK(var == Catch::Approx(sigma2 / 1024.0).epsilon(0.06));
}

TEST_CASE("Tap estimation rejects bad input")
{
    const auto pre = build_preamble();
    ComplexSequence shorter;
    shorter.values.assign(pre.samples.size() - 1, cdouble(0.0));
    CHECK_THROWS_AS(correlate_and_combine(shorter, pre), std::invalid_argument);

    ComplexSequence r;
    r.values.assign(pre.samples.size() + 256, cdouble(0.0));
    const auto out = correlate_and_combine(r, pre);
    CHECK_THROWS_AS(estimate_taps(out, {128}), std::domain_error);
    CHECK_THROWS_AS(estimate_taps(out, {-1}), std::domain_error);
    CHECK_NOTHROW(estimate_taps(out, {0, 127}));
}

TEST_CASE("Detection flags taps relative to each beam's strongest tap")
{
    const auto one = detect_and_aggregate({cir(0, {{24, 1.0}, {30, 0.05}})}, 0.1);
    REQUIRE(one.size() == 1);
    CHECK(one[0].kappa == 1);
    CHECK(one[0].tap_index == 24);
    CHECK(one[0].detected_by == std::vector<int>{0});

    const auto two = detect_and_aggregate(
        {cir(3, {{24, 1.0}, {31, 0.01}}), cir(5, {{24, 0.02}, {31, 0.5}})}, 0.1);
    REQUIRE(two.size() == 2);
    CHECK(two[0].kappa == 1);
    CHECK(two[0].tap_index == 24);
    CHECK(two[0].detected_by == std::vector<int>{3});
    CHECK(two[1].kappa == 2);
    CHECK(two[1].tap_index == 31);
    CHECK(two[1].detected_by == std::vector<int>{5});

    CHECK_THROWS_AS(detect_and_aggregate({}, 0.1), std::invalid_argument);
}

TEST_CASE("Detected taps are exactly the union of per-beam threshold crossings")
{
    testgen::Gen gen(31);
    for (int trial = 0; trial < 200; ++trial)
    {
        std::vector<CirEstimate> ests;
        const int n_beams = gen.integer(1, 6);
        for (int b = 0; b < n_beams; ++b)
        {
            std::map<int, cdouble> taps;
            for (int d : gen.distinct(gen.integer(1, 10), 0, 127))
                taps[d] = gen.complex_unit_box();
            ests.push_back(cir(b * 2, taps));
        }
        const double thr = gen.uniform(0.0, 1.0);

        std::map<int, std::vector<int>> oracle;
        for (const auto &e : ests)
        {
            double m = 0.0;
            for (const auto &[d, h] : e.taps)
                m = std::max(m, std::abs(h));
            for (const auto &[d, h] : e.taps)
                if (std::abs(h) >= thr * m)
                    oracle[d].push_back(e.rx_beam_id);
        }
        const auto got = detect_and_aggregate(ests, thr);
        REQUIRE(got.size() == oracle.size());
        int k = 1;
        auto it = oracle.begin();
        for (const auto &p : got)
        {
            CHECK(p.kappa == k++);
            CHECK(p.tap_index == it->first);
            CHECK(p.detected_by == it->second);
            ++it;
        }
    }
}

TEST_CASE("CIR CSV round trip and parse errors")
{
    testgen::Gen gen(37);
    std::vector<CirEstimate> ests;
    for (int b = 0; b < 4; ++b)
    {
        std::map<int, cdouble> taps;
        for (int d : gen.distinct(5, 0, 127))
            taps[d] = gen.complex_unit_box() * 1e-4;
        ests.push_back(cir(b + 10, taps));
    }
    std::stringstream ss;
    write_cir_csv(ss, ests);
    const auto back = read_cir_csv(ss);
    REQUIRE(back.size() == ests.size());
    for (std::size_t i = 0; i < ests.size(); ++i)
    {
        CHECK(back[i].rx_beam_id == ests[i].rx_beam_id);
        CHECK(back[i].taps == ests[i].taps);
    }

    std::istringstream bad_header("beam,tap,re,im\n0,1,0,0\n");
    CHECK_THROWS_AS(read_cir_csv(bad_header), ParseError);
    std::istringstream bad_row("rx_beam_id,tap_index,re,im\n0,1,0,0\n0,2,abc,0\n");
    try
    {
        read_cir_csv(bad_row);
        FAIL("expected a parse error");
    }
    catch (const ParseError &e)
    {
        CHECK(e.line() == 3);
    }
    std::istringstream short_row("rx_beam_id,tap_index,re,im\n0,1,0\n");
    CHECK_THROWS_AS(read_cir_csv(short_row), ParseError);
}
