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

#include "mmaoa/beams.hpp"
#include "support/generators.hpp"

#include <filesystem>
#include <sstream>

using namespace mmaoa;

namespace
{
    // Largest peak outside the main lobe (bounded by the first minima on each side), relative to the main lobe
    double relative_sidelobe_db(const BeamPattern &b)
    {
        std::vector<double> p;
        for (const auto &g : b.gains)
            p.push_back(std::norm(g));
        std::size_t im = 0;
        for (std::size_t i = 0; i < p.size(); ++i)
            if (p[i] > p[im])
                im = i;
        std::size_t lo = im, hi = im;
        while (lo > 0 && p[lo - 1] <= p[lo])
            --lo;
        while (hi + 1 < p.size() && p[hi + 1] <= p[hi])
            ++hi;
        double side = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i)
            if (i < lo || i > hi)
                side = std::max(side, p[i]);
        return 10.0 * std::log10(side / p[im]);
    }

    std::string to_csv(const Codebook &cb)
    {
        std::ostringstream out;
        write_codebook(out, cb);
        return out.str();
    }
}

TEST_CASE("AngleGrid construction and lookup")
{
    const AngleGrid g;
    CHECK(g.size() == 181);
    CHECK(g.min() == -90.0);
    CHECK(g.max() == 90.0);
    CHECK(g.nearest_index(0.4) == 90);
    CHECK(g.nearest_index(0.5) == 90); // tie goes to the smaller angle
    CHECK(g.nearest_index(-200.0) == 0);
    CHECK(g.contains(90.0));
    CHECK_FALSE(g.contains(90.5));

    CHECK_THROWS_AS(AngleGrid(1.0, 0.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(AngleGrid::from_angles({0.0, 1.0, 3.0}), std::invalid_argument);
    CHECK(AngleGrid::from_angles({-10.0, 0.0, 10.0}).resolution() == 10.0);
}

TEST_CASE("gain_at interpolation")
{
    const auto g = AngleGrid::from_angles({0.0, 1.0, 2.0});
    BeamPattern b{1, {cdouble(1.0, 0.0), cdouble(3.0, 0.0), std::polar(2.0, 0.5)}};
    CHECK(gain_at(b, g, 1.0) == b.gains[1]);
    CHECK(std::abs(gain_at(b, g, 0.5)) == Catch::Approx(2.0));
    CHECK(gain_at(b, g, 0.0) == b.gains[0]);
    CHECK(gain_at(b, g, 2.0) == b.gains[2]);
    CHECK(std::arg(gain_at(b, g, 1.5)) == Catch::Approx(0.25));
    CHECK_THROWS_AS(gain_at(b, g, 2.01), std::domain_error);
    CHECK_THROWS_AS(gain_at(b, g, -0.01), std::domain_error);

    // phase is unwrapped across the +-180 deg cut
    BeamPattern w{2, {std::polar(1.0, kPi - 0.1), std::polar(1.0, -kPi + 0.1), 1.0}};
    CHECK(std::abs(std::abs(std::arg(gain_at(w, g, 0.5))) - kPi) < 1e-12);
}

TEST_CASE("quasi-omni is isotropic unit gain")
{
    const AngleGrid g(-60.0, 60.0, 0.5);
    const auto q = quasi_omni(g, 7);
    CHECK(q.beam_id == 7);
    REQUIRE(q.gains.size() == g.size());
    for (const auto &x : q.gains)
        CHECK(x == cdouble(1.0, 0.0));
    CHECK(std::abs(gain_at(q, g, 13.25) / gain_at(q, g, -47.0)) == 1.0);
}

TEST_CASE("Loading a constant pattern normalizes it to 15 dB")
{
    std::ostringstream f;
    f << "beam_id,angle_deg,mag_db,phase_deg\n";
    for (int a = -90; a <= 90; ++a)
        f << "1," << a << ",0,0\n";
    std::istringstream in(f.str());
    const auto cb = read_codebook(in, AngleGrid());
    REQUIRE(cb.size() == 1);
    for (const auto &x : cb.beams[0].gains)
        CHECK(std::norm(x) == Catch::Approx(std::pow(10.0, 1.5)).epsilon(1e-12));
    CHECK(max_power_gain_db(cb) == Catch::Approx(15.0).epsilon(1e-12));
}

TEST_CASE("Coarser files are interpolated, power-only files flagged")
{
    std::istringstream in("beam_id,angle_deg,mag_db\n"
                          "4,-90,0\n4,-89,0\n4,-88,0\n"
                          "5,-90,-3\n5,-89,-3\n5,-88,-3\n");
    const auto g = AngleGrid(-90.0, -88.0, 0.5);
    const auto cb = read_codebook(in, g);
    CHECK(cb.power_only);
    REQUIRE(cb.size() == 2);
    CHECK(cb.beams[0].beam_id == 4);
    CHECK(*cb.find(5) == 1);
    CHECK_FALSE(cb.find(6).has_value());
    CHECK(10.0 * std::log10(std::norm(cb.beams[1].gains[1]) / std::norm(cb.beams[0].gains[1])) ==
          Catch::Approx(-3.0).margin(1e-9));
}

TEST_CASE("Malformed codebook files")
{
    const AngleGrid g;
    const auto parse_line = [&](const std::string &text) -> std::size_t {
        std::istringstream in(text);
        try
        {
            read_codebook(in, g);
        }
        catch (const ParseError &e)
        {
            return e.line();
        }
        return 0;
    };
    CHECK(parse_line("") == 1);
    CHECK(parse_line("id,angle,gain\n") == 1);
    CHECK(parse_line("beam_id,angle_deg,mag_db,phase_deg\n") > 0);
    CHECK(parse_line("beam_id,angle_deg,mag_db,phase_deg\n1,-90,0,0\n1,-89,x,0\n") == 3);
    CHECK(parse_line("beam_id,angle_deg,mag_db,phase_deg\n1,-90,0,0\n1,-91,0,0\n") == 3);
    CHECK(parse_line("beam_id,angle_deg,mag_db,phase_deg\n1,-90,0\n") == 2);

    // covers only half the grid
    std::ostringstream f;
    f << "beam_id,angle_deg,mag_db,phase_deg\n";
    for (int a = -90; a <= 0; ++a)
        f << "1," << a << ",0,0\n";
    std::istringstream in(f.str());
    CHECK_THROWS_AS(read_codebook(in, g), CoverageError);
}

TEST_CASE("save/load round trip is text-identical")
{
    // two beams with known values; peak power gain already at 15 dB
    const auto g = AngleGrid(-2.0, 2.0, 1.0);
    std::ostringstream f;
    f << "beam_id,angle_deg,mag_db,phase_deg\n";
    const double mags[2][5] = {{15.0, 12.5, 3.25, -7.125, 0.5}, {-1.0, 2.0, 9.875, 14.0, 11.0}};
    const double phases[2][5] = {{0.0, 45.5, -90.25, 179.0, -179.0}, {10.0, -20.0, 30.0, -40.0, 50.0}};
    char buf[128];
    for (int b = 0; b < 2; ++b)
        for (int i = 0; i < 5; ++i)
        {
            std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%.6f\n", b + 1, g[static_cast<std::size_t>(i)],
                          mags[b][i], phases[b][i]);
            f << buf;
        }
    std::istringstream in(f.str());
    const auto cb = read_codebook(in, g);
    CHECK(to_csv(cb) == f.str());

    const auto tmp = std::filesystem::temp_directory_path() / "mmaoa_test_codebook.csv";
    save_codebook(tmp, cb);
    const auto again = load_codebook(tmp, g);
    CHECK(to_csv(again) == f.str());
    std::filesystem::remove(tmp);
}

TEST_CASE("Normalization is idempotent")
{
    testgen::Gen gen(5);
    auto cb = gen.random_codebook(4, AngleGrid(-30.0, 30.0, 1.0));
    normalize(cb, 15.0);
    const auto once = cb;
    normalize(cb, 15.0);
    for (std::size_t b = 0; b < cb.size(); ++b)
        for (std::size_t i = 0; i < cb.grid.size(); ++i)
            CHECK(std::abs(cb.beams[b].gains[i] - once.beams[b].gains[i]) <= 1e-14 * std::abs(once.beams[b].gains[i]));
    CHECK(max_power_gain_db(cb) == Catch::Approx(15.0).epsilon(1e-12));
}

TEST_CASE("synth_codebook determinism and structure")
{
    const AngleGrid g;
    const auto a = synth_codebook(16, 2, 32, g, 9);
    const auto b = synth_codebook(16, 2, 32, g, 9);
    const auto c = synth_codebook(16, 2, 32, g, 10);
    CHECK(to_csv(a) == to_csv(b));
    CHECK(to_csv(a) != to_csv(c));
    REQUIRE(a.size() == 32);
    CHECK(a.beams.front().beam_id == 1);
    CHECK(a.beams.back().beam_id == 32);
    CHECK(max_power_gain_db(a) == Catch::Approx(15.0).epsilon(1e-12));
    CHECK_NOTHROW(a.validate());

    CHECK_THROWS_AS(synth_codebook(1, 2, 32, g, 1), std::invalid_argument);
    CHECK_THROWS_AS(synth_codebook(8, 5, 32, g, 1), std::invalid_argument);
    CHECK_THROWS_AS(synth_codebook(8, 2, 1, g, 1), std::invalid_argument);
}

TEST_CASE("Broadside beam peaks at 0 deg")
{
    const AngleGrid g;
    const auto cb = synth_codebook(8, 4, 9, g, 3);
    REQUIRE(synth_steering_deg(4, 9, g) == Catch::Approx(0.0).margin(1e-12));
    const auto &beam = cb.beams[4];
    const double at_zero = std::abs(beam.gains[g.nearest_index(0.0)]);
    for (const auto &x : beam.gains)
        CHECK(std::abs(x) <= at_zero + 1e-12);
}

TEST_CASE("Unquantized beams point at their steering directions")
{
    const AngleGrid g;
    const int n_beams = 16;
    const auto cb = synth_codebook(16, kUnquantizedPhase, n_beams, g, 1);
    for (int i = 0; i < n_beams; ++i)
    {
        const auto &p = cb.beams[static_cast<std::size_t>(i)].gains;
        std::size_t best = 0;
        for (std::size_t k = 0; k < p.size(); ++k)
            if (std::abs(p[k]) > std::abs(p[best]))
                best = k;
        INFO("beam " << i + 1);
        CHECK(std::abs(g[best] - synth_steering_deg(i, n_beams, g)) <= g.resolution());
    }
}

TEST_CASE("2-bit codebook side-lobe regression")
{
    const AngleGrid g;
    const auto cb = synth_codebook(16, 2, 32, g, 1);
    double worst = -1e9;
    for (const auto &b : cb.beams)
        worst = std::max(worst, relative_sidelobe_db(b));
    CHECK(worst >= -6.0);
    // frozen from the generated codebook
    CHECK(relative_sidelobe_db(cb.beams[8]) == Catch::Approx(-9.087261).margin(1e-5));
    CHECK(relative_sidelobe_db(cb.beams[16]) == Catch::Approx(-6.116186).margin(1e-5));
}

TEST_CASE("synthetic ULA cannot tell the two endfire directions apart")
{
    const AngleGrid grid;
    for (int bits : {2, 3, 4})
    {
        const auto cb = synth_codebook(8, bits, 16, grid, 5, 7.0);
        for (const auto &b : cb.beams)
            CHECK(std::abs(b.gains.front()) == Catch::Approx(std::abs(b.gains.back())).epsilon(1e-12));
    }
}
