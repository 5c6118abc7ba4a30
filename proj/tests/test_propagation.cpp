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
#include "mmaoa/harness.hpp"
#include "mmaoa/propagation.hpp"
#include "support/generators.hpp"

#include <set>
#include <sstream>

using namespace mmaoa;

namespace
{
    Scenario empty_room()
    {
        Scenario s;
        s.tx = {-2.0, 0.0};
        s.rx = {2.0, 0.0};
        s.tx_boresight_deg = 0.0;
        s.rx_boresight_deg = 180.0;
        return s;
    }

    double cluster_power(const PathSet &ps, int cluster)
    {
        double p = 0.0;
        for (const auto &x : ps.paths)
            if (x.cluster_id == cluster)
                p += std::norm(x.alpha);
        return p;
    }
}

TEST_CASE("Empty room line of sight")
{
    const auto ps = trace_paths(empty_room());
    REQUIRE_FALSE(ps.paths.empty());
    const auto &los = ps.paths.front();
    CHECK(los.order == 0);
    CHECK(los.aoa == Catch::Approx(0.0).margin(1e-9));
    CHECK(los.aod == Catch::Approx(0.0).margin(1e-9));
    CHECK(los.tau == Catch::Approx(4.0 / kSpeedOfLight).epsilon(1e-12));
    CHECK(los.tau == Catch::Approx(13.34e-9).epsilon(1e-3));
    CHECK(tap_index(los.tau) == 24);

    const double lambda = kSpeedOfLight / kCarrierHz;
    CHECK(std::abs(los.alpha) == Catch::Approx(lambda / (4.0 * kPi * 4.0)).epsilon(1e-12));
    CHECK(ps.carrier_hz == 60.48e9);
    CHECK(ps.bandwidth_hz == 1.76e9);
}

TEST_CASE("Empty room first-order side-wall pair is mirror symmetric")
{
    const auto ps = trace_paths(empty_room());
    const double expect = rad2deg(std::atan2(1.5, 2.0));
    const Path *up = nullptr;
    const Path *down = nullptr;
    for (const auto &p : ps.paths)
    {
        if (p.order != 1)
            continue;
        if (std::abs(p.aoa - expect) < 1e-9)
            up = &p;
        if (std::abs(p.aoa + expect) < 1e-9)
            down = &p;
    }
    REQUIRE(up != nullptr);
    REQUIRE(down != nullptr);
    CHECK(std::abs(up->alpha) == Catch::Approx(std::abs(down->alpha)).epsilon(1e-12));
    CHECK(up->tau == Catch::Approx(5.0 / kSpeedOfLight).epsilon(1e-12));
    CHECK(up->aod == Catch::Approx(-up->aoa).margin(1e-9));

    // the reflection coefficient is the perpendicular Fresnel value at 53.13 deg incidence
    const double lambda = kSpeedOfLight / kCarrierHz;
    const double gamma = fresnel_perpendicular(std::atan2(2.0, 1.5), 2.0);
    CHECK(std::abs(up->alpha) == Catch::Approx(lambda / (4.0 * kPi * 5.0) * std::abs(gamma)).epsilon(1e-12));
}

TEST_CASE("Fresnel coefficient limits")
{
    CHECK(fresnel_perpendicular(0.0, 4.0) == Catch::Approx(-1.0 / 3.0));
    CHECK(fresnel_perpendicular(kPi / 2.0, 2.0) == Catch::Approx(-1.0));
    for (double th = 0.0; th < kPi / 2.0; th += 0.05)
        CHECK(std::abs(fresnel_perpendicular(th, 3.24)) < 1.0);
}

TEST_CASE("An object on the line of sight blocks it")
{
    auto s = empty_room();
    s.objects.push_back({0.0, 0.0, 0.4, 0.4, 0.0, 3.24});
    const auto ps = trace_paths(s);
    for (const auto &p : ps.paths)
        CHECK(p.order > 0);
    CHECK_FALSE(ps.paths.empty());
}

TEST_CASE("Endpoints inside an object are rejected")
{
    auto s = empty_room();
    s.objects.push_back({-1.9, 0.0, 0.4, 0.4, 0.0, 3.24});
    CHECK_THROWS_AS(trace_paths(s), GeometryError);
    auto t = empty_room();
    t.tx = {3.0, 0.0};
    CHECK_THROWS_AS(t.validate(), GeometryError);
    auto u = empty_room();
    u.wall_dielectric = 1.0;
    CHECK_THROWS_AS(u.validate(), std::invalid_argument);
}

TEST_CASE("Image method is reciprocal")
{
    for (const auto &s : {scenario_a(), scenario_b()})
    {
        auto swapped = s;
        std::swap(swapped.tx, swapped.rx);
        std::swap(swapped.tx_boresight_deg, swapped.rx_boresight_deg);
        const auto fwd = trace_paths(s);
        const auto rev = trace_paths(swapped);
        REQUIRE(fwd.paths.size() == rev.paths.size());

        std::multiset<long long> a, b;
        for (std::size_t i = 0; i < fwd.paths.size(); ++i)
        {
            a.insert(std::llround(fwd.paths[i].length * 1e9));
            b.insert(std::llround(rev.paths[i].length * 1e9));
        }
        CHECK(a == b);
        for (const auto &p : fwd.paths)
        {
            bool found = false;
            for (const auto &q : rev.paths)
                found = found || (std::abs(p.length - q.length) < 1e-9 && std::abs(wrap_deg(p.aoa - q.aod)) < 1e-6 &&
                                  std::abs(wrap_deg(p.aod - q.aoa)) < 1e-6 &&
                                  std::abs(std::abs(p.alpha) - std::abs(q.alpha)) <= 1e-12 * std::abs(p.alpha));
            CHECK(found);
        }
    }
}

TEST_CASE("Scenario A yields at least three dominant delays, sorted paths")
{
    const auto ps = trace_paths(scenario_a());
    for (std::size_t i = 1; i < ps.paths.size(); ++i)
        CHECK(ps.paths[i - 1].tau <= ps.paths[i].tau);
    for (const auto &p : ps.paths)
    {
        CHECK(std::abs(p.alpha) > 0.0);
        CHECK(p.tau > 0.0);
        CHECK(p.order <= 2);
    }
    CHECK(ps.warnings.empty());
}

TEST_CASE("Scenario JSON round trip")
{
    const auto s = scenario_b();
    std::istringstream in(scenario_to_json(s));
    const auto back = read_scenario(in);
    CHECK(back == s);

    std::istringstream bad(R"({"room":[4,3],"objects":[[0,0,1,1,0]],"tx":[-1,0],"rx":[1,0]})");
    CHECK_THROWS(read_scenario(bad));
}

TEST_CASE("Cluster blur contract")
{
    const auto base = trace_paths(empty_room());
    PathSet three;
    three.paths.assign(base.paths.begin(), base.paths.begin() + 3);

    ClusterConfig none;
    none.n_rays = 0;
    const auto same = blur_clusters(three, none, 1);
    REQUIRE(same.paths.size() == 3);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(same.paths[i].alpha == three.paths[i].alpha);

    const ClusterConfig def;
    const auto blurred = blur_clusters(three, def, 11);
    CHECK(blurred.paths.size() == 3u * static_cast<std::size_t>(1 + def.n_rays));
    for (const auto &p : three.paths)
        CHECK(cluster_power(blurred, p.cluster_id) ==
              Catch::Approx(std::norm(p.alpha) * def.power_factor()).epsilon(1e-12));

    ClusterConfig four;
    four.n_rays = 4;
    const auto s1 = blur_clusters(three, four, 1);
    const auto s2 = blur_clusters(three, four, 2);
    const auto s1b = blur_clusters(three, four, 1);
    bool differs = false;
    for (std::size_t i = 0; i < s1.paths.size(); ++i)
    {
        differs = differs || s1.paths[i].aoa != s2.paths[i].aoa;
        CHECK(s1.paths[i].aoa == s1b.paths[i].aoa);
        CHECK(s1.paths[i].tau > 0.0);
    }
    CHECK(differs);
    for (const auto &p : three.paths)
        CHECK(std::abs(cluster_power(s1, p.cluster_id) - cluster_power(s2, p.cluster_id)) <=
              1e-12 * cluster_power(s1, p.cluster_id));
}

TEST_CASE("tap_index uses the ceiling")
{
    CHECK(tap_index(0.0) == 0);
    CHECK(tap_index(kChipTime) == 1);
    CHECK(tap_index(1.01 * kChipTime) == 2);
    CHECK(tap_index(23.4 * kChipTime) == 24);
}

TEST_CASE("Single path frame is a shifted, scaled preamble")
{
    const auto pre = build_preamble();
    const AngleGrid g;
    PathSet ps;
    ps.paths.push_back({cdouble(1.0, 0.0), 10.2 * kChipTime, 0.0, 0.0, 0, 0, 0.0});
    const auto omni = quasi_omni(g);
    const auto f = apply_channel(ps, omni, omni, g, pre.samples, 30.0, std::nullopt, 0);
    REQUIRE(f.samples.size() == 1280 + 256);
    for (std::size_t n = 0; n < f.samples.size(); ++n)
    {
        const cdouble want = (n >= 11 && n < 11 + 1280) ? pre.samples[n - 11] : cdouble(0.0);
        REQUIRE(std::abs(f.samples[n] - want) < 1e-15);
    }
}

TEST_CASE("Resolvable delays land in distinct taps, colliding ones are summed")
{
    const AngleGrid g;
    const auto omni = quasi_omni(g);
    PathSet ps;
    ps.paths.push_back({cdouble(1.0, 0.0), 20.0 * kChipTime, 0.0, 0.0, 0, 0, 0.0});
    ps.paths.push_back({cdouble(0.5, 0.0), 20.0 * kChipTime + 0.57e-9, 0.0, 10.0, 1, 1, 0.0});
    ps.paths.push_back({cdouble(0.25, 0.0), 20.5 * kChipTime, 0.0, 20.0, 1, 2, 0.0});
    const auto taps = channel_taps(ps, omni, omni, g, 30.0);
    REQUIRE(taps.size() == 2);
    CHECK(std::abs(taps.at(20) - cdouble(1.0)) < 1e-12);
    CHECK(std::abs(taps.at(21) - cdouble(0.75)) < 1e-12);
}

TEST_CASE("Noiseless beam ratio identity and transmit-side cancellation")
{
    testgen::Gen gen(101);
    const AngleGrid g;
    const auto cb = synth_codebook(12, 2, 24, g, 4, 5.0);
    for (int trial = 0; trial < 50; ++trial)
    {
        PathSet ps;
        const auto delays = gen.distinct(gen.integer(1, 5), 0, 120);
        for (int d : delays)
            ps.paths.push_back({gen.polar(1e-5, 1e-3), (d - 0.5) * kChipTime, gen.uniform(-90.0, 90.0),
                                gen.uniform(-90.0, 90.0), 1, d, 0.0});
        const auto &l1 = cb.beams[static_cast<std::size_t>(gen.integer(0, 23))];
        const auto &l2 = cb.beams[static_cast<std::size_t>(gen.integer(0, 23))];
        const auto tx = cb.beams[static_cast<std::size_t>(gen.integer(0, 23))];
        const auto h1 = channel_taps(ps, tx, l1, g, 25.0);
        const auto h2 = channel_taps(ps, tx, l2, g, 25.0);
        for (const auto &p : ps.paths)
        {
            const int d = tap_index(p.tau);
            const double g1 = std::abs(gain_at(l1, g, p.aoa));
            const double g2 = std::abs(gain_at(l2, g, p.aoa));
            if (g2 < 1e-6 || std::abs(h2.at(d)) == 0.0)
                continue;
            CHECK(std::abs(h1.at(d)) / std::abs(h2.at(d)) == Catch::Approx(g1 / g2).epsilon(1e-9));
        }
    }
}

TEST_CASE("Swapping receive beams rescales every tap by the gain ratio")
{
    const AngleGrid g;
    const auto cb = synth_codebook(8, 3, 8, g, 2);
    const auto s = scenario_b();
    PathSet ps = trace_paths(s);
    PathSet inside;
    for (const auto &p : ps.paths)
        if (g.contains(p.aoa) && g.contains(p.aod))
            inside.paths.push_back(p);
    const auto omni = quasi_omni(g);
    const auto a = channel_taps(inside, omni, cb.beams[1], g, 25.0);
    const auto b = channel_taps(inside, omni, cb.beams[6], g, 25.0);
    std::map<int, int> count;
    for (const auto &p : inside.paths)
        ++count[tap_index(p.tau)];
    for (const auto &p : inside.paths)
    {
        const int d = tap_index(p.tau);
        if (count[d] != 1)
            continue;
        const cdouble ratio = gain_at(cb.beams[1], g, p.aoa) / gain_at(cb.beams[6], g, p.aoa);
        CHECK(std::abs(a.at(d) - ratio * b.at(d)) <= 1e-12 * std::abs(a.at(d)));
    }
}

TEST_CASE("Noise is seeded and has the configured power")
{
    const auto z1 = unit_noise(1000000, 42);
    const auto z2 = unit_noise(1000000, 42);
    const auto z3 = unit_noise(16, 43);
    CHECK(z1 == z2);
    CHECK(z1[0] != z3[0]);

    const auto pre = build_preamble();
    const AngleGrid g;
    const auto omni = quasi_omni(g);
    PathSet nothing;
    ComplexSequence longer;
    longer.values.assign(1000000 - 256, cdouble(0.0));
    const auto f = apply_channel(nothing, omni, omni, g, longer, 25.0, -40.0, 9);
    REQUIRE(f.samples.size() == 1000000);
    double p = 0.0;
    for (const auto &x : f.samples.values)
        p += std::norm(x);
    p /= static_cast<double>(f.samples.size());
    CHECK(std::abs(p / dbm_to_watts(-40.0) - 1.0) < 0.02);
}

TEST_CASE("Received energy of a single noiseless path")
{
    const auto pre = build_preamble();
    const AngleGrid g;
    const auto cb = synth_codebook(8, 2, 8, g, 1);
    PathSet ps;
    ps.paths.push_back({std::polar(3e-4, 0.7), 33.3 * kChipTime, 12.0, -21.5, 1, 0, 0.0});
    const double pt_dbm = 25.0;
    const auto f = apply_channel(ps, cb.beams[2], cb.beams[5], g, pre.samples, pt_dbm, std::nullopt, 0);
    double e = 0.0;
    for (const auto &x : f.samples.values)
        e += std::norm(x);
    const double gain = std::abs(ps.paths[0].alpha * gain_at(cb.beams[2], g, 12.0) * gain_at(cb.beams[5], g, -21.5));
    CHECK(e == Catch::Approx(gain * gain * 1280.0 * dbm_to_watts(pt_dbm)).epsilon(1e-9));
}
