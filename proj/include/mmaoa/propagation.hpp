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

#include "mmaoa/beams.hpp"
#include "mmaoa/common.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace mmaoa
{
    struct Vec2
    {
        double x = 0.0;
        double y = 0.0;

        Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
        Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
        Vec2 operator*(double s) const { return {x * s, y * s}; }
        double dot(Vec2 o) const { return x * o.x + y * o.y; }
        double cross(Vec2 o) const { return x * o.y - y * o.x; }
        double norm() const { return std::hypot(x, y); }
        bool operator==(const Vec2 &) const = default;
    };

    // Rectangular obstacle; (x, y) is the centre, `length` runs along the orientation axis
    struct SceneObject
    {
        double x = 0.0, y = 0.0;       // m
        double length = 0.0, width = 0.0; // m
        double orientation_deg = 0.0;
        double dielectric = 3.24;

        std::vector<Vec2> corners() const; // counter-clockwise
        bool contains(Vec2 p) const;
        bool operator==(const SceneObject &) const = default;
    };

    // Rectangular room centred at the origin
    struct Scenario
    {
        double room_length = 4.0; // m, along x
        double room_width = 3.0;  // m, along y
        std::vector<SceneObject> objects;
        Vec2 tx, rx;
        double tx_boresight_deg = 0.0;
        double rx_boresight_deg = 180.0;
        double wall_dielectric = 2.0;

        // Throws GeometryError / std::invalid_argument when invariants are violated
        void validate() const;
        bool operator==(const Scenario &) const = default;
    };

    // JSON: {room:[L,W], objects:[[x,y,len,wid,orient_deg,eps],...], tx:[x,y], rx:[x,y],
    //        tx_boresight_deg, rx_boresight_deg, wall_dielectric}
    Scenario read_scenario(std::istream &in);
    Scenario load_scenario(const std::filesystem::path &path);
    std::string scenario_to_json(const Scenario &scenario);

    struct Path
    {
        cdouble alpha;      // complex gain, free-space loss times reflection coefficients and carrier phase
        double tau = 0.0;   // s
        double aod = 0.0;   // deg, relative to tx boresight
        double aoa = 0.0;   // deg, relative to rx boresight
        int order = 0;      // number of reflections
        int cluster_id = 0;
        double length = 0.0; // m, geometric length of the central ray (0 for intra-cluster rays)
    };

    struct PathSet
    {
        std::vector<Path> paths;
        double carrier_hz = kCarrierHz;
        double bandwidth_hz = kBandwidthHz;
        std::vector<std::string> warnings;

        // Adds the delay-spread warning if max(tau) - min(tau) > 128 chips
        void check_delay_spread();
    };

    // LOS plus all unblocked first- and second-order specular reflections off walls and object faces,
    // sorted by delay. Reflection coefficients follow the perpendicular-polarisation Fresnel formula.
    PathSet trace_paths(const Scenario &scenario);

    // Perpendicular-polarisation Fresnel reflection coefficient; incidence measured from the surface normal
    double fresnel_perpendicular(double incidence_rad, double dielectric);

    // Intra-cluster blur. n_rays rays per cluster, the first half pre-cursor (before the central ray) and
    // the rest post-cursor. Ray powers decay as exp(-|excess delay| / gamma_ns) and are scaled so the
    // cluster's intra-ray power is the central-ray power times 10^(-k_factor_db/10). Excess delays are
    // cumulative exponential arrivals with mean spacing ray_spacing_ns; angular offsets are Laplacian.
    // These defaults are placeholders for the TGad intra-cluster parameters.
    struct ClusterConfig
    {
        int n_rays = 8;
        double gamma_ns = 4.5;
        double sigma_deg = 5.0;
        double k_factor_db = 10.0;
        double ray_spacing_ns = 1.0;

        // Total cluster power divided by central-ray power
        double power_factor() const { return n_rays > 0 ? 1.0 + std::pow(10.0, -k_factor_db / 10.0) : 1.0; }
    };

    PathSet blur_clusters(const PathSet &paths, const ClusterConfig &config, std::uint64_t seed);

    // Delay in chips, ceil(tau / Tc)
    int tap_index(double tau, double chip_time = kChipTime);

    // Beam-filtered channel taps: h_k = sqrt(P_t) * alpha_k * G_tx(aod_k) * G_rx(aoa_k), summed per ceiled tap.
    // Throws std::domain_error if a path direction is outside the grid.
    std::map<int, cdouble> channel_taps(const PathSet &paths, const BeamPattern &tx_beam, const BeamPattern &rx_beam,
                                        const AngleGrid &grid, double tx_power_dbm);

    // Samples needed so every tap in `taps` keeps the full preamble: preamble + max(256, max tap + 1)
    std::size_t frame_length(const std::map<int, cdouble> &taps, std::size_t preamble_length);

    // r[n] = sum_k h_k s[n - d_k]
    ComplexSequence synthesize_frame(const std::map<int, cdouble> &taps, const ComplexSequence &preamble,
                                     std::size_t length);

    // Unit-variance circular complex Gaussian samples, a pure function of seed
    std::vector<cdouble> unit_noise(std::size_t length, std::uint64_t seed);

    struct ReceivedFrame
    {
        ComplexSequence samples;
        int rx_beam_id = 0;
        std::optional<double> noise_power_dbm; // nullopt: noiseless
        std::uint64_t seed = 0;
    };

    ReceivedFrame apply_channel(const PathSet &paths, const BeamPattern &tx_beam, const BeamPattern &rx_beam,
                                const AngleGrid &grid, const ComplexSequence &preamble, double tx_power_dbm,
                                std::optional<double> noise_power_dbm, std::uint64_t seed);
}
