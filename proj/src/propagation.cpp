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

#include "mmaoa/propagation.hpp"

#include "json.hpp"

#include <algorithm>
#include <fstream>
#include <istream>

namespace mmaoa
{
    namespace
    {
        constexpr double kGeomTol = 1e-9; // m

        struct Surface
        {
            Vec2 a, b;
            Vec2 normal; // unit normal pointing to the reflecting side
            double dielectric = 2.0;
            int object = -1; // -1: room wall
        };

        Vec2 mirror(Vec2 p, const Surface &s)
        {
            const double d = (p - s.a).dot(s.normal);
            return p - s.normal * (2.0 * d);
        }

        double side(Vec2 p, const Surface &s) { return (p - s.a).dot(s.normal); }

        // Intersection of segment p->q with the surface segment. Returns the point if it lies on
        // the surface (inclusive) and strictly inside p->q.
        std::optional<Vec2> hit(Vec2 p, Vec2 q, const Surface &s)
        {
            const Vec2 d = q - p;
            const Vec2 e = s.b - s.a;
            const double den = d.cross(e);
            if (std::abs(den) < 1e-15)
                return std::nullopt;
            const Vec2 ap = s.a - p;
            const double u = ap.cross(e) / den; // along p->q
            const double t = ap.cross(d) / den; // along a->b
            const double tol_t = kGeomTol / e.norm();
            if (t < -tol_t || t > 1.0 + tol_t)
                return std::nullopt;
            const double tol_u = kGeomTol / d.norm();
            if (u <= tol_u || u >= 1.0 - tol_u)
                return std::nullopt;
            return p + d * u;
        }

        bool segments_intersect(Vec2 p1, Vec2 p2, Vec2 q1, Vec2 q2)
        {
            const auto orient = [](Vec2 a, Vec2 b, Vec2 c) { return (b - a).cross(c - a); };
            const double d1 = orient(q1, q2, p1);
            const double d2 = orient(q1, q2, p2);
            const double d3 = orient(p1, p2, q1);
            const double d4 = orient(p1, p2, q2);
            if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
                return true;
            const auto on_seg = [](Vec2 a, Vec2 b, Vec2 c) {
                return std::min(a.x, b.x) - 1e-12 <= c.x && c.x <= std::max(a.x, b.x) + 1e-12 &&
                       std::min(a.y, b.y) - 1e-12 <= c.y && c.y <= std::max(a.y, b.y) + 1e-12;
            };
            if (d1 == 0 && on_seg(q1, q2, p1))
                return true;
            if (d2 == 0 && on_seg(q1, q2, p2))
                return true;
            if (d3 == 0 && on_seg(p1, p2, q1))
                return true;
            if (d4 == 0 && on_seg(p1, p2, q2))
                return true;
            return false;
        }

        // Segment u->v passes through an object footprint. Endpoints are pulled in slightly so that
        // a leg ending on a reflecting face does not count as blocked by that face.
        bool blocked(Vec2 u, Vec2 v, const std::vector<SceneObject> &objects)
        {
            const Vec2 d = v - u;
            const double len = d.norm();
            if (len <= 2.0 * kGeomTol)
                return false;
            const Vec2 shrink = d * (1e-7 / len);
            const Vec2 p = u + shrink, q = v - shrink;
            for (const auto &obj : objects)
            {
                const auto c = obj.corners();
                for (std::size_t i = 0; i < c.size(); ++i)
                    if (segments_intersect(p, q, c[i], c[(i + 1) % c.size()]))
                        return true;
                if (obj.contains((p + q) * 0.5))
                    return true;
            }
            return false;
        }

        std::vector<Surface> build_surfaces(const Scenario &sc)
        {
            std::vector<Surface> out;
            const double hx = sc.room_length / 2.0, hy = sc.room_width / 2.0;
            const Vec2 rc[4] = {{-hx, -hy}, {hx, -hy}, {hx, hy}, {-hx, hy}};
            for (int i = 0; i < 4; ++i)
            {
                const Vec2 a = rc[i], b = rc[(i + 1) % 4];
                const Vec2 e = b - a;
                const double n = e.norm();
                out.push_back({a, b, Vec2{-e.y / n, e.x / n}, sc.wall_dielectric, -1});
            }
            for (std::size_t k = 0; k < sc.objects.size(); ++k)
            {
                const auto c = sc.objects[k].corners();
                for (std::size_t i = 0; i < c.size(); ++i)
                {
                    const Vec2 a = c[i], b = c[(i + 1) % c.size()];
                    const Vec2 e = b - a;
                    const double n = e.norm();
                    out.push_back({a, b, Vec2{e.y / n, -e.x / n}, sc.objects[k].dielectric, static_cast<int>(k)});
                }
            }
            return out;
        }

        bool inside_room(Vec2 p, const Scenario &sc)
        {
            return std::abs(p.x) <= sc.room_length / 2.0 + kGeomTol && std::abs(p.y) <= sc.room_width / 2.0 + kGeomTol;
        }

        double direction_deg(Vec2 from, Vec2 to) { return rad2deg(std::atan2(to.y - from.y, to.x - from.x)); }

        // Specular path for a given sequence of reflecting surfaces, if it exists and is unblocked
        std::optional<Path> specular_path(const Scenario &sc, const std::vector<Surface> &surfaces,
                                          const std::vector<std::size_t> &seq)
        {
            const std::size_t k = seq.size();
            std::vector<Vec2> images(k + 1);
            images[0] = sc.tx;
            for (std::size_t j = 0; j < k; ++j)
                images[j + 1] = mirror(images[j], surfaces[seq[j]]);

            // points[0] = tx, points[1..k] = reflection points, points[k+1] = rx
            std::vector<Vec2> points(k + 2);
            points[0] = sc.tx;
            points[k + 1] = sc.rx;
            Vec2 q = sc.rx;
            for (std::size_t j = k; j >= 1; --j)
            {
                const auto p = hit(images[j], q, surfaces[seq[j - 1]]);
                if (!p)
                    return std::nullopt;
                points[j] = *p;
                q = *p;
            }

            cdouble gamma = 1.0;
            for (std::size_t j = 1; j <= k; ++j)
            {
                const Surface &s = surfaces[seq[j - 1]];
                if (side(points[j - 1], s) <= kGeomTol || side(points[j + 1], s) <= kGeomTol)
                    return std::nullopt;
                if (!inside_room(points[j], sc))
                    return std::nullopt;
                const Vec2 in = points[j - 1] - points[j];
                const double cos_i = std::clamp(std::abs(in.dot(s.normal)) / in.norm(), 0.0, 1.0);
                gamma *= fresnel_perpendicular(std::acos(cos_i), s.dielectric);
            }

            double length = 0.0;
            for (std::size_t j = 0; j + 1 < points.size(); ++j)
            {
                const double leg = (points[j + 1] - points[j]).norm();
                if (leg <= kGeomTol)
                    return std::nullopt;
                if (blocked(points[j], points[j + 1], sc.objects))
                    return std::nullopt;
                length += leg;
            }

            const double lambda = kSpeedOfLight / kCarrierHz;
            Path path;
            path.length = length;
            path.tau = length / kSpeedOfLight;
            path.alpha = gamma * (lambda / (4.0 * kPi * length)) * std::polar(1.0, -2.0 * kPi * length / lambda);
            path.aod = wrap_deg(direction_deg(sc.tx, points[1]) - sc.tx_boresight_deg);
            path.aoa = wrap_deg(direction_deg(sc.rx, points[k]) - sc.rx_boresight_deg);
            path.order = static_cast<int>(k);
            return path;
        }

        std::vector<double> json_numbers(const nlohmann::json &j, const char *field, std::size_t n)
        {
            if (!j.is_array() || j.size() != n)
                throw ParseError(std::string("scenario: field '") + field + "' must be an array of " + std::to_string(n) + " numbers");
            std::vector<double> out;
            for (const auto &v : j)
            {
                if (!v.is_number())
                    throw ParseError(std::string("scenario: field '") + field + "' must contain numbers");
                out.push_back(v.get<double>());
            }
            return out;
        }
    }

    std::vector<Vec2> SceneObject::corners() const
    {
        const double c = std::cos(deg2rad(orientation_deg)), s = std::sin(deg2rad(orientation_deg));
        const Vec2 u{c, s}, v{-s, c};
        const Vec2 ctr{x, y};
        const double hl = length / 2.0, hw = width / 2.0;
        return {ctr - u * hl - v * hw, ctr + u * hl - v * hw, ctr + u * hl + v * hw, ctr - u * hl + v * hw};
    }

    bool SceneObject::contains(Vec2 p) const
    {
        const double c = std::cos(deg2rad(orientation_deg)), s = std::sin(deg2rad(orientation_deg));
        const Vec2 d = p - Vec2{x, y};
        const double a = d.x * c + d.y * s;
        const double b = -d.x * s + d.y * c;
        return std::abs(a) < length / 2.0 && std::abs(b) < width / 2.0;
    }

    void Scenario::validate() const
    {
        if (!(room_length > 0.0) || !(room_width > 0.0))
            throw std::invalid_argument("scenario: room dimensions must be positive");
        if (!(wall_dielectric > 1.0))
            throw std::invalid_argument("scenario: wall dielectric constant must be > 1");
        const auto in_room = [&](Vec2 p) {
            return std::abs(p.x) <= room_length / 2.0 + kGeomTol && std::abs(p.y) <= room_width / 2.0 + kGeomTol;
        };
        if (!in_room(tx))
            throw GeometryError("scenario: transmitter outside the room");
        if (!in_room(rx))
            throw GeometryError("scenario: receiver outside the room");
        for (std::size_t i = 0; i < objects.size(); ++i)
        {
            const auto &o = objects[i];
            if (!(o.length > 0.0) || !(o.width > 0.0))
                throw std::invalid_argument("scenario: object " + std::to_string(i) + " has non-positive size");
            if (!(o.dielectric > 1.0))
                throw std::invalid_argument("scenario: object " + std::to_string(i) + " dielectric must be > 1");
            if (!in_room({o.x, o.y}))
                throw GeometryError("scenario: object " + std::to_string(i) + " centre outside the room");
            if (o.contains(tx))
                throw GeometryError("scenario: transmitter inside object " + std::to_string(i));
            if (o.contains(rx))
                throw GeometryError("scenario: receiver inside object " + std::to_string(i));
        }
    }

    Scenario read_scenario(std::istream &in)
    {
        nlohmann::json j;
        try
        {
            j = nlohmann::json::parse(in);
        }
        catch (const nlohmann::json::parse_error &e)
        {
            throw ParseError(std::string("scenario: ") + e.what());
        }
        if (!j.is_object())
            throw ParseError("scenario: top level must be an object");

        const auto require = [&](const char *f) -> const nlohmann::json & {
            if (!j.contains(f))
                throw ParseError(std::string("scenario: missing field '") + f + "'");
            return j.at(f);
        };
        const auto number = [&](const char *f) {
            const auto &v = require(f);
            if (!v.is_number())
                throw ParseError(std::string("scenario: field '") + f + "' must be a number");
            return v.get<double>();
        };

        Scenario sc;
        const auto room = json_numbers(require("room"), "room", 2);
        sc.room_length = room[0];
        sc.room_width = room[1];
        const auto tx = json_numbers(require("tx"), "tx", 2);
        const auto rx = json_numbers(require("rx"), "rx", 2);
        sc.tx = {tx[0], tx[1]};
        sc.rx = {rx[0], rx[1]};
        sc.tx_boresight_deg = number("tx_boresight_deg");
        sc.rx_boresight_deg = number("rx_boresight_deg");
        sc.wall_dielectric = number("wall_dielectric");
        const auto &objs = require("objects");
        if (!objs.is_array())
            throw ParseError("scenario: field 'objects' must be an array");
        for (const auto &o : objs)
        {
            const auto v = json_numbers(o, "objects[]", 6);
            sc.objects.push_back({v[0], v[1], v[2], v[3], v[4], v[5]});
        }
        sc.validate();
        return sc;
    }

    Scenario load_scenario(const std::filesystem::path &path)
    {
        std::ifstream in(path);
        if (!in)
            throw std::runtime_error("load_scenario: cannot open " + path.string());
        return read_scenario(in);
    }

    std::string scenario_to_json(const Scenario &sc)
    {
        nlohmann::ordered_json j;
        j["room"] = {sc.room_length, sc.room_width};
        j["objects"] = nlohmann::ordered_json::array();
        for (const auto &o : sc.objects)
            j["objects"].push_back({o.x, o.y, o.length, o.width, o.orientation_deg, o.dielectric});
        j["tx"] = {sc.tx.x, sc.tx.y};
        j["rx"] = {sc.rx.x, sc.rx.y};
        j["tx_boresight_deg"] = sc.tx_boresight_deg;
        j["rx_boresight_deg"] = sc.rx_boresight_deg;
        j["wall_dielectric"] = sc.wall_dielectric;
        return j.dump(2) + "\n";
    }

    void PathSet::check_delay_spread()
    {
        if (paths.empty())
            return;
        const auto [lo, hi] = std::minmax_element(paths.begin(), paths.end(),
                                                  [](const Path &a, const Path &b) { return a.tau < b.tau; });
        if (hi->tau - lo->tau > 128.0 * kChipTime)
            warnings.push_back("delay spread exceeds 128 chips; zero-correlation-zone estimates may be corrupted");
    }

    double fresnel_perpendicular(double incidence_rad, double dielectric)
    {
        const double c = std::cos(incidence_rad);
        const double s2 = std::sin(incidence_rad) * std::sin(incidence_rad);
        const double root = std::sqrt(dielectric - s2);
        return (c - root) / (c + root);
    }

    PathSet trace_paths(const Scenario &scenario)
    {
        scenario.validate();
        const auto surfaces = build_surfaces(scenario);

        PathSet out;
        if (auto p = specular_path(scenario, surfaces, {}))
            out.paths.push_back(*p);
        for (std::size_t i = 0; i < surfaces.size(); ++i)
            if (auto p = specular_path(scenario, surfaces, {i}))
                out.paths.push_back(*p);
        for (std::size_t i = 0; i < surfaces.size(); ++i)
            for (std::size_t j = 0; j < surfaces.size(); ++j)
                if (i != j)
                    if (auto p = specular_path(scenario, surfaces, {i, j}))
                        out.paths.push_back(*p);

        std::stable_sort(out.paths.begin(), out.paths.end(), [](const Path &a, const Path &b) { return a.tau < b.tau; });
        for (std::size_t i = 0; i < out.paths.size(); ++i)
            out.paths[i].cluster_id = static_cast<int>(i);
        out.check_delay_spread();
        return out;
    }

    PathSet blur_clusters(const PathSet &paths, const ClusterConfig &config, std::uint64_t seed)
    {
        if (config.n_rays < 0)
            throw std::invalid_argument("blur_clusters: n_rays must be >= 0");
        PathSet out;
        out.carrier_hz = paths.carrier_hz;
        out.bandwidth_hz = paths.bandwidth_hz;
        out.warnings = paths.warnings;
        if (config.n_rays == 0)
        {
            out.paths = paths.paths;
            return out;
        }

        std::mt19937_64 rng(seed);
        std::exponential_distribution<double> spacing(1.0 / config.ray_spacing_ns);
        std::exponential_distribution<double> laplace_mag(1.0 / config.sigma_deg);
        std::bernoulli_distribution coin(0.5);
        std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
        const auto laplace = [&] { return coin(rng) ? laplace_mag(rng) : -laplace_mag(rng); };

        const int n_pre = config.n_rays / 2;
        const double intra_fraction = std::pow(10.0, -config.k_factor_db / 10.0);

        for (const auto &central : paths.paths)
        {
            out.paths.push_back(central);

            std::vector<double> excess_ns(static_cast<std::size_t>(config.n_rays));
            double acc = 0.0;
            for (int r = 0; r < n_pre; ++r)
            {
                acc += spacing(rng);
                excess_ns[static_cast<std::size_t>(r)] = -acc;
            }
            acc = 0.0;
            for (int r = n_pre; r < config.n_rays; ++r)
            {
                acc += spacing(rng);
                excess_ns[static_cast<std::size_t>(r)] = acc;
            }

            std::vector<double> w(excess_ns.size());
            double wsum = 0.0;
            for (std::size_t r = 0; r < w.size(); ++r)
            {
                w[r] = std::exp(-std::abs(excess_ns[r]) / config.gamma_ns);
                wsum += w[r];
            }

            const double central_power = std::norm(central.alpha);
            for (std::size_t r = 0; r < w.size(); ++r)
            {
                Path ray;
                ray.alpha = std::polar(std::sqrt(central_power * intra_fraction * w[r] / wsum), phase(rng));
                const double dt = std::max(excess_ns[r] * 1e-9, -0.5 * central.tau);
                ray.tau = central.tau + dt;
                ray.aoa = wrap_deg(central.aoa + laplace());
                ray.aod = wrap_deg(central.aod + laplace());
                ray.order = central.order;
                ray.cluster_id = central.cluster_id;
                ray.length = 0.0;
                out.paths.push_back(ray);
            }
        }
        return out;
    }

    int tap_index(double tau, double chip_time)
    {
        return static_cast<int>(std::ceil(tau / chip_time - 1e-9));
    }

    std::map<int, cdouble> channel_taps(const PathSet &paths, const BeamPattern &tx_beam, const BeamPattern &rx_beam,
                                        const AngleGrid &grid, double tx_power_dbm)
    {
        const double amp = std::sqrt(dbm_to_watts(tx_power_dbm));
        std::map<int, cdouble> taps;
        for (const auto &p : paths.paths)
        {
            const cdouble h = amp * p.alpha * gain_at(tx_beam, grid, p.aod) * gain_at(rx_beam, grid, p.aoa);
            taps[tap_index(p.tau)] += h;
        }
        return taps;
    }

    std::size_t frame_length(const std::map<int, cdouble> &taps, std::size_t preamble_length)
    {
        std::size_t margin = 256;
        if (!taps.empty())
            margin = std::max(margin, static_cast<std::size_t>(std::max(0, taps.rbegin()->first)) + 1);
        return preamble_length + margin;
    }

    ComplexSequence synthesize_frame(const std::map<int, cdouble> &taps, const ComplexSequence &preamble,
                                     std::size_t length)
    {
        ComplexSequence r;
        r.sample_period = preamble.sample_period;
        r.values.assign(length, cdouble(0.0, 0.0));
        for (const auto &[d, h] : taps)
        {
            if (d < 0)
                throw std::invalid_argument("synthesize_frame: negative tap index");
            const auto off = static_cast<std::size_t>(d);
            for (std::size_t n = 0; n < preamble.size() && n + off < length; ++n)
                r.values[n + off] += h * preamble.values[n];
        }
        return r;
    }

    std::vector<cdouble> unit_noise(std::size_t length, std::uint64_t seed)
    {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> nd(0.0, std::sqrt(0.5));
        std::vector<cdouble> z(length);
        for (auto &v : z)
        {
            const double re = nd(rng);
            const double im = nd(rng);
            v = {re, im};
        }
        return z;
    }

    ReceivedFrame apply_channel(const PathSet &paths, const BeamPattern &tx_beam, const BeamPattern &rx_beam,
                                const AngleGrid &grid, const ComplexSequence &preamble, double tx_power_dbm,
                                std::optional<double> noise_power_dbm, std::uint64_t seed)
    {
        const auto taps = channel_taps(paths, tx_beam, rx_beam, grid, tx_power_dbm);
        ReceivedFrame f;
        f.samples = synthesize_frame(taps, preamble, frame_length(taps, preamble.size()));
        f.rx_beam_id = rx_beam.beam_id;
        f.noise_power_dbm = noise_power_dbm;
        f.seed = seed;
        if (noise_power_dbm)
        {
            const double sigma = std::sqrt(dbm_to_watts(*noise_power_dbm));
            const auto z = unit_noise(f.samples.size(), seed);
            for (std::size_t n = 0; n < z.size(); ++n)
                f.samples.values[n] += sigma * z[n];
        }
        return f;
    }
}
