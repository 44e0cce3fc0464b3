#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <queue>
#include <sstream>
#include <vector>

#include "faslab/grid.hpp"
#include "faslab/media.hpp"

namespace faslab {

template <int N>
struct RaySample {
    double t;
    Vec<N> x;
    Vec<N> v;
};

template <int N>
struct OmegaRay {
    Vec<N> omega{};
    Vec<N> a{};
    double tau = 1.0;
    double dt = 0;
    std::vector<RaySample<N>> samples;
    double max_unit_speed_drift = 0;
    bool ok = true;
    std::string failure;

    const RaySample<N>& back() const { return samples.back(); }
};

namespace detail {

// v' expanded from d/dt(g v)_k = 1/2 v^T d_k(g) v:
// v' = g^{-1} ( c - D v ), c_k = 1/2 v^T dg_k v, D = sum_j v_j dg_j.
template <int N>
inline Vec<N> geodesic_acceleration(const Medium<N>& medium, const Vec<N>& x,
                                    const Vec<N>& v) {
    if (medium.is_euclidean_at(x)) return Vec<N>::zero();
    const auto dg = medium.metric_derivatives(x);
    Vec<N> c;
    Mat<N> drift{};
    for (int k = 0; k < N; ++k) {
        c[k] = 0.5 * dot(v, dg[k] * v);
        drift += v[k] * dg[k];
    }
    return solve(medium.metric(x), c - drift * v);
}

template <int N>
inline void rk4_step(const Medium<N>& medium, double dt, Vec<N>& x, Vec<N>& v) {
    const Vec<N> k1x = v;
    const Vec<N> k1v = geodesic_acceleration(medium, x, v);
    const Vec<N> x2 = x + (0.5 * dt) * k1x, v2 = v + (0.5 * dt) * k1v;
    const Vec<N> k2x = v2;
    const Vec<N> k2v = geodesic_acceleration(medium, x2, v2);
    const Vec<N> x3 = x + (0.5 * dt) * k2x, v3 = v + (0.5 * dt) * k2v;
    const Vec<N> k3x = v3;
    const Vec<N> k3v = geodesic_acceleration(medium, x3, v3);
    const Vec<N> x4 = x + dt * k3x, v4 = v + dt * k3v;
    const Vec<N> k4x = v4;
    const Vec<N> k4v = geodesic_acceleration(medium, x4, v4);
    x += (dt / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
    v += (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
}

} // namespace detail

inline constexpr double kUnitSpeedTolAtMilli = 1e-6; // at dt = 1e-3

// Integrates the geodesic that starts on the plane x.omega = -1 at time -1
// with velocity omega. Fixed-step RK4; in regions where the medium evaluates
// exactly Euclidean the update degenerates to an exact straight-line step.
template <int N>
inline OmegaRay<N> integrate_omega_geodesic(const Medium<N>& medium, const Vec<N>& omega,
                                            const Vec<N>& a, double t_end, double dt) {
    if (std::abs(dot(a, omega) + 1.0) > 1e-12)
        throw Error("integrate_omega_geodesic: a must satisfy a.omega = -1");
    if (dt <= 0) throw Error("integrate_omega_geodesic: dt must be positive");
    if (t_end <= -1.0) throw Error("integrate_omega_geodesic: t_end must exceed -1");

    OmegaRay<N> ray;
    ray.omega = omega;
    ray.a = a;
    ray.dt = dt;
    const std::int64_t steps = static_cast<std::int64_t>(std::ceil((t_end + 1.0) / dt - 1e-12));
    ray.samples.reserve(static_cast<std::size_t>(steps) + 1);

    Vec<N> x = a, v = omega;
    double t = -1.0;
    ray.samples.push_back({t, x, v});
    const double tol = kUnitSpeedTolAtMilli;
    for (std::int64_t s = 0; s < steps; ++s) {
        const double step = std::min(dt, t_end - t);
        detail::rk4_step(medium, step, x, v);
        t = (s + 1 == steps) ? t_end : -1.0 + (s + 1) * dt;
        ray.samples.push_back({t, x, v});
        const double speed = std::sqrt(dot(v, medium.metric(x) * v));
        const double drift = std::abs(speed - 1.0);
        if (drift > ray.max_unit_speed_drift) ray.max_unit_speed_drift = drift;
        if (drift > 100.0 * tol) {
            ray.ok = false;
            std::ostringstream os;
            os << "unit-speed drift " << drift << " exceeds " << 100.0 * tol
               << " at t = " << t << " (integrator instability)";
            ray.failure = os.str();
            return ray;
        }
    }
    return ray;
}

// Covector lift xi(t) = -tau g(x) xdot and the worst null-condition residual
// |tau^2 - xi^T g^{-1} xi| along the ray.
template <int N>
struct BicharacteristicLift {
    double tau = 1.0;
    std::vector<Vec<N>> xi;
    double max_null_residual = 0;
};

template <int N>
inline BicharacteristicLift<N> lift_to_bicharacteristic(const Medium<N>& medium,
                                                        const OmegaRay<N>& ray, double tau) {
    if (tau == 0) throw Error("lift_to_bicharacteristic: tau must be nonzero");
    BicharacteristicLift<N> lift;
    lift.tau = tau;
    lift.xi.reserve(ray.samples.size());
    for (const auto& s : ray.samples) {
        const Mat<N> g = medium.metric(s.x);
        const Vec<N> xi = (-tau) * (g * s.v);
        lift.xi.push_back(xi);
        const double res = std::abs(tau * tau - dot(xi, inverse(g) * xi));
        lift.max_null_residual = std::max(lift.max_null_residual, res);
    }
    return lift;
}

// Position/velocity at arbitrary time within the integrated range: one RK4
// substep from the sample just before t (exact where the medium is Euclidean,
// O(dt^5) otherwise).
template <int N>
inline RaySample<N> ray_state_at(const Medium<N>& medium, const OmegaRay<N>& ray, double t) {
    if (ray.samples.empty()) throw Error("ray_state_at: empty ray");
    if (t <= ray.samples.front().t) return ray.samples.front();
    if (t >= ray.samples.back().t) return ray.samples.back();
    const double t0 = ray.samples.front().t;
    std::size_t i = static_cast<std::size_t>(std::floor((t - t0) / ray.dt));
    if (i >= ray.samples.size() - 1) i = ray.samples.size() - 2;
    while (ray.samples[i + 1].t < t && i + 2 < ray.samples.size()) ++i;
    while (ray.samples[i].t > t && i > 0) --i;
    RaySample<N> s = ray.samples[i];
    Vec<N> x = s.x, v = s.v;
    detail::rk4_step(medium, t - s.t, x, v);
    return {t, x, v};
}

template <int N>
struct CrossingRecord {
    int ray_id = -1;
    bool crossed = false;
    double t_star = 0;
    Vec<N> x_star{};
    Vec<N> velocity{};
    bool recrossed = false;
    bool outgoing = false; // velocity.omega > 0 at the crossing
};

// First time with x(t).omega = 1, located by bisection between bracketing
// samples to 1e-10 in t; any later sign change is flagged as a recross.
template <int N>
inline CrossingRecord<N> find_sigma_plus_crossing(const Medium<N>& medium,
                                                  const OmegaRay<N>& ray) {
    CrossingRecord<N> rec;
    const auto f = [&](const RaySample<N>& s) { return dot(s.x, ray.omega) - 1.0; };
    std::size_t bracket = 0;
    bool found = false;
    for (std::size_t i = 0; i + 1 < ray.samples.size(); ++i) {
        if (f(ray.samples[i]) < 0 && f(ray.samples[i + 1]) >= 0) {
            bracket = i;
            found = true;
            break;
        }
    }
    if (!found) return rec;

    double lo = ray.samples[bracket].t, hi = ray.samples[bracket + 1].t;
    while (hi - lo > 1e-10) {
        const double mid = 0.5 * (lo + hi);
        const RaySample<N> s = ray_state_at(medium, ray, mid);
        if (dot(s.x, ray.omega) - 1.0 < 0)
            lo = mid;
        else
            hi = mid;
    }
    const RaySample<N> s = ray_state_at(medium, ray, 0.5 * (lo + hi));
    rec.crossed = true;
    rec.t_star = s.t;
    rec.x_star = s.x;
    rec.velocity = s.v;
    rec.outgoing = dot(s.v, ray.omega) > 0;
    for (std::size_t i = bracket + 1; i + 1 < ray.samples.size(); ++i) {
        if (f(ray.samples[i]) >= 0 && f(ray.samples[i + 1]) < 0) {
            rec.recrossed = true;
            break;
        }
    }
    return rec;
}

// ---- fans over the source plane -------------------------------------------

template <int N>
inline std::array<Vec<N>, static_cast<std::size_t>(N - 1)> plane_basis(const Vec<N>& omega) {
    std::array<Vec<N>, static_cast<std::size_t>(N - 1)> basis;
    int filled = 0;
    for (int d = 0; d < N && filled < N - 1; ++d) {
        Vec<N> e = Vec<N>::axis(d) - dot(Vec<N>::axis(d), omega) * omega;
        for (int k = 0; k < filled; ++k) e -= dot(e, basis[k]) * basis[k];
        const double n = norm(e);
        if (n > 1e-8) basis[filled++] = e / n;
    }
    if (filled != N - 1) throw Error("plane_basis: failed to build a basis");
    return basis;
}

template <int N>
struct SigmaFan {
    Vec<N> omega{};
    std::array<Vec<N>, static_cast<std::size_t>(N - 1)> basis{};
    std::vector<std::array<double, static_cast<std::size_t>(N - 1)>> offsets;
    std::vector<Vec<N>> points; // a = -omega + sum_i y_i basis_i
    double spacing = 0;

    Vec<N> point_for(const std::array<double, static_cast<std::size_t>(N - 1)>& y) const {
        Vec<N> a = -1.0 * omega;
        for (int i = 0; i < N - 1; ++i) a += y[i] * basis[i];
        return a;
    }
};

// Uniform grid on the disk |a + omega| <= radius, plus one exterior ring of
// points just outside it (the rays from there are straight lines).
template <int N>
inline SigmaFan<N> make_disk_fan(const Vec<N>& omega, double radius, double spacing,
                                 bool exterior_ring = true) {
    SigmaFan<N> fan;
    fan.omega = omega;
    fan.basis = plane_basis(omega);
    fan.spacing = spacing;
    const int k = static_cast<int>(std::floor(radius / spacing + 1e-9));
    if constexpr (N == 2) {
        for (int i = -k; i <= k; ++i)
            fan.offsets.push_back({i * spacing});
        if (exterior_ring) {
            fan.offsets.push_back({-(radius + spacing)});
            fan.offsets.push_back({radius + spacing});
        }
    } else {
        for (int i = -k; i <= k; ++i)
            for (int j = -k; j <= k; ++j) {
                const double r2 = (i * i + j * j) * spacing * spacing;
                if (r2 <= radius * radius + 1e-12)
                    fan.offsets.push_back({i * spacing, j * spacing});
            }
        if (exterior_ring) {
            const double rr = radius + spacing;
            const int m = std::max(8, static_cast<int>(std::ceil(2 * M_PI * rr / spacing)));
            for (int i = 0; i < m; ++i) {
                const double th = 2 * M_PI * i / m;
                fan.offsets.push_back({rr * std::cos(th), rr * std::sin(th)});
            }
        }
    }
    for (const auto& y : fan.offsets) fan.points.push_back(fan.point_for(y));
    return fan;
}

// Uniform grid over the transverse box max_i |y_i| <= halfwidth; used by the
// shooting solver to blanket a target cube.
template <int N>
inline SigmaFan<N> make_box_fan(const Vec<N>& omega, double halfwidth, double spacing) {
    SigmaFan<N> fan;
    fan.omega = omega;
    fan.basis = plane_basis(omega);
    fan.spacing = spacing;
    const int k = static_cast<int>(std::ceil(halfwidth / spacing - 1e-9));
    if constexpr (N == 2) {
        for (int i = -k; i <= k; ++i) fan.offsets.push_back({i * spacing});
    } else {
        for (int i = -k; i <= k; ++i)
            for (int j = -k; j <= k; ++j) fan.offsets.push_back({i * spacing, j * spacing});
    }
    for (const auto& y : fan.offsets) fan.points.push_back(fan.point_for(y));
    return fan;
}

template <int N>
struct ExitMapResult {
    SigmaFan<N> fan;
    std::vector<CrossingRecord<N>> crossings;
    std::vector<int> no_crossing;          // fan indices that never reached the plane
    std::vector<int> recrossings;          // fan indices that touched it again
    std::vector<std::pair<int, int>> collisions; // injectivity-failure witnesses
};

// Tabulates the crossing map a -> (A(a), t*) over a fan. Pathologies are
// reported, never fatal: rays missing the plane before the horizon, rays
// recrossing it, and pairs of well-separated sources whose crossings collide.
template <int N>
inline ExitMapResult<N> exit_map(const Medium<N>& medium, const Vec<N>& omega,
                                 const SigmaFan<N>& fan, double horizon,
                                 double dt = 1e-3) {
    ExitMapResult<N> out;
    out.fan = fan;
    out.crossings.resize(fan.points.size());
    for (std::size_t i = 0; i < fan.points.size(); ++i) {
        const OmegaRay<N> ray =
            integrate_omega_geodesic(medium, omega, fan.points[i], horizon, dt);
        CrossingRecord<N> rec = find_sigma_plus_crossing(medium, ray);
        rec.ray_id = static_cast<int>(i);
        out.crossings[i] = rec;
        if (!rec.crossed) out.no_crossing.push_back(static_cast<int>(i));
        if (rec.recrossed) out.recrossings.push_back(static_cast<int>(i));
    }
    const double collision_tol = 1e-4;
    const double source_sep = 10.0 * fan.spacing;
    for (std::size_t i = 0; i < out.crossings.size(); ++i) {
        if (!out.crossings[i].crossed) continue;
        for (std::size_t j = i + 1; j < out.crossings.size(); ++j) {
            if (!out.crossings[j].crossed) continue;
            if (norm(out.crossings[i].x_star - out.crossings[j].x_star) < collision_tol &&
                norm(fan.points[i] - fan.points[j]) > source_sep)
                out.collisions.emplace_back(static_cast<int>(i), static_cast<int>(j));
        }
    }
    return out;
}

// ---- lengths and distances -------------------------------------------------

// Length of a polyline in the medium metric. Each segment is integrated with
// composite Simpson quadrature (4th order in the subdivision); degenerate
// segments contribute zero.
template <int N>
inline double curve_length(const Medium<N>& medium, const std::vector<Vec<N>>& pts,
                           double quad_step = 0.01) {
    if (pts.size() < 2) throw Error("curve_length: need at least 2 points");
    double total = 0;
    for (std::size_t s = 0; s + 1 < pts.size(); ++s) {
        const Vec<N> a = pts[s], b = pts[s + 1];
        const Vec<N> d = b - a;
        const double len = norm(d);
        if (len == 0) continue;
        int m = static_cast<int>(std::ceil(len / quad_step));
        m = std::max(2, m + (m % 2)); // even
        const auto speed = [&](double u) {
            const Vec<N> x = a + u * d;
            return std::sqrt(dot(d, medium.metric(x) * d));
        };
        double acc = speed(0.0) + speed(1.0);
        for (int i = 1; i < m; ++i) acc += (i % 2 ? 4.0 : 2.0) * speed(i / double(m));
        total += acc / (3.0 * m);
    }
    return total;
}

template <int N>
struct DistanceResult {
    double graph_value = 0;
    double refined_value = 0;
    std::vector<Vec<N>> path;
};

namespace detail {

template <int N>
inline std::vector<std::array<int, N>> neighborhood_offsets() {
    std::vector<std::array<int, N>> offs;
    if constexpr (N == 2) {
        // 16-neighborhood: axis, diagonal, and knight moves
        const int raw[8][2] = {{1, 0}, {0, 1}, {1, 1}, {1, -1},
                               {2, 1}, {1, 2}, {2, -1}, {1, -2}};
        for (const auto& r : raw) {
            offs.push_back({r[0], r[1]});
            offs.push_back({-r[0], -r[1]});
        }
    } else {
        std::array<int, N> o{};
        const std::function<void(int)> rec = [&](int d) {
            if (d == N) {
                bool zero = true;
                for (int k = 0; k < N; ++k) zero &= o[k] == 0;
                if (!zero) offs.push_back(o);
                return;
            }
            for (int v = -1; v <= 1; ++v) {
                o[d] = v;
                rec(d + 1);
            }
        };
        rec(0);
    }
    return offs;
}

} // namespace detail

// Dijkstra on a grid graph over the computational cube (16-neighborhood for
// N=2, 26 for N=3; edge weight = metric length of the straight edge), then a
// local relaxation of the polyline. Reports both values.
template <int N>
inline DistanceResult<N> riemannian_distance(const Medium<N>& medium, const Vec<N>& p,
                                             const Vec<N>& q, int intervals,
                                             double cube_half_width = 1.5) {
    Grid<N> grid = Grid<N>::centered_cube(cube_half_width, 2.0 * cube_half_width / intervals);
    if (!grid.contains(p) || !grid.contains(q))
        throw Error("riemannian_distance: endpoints must lie inside the computational cube");

    const std::int64_t src = grid.flat(grid.nearest(p));
    const std::int64_t dst = grid.flat(grid.nearest(q));
    const auto offsets = detail::neighborhood_offsets<N>();

    std::vector<double> dist(static_cast<std::size_t>(grid.size()),
                             std::numeric_limits<double>::infinity());
    std::vector<std::int64_t> prev(static_cast<std::size_t>(grid.size()), -1);
    using Item = std::pair<double, std::int64_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
    dist[static_cast<std::size_t>(src)] = 0;
    pq.push({0.0, src});
    while (!pq.empty()) {
        const auto [d0, u] = pq.top();
        pq.pop();
        if (d0 > dist[static_cast<std::size_t>(u)]) continue;
        if (u == dst) break;
        const auto ui = grid.unflat(u);
        const Vec<N> xu = grid.point(ui);
        for (const auto& off : offsets) {
            std::array<int, N> vi = ui;
            bool inb = true;
            for (int d = 0; d < N; ++d) {
                vi[d] += off[d];
                inb &= vi[d] >= 0 && vi[d] < grid.dims[d];
            }
            if (!inb) continue;
            const std::int64_t v = grid.flat(vi);
            const double w = curve_length(medium, {xu, grid.point(vi)}, grid.h / 2);
            if (dist[static_cast<std::size_t>(u)] + w < dist[static_cast<std::size_t>(v)]) {
                dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + w;
                prev[static_cast<std::size_t>(v)] = u;
                pq.push({dist[static_cast<std::size_t>(v)], v});
            }
        }
    }
    if (!std::isfinite(dist[static_cast<std::size_t>(dst)]))
        throw Error("riemannian_distance: target unreachable on the grid graph");

    DistanceResult<N> out;
    std::vector<Vec<N>> path;
    for (std::int64_t at = dst; at != -1; at = prev[static_cast<std::size_t>(at)])
        path.push_back(grid.point_flat(at));
    std::reverse(path.begin(), path.end());
    path.front() = p;
    path.back() = q;
    out.graph_value = curve_length(medium, path, grid.h / 2);

    // local relaxation: gradient steps on interior vertices with backtracking
    const double fd = grid.h / 16.0;
    for (int iter = 0; iter < 60; ++iter) {
        double moved = 0;
        for (std::size_t i = 1; i + 1 < path.size(); ++i) {
            const auto local = [&](const Vec<N>& y) {
                return curve_length(medium, {path[i - 1], y, path[i + 1]}, grid.h / 2);
            };
            Vec<N> gradv{};
            for (int d = 0; d < N; ++d) {
                Vec<N> yp = path[i], ym = path[i];
                yp[d] += fd;
                ym[d] -= fd;
                gradv[d] = (local(yp) - local(ym)) / (2 * fd);
            }
            const double gn = norm(gradv);
            if (gn < 1e-14) continue;
            double step = grid.h / 4.0;
            const double before = local(path[i]);
            while (step > grid.h / 256.0) {
                const Vec<N> cand = path[i] - (step / gn) * gradv;
                if (grid.contains(cand) && local(cand) < before) {
                    moved += norm(cand - path[i]);
                    path[i] = cand;
                    break;
                }
                step *= 0.5;
            }
        }
        if (moved < grid.h * 1e-4) break;
    }
    out.refined_value = curve_length(medium, path, grid.h / 2);
    out.path = std::move(path);
    return out;
}

} // namespace faslab
