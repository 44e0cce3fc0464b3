#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <vector>

#include "faslab/geodesics.hpp"
#include "faslab/grid.hpp"
#include "faslab/media.hpp"

namespace faslab {

// First-arrival field on a uniform cube grid. `reached` marks cells with a
// value; `kink` marks cells where one-sided gradients disagree (the field is
// only Lipschitz there and the smooth-region identities do not apply).
template <int N>
struct ArrivalField {
    Grid<N> grid;
    Vec<N> omega{};
    std::string method; // "shooting" | "sweeping"
    std::vector<double> alpha;
    std::vector<std::uint8_t> reached;
    std::vector<std::uint8_t> kink;
    std::vector<double> residual; // |grad^T g^{-1} grad - 1|, NaN where invalid

    Vec<N> gradient_at(const std::array<int, N>& idx) const {
        Vec<N> g{};
        const std::int64_t f = grid.flat(idx);
        for (int d = 0; d < N; ++d) {
            const std::int64_t s = grid.strides[d];
            if (idx[d] > 0 && idx[d] < grid.dims[d] - 1)
                g[d] = (alpha[static_cast<std::size_t>(f + s)] -
                        alpha[static_cast<std::size_t>(f - s)]) /
                       (2 * grid.h);
            else if (idx[d] == 0)
                g[d] = (alpha[static_cast<std::size_t>(f + s)] -
                        alpha[static_cast<std::size_t>(f)]) /
                       grid.h;
            else
                g[d] = (alpha[static_cast<std::size_t>(f)] -
                        alpha[static_cast<std::size_t>(f - s)]) /
                       grid.h;
        }
        return g;
    }
};

namespace detail {

// Genuine kinks carry h-independent one-sided gradient jumps while smooth
// cells jump like |grad^2 alpha| h, so the detector threshold scales with h
// (floored for very fine grids).
inline double kink_jump_threshold(double h) { return std::max(3.0 * h, 0.02); }

template <int N>
inline void flag_kinks(ArrivalField<N>& field) {
    const Grid<N>& grid = field.grid;
    field.kink.assign(static_cast<std::size_t>(grid.size()), 0);
    grid.for_each([&](const std::array<int, N>& idx, std::int64_t f) {
        if (!field.reached[static_cast<std::size_t>(f)]) return;
        double jump2 = 0;
        bool incomplete = false;
        for (int d = 0; d < N; ++d) {
            const std::int64_t s = grid.strides[d];
            if (idx[d] == 0 || idx[d] == grid.dims[d] - 1) continue;
            if (!field.reached[static_cast<std::size_t>(f + s)] ||
                !field.reached[static_cast<std::size_t>(f - s)]) {
                incomplete = true;
                continue;
            }
            const double df = (field.alpha[static_cast<std::size_t>(f + s)] -
                               field.alpha[static_cast<std::size_t>(f)]) /
                              grid.h;
            const double db = (field.alpha[static_cast<std::size_t>(f)] -
                               field.alpha[static_cast<std::size_t>(f - s)]) /
                              grid.h;
            jump2 += (df - db) * (df - db);
        }
        if (incomplete || std::sqrt(jump2) > kink_jump_threshold(grid.h))
            field.kink[static_cast<std::size_t>(f)] = 1;
    });
}

template <int N>
inline void fill_residual(ArrivalField<N>& field, const Medium<N>& medium) {
    const Grid<N>& grid = field.grid;
    field.residual.assign(static_cast<std::size_t>(grid.size()),
                          std::numeric_limits<double>::quiet_NaN());
    grid.for_each([&](const std::array<int, N>& idx, std::int64_t f) {
        if (!field.reached[static_cast<std::size_t>(f)]) return;
        if (!grid.is_interior(idx)) return;
        for (int d = 0; d < N; ++d) {
            if (!field.reached[static_cast<std::size_t>(f + grid.strides[d])] ||
                !field.reached[static_cast<std::size_t>(f - grid.strides[d])])
                return;
        }
        const Vec<N> g = field.gradient_at(idx);
        const Vec<N> x = grid.point(idx);
        const double val = dot(g, medium.metric_inverse(x) * g);
        field.residual[static_cast<std::size_t>(f)] = std::abs(val - 1.0);
    });
}

} // namespace detail

// Cells suitable for smooth-region statistics: reached, not kink-flagged, and
// at Chebyshev distance >= `margin` cells from any unreached or kink cell.
template <int N>
inline std::vector<std::uint8_t> smooth_mask(const ArrivalField<N>& field, int margin = 2) {
    const Grid<N>& grid = field.grid;
    const std::size_t total = static_cast<std::size_t>(grid.size());
    std::vector<std::uint8_t> bad(total, 0);
    for (std::size_t i = 0; i < total; ++i)
        bad[i] = !field.reached[i] || field.kink[i];
    std::vector<std::uint8_t> mask(total, 0);
    grid.for_each([&](const std::array<int, N>& idx, std::int64_t f) {
        if (bad[static_cast<std::size_t>(f)]) return;
        std::array<int, N> lo, hi;
        for (int d = 0; d < N; ++d) {
            lo[d] = std::max(0, idx[d] - margin);
            hi[d] = std::min(grid.dims[d] - 1, idx[d] + margin);
        }
        std::array<int, N> it = lo;
        bool clean = true;
        while (clean) {
            if (bad[static_cast<std::size_t>(grid.flat(it))]) {
                clean = false;
                break;
            }
            int d = N - 1;
            while (d >= 0 && ++it[d] > hi[d]) {
                it[d] = lo[d];
                --d;
            }
            if (d < 0) break;
        }
        mask[static_cast<std::size_t>(f)] = clean ? 1 : 0;
    });
    return mask;
}

// Shooting solver: integrates a transverse fan of rays through the grid and
// keeps the per-node minimum arrival. Each pass of a ray deposits at the
// nearest node the first-order corrected value t + (g xdot).(node - x), the
// arrival-time estimate at the node itself (grad alpha = g xdot on smooth
// regions). Cells never touched stay unreached.
template <int N>
inline ArrivalField<N> arrival_by_shooting(const Medium<N>& medium, const Vec<N>& omega,
                                           const Grid<N>& grid, double fan_spacing,
                                           double horizon, double ray_dt = 0) {
    ArrivalField<N> field;
    field.grid = grid;
    field.omega = omega;
    field.method = "shooting";
    const std::size_t total = static_cast<std::size_t>(grid.size());
    field.alpha.assign(total, std::numeric_limits<double>::infinity());
    field.reached.assign(total, 0);

    // ahead of the source plane the first arrival is the incoming plane
    grid.for_each([&](const std::array<int, N>& idx, std::int64_t f) {
        const Vec<N> x = grid.point(idx);
        const double d = dot(x, omega);
        if (d <= -1.0) {
            field.alpha[static_cast<std::size_t>(f)] = d;
            field.reached[static_cast<std::size_t>(f)] = 1;
        }
    });

    const MediumBounds bounds = compute_bounds(medium, 200);
    const double needed = 2.0 * std::sqrt(bounds.g_max) - 1.0;

    // footprint of the grid cube transverse to omega, with margin
    double halfwidth = 0;
    const double hw = grid.half_width();
    for (int corner = 0; corner < (1 << N); ++corner) {
        Vec<N> x;
        for (int d = 0; d < N; ++d) x[d] = (corner & (1 << d)) ? hw : -hw;
        const Vec<N> perp = x - dot(x, omega) * omega;
        halfwidth = std::max(halfwidth, norm(perp));
    }
    halfwidth += 2 * fan_spacing;
    const SigmaFan<N> fan = make_box_fan(omega, halfwidth, fan_spacing);

    if (ray_dt <= 0) ray_dt = std::min(grid.h / 2.0, 1e-3 * std::max(1.0, grid.h / 0.015));
    for (const Vec<N>& a : fan.points) {
        const OmegaRay<N> ray = integrate_omega_geodesic(medium, omega, a, horizon, ray_dt);
        if (!ray.ok) throw Error("arrival_by_shooting: " + ray.failure);
        for (const auto& s : ray.samples) {
            if (!grid.contains(s.x)) continue;
            const Vec<N> grad = medium.metric(s.x) * s.v;
            // deposit into the surrounding node block; the deposited value is
            // the corrected arrival estimate at the node, so the one-cell
            // reach keeps the field covered where ray divergence stretches
            // the fan, at unchanged O(h^2) accuracy
            const auto base = grid.nearest(s.x);
            std::array<int, N> off{};
            for (int d = 0; d < N; ++d) off[d] = -1;
            while (true) {
                std::array<int, N> idx = base;
                bool inb = true;
                for (int d = 0; d < N; ++d) {
                    idx[d] += off[d];
                    inb &= idx[d] >= 0 && idx[d] < grid.dims[d];
                }
                if (inb) {
                    const Vec<N> node = grid.point(idx);
                    bool close = true;
                    for (int d = 0; d < N; ++d)
                        close &= std::abs(node[d] - s.x[d]) <= grid.h + 1e-12;
                    if (close) {
                        const double cand = s.t + dot(grad, node - s.x);
                        const std::size_t f = static_cast<std::size_t>(grid.flat(idx));
                        if (cand < field.alpha[f]) {
                            field.alpha[f] = cand;
                            field.reached[f] = 1;
                        }
                    }
                }
                int d = N - 1;
                while (d >= 0 && ++off[d] > 1) {
                    off[d] = -1;
                    --d;
                }
                if (d < 0) break;
            }
        }
    }

    // cells of the closed unit ball must be covered once the horizon exceeds
    // the crossing bound; a miss there means the fan is too coarse
    if (horizon > needed) {
        grid.for_each([&](const std::array<int, N>& idx, std::int64_t f) {
            if (field.reached[static_cast<std::size_t>(f)]) return;
            const Vec<N> x = grid.point(idx);
            if (dot(x, x) <= 1.0) {
                std::ostringstream os;
                os << "arrival_by_shooting: unreached cell at " << x
                   << " inside the unit ball with horizon " << horizon << " > " << needed
                   << " (fan too coarse)";
                throw Error(os.str());
            }
        });
    }
    detail::flag_kinks(field);
    detail::fill_residual(field, medium);
    return field;
}

// Lax-Friedrichs fast sweeping for grad^T g^{-1} grad = 1 with Dirichlet data
// alpha = x.omega on the inflow collar x.omega <= -1 and one-sided linear
// extrapolation ghosts at the cube faces. One sweep runs Gauss-Seidel through
// all 2^N axis orderings; sweeps repeat until the max update drops below tol.
// Unknowns start from the Lipschitz upper bound sqrt(g_max)(x.omega + 1) - 1.
// The viscosities are the local |dH/dp_d| at the current gradient, clamped to
// [0.2, 1] times the global bound sqrt(g^{-1}_dd); linear fields remain exact
// fixed points.
template <int N>
inline ArrivalField<N> arrival_by_sweeping(const Medium<N>& medium, const Vec<N>& omega,
                                           const Grid<N>& grid, double tol = 1e-10,
                                           int max_sweeps = 500) {
    ArrivalField<N> field;
    field.grid = grid;
    field.omega = omega;
    field.method = "sweeping";
    const std::size_t total = static_cast<std::size_t>(grid.size());
    field.alpha.assign(total, 0.0);
    field.reached.assign(total, 1);

    // g^{-1} per node (upper triangle) and the artificial viscosities
    const int pairs = N * (N - 1) / 2;
    std::array<std::vector<double>, N> gdiag;
    std::vector<std::vector<double>> goff(static_cast<std::size_t>(pairs));
    for (int d = 0; d < N; ++d) gdiag[d].resize(total);
    for (auto& v : goff) v.resize(total);
    std::vector<std::uint8_t> fixed(total, 0);
    const double sqrt_gmax = std::sqrt(compute_bounds(medium, 200).g_max);
    grid.for_each([&](const std::array<int, N>& idx, std::int64_t f) {
        const Vec<N> x = grid.point(idx);
        const Mat<N> gi = medium.metric_inverse(x);
        int pidx = 0;
        for (int a = 0; a < N; ++a) {
            gdiag[a][static_cast<std::size_t>(f)] = gi(a, a);
            for (int b = a + 1; b < N; ++b, ++pidx)
                goff[static_cast<std::size_t>(pidx)][static_cast<std::size_t>(f)] = gi(a, b);
        }
        const double d = dot(x, omega);
        if (d <= -1.0) {
            fixed[static_cast<std::size_t>(f)] = 1;
            field.alpha[static_cast<std::size_t>(f)] = d;
        } else {
            field.alpha[static_cast<std::size_t>(f)] = sqrt_gmax * (d + 1.0) - 1.0;
        }
    });
    bool any_fixed = false;
    for (auto v : fixed) any_fixed |= v != 0;
    if (!any_fixed)
        throw Error("arrival_by_sweeping: grid has no inflow collar with x.omega <= -1");

    const auto neighbor = [&](const std::array<int, N>& idx, std::int64_t f, int d,
                              int dir) -> double {
        // one-sided linear extrapolation ghost at cube faces
        const std::int64_t s = grid.strides[d];
        const int i = idx[d] + dir;
        if (i < 0 || i >= grid.dims[d])
            return 2.0 * field.alpha[static_cast<std::size_t>(f)] -
                   field.alpha[static_cast<std::size_t>(f - dir * s)];
        return field.alpha[static_cast<std::size_t>(f + dir * s)];
    };

    int sweeps = 0;
    double cycle_max_change = 0;
    while (true) {
        if (++sweeps > max_sweeps) {
            std::ostringstream os;
            os << "arrival_by_sweeping: no convergence after " << max_sweeps
               << " sweeps (last max update " << cycle_max_change << ")";
            detail::flag_kinks(field);
            detail::fill_residual(field, medium);
            double linf = 0;
            for (double r : field.residual)
                if (std::isfinite(r)) linf = std::max(linf, r);
            os << "; residual map L_inf = " << linf;
            throw Error(os.str());
        }
        cycle_max_change = 0;
        for (int ordering = 0; ordering < (1 << N); ++ordering) {
            std::array<int, N> idx;
            std::array<int, N> step, begin, end;
            for (int d = 0; d < N; ++d) {
                if (ordering & (1 << d)) {
                    begin[d] = grid.dims[d] - 1;
                    end[d] = -1;
                    step[d] = -1;
                } else {
                    begin[d] = 0;
                    end[d] = grid.dims[d];
                    step[d] = 1;
                }
                idx[d] = begin[d];
            }
            while (true) {
                const std::int64_t f = grid.flat(idx);
                if (!fixed[static_cast<std::size_t>(f)]) {
                    Vec<N> grad;
                    std::array<double, N> nb_sum;
                    for (int d = 0; d < N; ++d) {
                        const double up = neighbor(idx, f, d, +1);
                        const double um = neighbor(idx, f, d, -1);
                        grad[d] = (up - um) / (2 * grid.h);
                        nb_sum[d] = up + um;
                    }
                    double quad = 0;
                    Vec<N> gp{};
                    int pidx = 0;
                    for (int a = 0; a < N; ++a) {
                        const double gaa = gdiag[a][static_cast<std::size_t>(f)];
                        gp[a] += gaa * grad[a];
                        quad += gaa * grad[a] * grad[a];
                        for (int b = a + 1; b < N; ++b, ++pidx) {
                            const double gab = goff[static_cast<std::size_t>(pidx)]
                                                   [static_cast<std::size_t>(f)];
                            gp[a] += gab * grad[b];
                            gp[b] += gab * grad[a];
                            quad += 2 * gab * grad[a] * grad[b];
                        }
                    }
                    const double ham = std::sqrt(std::max(quad, 0.0));
                    double smooth_term = 0, sig_sum_over_h = 0;
                    for (int d = 0; d < N; ++d) {
                        const double cap =
                            std::sqrt(gdiag[d][static_cast<std::size_t>(f)]);
                        double sig = ham > 1e-14 ? std::abs(gp[d]) / ham : cap;
                        sig = std::min(cap, std::max(0.2 * cap, sig));
                        smooth_term += sig * nb_sum[d] / (2 * grid.h);
                        sig_sum_over_h += sig / grid.h;
                    }
                    const double unew = (1.0 - ham + smooth_term) / sig_sum_over_h;
                    const double change = std::abs(unew - field.alpha[static_cast<std::size_t>(f)]);
                    if (change > cycle_max_change) cycle_max_change = change;
                    field.alpha[static_cast<std::size_t>(f)] = unew;
                }
                int d = N - 1;
                while (d >= 0) {
                    idx[d] += step[d];
                    if (idx[d] != end[d]) break;
                    idx[d] = begin[d];
                    --d;
                }
                if (d < 0) break;
            }
        }
        if (cycle_max_change < tol) break;
    }
    detail::flag_kinks(field);
    detail::fill_residual(field, medium);
    return field;
}

struct ResidualStats {
    double linf = 0;
    double l2 = 0;
    std::int64_t cells = 0;
};

// Residual statistics over smooth cells (>= 2 cells away from unreached or
// kink cells).
template <int N>
inline ResidualStats eikonal_residual(const ArrivalField<N>& field, const Medium<N>& medium) {
    (void)medium; // residual is already stored against this medium
    const auto mask = smooth_mask(field);
    ResidualStats st;
    double sq = 0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) continue;
        const double r = field.residual[i];
        if (!std::isfinite(r)) continue;
        st.linf = std::max(st.linf, r);
        sq += r * r;
        ++st.cells;
    }
    st.l2 = st.cells ? std::sqrt(sq / st.cells) : 0.0;
    return st;
}

struct GradientMatchReport {
    double max_norm_deviation = 0;
    double max_angle_deg = 0;
    std::int64_t samples = 0;
};

// Compares g^{-1} grad alpha (interpolated) with the ray velocity along the
// supplied rays, over smooth cells.
template <int N>
inline GradientMatchReport gradient_matches_geodesic_velocity(
    const ArrivalField<N>& field, const Medium<N>& medium,
    const std::vector<OmegaRay<N>>& rays) {
    GradientMatchReport rep;
    const Grid<N>& grid = field.grid;
    const auto mask = smooth_mask(field);

    // nodal gradient components for interpolation
    std::array<std::vector<double>, N> gradf;
    for (int d = 0; d < N; ++d)
        gradf[d].assign(static_cast<std::size_t>(grid.size()), 0.0);
    grid.for_each([&](const std::array<int, N>& idx, std::int64_t f) {
        if (!mask[static_cast<std::size_t>(f)]) return;
        const Vec<N> g = field.gradient_at(idx);
        for (int d = 0; d < N; ++d) gradf[d][static_cast<std::size_t>(f)] = g[d];
    });

    for (const auto& ray : rays) {
        for (const auto& s : ray.samples) {
            if (!grid.contains(s.x)) continue;
            if (!mask[static_cast<std::size_t>(grid.flat(grid.nearest(s.x)))]) continue;
            Vec<N> grad;
            for (int d = 0; d < N; ++d) grad[d] = grid.interpolate(gradf[d], s.x);
            const Vec<N> vpred = medium.metric_inverse(s.x) * grad;
            rep.max_norm_deviation = std::max(rep.max_norm_deviation, norm(vpred - s.v));
            const double c =
                dot(vpred, s.v) / std::max(1e-300, norm(vpred) * norm(s.v));
            rep.max_angle_deg = std::max(
                rep.max_angle_deg, std::acos(std::clamp(c, -1.0, 1.0)) * 180.0 / M_PI);
            ++rep.samples;
        }
    }
    return rep;
}

// L_inf difference over cells smooth in both fields; fields must share a grid.
template <int N>
inline double max_abs_diff_on_smooth(const ArrivalField<N>& a, const ArrivalField<N>& b) {
    if (a.grid.size() != b.grid.size() || a.grid.h != b.grid.h)
        throw Error("max_abs_diff_on_smooth: fields live on different grids");
    const auto ma = smooth_mask(a);
    const auto mb = smooth_mask(b);
    double m = 0;
    for (std::size_t i = 0; i < ma.size(); ++i)
        if (ma[i] && mb[i]) m = std::max(m, std::abs(a.alpha[i] - b.alpha[i]));
    return m;
}

} // namespace faslab
