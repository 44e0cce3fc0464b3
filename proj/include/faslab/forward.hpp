#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "faslab/bump.hpp"
#include "faslab/grid.hpp"
#include "faslab/media.hpp"
#include "faslab/stencil.hpp"

namespace faslab {

template <int N>
struct WaveConfig {
    Medium<N> medium;
    Vec<N> omega{};
    double T = 0;             // recording horizon
    double eps = 0;           // mollification width of the incoming step
    double h = 0;             // grid spacing
    double dt = 0;            // time step (shrunk internally to land on T)
    double box_half_width = 0; // 0 = derive from the reflection-exclusion bound
    int boundary_samples = 256;
    int energy_stride = 5;
    int snapshot_stride = 0;  // 0 = keep no snapshots
    bool track_arrival = true;
    double arrival_level = 0.5;
    int jobs = 1; // worker cap for the per-step cell update (deterministic)

    double t0() const { return -1.0 - eps; }
    double required_box_half_width() const { return (T + 3.0) / 2.0 + eps + 2.0 * h; }
};

// dt stability cap, identical for both kinds: the fastest signal speed is
// 1/sqrt(g_min).
inline double cfl_limit(double h, int dimension, const MediumBounds& bounds) {
    return 0.5 * h * std::sqrt(bounds.g_min) / std::sqrt(static_cast<double>(dimension));
}

template <int N>
struct BoundaryTrace {
    Vec<N> omega{};
    std::vector<Vec<N>> points;  // samples on the unit sphere
    std::vector<double> times;
    std::vector<double> values;  // times.size() x points.size(), time-major
    double eps = 0, h = 0, dt = 0;

    double at(std::size_t ti, std::size_t pi) const { return values[ti * points.size() + pi]; }
};

struct EnergySeries {
    std::vector<double> times;
    std::vector<double> energy;
    std::vector<double> boundary_flux;
};

template <int N>
struct WaveSolveResult {
    Grid<N> grid;
    WaveConfig<N> config;
    BoundaryTrace<N> trace;
    EnergySeries energy;
    std::vector<double> arrival; // per node, NaN = level never crossed
    std::vector<std::pair<double, std::vector<float>>> snapshots;
    double max_abs_value = 0;
    std::vector<std::string> warnings;
};

template <int N>
inline std::vector<Vec<N>> boundary_sample_points(int count) {
    std::vector<Vec<N>> pts;
    pts.reserve(static_cast<std::size_t>(count));
    if constexpr (N == 2) {
        for (int k = 0; k < count; ++k) {
            const double th = 2.0 * M_PI * k / count;
            pts.push_back(Vec<2>{{std::cos(th), std::sin(th)}});
        }
    } else if constexpr (N == 3) {
        // Fibonacci sphere, quasi-uniform
        const double ga = M_PI * (3.0 - std::sqrt(5.0));
        for (int k = 0; k < count; ++k) {
            const double z = 1.0 - (2.0 * k + 1.0) / count;
            const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
            const double th = ga * k;
            pts.push_back(Vec<3>{{r * std::cos(th), r * std::sin(th), z}});
        }
    } else {
        static_assert(N == 2 || N == 3, "boundary sampling implemented for n = 2, 3");
    }
    return pts;
}

template <int N>
inline std::vector<std::string> validate_wave_config(const WaveConfig<N>& cfg,
                                                     const MediumBounds& bounds) {
    std::vector<std::string> violations;
    std::ostringstream os;
    if (cfg.h <= 0) violations.push_back("h must be positive");
    if (cfg.eps <= 0) violations.push_back("epsilon must be positive");
    if (cfg.dt <= 0) violations.push_back("dt must be positive");
    if (cfg.h > 0 && cfg.dt > 0) {
        const double cap = cfl_limit(cfg.h, N, bounds);
        if (cfg.dt > cap + 1e-15) {
            os.str("");
            os << "dt=" << cfg.dt << " violates dt <= 0.5*h*sqrt(g_min)/sqrt(n) = " << cap;
            violations.push_back(os.str());
        }
    }
    if (cfg.box_half_width > 0 && cfg.box_half_width < cfg.required_box_half_width() - 1e-12) {
        os.str("");
        os << "box_half_width=" << cfg.box_half_width
           << " violates R >= (T+3)/2 + eps + 2h = " << cfg.required_box_half_width();
        violations.push_back(os.str());
    }
    if (std::abs(norm(cfg.omega) - 1.0) > 1e-12)
        violations.push_back("omega must be a unit vector");
    return violations;
}

namespace detail {

template <int N>
struct PlaneWave {
    Vec<N> omega;
    double eps;
    double operator()(const Vec<N>& x, double t) const {
        return mollified_heaviside(t - dot(x, omega), eps);
    }
};

// Interior multi-index prefixes (all axes except the last), for row loops.
template <int N>
inline std::vector<std::int64_t> interior_row_bases(const Grid<N>& grid) {
    std::vector<std::int64_t> bases;
    std::array<int, N> idx{};
    for (int d = 0; d < N - 1; ++d) idx[d] = 1;
    while (true) {
        std::int64_t base = 0;
        for (int d = 0; d < N - 1; ++d) base += idx[d] * grid.strides[d];
        bases.push_back(base);
        int d = N - 2;
        while (d >= 0 && ++idx[d] > grid.dims[d] - 2) {
            idx[d] = 1;
            --d;
        }
        if (d < 0) break;
    }
    return bases;
}

} // namespace detail

// Leapfrog solve of  (m sqrt(det g)) U_tt = sum_ij d_i( m sqrt(det g) g^{ij} d_j U )
// on the truncated box, with the exact exterior plane wave as both the initial
// two levels and the Dirichlet data on the box faces (legitimate through the
// reflection-exclusion bound on R: scattered signals cannot reach a face and
// return to the unit sphere before T).
template <int N>
inline WaveSolveResult<N> solve_wave(const WaveConfig<N>& cfg) {
    const MediumBounds bounds = compute_bounds(cfg.medium, 200);
    {
        const auto violations = validate_wave_config(cfg, bounds);
        if (!violations.empty()) {
            std::string msg = "solve_wave: invalid configuration:";
            for (const auto& v : violations) msg += " [" + v + "]";
            throw Error(msg);
        }
    }
    WaveSolveResult<N> out;
    out.config = cfg;
    const double R = cfg.box_half_width > 0 ? cfg.box_half_width : cfg.required_box_half_width();
    const Grid<N> grid = Grid<N>::centered_cube(R, cfg.h);
    out.grid = grid;
    if (cfg.T <= 4.0 * std::sqrt(bounds.g_max) - 1.0)
        out.warnings.push_back("T below the rigidity horizon 4*sqrt(g_max)-1; "
                               "solver output is fine for solver tests only");

    const double t0 = cfg.t0();
    const std::int64_t steps =
        static_cast<std::int64_t>(std::ceil((cfg.T - t0) / cfg.dt - 1e-12));
    const double dt = (cfg.T - t0) / steps; // land exactly on T
    const detail::PlaneWave<N> exact{cfg.omega, cfg.eps};

    const std::size_t total = static_cast<std::size_t>(grid.size());
    const FluxCoeffs<N> coeffs = build_flux_coeffs(cfg.medium, grid);
    std::vector<double> scale(total); // dt^2 / (h^2 w)
    for (std::size_t i = 0; i < total; ++i)
        scale[i] = dt * dt / (grid.h * grid.h * coeffs.weight[i]);

    // boundary nodes with their coordinates, for per-step Dirichlet data
    std::vector<std::pair<std::int64_t, Vec<N>>> boundary_nodes;
    grid.for_each([&](const std::array<int, N>& idx, std::int64_t f) {
        if (!grid.is_interior(idx)) boundary_nodes.emplace_back(f, grid.point(idx));
    });

    // trace interpolation stencils on the unit sphere
    BoundaryTrace<N>& trace = out.trace;
    trace.omega = cfg.omega;
    trace.eps = cfg.eps;
    trace.h = cfg.h;
    trace.dt = dt;
    trace.points = boundary_sample_points<N>(cfg.boundary_samples);
    struct InterpStencil {
        std::array<std::int64_t, (1 << N)> flats;
        std::array<double, (1 << N)> weights;
    };
    std::vector<InterpStencil> trace_stencils;
    trace_stencils.reserve(trace.points.size());
    for (const auto& p : trace.points) {
        InterpStencil st{};
        std::array<int, N> base;
        std::array<double, N> w;
        for (int d = 0; d < N; ++d) {
            const double s = (p[d] - grid.origin[d]) / grid.h;
            int i = static_cast<int>(std::floor(s));
            i = std::min(std::max(i, 0), grid.dims[d] - 2);
            base[d] = i;
            w[d] = s - i;
        }
        for (int corner = 0; corner < (1 << N); ++corner) {
            auto idx = base;
            double weight = 1;
            for (int d = 0; d < N; ++d) {
                if (corner & (1 << d)) {
                    idx[d] += 1;
                    weight *= w[d];
                } else {
                    weight *= 1 - w[d];
                }
            }
            st.flats[static_cast<std::size_t>(corner)] = grid.flat(idx);
            st.weights[static_cast<std::size_t>(corner)] = weight;
        }
        trace_stencils.push_back(st);
    }
    trace.times.reserve(static_cast<std::size_t>(steps) + 1);
    trace.values.reserve((static_cast<std::size_t>(steps) + 1) * trace.points.size());
    const auto record_trace = [&](const std::vector<double>& u, double t) {
        trace.times.push_back(t);
        for (const auto& st : trace_stencils) {
            double v = 0;
            for (int c = 0; c < (1 << N); ++c)
                v += st.weights[static_cast<std::size_t>(c)] *
                     u[static_cast<std::size_t>(st.flats[static_cast<std::size_t>(c)])];
            trace.values.push_back(v);
        }
    };

    // three time levels
    std::vector<double> uprev(total), u(total), unew(total);
    grid.for_each([&](const std::array<int, N>& idx, std::int64_t f) {
        const Vec<N> x = grid.point(idx);
        uprev[static_cast<std::size_t>(f)] = exact(x, t0);
        u[static_cast<std::size_t>(f)] = exact(x, t0 + dt);
    });

    if (cfg.track_arrival)
        out.arrival.assign(total, std::numeric_limits<double>::quiet_NaN());
    const auto track_arrival = [&](const std::vector<double>& old_u,
                                   const std::vector<double>& new_u, double t_old) {
        if (!cfg.track_arrival) return;
        for (std::size_t i = 0; i < total; ++i) {
            if (!std::isnan(out.arrival[i])) continue;
            if (old_u[i] < cfg.arrival_level && new_u[i] >= cfg.arrival_level)
                out.arrival[i] = t_old + dt * (cfg.arrival_level - old_u[i]) /
                                             (new_u[i] - old_u[i]);
        }
    };

    const auto energy_sample = [&](const std::vector<double>& um,
                                   const std::vector<double>& uc,
                                   const std::vector<double>& up, double t) {
        double e = 0;
        const double inv2dt = 1.0 / (2 * dt), inv2h = 1.0 / (2 * grid.h);
        double flux = 0;
        grid.for_each([&](const std::array<int, N>& idx, std::int64_t f) {
            const std::size_t i = static_cast<std::size_t>(f);
            if (grid.is_interior(idx)) {
                const double ut = (up[i] - um[i]) * inv2dt;
                Vec<N> gr;
                for (int d = 0; d < N; ++d)
                    gr[d] = (uc[static_cast<std::size_t>(f + grid.strides[d])] -
                             uc[static_cast<std::size_t>(f - grid.strides[d])]) *
                            inv2h;
                const Vec<N> x = grid.point(idx);
                const double quad = dot(gr, cfg.medium.metric_inverse(x) * gr);
                e += coeffs.weight[i] * (ut * ut + quad);
            } else {
                // outward energy flux -2 U_t (c grad U).n from the divergence
                // identity d/dt[e] = 2 d_i(c_ij U_t d_j U); c = w g^{-1}
                // carries the weight, normal derivative one-sided inward
                const double ut = (up[i] - um[i]) * inv2dt;
                for (int d = 0; d < N; ++d) {
                    int dir = 0;
                    if (idx[d] == 0)
                        dir = +1;
                    else if (idx[d] == grid.dims[d] - 1)
                        dir = -1;
                    if (dir == 0) continue;
                    const double dd = dir *
                                      (uc[static_cast<std::size_t>(f + dir * grid.strides[d])] -
                                       uc[i]) /
                                      grid.h;
                    const double cdd = coeffs.identity ? 1.0 : coeffs.face[d][i];
                    flux += 2.0 * dir * ut * cdd * dd * std::pow(grid.h, N - 1);
                }
            }
        });
        out.energy.times.push_back(t);
        out.energy.energy.push_back(e * std::pow(grid.h, N));
        out.energy.boundary_flux.push_back(flux);
    };

    record_trace(uprev, t0);
    record_trace(u, t0 + dt);
    track_arrival(uprev, u, t0);

    const auto row_bases = detail::interior_row_bases(grid);
    const int inner = grid.dims[N - 1];
    const int pair_count = N * (N - 1) / 2;
    std::array<std::pair<std::int64_t, std::int64_t>, 3> pair_strides{};
    {
        int pidx = 0;
        for (int a = 0; a < N; ++a)
            for (int b = a + 1; b < N; ++b, ++pidx)
                pair_strides[static_cast<std::size_t>(pidx)] = {grid.strides[a],
                                                                grid.strides[b]};
    }

    for (std::int64_t step = 1; step < steps; ++step) {
        const double t_new = t0 + (step + 1) * dt;
        const double* __restrict up = u.data();
        const double* __restrict upp = uprev.data();
        double* __restrict un = unew.data();
        const double* __restrict sc = scale.data();

        parallel_for(
            row_bases.size(),
            [&](std::size_t lo, std::size_t hi) {
                if (coeffs.identity) {
                    for (std::size_t r = lo; r < hi; ++r) {
                        const std::int64_t base = row_bases[r];
                        for (int j = 1; j < inner - 1; ++j) {
                            const std::int64_t f = base + j;
                            double lap = -2.0 * N * up[f];
                            for (int d = 0; d < N; ++d)
                                lap += up[f + grid.strides[d]] + up[f - grid.strides[d]];
                            un[f] = 2.0 * up[f] - upp[f] + sc[f] * lap;
                        }
                    }
                } else {
                    for (std::size_t r = lo; r < hi; ++r) {
                        const std::int64_t base = row_bases[r];
                        for (int j = 1; j < inner - 1; ++j) {
                            const std::int64_t f = base + j;
                            double lap = 0;
                            for (int d = 0; d < N; ++d) {
                                const std::int64_t s = grid.strides[d];
                                const double fp = coeffs.face[d][static_cast<std::size_t>(f)];
                                const double fm =
                                    coeffs.face[d][static_cast<std::size_t>(f - s)];
                                lap += fp * (up[f + s] - up[f]) - fm * (up[f] - up[f - s]);
                            }
                            if (coeffs.has_cross) {
                                for (int pidx = 0; pidx < pair_count; ++pidx) {
                                    const auto [sa, sb] =
                                        pair_strides[static_cast<std::size_t>(pidx)];
                                    const double* cab =
                                        coeffs.cross[static_cast<std::size_t>(pidx)].data();
                                    const double t1 =
                                        cab[f + sa] * (up[f + sa + sb] - up[f + sa - sb]) -
                                        cab[f - sa] * (up[f - sa + sb] - up[f - sa - sb]);
                                    const double t2 =
                                        cab[f + sb] * (up[f + sa + sb] - up[f - sa + sb]) -
                                        cab[f - sb] * (up[f + sa - sb] - up[f - sa - sb]);
                                    lap += 0.25 * (t1 + t2);
                                }
                            }
                            un[f] = 2.0 * up[f] - upp[f] + sc[f] * lap;
                        }
                    }
                }
            },
            cfg.jobs);
        for (const auto& [f, x] : boundary_nodes)
            unew[static_cast<std::size_t>(f)] = exact(x, t_new);

        track_arrival(u, unew, t_new - dt);
        record_trace(unew, t_new);
        if (cfg.energy_stride > 0 && step % cfg.energy_stride == 0)
            energy_sample(uprev, u, unew, t_new - dt);
        if (cfg.snapshot_stride > 0 && step % cfg.snapshot_stride == 0) {
            std::vector<float> snap(total);
            for (std::size_t i = 0; i < total; ++i) snap[i] = static_cast<float>(unew[i]);
            out.snapshots.emplace_back(t_new, std::move(snap));
        }

        double mx = 0;
        for (std::size_t i = 0; i < total; ++i) mx = std::max(mx, std::abs(unew[i]));
        out.max_abs_value = std::max(out.max_abs_value, mx);
        if (mx > 10.0) {
            std::ostringstream os;
            os << "solve_wave: instability detected, max |U| = " << mx << " at t = " << t_new
               << " (step " << step << " of " << steps << ", dt = " << dt << ", h = " << cfg.h
               << ")";
            throw Error(os.str());
        }
        std::swap(uprev, u);
        std::swap(u, unew);
    }

    double lo = 0, hi = 1;
    for (double v : trace.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (lo < -0.1 || hi > 1.1) {
        std::ostringstream os;
        os << "trace values leave [-0.1, 1.1]: range [" << lo << ", " << hi << "]";
        out.warnings.push_back(os.str());
    }
    return out;
}

// Relative L2 distance over the shared cylinder layout. Layout mismatch is a
// contract violation, not a quantity to paper over.
template <int N>
inline double trace_distance(const BoundaryTrace<N>& a, const BoundaryTrace<N>& b) {
    if (a.points.size() != b.points.size() || a.times.size() != b.times.size())
        throw Error("trace_distance: sample layouts do not match");
    for (std::size_t i = 0; i < a.points.size(); ++i)
        if (norm(a.points[i] - b.points[i]) > 1e-12)
            throw Error("trace_distance: boundary sample points differ");
    for (std::size_t i = 0; i < a.times.size(); ++i)
        if (std::abs(a.times[i] - b.times[i]) > 1e-9)
            throw Error("trace_distance: time samples differ");
    double dd = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        const double d = a.values[i] - b.values[i];
        dd += d * d;
        na += a.values[i] * a.values[i];
        nb += b.values[i] * b.values[i];
    }
    const double ref = std::sqrt(std::max(na, nb));
    if (ref == 0) return 0;
    return std::sqrt(dd) / ref;
}

// Interpolates a trace onto a coarser time axis (same boundary points).
template <int N>
inline BoundaryTrace<N> resample_trace(const BoundaryTrace<N>& fine,
                                       const std::vector<double>& times) {
    BoundaryTrace<N> out;
    out.omega = fine.omega;
    out.points = fine.points;
    out.times = times;
    out.eps = fine.eps;
    out.h = fine.h;
    out.dt = fine.dt;
    out.values.resize(times.size() * fine.points.size());
    const std::size_t P = fine.points.size();
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
        double t = std::clamp(times[ti], fine.times.front(), fine.times.back());
        const auto it = std::upper_bound(fine.times.begin(), fine.times.end(), t);
        std::size_t k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(
            1, std::distance(fine.times.begin(), it)));
        if (k >= fine.times.size()) k = fine.times.size() - 1;
        const double t1 = fine.times[k - 1], t2 = fine.times[k];
        const double w = t2 > t1 ? (t - t1) / (t2 - t1) : 0.0;
        for (std::size_t pi = 0; pi < P; ++pi)
            out.values[ti * P + pi] =
                (1 - w) * fine.values[(k - 1) * P + pi] + w * fine.values[k * P + pi];
    }
    return out;
}

// L_inf error of a trace against the exact mollified plane wave.
template <int N>
inline double trace_linf_error_vs_plane(const BoundaryTrace<N>& trace) {
    double m = 0;
    const std::size_t P = trace.points.size();
    for (std::size_t ti = 0; ti < trace.times.size(); ++ti)
        for (std::size_t pi = 0; pi < P; ++pi) {
            const double exact = mollified_heaviside(
                trace.times[ti] - dot(trace.points[pi], trace.omega), trace.eps);
            m = std::max(m, std::abs(trace.values[ti * P + pi] - exact));
        }
    return m;
}

// [t_begin, t_end] during which the incoming front is fully inside the box and
// no signal has reached a face; empty (begin > end) when no such window exists
// (oblique omega keeps the plane-wave band on the faces at all times).
template <int N>
inline std::pair<double, double> fully_interior_window(const Grid<N>& grid,
                                                       const WaveConfig<N>& cfg,
                                                       const MediumBounds& bounds) {
    int axis = -1;
    for (int d = 0; d < N; ++d)
        if (std::abs(std::abs(cfg.omega[d]) - 1.0) < 1e-12) axis = d;
    if (axis < 0) return {1.0, 0.0};
    const double R = grid.half_width();
    const double begin = -R + cfg.eps + 2 * grid.h;
    const double exit_plane = R - cfg.eps - 2 * grid.h;
    const double exit_scatter = (R - 2 * grid.h - 1.0) * std::sqrt(bounds.g_min) - 1.0;
    return {begin, std::min(exit_plane, exit_scatter)};
}

struct EnergyDrift {
    double relative_drift = 0;      // of the interior balance E + accumulated outflow
    double raw_drift = 0;           // of E alone
    double reference = 0;
    int samples = 0;
};

// The interior balance: E(t) plus the accumulated boundary outflow is the
// conserved quantity; the flux series makes the boundary exchange explicit.
inline EnergyDrift energy_drift_in_window(const EnergySeries& series, double t_begin,
                                          double t_end) {
    EnergyDrift d;
    double acc_flux = 0;
    double balance_ref = 0;
    for (std::size_t i = 0; i < series.times.size(); ++i) {
        const double t = series.times[i];
        if (i > 0)
            acc_flux += 0.5 * (series.boundary_flux[i] + series.boundary_flux[i - 1]) *
                        (series.times[i] - series.times[i - 1]);
        if (t < t_begin || t > t_end) continue;
        const double balance = series.energy[i] + acc_flux;
        if (d.samples == 0) {
            d.reference = series.energy[i];
            balance_ref = balance;
        }
        ++d.samples;
        if (d.reference > 0) {
            d.relative_drift =
                std::max(d.relative_drift, std::abs(balance - balance_ref) / d.reference);
            d.raw_drift = std::max(d.raw_drift,
                                   std::abs(series.energy[i] - d.reference) / d.reference);
        }
    }
    return d;
}

} // namespace faslab
