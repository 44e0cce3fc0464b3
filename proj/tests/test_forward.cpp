#include <catch2/catch_amalgamated.hpp>

#include "faslab/arrival.hpp"
#include "faslab/forward.hpp"

using namespace faslab;

namespace {

constexpr double kH = 0.03;

WaveConfig<2> base_config(const Medium<2>& m, double T = 2.2) {
    WaveConfig<2> cfg;
    cfg.medium = m;
    cfg.omega = Vec<2>::axis(0);
    cfg.T = T;
    cfg.h = kH;
    cfg.eps = 4 * kH;
    const MediumBounds b = compute_bounds(m, 200);
    cfg.dt = cfl_limit(kH, 2, b);
    cfg.boundary_samples = 128;
    cfg.energy_stride = 5;
    return cfg;
}

Medium<2> bump_medium(double amp = 0.2) {
    return make_bump_density<2>(amp, Vec<2>{}, 0.5, 0.1);
}

} // namespace

TEST_CASE("Euclidean trace stays close to the exact mollified plane wave") {
    const auto run = solve_wave(base_config(Medium<2>::euclidean()));
    CHECK(trace_linf_error_vs_plane(run.trace) < 0.05); // coarse-grid smoke bound
    CHECK(run.warnings.size() <= 1);                    // short-horizon note only
    CHECK(run.max_abs_value < 1.1);
}

TEST_CASE("trace distance: self is zero, layout mismatch is fatal") {
    const auto run = solve_wave(base_config(Medium<2>::euclidean()));
    CHECK(trace_distance(run.trace, run.trace) == 0.0);
    auto cfg2 = base_config(Medium<2>::euclidean());
    cfg2.boundary_samples = 64;
    const auto run2 = solve_wave(cfg2);
    CHECK_THROWS_AS(trace_distance(run.trace, run2.trace), Error);
}

TEST_CASE("bump trace separates from Euclidean well above the noise floor") {
    const auto cfg_e = base_config(Medium<2>::euclidean());
    const auto run_e = solve_wave(cfg_e);

    auto cfg_b = base_config(bump_medium());
    const auto run_b = solve_wave(cfg_b);
    const double dist = trace_distance(run_b.trace, run_e.trace);

    auto cfg_f = base_config(Medium<2>::euclidean());
    cfg_f.h = kH / 2;
    cfg_f.dt = cfg_e.dt / 2;
    const auto run_f = solve_wave(cfg_f);
    const auto fine = resample_trace(run_f.trace, run_e.trace.times);
    double dd = 0, nn = 0;
    for (std::size_t i = 0; i < fine.values.size(); ++i) {
        const double d = run_e.trace.values[i] - fine.values[i];
        dd += d * d;
        nn += run_e.trace.values[i] * run_e.trace.values[i];
    }
    const double floor = std::sqrt(dd / nn);
    CHECK(dist > 10 * floor);
}

TEST_CASE("radially symmetric data gives a reflection-symmetric trace") {
    auto cfg = base_config(bump_medium(0.3));
    cfg.boundary_samples = 128; // even count: reflection maps samples to samples
    const auto run = solve_wave(cfg);
    const std::size_t P = run.trace.points.size();
    double dev = 0;
    for (std::size_t ti = 0; ti < run.trace.times.size(); ++ti)
        for (std::size_t pi = 0; pi < P; ++pi) {
            const std::size_t pr = (P - pi) % P; // angle -> -angle
            dev = std::max(dev, std::abs(run.trace.at(ti, pi) - run.trace.at(ti, pr)));
        }
    CHECK(dev < 1e-10);
}

TEST_CASE("level-crossing arrival matches x.omega on Euclidean media") {
    auto cfg = base_config(Medium<2>::euclidean());
    const auto run = solve_wave(cfg);
    double err = 0;
    run.grid.for_each([&](const std::array<int, 2>& idx, std::int64_t f) {
        const Vec<2> x = run.grid.point(idx);
        if (dot(x, cfg.omega) > cfg.T - 3 * cfg.eps) return; // front must pass fully
        const double t = run.arrival[static_cast<std::size_t>(f)];
        if (std::isnan(t)) return;
        err = std::max(err, std::abs(t - dot(x, cfg.omega)));
    });
    CHECK(err < cfg.eps + cfg.dt);
}

TEST_CASE("causality and step limits hold against the arrival field") {
    const auto m = bump_medium();
    auto cfg = base_config(m, 2.4);
    cfg.snapshot_stride = 25;
    const auto run = solve_wave(cfg);
    REQUIRE(!run.snapshots.empty());

    const Grid<2> cube = Grid<2>::centered_cube(1.5, kH);
    const auto alpha = arrival_by_sweeping(m, cfg.omega, cube);

    double ahead = 0;    // |U| strictly before the front cone
    double behind_dev = 0; // |U-1| well behind the front
    for (const auto& [t, snap] : run.snapshots) {
        cube.for_each([&](const std::array<int, 2>& idx, std::int64_t f) {
            const Vec<2> x = cube.point(idx);
            const auto bi = run.grid.nearest(x);
            const double u = snap[static_cast<std::size_t>(run.grid.flat(bi))];
            const double a = alpha.alpha[static_cast<std::size_t>(f)];
            if (t < a - cfg.eps - 1e-9) ahead = std::max(ahead, std::abs(u));
            if (t > a + cfg.eps + 0.25) behind_dev = std::max(behind_dev, std::abs(u - 1.0));
        });
    }
    CHECK(ahead < 1e-12);
    CHECK(behind_dev < 1e-2);
}

TEST_CASE("interior energy is conserved and improves when dt halves") {
    const auto m = bump_medium();
    auto cfg = base_config(m, 1.2);
    cfg.energy_stride = 2;
    const auto run = solve_wave(cfg);
    const MediumBounds b = compute_bounds(m, 200);
    const auto window = fully_interior_window(run.grid, cfg, b);
    REQUIRE(window.first < window.second);
    const EnergyDrift d1 = energy_drift_in_window(run.energy, window.first, window.second);
    CHECK(d1.samples > 10);
    CHECK(d1.relative_drift < 1e-3);

    auto cfg2 = cfg;
    cfg2.dt = cfg.dt / 2;
    cfg2.energy_stride = 4;
    const auto run2 = solve_wave(cfg2);
    const EnergyDrift d2 = energy_drift_in_window(run2.energy, window.first, window.second);
    CHECK(d2.relative_drift < 0.5 * d1.relative_drift);
}

TEST_CASE("oblique incidence has no conservation window") {
    auto cfg = base_config(Medium<2>::euclidean());
    cfg.omega = normalized(Vec<2>{{1.0, 1.0}});
    const Grid<2> grid = Grid<2>::centered_cube(cfg.required_box_half_width(), cfg.h);
    const auto window = fully_interior_window(grid, cfg, compute_bounds(cfg.medium, 50));
    CHECK(window.first > window.second);
}

TEST_CASE("CFL violation and short horizons are rejected or warned") {
    auto cfg = base_config(Medium<2>::euclidean());
    cfg.dt = cfg.h; // far above the cap
    CHECK_THROWS_AS(solve_wave(cfg), Error);

    auto cfg2 = base_config(Medium<2>::euclidean(), 1.0); // T below 4*sqrt(g_max)-1 = 3
    const auto run = solve_wave(cfg2);
    bool warned = false;
    for (const auto& w : run.warnings) warned |= w.find("horizon") != std::string::npos;
    CHECK(warned);
}

TEST_CASE("trace self-convergence is second order") {
    // halving h (and dt with it) should cut the defect vs the exact plane wave
    // by roughly 4; accept >= 3 as the second-order signature
    auto cfg1 = base_config(Medium<2>::euclidean(), 1.6);
    const double e1 = trace_linf_error_vs_plane(solve_wave(cfg1).trace);
    auto cfg2 = cfg1;
    cfg2.h = cfg1.h / 2;
    cfg2.dt = cfg1.dt / 2;
    const double e2 = trace_linf_error_vs_plane(solve_wave(cfg2).trace);
    CHECK(e2 < e1 / 3.0);
}
