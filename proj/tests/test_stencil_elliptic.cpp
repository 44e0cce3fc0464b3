#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "faslab/elliptic.hpp"
#include "faslab/rigidity.hpp"

using namespace faslab;

namespace {

DiffeoSpec<2> rotation_spec(double amplitude = 0.1, double radius = 0.8) {
    DiffeoSpec<2> spec;
    DisplacementTerm<2> t;
    t.type = DisplacementTerm<2>::Type::Rotation;
    t.amplitude = amplitude;
    t.center = Vec<2>{};
    t.radius = radius;
    t.axis_p = 0;
    t.axis_q = 1;
    spec.terms.push_back(t);
    return spec;
}

} // namespace

TEST_CASE("flux operator is exactly symmetric for full-tensor coefficients") {
    const auto m = make_pullback_metric(rotation_spec(0.15, 0.7), 0.1);
    const Grid<2> grid = Grid<2>::centered_cube(1.2, 0.1);
    const FluxCoeffs<2> coeffs = build_flux_coeffs(m, grid);
    REQUIRE(coeffs.has_cross);
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    const std::size_t total = static_cast<std::size_t>(grid.size());
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> u(total), v(total), Lu, Lv;
        for (auto& x : u) x = U(rng);
        for (auto& x : v) x = U(rng);
        apply_flux_laplacian(coeffs, u, Lu);
        apply_flux_laplacian(coeffs, v, Lv);
        double a = 0, b = 0;
        for (std::size_t i = 0; i < total; ++i) {
            a += Lu[i] * v[i];
            b += u[i] * Lv[i];
        }
        // interior-supported test vectors make <Lu,v> = <u,Lv> exactly;
        // here boundary rows are zeroed so only the interior contributes
        std::vector<double> ui = u, vi = v;
        grid.for_each([&](const std::array<int, 2>& idx, std::int64_t f) {
            if (!grid.is_interior(idx, 2)) {
                ui[static_cast<std::size_t>(f)] = 0;
                vi[static_cast<std::size_t>(f)] = 0;
            }
        });
        apply_flux_laplacian(coeffs, ui, Lu);
        apply_flux_laplacian(coeffs, vi, Lv);
        a = b = 0;
        for (std::size_t i = 0; i < total; ++i) {
            a += Lu[i] * vi[i];
            b += ui[i] * Lv[i];
        }
        CHECK(a == Catch::Approx(b).epsilon(1e-12).margin(1e-10));
    }
}

TEST_CASE("flux operator kills affine fields where coefficients are constant") {
    const auto e = Medium<2>::euclidean();
    const Grid<2> grid = Grid<2>::centered_cube(1.0, 0.1);
    const FluxCoeffs<2> coeffs = build_flux_coeffs(e, grid);
    std::vector<double> u(static_cast<std::size_t>(grid.size())), Lu;
    grid.for_each([&](const std::array<int, 2>& idx, std::int64_t f) {
        const Vec<2> x = grid.point(idx);
        u[static_cast<std::size_t>(f)] = 0.3 - 1.7 * x[0] + 0.9 * x[1];
    });
    apply_flux_laplacian(coeffs, u, Lu);
    for (double v : Lu) CHECK(std::abs(v) < 1e-11);
}

TEST_CASE("harmonic solve on Euclidean disk returns the linear extension") {
    const auto e = Medium<2>::euclidean();
    const Grid<2> grid = Grid<2>::centered_cube(1.5, 0.03);
    const Vec<2> omega = normalized(Vec<2>{{2.0, -1.0}});
    const auto f = solve_harmonic_coordinate(e, omega, grid, 1.05, 1e-12);
    double err = 0;
    grid.for_each([&](const std::array<int, 2>& idx, std::int64_t flat) {
        const Vec<2> x = grid.point(idx);
        err = std::max(err,
                       std::abs(f.values[static_cast<std::size_t>(flat)] - dot(x, omega)));
    });
    CHECK(err < 1e-9);
}

TEST_CASE("harmonic coordinates of a pullback metric recover psi components") {
    const DiffeoSpec<2> spec = rotation_spec();
    const auto m = make_pullback_metric(spec, 0.1);
    const Grid<2> grid = Grid<2>::centered_cube(1.5, 0.03);
    for (int i = 0; i < 2; ++i) {
        const auto f = solve_harmonic_coordinate(m, Vec<2>::axis(i), grid, 1.05, 1e-11);
        double err = 0;
        grid.for_each([&](const std::array<int, 2>& idx, std::int64_t flat) {
            const Vec<2> x = grid.point(idx);
            if (norm(x) >= 1.05) return;
            err = std::max(err, std::abs(f.values[static_cast<std::size_t>(flat)] -
                                         spec.psi(x)[i]));
        });
        CHECK(err < 0.04); // second order at h = 0.03
    }
}

TEST_CASE("harmonic recovery error drops at second order under refinement") {
    const DiffeoSpec<2> spec = rotation_spec();
    const auto m = make_pullback_metric(spec, 0.1);
    const auto err_at = [&](double h) {
        const Grid<2> grid = Grid<2>::centered_cube(1.5, h);
        const auto f = solve_harmonic_coordinate(m, Vec<2>::axis(0), grid, 1.05, 1e-12);
        double err = 0;
        grid.for_each([&](const std::array<int, 2>& idx, std::int64_t flat) {
            const Vec<2> x = grid.point(idx);
            if (norm(x) >= 1.05) return;
            err = std::max(err, std::abs(f.values[static_cast<std::size_t>(flat)] -
                                         spec.psi(x)[0]));
        });
        return err;
    };
    const double e1 = err_at(0.06), e2 = err_at(0.03);
    CHECK(e2 < 0.35 * e1); // ~4x for a second-order discretization
}

TEST_CASE("laplacian diagnostic vanishes on the linear field and converges on psi") {
    const auto e = Medium<2>::euclidean();
    const Grid<2> grid = Grid<2>::centered_cube(1.5, 0.03);
    std::vector<double> lin(static_cast<std::size_t>(grid.size()));
    grid.for_each([&](const std::array<int, 2>& idx, std::int64_t f) {
        lin[static_cast<std::size_t>(f)] = dot(grid.point(idx), Vec<2>::axis(0));
    });
    CHECK(laplacian_of_field(grid, lin, e).linf_ball < 1e-11);

    // pullback metric: the exact field psi(x).omega is metric-harmonic, so the
    // discrete residual is pure truncation and halves twice per refinement
    const DiffeoSpec<2> spec = rotation_spec();
    const auto m = make_pullback_metric(spec, 0.1);
    const auto resid_at = [&](double h) {
        const Grid<2> g = Grid<2>::centered_cube(1.5, h);
        std::vector<double> vals(static_cast<std::size_t>(g.size()));
        g.for_each([&](const std::array<int, 2>& idx, std::int64_t f) {
            vals[static_cast<std::size_t>(f)] = spec.psi(g.point(idx))[0];
        });
        return laplacian_of_field(g, vals, m).l2_ball;
    };
    const double r1 = resid_at(0.06), r2 = resid_at(0.03);
    CHECK(r2 < 0.35 * r1);
}

TEST_CASE("pair-direction identity holds to solver tolerance by linearity") {
    for (int which = 0; which < 2; ++which) {
        Medium<2> m;
        if (which == 0) {
            m = make_pullback_metric(rotation_spec(), 0.1);
        } else {
            std::array<std::vector<Bump<2>>, 2> ab;
            ab[0].push_back(Bump<2>{0.2, Vec<2>{}, 0.5});
            m = make_diagonal_metric<2>(ab, 0.1);
        }
        const Grid<2> grid = Grid<2>::centered_cube(1.5, 0.05);
        const auto dirs = omega_set<2>();
        REQUIRE(dirs.size() == 3);
        const auto f0 = solve_harmonic_coordinate(m, dirs[0], grid, 1.05, 1e-11);
        const auto f1 = solve_harmonic_coordinate(m, dirs[1], grid, 1.05, 1e-11);
        const auto fp = solve_harmonic_coordinate(m, dirs[2], grid, 1.05, 1e-11);
        double dev = 0;
        for (std::size_t i = 0; i < fp.values.size(); ++i)
            dev = std::max(dev, std::abs(fp.values[i] -
                                         (f0.values[i] + f1.values[i]) / std::sqrt(2.0)));
        CHECK(dev < 1e-9);
    }
}

TEST_CASE("cg reports non-convergence as an error") {
    const auto e = Medium<2>::euclidean();
    const Grid<2> grid = Grid<2>::centered_cube(1.5, 0.05);
    DirichletProblem<2> prob = make_disk_problem<2>(
        e, grid, 1.0, [](const Vec<2>& x) { return x[0]; });
    CHECK_THROWS_AS(solve_dirichlet_cg(prob, 1e-14, 2), Error);
}

TEST_CASE("omega_set enumerates axes plus normalized pairs") {
    const auto d2 = omega_set<2>();
    REQUIRE(d2.size() == 3);
    CHECK(norm(d2[0] - Vec<2>::axis(0)) == 0.0);
    CHECK(norm(d2[1] - Vec<2>::axis(1)) == 0.0);
    CHECK(norm(d2[2] - normalized(Vec<2>{{1.0, 1.0}})) < 1e-15);
    const auto d3 = omega_set<3>();
    REQUIRE(d3.size() == 6);
    for (const auto& w : d3) CHECK(std::abs(norm(w) - 1.0) < 1e-15);
}
