#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "faslab/media.hpp"

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

TEST_CASE("bump density trivial values") {
    const auto flat = make_bump_density<2>(0.0, Vec<2>{}, 0.5, 0.1);
    CHECK(flat.rho(Vec<2>{}) == 1.0);
    CHECK(flat.rho(Vec<2>{{0.3, -0.2}}) == 1.0);

    const auto m = make_bump_density<2>(0.2, Vec<2>{}, 0.5, 0.1);
    CHECK(m.rho(Vec<2>{}) == Catch::Approx(1.2).margin(1e-15));
    CHECK(m.rho(Vec<2>{{0.5, 0.0}}) == 1.0);  // support boundary, exact
    CHECK(m.rho(Vec<2>{{0.7, 0.1}}) == 1.0);
}

TEST_CASE("bump density rejects bad parameters") {
    CHECK_THROWS_AS(make_bump_density<2>(-1.0, Vec<2>{}, 0.5, 0.1), Error);
    CHECK_THROWS_AS(make_bump_density<2>(0.2, Vec<2>{}, 0.99, 0.1), Error);
    CHECK_THROWS_AS(make_bump_density<2>(0.2, Vec<2>{{0.6, 0.0}}, 0.5, 0.1), Error);
}

TEST_CASE("bounds of the standard bump match a dense grid scan") {
    const auto m = make_bump_density<2>(0.2, Vec<2>{}, 0.5, 0.1);
    // oracle: dense maximization on the 401^2 nested grid
    const MediumBounds b = compute_bounds(m, 400);
    CHECK(b.rho_max == Catch::Approx(1.2).margin(1e-6));
    CHECK(b.rho_min == 1.0);
    CHECK(b.g_max == Catch::Approx(1.2).margin(1e-6));
    // conformal: v^T (rho I) v = rho |v|^2, so g bounds equal rho bounds
    CHECK(b.g_min == b.rho_min);
    CHECK(b.g_max == b.rho_max);
}

TEST_CASE("bounds are monotone under nested refinement") {
    const auto m = make_bump_density<2>(0.35, Vec<2>{{0.13, -0.07}}, 0.42, 0.1);
    const MediumBounds c = compute_bounds(m, 50);
    const MediumBounds f = compute_bounds(m, 100);
    CHECK(f.rho_max >= c.rho_max);
    CHECK(f.rho_min <= c.rho_min);
    CHECK(f.g_max >= c.g_max);
    CHECK(f.g_min <= c.g_min);
}

TEST_CASE("pullback metric matches a finite-difference Jacobian oracle") {
    const DiffeoSpec<2> spec = rotation_spec();
    const auto m = make_pullback_metric(spec, 0.1);
    std::mt19937 rng(23);
    std::uniform_real_distribution<double> U(-0.9, 0.9);
    const double fd = 1e-6;
    for (int trial = 0; trial < 100; ++trial) {
        const Vec<2> x{{U(rng), U(rng)}};
        // oracle: centered finite differences of psi
        Mat<2> J_fd;
        for (int j = 0; j < 2; ++j) {
            Vec<2> xp = x, xm = x;
            xp[j] += fd;
            xm[j] -= fd;
            const Vec<2> dp = spec.psi(xp), dm = spec.psi(xm);
            for (int i = 0; i < 2; ++i) J_fd(i, j) = (dp[i] - dm[i]) / (2 * fd);
        }
        const Mat<2> g_fd = J_fd.transposed() * J_fd;
        CHECK(max_abs(m.metric(x) - g_fd) < 1e-6);
    }
}

TEST_CASE("pullback metric of the identity is Euclidean everywhere") {
    const auto m = make_pullback_metric(DiffeoSpec<2>{}, 0.1);
    std::mt19937 rng(31);
    std::uniform_real_distribution<double> U(-1.4, 1.4);
    for (int trial = 0; trial < 200; ++trial) {
        const Vec<2> x{{U(rng), U(rng)}};
        CHECK(max_abs(m.metric(x) - Mat<2>::identity()) == 0.0);
    }
}

TEST_CASE("pullback metric is Euclidean outside the displacement support") {
    const auto m = make_pullback_metric(rotation_spec(), 0.1);
    for (double r : {0.9, 0.95, 1.1, 1.4}) {
        const Vec<2> x{{r, 0.0}};
        CHECK(max_abs(m.metric(x) - Mat<2>::identity()) == 0.0);
        CHECK(m.m_coeff(x) == 1.0);
    }
}

TEST_CASE("pullback metric eigenvalue scan matches the dense oracle") {
    const auto m = make_pullback_metric(rotation_spec(), 0.1);
    // oracle: 801^2 eigenvalue scan
    const MediumBounds dense = compute_bounds(m, 800);
    const MediumBounds b = compute_bounds(m, 400);
    CHECK(std::abs(b.g_max - dense.g_max) < 1e-4);
    CHECK(std::abs(b.g_min - dense.g_min) < 1e-4);
}

TEST_CASE("pullback construction rejects non-invertible displacement") {
    // amplitude large enough to fold the map
    DiffeoSpec<2> spec = rotation_spec(4.0, 0.8);
    CHECK_THROWS_AS(make_pullback_metric(spec, 0.1), Error);
}

TEST_CASE("metric derivatives agree with finite differences of the metric") {
    const auto pull = make_pullback_metric(rotation_spec(), 0.1);
    const auto dens = make_bump_density<2>(0.3, Vec<2>{{0.1, 0.2}}, 0.4, 0.1);
    std::mt19937 rng(41);
    std::uniform_real_distribution<double> U(-0.85, 0.85);
    const double fd = 1e-6;
    for (int trial = 0; trial < 60; ++trial) {
        const Vec<2> x{{U(rng), U(rng)}};
        for (const auto* med : {&pull, &dens}) {
            const auto dg = med->metric_derivatives(x);
            for (int k = 0; k < 2; ++k) {
                Vec<2> xp = x, xm = x;
                xp[k] += fd;
                xm[k] -= fd;
                const Mat<2> fd_dg = (med->metric(xp) - med->metric(xm)) * (1.0 / (2 * fd));
                CHECK(max_abs(dg[k] - fd_dg) < 1e-8);
            }
        }
    }
}

TEST_CASE("second derivatives converge at second order under step refinement") {
    const auto m = make_bump_density<2>(0.3, Vec<2>{}, 0.5, 0.1);
    const Vec<2> x{{0.17, -0.08}};
    // smoothness probe: centered second differences of rho against the
    // analytic bump hessian
    const Mat<2> exact = m.bumps[0].hessian(x);
    const auto rho = [&](const Vec<2>& y) { return m.rho(y); };
    const auto fd_hess = [&](double s) {
        Mat<2> H;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                Vec<2> xpp = x, xpm = x, xmp = x, xmm = x;
                xpp[i] += s; xpp[j] += s;
                xpm[i] += s; xpm[j] -= s;
                xmp[i] -= s; xmp[j] += s;
                xmm[i] -= s; xmm[j] -= s;
                H(i, j) = (rho(xpp) - rho(xpm) - rho(xmp) + rho(xmm)) / (4 * s * s);
            }
        return H;
    };
    const double e1 = max_abs(fd_hess(1e-2) - exact);
    const double e2 = max_abs(fd_hess(5e-3) - exact);
    CHECK(e2 < e1 / 3.0); // ~4x for a second-order formula
}

TEST_CASE("admissibility report is exact for contained media") {
    const auto ok = make_bump_density<2>(0.2, Vec<2>{}, 0.5, 0.1);
    const auto rep = check_admissible(ok, 20000);
    CHECK(rep.pass);
    CHECK(rep.max_deviation == 0.0);

    const auto flat = Medium<2>::euclidean();
    CHECK(check_admissible(flat, 1000).pass);
}

TEST_CASE("admissibility check locates a violating bump") {
    // bypass the factory validation to build a non-admissible medium
    Medium<2> bad;
    bad.kind = MediumKind::IsotropicDensity;
    bad.delta = 0.1;
    bad.bumps.push_back(Bump<2>{0.2, Vec<2>{}, 0.99});
    const auto rep = check_admissible(bad, 20000);
    CHECK_FALSE(rep.pass);
    CHECK(rep.max_deviation > 0);
    // witness must lie inside the inspection shell and inside the bump support
    CHECK(norm(rep.witness) >= 0.9 - 1e-12);
    CHECK(norm(rep.witness) < 0.99);
    // direct evaluation at |x| = 0.95 confirms the deviation
    CHECK(bad.rho(Vec<2>{{0.95, 0.0}}) != 1.0);
}

TEST_CASE("metric eigenvalues stay inside the reported bounds") {
    const auto m = make_pullback_metric(rotation_spec(0.15, 0.7), 0.1);
    const MediumBounds b = compute_bounds(m, 400);
    std::mt19937 rng(57);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int trial = 0; trial < 500; ++trial) {
        const Vec<2> x{{U(rng), U(rng)}};
        const auto ev = symmetric_eigenvalues(m.metric(x));
        CHECK(ev[0] >= b.g_min - 1e-9);
        CHECK(ev[1] <= b.g_max + 1e-9);
    }
}

TEST_CASE("medium serialization round trips losslessly") {
    const auto dens = make_multi_bump_density<2>(
        {Bump<2>{0.2, Vec<2>{{0.1, -0.05}}, 0.5}, Bump<2>{-0.13, Vec<2>{{-0.3, 0.2}}, 0.31}},
        0.1);
    const auto pull = make_pullback_metric(rotation_spec(0.1234567891234567, 0.77), 0.1);
    std::array<std::vector<Bump<2>>, 2> ab;
    ab[0].push_back(Bump<2>{0.2, Vec<2>{}, 0.5});
    const auto diag = make_diagonal_metric<2>(ab, 0.1);

    for (const auto* med : {&dens, &pull, &diag}) {
        const nlohmann::json j = medium_to_json(*med);
        const Medium<2> back = medium_from_json<2>(j);
        const nlohmann::json j2 = medium_to_json(back);
        CHECK(j.dump() == j2.dump());
        // spot-check evaluator equality at random points
        std::mt19937 rng(71);
        std::uniform_real_distribution<double> U(-1.0, 1.0);
        for (int trial = 0; trial < 50; ++trial) {
            const Vec<2> x{{U(rng), U(rng)}};
            CHECK(max_abs(med->metric(x) - back.metric(x)) == 0.0);
        }
    }
}

TEST_CASE("diagonal metric kind evaluates as expected") {
    std::array<std::vector<Bump<2>>, 2> ab;
    ab[0].push_back(Bump<2>{0.2, Vec<2>{}, 0.5});
    const auto m = make_diagonal_metric<2>(ab, 0.1);
    const Mat<2> g = m.metric(Vec<2>{});
    CHECK(g(0, 0) == Catch::Approx(1.2).margin(1e-15));
    CHECK(g(1, 1) == 1.0);
    CHECK(g(0, 1) == 0.0);
    CHECK(m.m_coeff(Vec<2>{}) == 1.0);
}

TEST_CASE("density weight equals rho in any dimension") {
    const auto m2 = make_bump_density<2>(0.4, Vec<2>{}, 0.5, 0.1);
    const auto m3 = make_bump_density<3>(0.4, Vec<3>{}, 0.5, 0.1);
    const Vec<2> x2{{0.1, 0.2}};
    const Vec<3> x3{{0.1, 0.2, -0.1}};
    CHECK(m2.weight(x2) == Catch::Approx(m2.rho(x2)).margin(1e-14));
    CHECK(m3.weight(x3) == Catch::Approx(m3.rho(x3)).margin(1e-14));
    // n=3: m = rho^{-1/2}
    CHECK(m3.m_coeff(x3) == Catch::Approx(std::pow(m3.rho(x3), -0.5)).margin(1e-14));
}
