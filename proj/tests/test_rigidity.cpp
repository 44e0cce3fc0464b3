#include <catch2/catch_amalgamated.hpp>

#include "faslab/rigidity.hpp"

using namespace faslab;

namespace {

// unit-test profile: coarse grid, short-but-legal horizons
template <int N = 2>
RigidityRunParams<N> test_params(double gmax) {
    RigidityRunParams<N> p;
    p.h = 0.03;
    p.T = 4.0 * std::sqrt(gmax) - 1.0 + 0.3;
    p.boundary_samples = 128;
    p.bounds_resolution = 200;
    return p;
}

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

TEST_CASE("density pipeline: trivial medium is consistent") {
    const auto m = Medium<2>::euclidean();
    const auto p = test_params<2>(1.0);
    ArrivalField<2> alpha;
    std::vector<double> rho_hat;
    const RigidityReport rep = verify_rho_rigidity(m, Vec<2>::axis(0), p, &alpha, &rho_hat);
    INFO(rep.verdict);
    CHECK(rep.verdict.find("consistent") != std::string::npos);
    CHECK_FALSE(rep.falsification);
    CHECK(rep.info.at("trace_distance") == 0.0);
    CHECK(rep.info.at("rho_hat_vs_one_linf") < 5 * p.h);
    CHECK(rep.info.at("alpha_vs_harmonic_linf") < 5 * p.h);
}

TEST_CASE("density pipeline: bump medium is distinguishable") {
    const auto m = make_bump_density<2>(0.2, Vec<2>{}, 0.5, 0.1);
    const MediumBounds b = compute_bounds(m, 200);
    const auto p = test_params<2>(b.g_max);
    const RigidityReport rep = verify_rho_rigidity(m, Vec<2>::axis(0), p);
    CHECK(rep.verdict.find("distinguishable") != std::string::npos);
    CHECK_FALSE(rep.falsification);
    CHECK(rep.info.at("trace_distance") >
          10 * rep.info.at("noise_floor"));
}

TEST_CASE("metric pipeline: pullback medium is consistent and recovers psi") {
    const DiffeoSpec<2> spec = rotation_spec();
    const auto m = make_pullback_metric(spec, 0.1);
    const MediumBounds b = compute_bounds(m, 200);
    auto p = test_params<2>(b.g_max);
    DiffeoRecovery<2> rec;
    const RigidityReport rep = verify_metric_rigidity(m, p, &rec);
    INFO(rep.verdict);
    CHECK(rep.verdict.find("consistent") != std::string::npos);
    CHECK_FALSE(rep.falsification);
    CHECK(rec.min_det > 0);
    CHECK(rec.collar_identity_linf < 1e-8);
    // ground truth match at the coarse-grid tolerance
    const double tol = p.thresholds.psi_match_at_default_h * (p.h / 0.015) * (p.h / 0.015);
    CHECK(rec.psi_vs_truth_linf < tol);
    CHECK(rec.ortho_linf_ball < 15 * p.h);
}

TEST_CASE("metric pipeline: diagonal bump metric is distinguishable") {
    std::array<std::vector<Bump<2>>, 2> ab;
    ab[0].push_back(Bump<2>{0.2, Vec<2>{}, 0.5});
    const auto m = make_diagonal_metric<2>(ab, 0.1);
    const MediumBounds b = compute_bounds(m, 200);
    auto p = test_params<2>(b.g_max);
    const RigidityReport rep = verify_metric_rigidity(m, p);
    CHECK(rep.verdict.find("distinguishable") != std::string::npos);
}

TEST_CASE("checklist passes on Euclidean and pullback media") {
    for (int which = 0; which < 2; ++which) {
        const Medium<2> m = which == 0 ? Medium<2>::euclidean()
                                       : make_pullback_metric(rotation_spec(), 0.1);
        const MediumBounds b = compute_bounds(m, 200);
        auto p = test_params<2>(b.g_max);
        p.T = 2.0 * std::sqrt(b.g_max) - 1.0 + 0.5;
        const ChecklistReport rep =
            diffeo_condition_checklist(m, Vec<2>::axis(0), p);
        REQUIRE(rep.items.size() == 5);
        for (const auto& item : rep.items) {
            INFO(item.id << ": " << item.note);
            CHECK(item.status == CheckStatus::Pass);
        }
    }
}

TEST_CASE("checklist flags a fold for a strongly lensing bump") {
    const auto m = make_bump_density<2>(3.0, Vec<2>{}, 0.5, 0.1);
    const MediumBounds b = compute_bounds(m, 200);
    auto p = test_params<2>(b.g_max);
    p.T = 2.0 * std::sqrt(b.g_max) - 1.0 + 1.0;
    const ChecklistReport rep = diffeo_condition_checklist(m, Vec<2>::axis(0), p);
    bool c_flagged = false;
    for (const auto& item : rep.items)
        if (item.id == "c_injectivity") c_flagged = item.status != CheckStatus::Pass;
    CHECK(c_flagged);
}

TEST_CASE("laplacian of the arrival field is small for Euclidean media") {
    const auto e = Medium<2>::euclidean();
    const Grid<2> grid = Grid<2>::centered_cube(1.5, 0.03);
    const auto alpha = arrival_by_sweeping(e, Vec<2>::axis(0), grid);
    const auto rep = laplacian_of_arrival(alpha, e);
    CHECK(rep.linf_ball < 1e-6);
}
