#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "faslab/grid.hpp"
#include "faslab/vec.hpp"

using namespace faslab;

TEST_CASE("small matrix algebra round trips") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        Mat<2> A;
        do {
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) A(i, j) = U(rng);
        } while (std::abs(determinant(A)) < 0.1);
        const Mat<2> I = A * inverse(A);
        CHECK(max_abs(I - Mat<2>::identity()) < 1e-12);

        Mat<3> B;
        do {
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) B(i, j) = U(rng);
        } while (std::abs(determinant(B)) < 0.1);
        CHECK(max_abs(B * inverse(B) - Mat<3>::identity()) < 1e-10);
    }
}

TEST_CASE("symmetric eigenvalues match the 2x2 closed form") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    for (int trial = 0; trial < 500; ++trial) {
        const double a = U(rng), b = U(rng), c = U(rng);
        Mat<2> S;
        S(0, 0) = a;
        S(0, 1) = S(1, 0) = b;
        S(1, 1) = c;
        const double mean = 0.5 * (a + c);
        const double disc = std::sqrt(0.25 * (a - c) * (a - c) + b * b);
        const auto ev = symmetric_eigenvalues(S);
        CHECK(ev[0] == Catch::Approx(mean - disc).margin(1e-12));
        CHECK(ev[1] == Catch::Approx(mean + disc).margin(1e-12));
    }
}

TEST_CASE("grid flat/unflat round trip and point lookup") {
    const Grid<3> g = Grid<3>::centered_cube(1.0, 0.25);
    REQUIRE(g.dims[0] == 9);
    std::mt19937 rng(3);
    std::uniform_int_distribution<int> D(0, 8);
    for (int trial = 0; trial < 200; ++trial) {
        const std::array<int, 3> idx = {D(rng), D(rng), D(rng)};
        CHECK(g.unflat(g.flat(idx)) == idx);
    }
    CHECK(g.point({4, 4, 4})[0] == Catch::Approx(0.0).margin(1e-15));
    CHECK(g.point({0, 0, 0})[0] == Catch::Approx(-1.0).margin(1e-15));
}

TEST_CASE("multilinear interpolation is exact on affine fields") {
    const Grid<2> g = Grid<2>::centered_cube(1.5, 0.1);
    std::vector<double> f(static_cast<std::size_t>(g.size()));
    g.for_each([&](const std::array<int, 2>& idx, std::int64_t flat) {
        const Vec<2> x = g.point(idx);
        f[static_cast<std::size_t>(flat)] = 3.0 + 2.0 * x[0] - 0.7 * x[1];
    });
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> U(-1.4, 1.4);
    for (int trial = 0; trial < 300; ++trial) {
        const Vec<2> x{{U(rng), U(rng)}};
        CHECK(g.interpolate(f, x) ==
              Catch::Approx(3.0 + 2.0 * x[0] - 0.7 * x[1]).margin(1e-12));
    }
}
