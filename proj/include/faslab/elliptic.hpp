#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <vector>

#include "faslab/stencil.hpp"

namespace faslab {

// Dirichlet problem L u = 0 on a masked node set, u given elsewhere.
// unknown[p] = 1 marks a degree of freedom; every other node carries fixed
// boundary data. A = -L restricted to the unknowns is symmetric (principal
// submatrix of the symmetric full operator) and positive definite for the
// admissible coefficient fields used here.
template <int N>
struct DirichletProblem {
    FluxCoeffs<N> coeffs;
    std::vector<std::uint8_t> unknown;
    std::vector<double> u; // in: boundary data everywhere; out: solution

    std::int64_t dof_count() const {
        std::int64_t n = 0;
        for (auto m : unknown) n += m;
        return n;
    }
};

struct CgStats {
    int iterations = 0;
    double relative_residual = 0;
};

// Jacobi-preconditioned CG, matrix-free through apply_flux_laplacian.
// Deterministic: serial loops, fixed order.
template <int N>
inline CgStats solve_dirichlet_cg(DirichletProblem<N>& prob, double rel_tol = 1e-10,
                                  int max_iters = 20000) {
    const Grid<N>& grid = prob.coeffs.grid;
    const std::size_t total = static_cast<std::size_t>(grid.size());
    if (prob.unknown.size() != total || prob.u.size() != total)
        throw Error("solve_dirichlet_cg: field sizes do not match the grid");

    // boundary-data contribution: b = L (u restricted to fixed nodes)
    std::vector<std::uint8_t> fixed(total);
    for (std::size_t i = 0; i < total; ++i) fixed[i] = prob.unknown[i] ? 0 : 1;
    std::vector<double> b;
    apply_flux_laplacian(prob.coeffs, prob.u, b, &fixed);
    for (std::size_t i = 0; i < total; ++i)
        if (!prob.unknown[i]) b[i] = 0;

    // diagonal of A for the Jacobi preconditioner (cross terms are off-diagonal)
    std::vector<double> diag(total, 1.0);
    const double inv_h2 = 1.0 / (grid.h * grid.h);
    grid.for_each([&](const std::array<int, N>& idx, std::int64_t f) {
        if (!prob.unknown[static_cast<std::size_t>(f)]) return;
        if (!grid.is_interior(idx)) return;
        double d = 0;
        for (int dd = 0; dd < N; ++dd) {
            const double fp = prob.coeffs.identity
                                  ? 1.0
                                  : prob.coeffs.face[dd][static_cast<std::size_t>(f)];
            const double fm =
                prob.coeffs.identity
                    ? 1.0
                    : prob.coeffs.face[dd][static_cast<std::size_t>(f - grid.strides[dd])];
            d += (fp + fm) * inv_h2;
        }
        diag[static_cast<std::size_t>(f)] = d;
    });

    std::vector<double> x(total, 0.0), r = b, z(total), p(total), Ap(total);
    const auto apply_A = [&](const std::vector<double>& v, std::vector<double>& out) {
        apply_flux_laplacian(prob.coeffs, v, out, &prob.unknown);
        for (std::size_t i = 0; i < total; ++i)
            out[i] = prob.unknown[i] ? -out[i] : 0.0;
    };
    const auto dot_unknown = [&](const std::vector<double>& a, const std::vector<double>& c) {
        double s = 0;
        for (std::size_t i = 0; i < total; ++i)
            if (prob.unknown[i]) s += a[i] * c[i];
        return s;
    };

    double bnorm = std::sqrt(dot_unknown(b, b));
    CgStats stats;
    if (bnorm == 0) {
        for (std::size_t i = 0; i < total; ++i)
            if (prob.unknown[i]) prob.u[i] = 0;
        return stats;
    }
    for (std::size_t i = 0; i < total; ++i) z[i] = prob.unknown[i] ? r[i] / diag[i] : 0.0;
    p = z;
    double rz = dot_unknown(r, z);
    for (int it = 1; it <= max_iters; ++it) {
        apply_A(p, Ap);
        const double pAp = dot_unknown(p, Ap);
        if (pAp <= 0) {
            std::ostringstream os;
            os << "solve_dirichlet_cg: non-positive curvature p^T A p = " << pAp
               << " (discretization is not SPD)";
            throw Error(os.str());
        }
        const double alpha = rz / pAp;
        for (std::size_t i = 0; i < total; ++i)
            if (prob.unknown[i]) {
                x[i] += alpha * p[i];
                r[i] -= alpha * Ap[i];
            }
        const double rnorm = std::sqrt(dot_unknown(r, r));
        stats.iterations = it;
        stats.relative_residual = rnorm / bnorm;
        if (stats.relative_residual < rel_tol) {
            for (std::size_t i = 0; i < total; ++i)
                if (prob.unknown[i]) prob.u[i] = x[i];
            return stats;
        }
        for (std::size_t i = 0; i < total; ++i) z[i] = prob.unknown[i] ? r[i] / diag[i] : 0.0;
        const double rz_new = dot_unknown(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < total; ++i)
            if (prob.unknown[i]) p[i] = z[i] + beta * p[i];
    }
    std::ostringstream os;
    os << "solve_dirichlet_cg: no convergence after " << max_iters
       << " iterations (relative residual " << stats.relative_residual << ")";
    throw Error(os.str());
}

// Solves L u = 0 on the disk |x| < radius with u = data(x) outside, on the
// given grid. The grid must strictly contain the disk with at least a
// two-node margin.
template <int N>
inline DirichletProblem<N> make_disk_problem(const Medium<N>& medium, const Grid<N>& grid,
                                             double radius,
                                             const std::function<double(const Vec<N>&)>& data) {
    DirichletProblem<N> prob;
    prob.coeffs = build_flux_coeffs(medium, grid);
    const std::size_t total = static_cast<std::size_t>(grid.size());
    prob.unknown.assign(total, 0);
    prob.u.assign(total, 0.0);
    if (grid.half_width() < radius + 2 * grid.h)
        throw Error("make_disk_problem: grid does not contain the disk with margin");
    grid.for_each([&](const std::array<int, N>& idx, std::int64_t f) {
        const Vec<N> x = grid.point(idx);
        if (dot(x, x) < radius * radius && grid.is_interior(idx)) {
            prob.unknown[static_cast<std::size_t>(f)] = 1;
        } else {
            prob.u[static_cast<std::size_t>(f)] = data(x);
        }
    });
    return prob;
}

} // namespace faslab
