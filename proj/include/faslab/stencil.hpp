#pragma once

#include <cstdint>
#include <vector>

#include "faslab/grid.hpp"
#include "faslab/media.hpp"

namespace faslab {

// Coefficients of the self-adjoint flux-form operator
//   L u = sum_ij d_i ( c_ij d_j u ),   c = m sqrt(det g) g^{-1}.
// Diagonal entries are sampled at face midpoints (x + h/2 e_d), off-diagonal
// entries at nodes. The discrete operator
//   L_h u(p) = sum_d [ F_d(p)(u_{p+d}-u_p) - F_d(p-d)(u_p-u_{p-d}) ] / h^2
//            + sum_{a<b} [ pair terms with centered differences ] / (4 h^2)
// is exactly symmetric in the unweighted inner product, and the wave solver,
// the harmonic-coordinate solver and the arrival-Laplacian diagnostic all use
// this one stencil.
template <int N>
struct FluxCoeffs {
    Grid<N> grid;
    std::array<std::vector<double>, N> face;       // face[d][p] = c_dd at p + (h/2) e_d
    std::vector<std::vector<double>> cross;        // per pair a<b, at nodes
    std::vector<double> weight;                    // m sqrt(det g) at nodes
    bool identity = false;                         // c == I, weight arbitrary
    bool has_cross = false;

    static int pair_index(int a, int b) { // a < b
        int idx = 0;
        for (int i = 0; i < N; ++i)
            for (int j = i + 1; j < N; ++j, ++idx)
                if (i == a && j == b) return idx;
        return -1;
    }
};

template <int N>
inline FluxCoeffs<N> build_flux_coeffs(const Medium<N>& medium, const Grid<N>& grid) {
    FluxCoeffs<N> c;
    c.grid = grid;
    const std::size_t total = static_cast<std::size_t>(grid.size());
    c.weight.resize(total);
    for (int d = 0; d < N; ++d) c.face[d].assign(total, 1.0);
    const int pairs = N * (N - 1) / 2;
    c.cross.assign(static_cast<std::size_t>(pairs), std::vector<double>(total, 0.0));

    // Density media have c = rho * (rho I)^{-1} = I exactly.
    c.identity = medium.kind == MediumKind::IsotropicDensity;

    grid.for_each([&](const std::array<int, N>& idx, std::int64_t f) {
        const Vec<N> x = grid.point(idx);
        c.weight[static_cast<std::size_t>(f)] = medium.weight(x);
        if (c.identity) return;
        const Mat<N> ginv_w = [&](const Vec<N>& y) {
            return medium.weight(y) * medium.metric_inverse(y);
        }(x);
        int pidx = 0;
        for (int a = 0; a < N; ++a)
            for (int b = a + 1; b < N; ++b, ++pidx)
                c.cross[static_cast<std::size_t>(pidx)][static_cast<std::size_t>(f)] =
                    ginv_w(a, b);
        for (int d = 0; d < N; ++d) {
            Vec<N> xf = x;
            xf[d] += 0.5 * grid.h;
            const Mat<N> cf = medium.weight(xf) * medium.metric_inverse(xf);
            c.face[d][static_cast<std::size_t>(f)] = cf(d, d);
        }
    });
    if (!c.identity) {
        for (const auto& cr : c.cross)
            for (double v : cr)
                if (v != 0.0) {
                    c.has_cross = true;
                    break;
                }
    }
    return c;
}

// out[p] = (L_h u)(p) for interior p (margin 1); boundary entries are zeroed.
// `mask_in` optionally zero-extends u: where mask_in[p] == 0 the value u[p] is
// treated as 0 (used by the Dirichlet solver to split the operator).
template <int N>
inline void apply_flux_laplacian(const FluxCoeffs<N>& c, const std::vector<double>& u,
                                 std::vector<double>& out,
                                 const std::vector<std::uint8_t>* mask_in = nullptr) {
    const Grid<N>& grid = c.grid;
    const double inv_h2 = 1.0 / (grid.h * grid.h);
    const double inv_4h2 = 0.25 * inv_h2;
    out.assign(static_cast<std::size_t>(grid.size()), 0.0);

    const auto val = [&](std::int64_t f) -> double {
        if (mask_in && !(*mask_in)[static_cast<std::size_t>(f)]) return 0.0;
        return u[static_cast<std::size_t>(f)];
    };

    grid.for_each([&](const std::array<int, N>& idx, std::int64_t f) {
        if (!grid.is_interior(idx)) return;
        const double up = val(f);
        double acc = 0;
        for (int d = 0; d < N; ++d) {
            const std::int64_t s = grid.strides[d];
            const double fplus =
                c.identity ? 1.0 : c.face[d][static_cast<std::size_t>(f)];
            const double fminus =
                c.identity ? 1.0 : c.face[d][static_cast<std::size_t>(f - s)];
            acc += (fplus * (val(f + s) - up) - fminus * (up - val(f - s))) * inv_h2;
        }
        if (c.has_cross) {
            int pidx = 0;
            for (int a = 0; a < N; ++a)
                for (int b = a + 1; b < N; ++b, ++pidx) {
                    const auto& cij = c.cross[static_cast<std::size_t>(pidx)];
                    const std::int64_t sa = grid.strides[a], sb = grid.strides[b];
                    // D_a( c D_b u ) + D_b( c D_a u ), both centered
                    const double t1 =
                        cij[static_cast<std::size_t>(f + sa)] * (val(f + sa + sb) - val(f + sa - sb)) -
                        cij[static_cast<std::size_t>(f - sa)] * (val(f - sa + sb) - val(f - sa - sb));
                    const double t2 =
                        cij[static_cast<std::size_t>(f + sb)] * (val(f + sa + sb) - val(f - sa + sb)) -
                        cij[static_cast<std::size_t>(f - sb)] * (val(f + sa - sb) - val(f - sa - sb));
                    acc += (t1 + t2) * inv_4h2;
                }
        }
        out[static_cast<std::size_t>(f)] = acc;
    });
}

} // namespace faslab
