#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "faslab/vec.hpp"

namespace faslab {

// Uniform vertex-centered grid over a centered cube. Node (i_0,...,i_{N-1})
// sits at origin + h*i; iteration order is lexicographic with the last index
// fastest, and all exported orderings follow it.
template <int N>
struct Grid {
    Vec<N> origin{};
    double h = 0;
    std::array<int, N> dims{};
    std::array<std::int64_t, N> strides{};

    static Grid centered_cube(double half_width, double step) {
        Grid g;
        g.h = step;
        const int k = static_cast<int>(std::ceil(half_width / step - 1e-12));
        for (int d = 0; d < N; ++d) {
            g.origin[d] = -k * step;
            g.dims[d] = 2 * k + 1;
        }
        g.init_strides();
        return g;
    }

    void init_strides() {
        strides[N - 1] = 1;
        for (int d = N - 2; d >= 0; --d)
            strides[d] = strides[d + 1] * dims[d + 1];
    }

    std::int64_t size() const {
        std::int64_t s = 1;
        for (int d = 0; d < N; ++d) s *= dims[d];
        return s;
    }

    double half_width() const { return -origin[0]; }

    std::int64_t flat(const std::array<int, N>& idx) const {
        std::int64_t f = 0;
        for (int d = 0; d < N; ++d) f += idx[d] * strides[d];
        return f;
    }

    std::array<int, N> unflat(std::int64_t f) const {
        std::array<int, N> idx;
        for (int d = 0; d < N; ++d) {
            idx[d] = static_cast<int>(f / strides[d]);
            f %= strides[d];
        }
        return idx;
    }

    Vec<N> point(const std::array<int, N>& idx) const {
        Vec<N> x;
        for (int d = 0; d < N; ++d) x[d] = origin[d] + h * idx[d];
        return x;
    }

    Vec<N> point_flat(std::int64_t f) const { return point(unflat(f)); }

    bool is_interior(const std::array<int, N>& idx, int margin = 1) const {
        for (int d = 0; d < N; ++d)
            if (idx[d] < margin || idx[d] > dims[d] - 1 - margin) return false;
        return true;
    }

    // Nearest node to x, clamped into the grid.
    std::array<int, N> nearest(const Vec<N>& x) const {
        std::array<int, N> idx;
        for (int d = 0; d < N; ++d) {
            int i = static_cast<int>(std::lround((x[d] - origin[d]) / h));
            idx[d] = std::min(std::max(i, 0), dims[d] - 1);
        }
        return idx;
    }

    bool contains(const Vec<N>& x) const {
        for (int d = 0; d < N; ++d) {
            if (x[d] < origin[d] - 1e-12) return false;
            if (x[d] > origin[d] + h * (dims[d] - 1) + 1e-12) return false;
        }
        return true;
    }

    // Multilinear interpolation of nodal values.
    double interpolate(const std::vector<double>& f, const Vec<N>& x) const {
        std::array<int, N> base;
        std::array<double, N> w;
        for (int d = 0; d < N; ++d) {
            double s = (x[d] - origin[d]) / h;
            int i = static_cast<int>(std::floor(s));
            i = std::min(std::max(i, 0), dims[d] - 2);
            base[d] = i;
            w[d] = s - i;
        }
        double acc = 0;
        for (int corner = 0; corner < (1 << N); ++corner) {
            double weight = 1;
            std::array<int, N> idx = base;
            for (int d = 0; d < N; ++d) {
                if (corner & (1 << d)) {
                    weight *= w[d];
                    idx[d] += 1;
                } else {
                    weight *= 1.0 - w[d];
                }
            }
            if (weight != 0) acc += weight * f[static_cast<std::size_t>(flat(idx))];
        }
        return acc;
    }

    template <class F>
    void for_each(F&& fn) const {
        std::array<int, N> idx{};
        const std::int64_t total = size();
        for (std::int64_t f = 0; f < total; ++f) {
            fn(idx, f);
            for (int d = N - 1; d >= 0; --d) {
                if (++idx[d] < dims[d]) break;
                idx[d] = 0;
            }
        }
    }
};

} // namespace faslab
