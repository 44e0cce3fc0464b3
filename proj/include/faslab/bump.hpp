#pragma once

#include <cmath>

#include "faslab/vec.hpp"

namespace faslab {

// C-infinity compactly supported profile written in q = (|x-c|/r)^2:
// value(q) = exp(-q/(1-q)) for q < 1, zero for q >= 1. Peak value 1 at q = 0.
struct SmoothProfile {
    static constexpr double q_cut = 1.0 - 1e-7; // exp argument ~ -1e7, value underflows anyway

    static double value(double q) {
        if (q >= q_cut) return 0.0;
        return std::exp(-q / (1.0 - q));
    }
    // d/dq
    static double d1(double q) {
        if (q >= q_cut) return 0.0;
        const double u = 1.0 / (1.0 - q);
        return -value(q) * u * u;
    }
    // d^2/dq^2
    static double d2(double q) {
        if (q >= q_cut) return 0.0;
        const double u = 1.0 / (1.0 - q);
        return value(q) * (u * u * u * u - 2.0 * u * u * u);
    }
};

template <int N>
struct Bump {
    double amplitude = 0;
    Vec<N> center{};
    double radius = 1;

    double profile(const Vec<N>& x) const {
        const Vec<N> d = x - center;
        return SmoothProfile::value(dot(d, d) / (radius * radius));
    }

    double value(const Vec<N>& x) const { return amplitude * profile(x); }

    Vec<N> gradient(const Vec<N>& x) const {
        const Vec<N> d = x - center;
        const double r2 = radius * radius;
        const double q = dot(d, d) / r2;
        return (amplitude * SmoothProfile::d1(q) * 2.0 / r2) * d;
    }

    Mat<N> hessian(const Vec<N>& x) const {
        const Vec<N> d = x - center;
        const double r2 = radius * radius;
        const double q = dot(d, d) / r2;
        const double p1 = SmoothProfile::d1(q);
        const double p2 = SmoothProfile::d2(q);
        Mat<N> hess;
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) {
                double v = p2 * 4.0 * d[i] * d[j] / (r2 * r2);
                if (i == j) v += p1 * 2.0 / r2;
                hess(i, j) = amplitude * v;
            }
        return hess;
    }

    bool supports(const Vec<N>& x) const {
        const Vec<N> d = x - center;
        return dot(d, d) < radius * radius;
    }
};

namespace detail {

// Normalized primitive of the standard mollifier exp(-1/(1-v^2)), tabulated
// once on [-1, 1] (per-interval Simpson) and evaluated by cubic Hermite with
// the exact analytic slopes.
struct HeavisideTable {
    static constexpr int kIntervals = 4096;
    std::array<double, kIntervals + 1> value;
    std::array<double, kIntervals + 1> slope;

    static double bump(double v) {
        const double q = v * v;
        return q >= 1.0 ? 0.0 : std::exp(-1.0 / (1.0 - q));
    }

    double inv_total = 0;

    HeavisideTable() {
        const double dv = 2.0 / kIntervals;
        value[0] = 0.0;
        for (int i = 0; i < kIntervals; ++i) {
            const double a = -1.0 + i * dv;
            value[static_cast<std::size_t>(i) + 1] =
                value[static_cast<std::size_t>(i)] +
                dv / 6.0 * (bump(a) + 4.0 * bump(a + 0.5 * dv) + bump(a + dv));
        }
        inv_total = 1.0 / value[kIntervals];
        for (int i = 0; i <= kIntervals; ++i) {
            value[static_cast<std::size_t>(i)] *= inv_total;
            slope[static_cast<std::size_t>(i)] = bump(-1.0 + i * dv) * inv_total;
        }
        value[kIntervals] = 1.0;
    }

    static const HeavisideTable& instance() {
        static const HeavisideTable table;
        return table;
    }
};

} // namespace detail

// d/ds of the mollified ramp below.
inline double mollified_heaviside_slope(double s, double eps) {
    const double v = s / eps;
    if (v <= -1.0 || v >= 1.0) return 0.0;
    return detail::HeavisideTable::instance().inv_total * detail::HeavisideTable::bump(v) /
           eps;
}

// C-infinity ramp: exactly 0 for s <= -eps, exactly 1 for s >= eps; the
// normalized primitive of the standard mollifier bump.
inline double mollified_heaviside(double s, double eps) {
    const double v = s / eps;
    if (v <= -1.0) return 0.0;
    if (v >= 1.0) return 1.0;
    static const detail::HeavisideTable table;
    constexpr int K = detail::HeavisideTable::kIntervals;
    const double dv = 2.0 / K;
    double u = (v + 1.0) / dv;
    int i = static_cast<int>(u);
    if (i >= K) i = K - 1;
    const double t = u - i;
    const double y0 = table.value[static_cast<std::size_t>(i)];
    const double y1 = table.value[static_cast<std::size_t>(i) + 1];
    const double m0 = table.slope[static_cast<std::size_t>(i)] * dv;
    const double m1 = table.slope[static_cast<std::size_t>(i) + 1] * dv;
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * m0 + (-2 * t3 + 3 * t2) * y1 +
           (t3 - t2) * m1;
}

} // namespace faslab
