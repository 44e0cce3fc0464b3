#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <ostream>

#include "faslab/common.hpp"

namespace faslab {

template <int N>
struct Vec {
    static_assert(N >= 1);
    std::array<double, N> c{};

    double& operator[](int i) { return c[static_cast<std::size_t>(i)]; }
    double operator[](int i) const { return c[static_cast<std::size_t>(i)]; }

    static Vec zero() { return Vec{}; }
    static Vec axis(int i) {
        Vec v{};
        v[i] = 1.0;
        return v;
    }

    Vec& operator+=(const Vec& o) {
        for (int i = 0; i < N; ++i) c[i] += o.c[i];
        return *this;
    }
    Vec& operator-=(const Vec& o) {
        for (int i = 0; i < N; ++i) c[i] -= o.c[i];
        return *this;
    }
    Vec& operator*=(double s) {
        for (int i = 0; i < N; ++i) c[i] *= s;
        return *this;
    }

    friend Vec operator+(Vec a, const Vec& b) { return a += b; }
    friend Vec operator-(Vec a, const Vec& b) { return a -= b; }
    friend Vec operator-(Vec a) {
        for (int i = 0; i < N; ++i) a.c[i] = -a.c[i];
        return a;
    }
    friend Vec operator*(double s, Vec a) { return a *= s; }
    friend Vec operator*(Vec a, double s) { return a *= s; }
    friend Vec operator/(Vec a, double s) { return a *= (1.0 / s); }
};

template <int N>
inline double dot(const Vec<N>& a, const Vec<N>& b) {
    double s = 0;
    for (int i = 0; i < N; ++i) s += a[i] * b[i];
    return s;
}

template <int N>
inline double norm(const Vec<N>& a) {
    return std::sqrt(dot(a, a));
}

template <int N>
inline Vec<N> normalized(const Vec<N>& a) {
    const double n = norm(a);
    if (n == 0) throw Error("normalized: zero vector");
    return a / n;
}

template <int N>
inline std::ostream& operator<<(std::ostream& os, const Vec<N>& v) {
    os << '(';
    for (int i = 0; i < N; ++i) os << (i ? "," : "") << v[i];
    return os << ')';
}

// Dense NxN matrix, row major. Small enough that value semantics are fine.
template <int N>
struct Mat {
    std::array<double, static_cast<std::size_t>(N) * N> m{};

    double& operator()(int i, int j) { return m[static_cast<std::size_t>(i) * N + j]; }
    double operator()(int i, int j) const { return m[static_cast<std::size_t>(i) * N + j]; }

    static Mat zero() { return Mat{}; }
    static Mat identity() {
        Mat r{};
        for (int i = 0; i < N; ++i) r(i, i) = 1.0;
        return r;
    }

    Mat& operator+=(const Mat& o) {
        for (std::size_t i = 0; i < m.size(); ++i) m[i] += o.m[i];
        return *this;
    }
    Mat& operator-=(const Mat& o) {
        for (std::size_t i = 0; i < m.size(); ++i) m[i] -= o.m[i];
        return *this;
    }
    Mat& operator*=(double s) {
        for (auto& v : m) v *= s;
        return *this;
    }
    friend Mat operator+(Mat a, const Mat& b) { return a += b; }
    friend Mat operator-(Mat a, const Mat& b) { return a -= b; }
    friend Mat operator*(double s, Mat a) { return a *= s; }
    friend Mat operator*(Mat a, double s) { return a *= s; }

    Mat transposed() const {
        Mat r;
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) r(j, i) = (*this)(i, j);
        return r;
    }
};

template <int N>
inline Vec<N> operator*(const Mat<N>& A, const Vec<N>& x) {
    Vec<N> r{};
    for (int i = 0; i < N; ++i) {
        double s = 0;
        for (int j = 0; j < N; ++j) s += A(i, j) * x[j];
        r[i] = s;
    }
    return r;
}

template <int N>
inline Mat<N> operator*(const Mat<N>& A, const Mat<N>& B) {
    Mat<N> r{};
    for (int i = 0; i < N; ++i)
        for (int k = 0; k < N; ++k) {
            const double a = A(i, k);
            for (int j = 0; j < N; ++j) r(i, j) += a * B(k, j);
        }
    return r;
}

template <int N>
inline double determinant(const Mat<N>& A) {
    if constexpr (N == 1) {
        return A(0, 0);
    } else if constexpr (N == 2) {
        return A(0, 0) * A(1, 1) - A(0, 1) * A(1, 0);
    } else if constexpr (N == 3) {
        return A(0, 0) * (A(1, 1) * A(2, 2) - A(1, 2) * A(2, 1)) -
               A(0, 1) * (A(1, 0) * A(2, 2) - A(1, 2) * A(2, 0)) +
               A(0, 2) * (A(1, 0) * A(2, 1) - A(1, 1) * A(2, 0));
    } else {
        // LU with partial pivoting
        Mat<N> a = A;
        double det = 1.0;
        for (int k = 0; k < N; ++k) {
            int piv = k;
            for (int i = k + 1; i < N; ++i)
                if (std::abs(a(i, k)) > std::abs(a(piv, k))) piv = i;
            if (a(piv, k) == 0) return 0.0;
            if (piv != k) {
                for (int j = 0; j < N; ++j) std::swap(a(piv, j), a(k, j));
                det = -det;
            }
            det *= a(k, k);
            for (int i = k + 1; i < N; ++i) {
                const double f = a(i, k) / a(k, k);
                for (int j = k; j < N; ++j) a(i, j) -= f * a(k, j);
            }
        }
        return det;
    }
}

template <int N>
inline Mat<N> inverse(const Mat<N>& A) {
    if constexpr (N == 2) {
        const double d = determinant(A);
        if (d == 0) throw Error("inverse: singular 2x2 matrix");
        Mat<2> r;
        const double id = 1.0 / d;
        r(0, 0) = A(1, 1) * id;
        r(0, 1) = -A(0, 1) * id;
        r(1, 0) = -A(1, 0) * id;
        r(1, 1) = A(0, 0) * id;
        return r;
    } else {
        // Gauss-Jordan with partial pivoting
        Mat<N> a = A;
        Mat<N> r = Mat<N>::identity();
        for (int k = 0; k < N; ++k) {
            int piv = k;
            for (int i = k + 1; i < N; ++i)
                if (std::abs(a(i, k)) > std::abs(a(piv, k))) piv = i;
            if (a(piv, k) == 0) throw Error("inverse: singular matrix");
            if (piv != k)
                for (int j = 0; j < N; ++j) {
                    std::swap(a(piv, j), a(k, j));
                    std::swap(r(piv, j), r(k, j));
                }
            const double ip = 1.0 / a(k, k);
            for (int j = 0; j < N; ++j) {
                a(k, j) *= ip;
                r(k, j) *= ip;
            }
            for (int i = 0; i < N; ++i) {
                if (i == k) continue;
                const double f = a(i, k);
                if (f == 0) continue;
                for (int j = 0; j < N; ++j) {
                    a(i, j) -= f * a(k, j);
                    r(i, j) -= f * r(k, j);
                }
            }
        }
        return r;
    }
}

// Solve A x = b for small dense A.
template <int N>
inline Vec<N> solve(const Mat<N>& A, const Vec<N>& b) {
    return inverse(A) * b;
}

// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
template <int N>
inline std::array<double, N> symmetric_eigenvalues(Mat<N> A) {
    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0;
        for (int p = 0; p < N; ++p)
            for (int q = p + 1; q < N; ++q) off += A(p, q) * A(p, q);
        if (off < 1e-30) break;
        for (int p = 0; p < N; ++p)
            for (int q = p + 1; q < N; ++q) {
                const double apq = A(p, q);
                if (apq == 0) continue;
                const double theta = (A(q, q) - A(p, p)) / (2 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < N; ++k) {
                    const double akp = A(k, p), akq = A(k, q);
                    A(k, p) = c * akp - s * akq;
                    A(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < N; ++k) {
                    const double apk = A(p, k), aqk = A(q, k);
                    A(p, k) = c * apk - s * aqk;
                    A(q, k) = s * apk + c * aqk;
                }
            }
    }
    std::array<double, N> ev;
    for (int i = 0; i < N; ++i) ev[static_cast<std::size_t>(i)] = A(i, i);
    std::sort(ev.begin(), ev.end());
    return ev;
}

template <int N>
inline double frobenius_norm(const Mat<N>& A) {
    double s = 0;
    for (double v : A.m) s += v * v;
    return std::sqrt(s);
}

template <int N>
inline double max_abs(const Mat<N>& A) {
    double s = 0;
    for (double v : A.m) s = std::max(s, std::abs(v));
    return s;
}

} // namespace faslab
