#pragma once

#include <array>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "faslab/bump.hpp"
#include "faslab/vec.hpp"

#include <json.hpp>

namespace faslab {

enum class MediumKind { IsotropicDensity, Metric };

// One term of a displacement field d(x); the map is psi(x) = x + sum of terms.
// Translation: d = A * profile(x) * u (u a fixed unit direction).
// Rotation:    d = A * profile(x) * M (x - c), M the rotation generator in the
//              (axis_p, axis_q) plane.
template <int N>
struct DisplacementTerm {
    enum class Type { Translation, Rotation };
    Type type = Type::Translation;
    double amplitude = 0;
    Vec<N> center{};
    double radius = 1;
    Vec<N> direction{}; // Translation only
    int axis_p = 0, axis_q = 1; // Rotation only

    Vec<N> skew_apply(const Vec<N>& v) const { // M v
        Vec<N> r{};
        r[axis_p] = -v[axis_q];
        r[axis_q] = v[axis_p];
        return r;
    }
    double skew_entry(int i, int j) const { // M_ij
        if (i == axis_p && j == axis_q) return -1.0;
        if (i == axis_q && j == axis_p) return 1.0;
        return 0.0;
    }

    Vec<N> value(const Vec<N>& x) const {
        Bump<N> b{amplitude, center, radius};
        const double beta = b.profile(x);
        if (beta == 0) return Vec<N>::zero();
        if (type == Type::Translation) return (amplitude * beta) * direction;
        return (amplitude * beta) * skew_apply(x - center);
    }

    // J_ij = d(d_i)/dx_j
    Mat<N> jacobian(const Vec<N>& x) const {
        Bump<N> b{1.0, center, radius};
        const double beta = b.profile(x);
        const Vec<N> gbeta = b.gradient(x); // gradient of the unit profile
        Mat<N> J{};
        if (type == Type::Translation) {
            for (int i = 0; i < N; ++i)
                for (int j = 0; j < N; ++j)
                    J(i, j) = amplitude * direction[i] * gbeta[j];
        } else {
            const Vec<N> w = skew_apply(x - center);
            for (int i = 0; i < N; ++i)
                for (int j = 0; j < N; ++j)
                    J(i, j) = amplitude * (gbeta[j] * w[i] + beta * skew_entry(i, j));
        }
        return J;
    }

    // dJ[k](i,j) = d^2(d_i)/(dx_k dx_j)
    std::array<Mat<N>, N> jacobian_derivatives(const Vec<N>& x) const {
        Bump<N> b{1.0, center, radius};
        const double beta = b.profile(x);
        const Vec<N> gbeta = b.gradient(x);
        const Mat<N> hbeta = b.hessian(x);
        std::array<Mat<N>, N> dJ{};
        if (type == Type::Translation) {
            for (int k = 0; k < N; ++k)
                for (int i = 0; i < N; ++i)
                    for (int j = 0; j < N; ++j)
                        dJ[k](i, j) = amplitude * direction[i] * hbeta(j, k);
        } else {
            const Vec<N> w = skew_apply(x - center);
            for (int k = 0; k < N; ++k)
                for (int i = 0; i < N; ++i)
                    for (int j = 0; j < N; ++j)
                        dJ[k](i, j) = amplitude * (hbeta(j, k) * w[i] +
                                                   gbeta[j] * skew_entry(i, k) +
                                                   gbeta[k] * skew_entry(i, j));
        }
        return dJ;
    }
};

template <int N>
struct DiffeoSpec {
    std::vector<DisplacementTerm<N>> terms;
    double invertibility_margin = 0.05;

    bool empty() const { return terms.empty(); }

    Vec<N> displacement(const Vec<N>& x) const {
        Vec<N> d{};
        for (const auto& t : terms) d += t.value(x);
        return d;
    }
    Vec<N> psi(const Vec<N>& x) const { return x + displacement(x); }

    Mat<N> psi_jacobian(const Vec<N>& x) const {
        Mat<N> J = Mat<N>::identity();
        for (const auto& t : terms) J += t.jacobian(x);
        return J;
    }

    std::array<Mat<N>, N> psi_jacobian_derivatives(const Vec<N>& x) const {
        std::array<Mat<N>, N> dJ{};
        for (const auto& t : terms) {
            const auto td = t.jacobian_derivatives(x);
            for (int k = 0; k < N; ++k) dJ[k] += td[k];
        }
        return dJ;
    }

    // Newton inversion; valid since psi = id + compactly supported smooth d.
    Vec<N> psi_inverse(const Vec<N>& z, double tol = 1e-13, int max_iter = 60) const {
        Vec<N> y = z;
        for (int it = 0; it < max_iter; ++it) {
            const Vec<N> r = psi(y) - z;
            if (norm(r) < tol) return y;
            y -= solve(psi_jacobian(y), r);
        }
        throw Error("psi_inverse: Newton iteration did not converge");
    }

    double max_support_extent() const {
        double m = 0;
        for (const auto& t : terms) m = std::max(m, norm(t.center) + t.radius);
        return m;
    }
};

// An admissible coefficient pair. Density kind: g = rho I, m = rho^((2-n)/2),
// with rho = 1 + sum of bumps. Metric kind: m = 1 and either the pullback
// metric psi' psi'^T of a displacement spec or a diagonal bump perturbation.
template <int N>
struct Medium {
    MediumKind kind = MediumKind::IsotropicDensity;
    double delta = 0.1;
    std::vector<Bump<N>> bumps;                    // density kind
    DiffeoSpec<N> diffeo;                          // metric kind, pullback form
    std::array<std::vector<Bump<N>>, N> axis_bumps; // metric kind, diagonal form

    static Medium euclidean(double delta_ = 0.1) {
        Medium m;
        m.kind = MediumKind::IsotropicDensity;
        m.delta = delta_;
        return m;
    }

    bool is_pullback() const { return kind == MediumKind::Metric && !diffeo.empty(); }
    bool is_trivial() const {
        if (kind == MediumKind::IsotropicDensity) return bumps.empty();
        if (!diffeo.empty()) return false;
        for (const auto& ab : axis_bumps)
            if (!ab.empty()) return false;
        return true;
    }

    double rho(const Vec<N>& x) const {
        double r = 1.0;
        for (const auto& b : bumps) r += b.value(x);
        return r;
    }

    Vec<N> rho_gradient(const Vec<N>& x) const {
        Vec<N> g{};
        for (const auto& b : bumps) g += b.gradient(x);
        return g;
    }

    // m(x): identically 1 for the metric kind, rho^((2-n)/2) for density.
    double m_coeff(const Vec<N>& x) const {
        if (kind == MediumKind::Metric) return 1.0;
        if constexpr (N == 2) {
            (void)x;
            return 1.0;
        } else {
            return std::pow(rho(x), (2.0 - N) / 2.0);
        }
    }

    Mat<N> metric(const Vec<N>& x) const {
        if (kind == MediumKind::IsotropicDensity) {
            Mat<N> g{};
            const double r = rho(x);
            for (int i = 0; i < N; ++i) g(i, i) = r;
            return g;
        }
        if (!diffeo.empty()) {
            const Mat<N> J = diffeo.psi_jacobian(x);
            return J.transposed() * J;
        }
        Mat<N> g = Mat<N>::identity();
        for (int d = 0; d < N; ++d)
            for (const auto& b : axis_bumps[d]) g(d, d) += b.value(x);
        return g;
    }

    Mat<N> metric_inverse(const Vec<N>& x) const { return inverse(metric(x)); }

    // Closed-form first derivatives: dg[k] = d(g)/dx_k.
    std::array<Mat<N>, N> metric_derivatives(const Vec<N>& x) const {
        std::array<Mat<N>, N> dg{};
        if (kind == MediumKind::IsotropicDensity) {
            const Vec<N> gr = rho_gradient(x);
            for (int k = 0; k < N; ++k)
                for (int i = 0; i < N; ++i) dg[k](i, i) = gr[k];
            return dg;
        }
        if (!diffeo.empty()) {
            const Mat<N> J = diffeo.psi_jacobian(x);
            const auto dJ = diffeo.psi_jacobian_derivatives(x);
            for (int k = 0; k < N; ++k)
                dg[k] = dJ[k].transposed() * J + J.transposed() * dJ[k];
            return dg;
        }
        for (int d = 0; d < N; ++d)
            for (const auto& b : axis_bumps[d]) {
                const Vec<N> gb = b.gradient(x);
                for (int k = 0; k < N; ++k) dg[k](d, d) += gb[k];
            }
        return dg;
    }

    // Second derivatives by centered differences of the stored first
    // derivatives; d2g[k][l] = d^2 g / dx_k dx_l.
    std::array<std::array<Mat<N>, N>, N> metric_second_derivatives(
        const Vec<N>& x, double step = 1e-5) const {
        std::array<std::array<Mat<N>, N>, N> d2{};
        for (int l = 0; l < N; ++l) {
            Vec<N> xp = x, xm = x;
            xp[l] += step;
            xm[l] -= step;
            const auto dp = metric_derivatives(xp);
            const auto dm = metric_derivatives(xm);
            for (int k = 0; k < N; ++k)
                d2[k][l] = (dp[k] - dm[k]) * (1.0 / (2.0 * step));
        }
        return d2;
    }

    // m(x) sqrt(det g(x)); equals rho(x) for the density kind in any dimension.
    double weight(const Vec<N>& x) const {
        if (kind == MediumKind::IsotropicDensity) return rho(x);
        return std::sqrt(determinant(metric(x)));
    }

    // True when x is outside every perturbation support, so the medium is
    // exactly Euclidean there (coefficients evaluate to exact identity).
    bool is_euclidean_at(const Vec<N>& x) const {
        if (dot(x, x) >= (1.0 - delta) * (1.0 - delta)) return true;
        if (kind == MediumKind::IsotropicDensity) {
            for (const auto& b : bumps)
                if (b.supports(x)) return false;
            return true;
        }
        if (!diffeo.empty()) {
            for (const auto& t : diffeo.terms) {
                Bump<N> b{1.0, t.center, t.radius};
                if (b.supports(x)) return false;
            }
            return true;
        }
        for (const auto& ab : axis_bumps)
            for (const auto& b : ab)
                if (b.supports(x)) return false;
        return true;
    }

    std::string describe() const {
        std::ostringstream os;
        if (kind == MediumKind::IsotropicDensity) {
            os << "density n=" << N << " delta=" << delta << " bumps=" << bumps.size();
            for (const auto& b : bumps)
                os << " [A=" << b.amplitude << " r=" << b.radius << "]";
        } else if (!diffeo.empty()) {
            os << "pullback metric n=" << N << " delta=" << delta
               << " displacements=" << diffeo.terms.size();
        } else {
            std::size_t n = 0;
            for (const auto& ab : axis_bumps) n += ab.size();
            os << "diagonal metric n=" << N << " delta=" << delta << " bumps=" << n;
        }
        return os.str();
    }
};

struct MediumBounds {
    double g_min = 1, g_max = 1;
    double rho_min = 1, rho_max = 1;
    double m_min = 1, m_max = 1;
    int resolution = 0; // intervals per axis of the sampling grid
};

// Extrema of rho, m and of v^T g v over unit v, sampled on the nested grid
// with `intervals` intervals per axis over [-1,1]^N (the medium is Euclidean
// outside that cube). The v extrema per point are the eigenvalue extrema.
template <int N>
inline MediumBounds compute_bounds(const Medium<N>& medium, int intervals) {
    if (intervals < 2) throw Error("compute_bounds: resolution must be >= 2 intervals");
    MediumBounds b;
    b.resolution = intervals;
    std::array<int, N> idx{};
    const auto advance = [&]() {
        for (int d = N - 1; d >= 0; --d) {
            if (++idx[d] <= intervals) return true;
            idx[d] = 0;
        }
        return false;
    };
    do {
        Vec<N> x;
        for (int d = 0; d < N; ++d) x[d] = -1.0 + 2.0 * idx[d] / intervals;
        const double r = medium.rho(x);
        const double m = medium.m_coeff(x);
        b.rho_min = std::min(b.rho_min, r);
        b.rho_max = std::max(b.rho_max, r);
        b.m_min = std::min(b.m_min, m);
        b.m_max = std::max(b.m_max, m);
        if (medium.kind == MediumKind::IsotropicDensity) {
            b.g_min = std::min(b.g_min, r);
            b.g_max = std::max(b.g_max, r);
        } else {
            const auto ev = symmetric_eigenvalues(medium.metric(x));
            b.g_min = std::min(b.g_min, ev.front());
            b.g_max = std::max(b.g_max, ev.back());
        }
    } while (advance());
    return b;
}

template <int N>
struct AdmissibilityReport {
    bool pass = true;
    double max_deviation = 0;
    Vec<N> witness{};
};

// Samples the shell 1-delta <= |x| <= 1+delta and reports the worst deviation
// of the coefficients from their Euclidean values.
template <int N>
inline AdmissibilityReport<N> check_admissible(const Medium<N>& medium, int samples) {
    if (samples < 1) throw Error("check_admissible: samples must be >= 1");
    AdmissibilityReport<N> rep;
    // deterministic low-discrepancy-ish sweep of the shell
    std::uint64_t state = 0x9e3779b97f4a7c15ull;
    const auto next01 = [&state]() {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        return static_cast<double>(state >> 11) * 0x1.0p-53;
    };
    for (int s = 0; s < samples; ++s) {
        Vec<N> dir;
        double n2 = 0;
        do {
            for (int d = 0; d < N; ++d) dir[d] = 2.0 * next01() - 1.0;
            n2 = dot(dir, dir);
        } while (n2 < 1e-12 || n2 > 1.0);
        dir = dir / std::sqrt(n2);
        const double radius = (1.0 - medium.delta) + 2.0 * medium.delta * next01();
        const Vec<N> x = radius * dir;
        double dev = std::abs(medium.m_coeff(x) - 1.0);
        if (medium.kind == MediumKind::IsotropicDensity) {
            dev = std::max(dev, std::abs(medium.rho(x) - 1.0));
        } else {
            dev = std::max(dev, max_abs(medium.metric(x) - Mat<N>::identity()));
        }
        if (dev > rep.max_deviation) {
            rep.max_deviation = dev;
            rep.witness = x;
        }
    }
    rep.pass = rep.max_deviation == 0.0;
    return rep;
}

template <int N>
inline void validate_bump_support(const Bump<N>& b, double delta, const char* what) {
    if (norm(b.center) + b.radius > 1.0 - delta + 1e-12)
        throw Error(std::string(what) + ": support ball exceeds |x| <= 1-delta");
}

template <int N>
inline Medium<N> make_bump_density(double amplitude, const Vec<N>& center,
                                   double radius, double delta) {
    if (amplitude <= -1.0)
        throw Error("make_bump_density: amplitude <= -1 gives a non-positive density");
    if (radius <= 0) throw Error("make_bump_density: radius must be positive");
    Bump<N> b{amplitude, center, radius};
    validate_bump_support(b, delta, "make_bump_density");
    Medium<N> m;
    m.kind = MediumKind::IsotropicDensity;
    m.delta = delta;
    if (amplitude != 0) m.bumps.push_back(b);
    return m;
}

template <int N>
inline Medium<N> make_multi_bump_density(const std::vector<Bump<N>>& bumps, double delta) {
    double neg = 0;
    for (const auto& b : bumps) {
        validate_bump_support(b, delta, "make_multi_bump_density");
        if (b.amplitude < 0) neg += b.amplitude;
    }
    if (1.0 + neg <= 0)
        throw Error("make_multi_bump_density: bump amplitudes allow a non-positive density");
    Medium<N> m;
    m.kind = MediumKind::IsotropicDensity;
    m.delta = delta;
    m.bumps = bumps;
    return m;
}

// g = psi'^T psi' for psi = id + displacement; checks det psi' against the
// spec's margin on a verification grid over [-1,1]^N.
template <int N>
inline Medium<N> make_pullback_metric(const DiffeoSpec<N>& spec, double delta = 0.1,
                                      int verification_intervals = 200) {
    for (const auto& t : spec.terms) {
        Bump<N> b{1.0, t.center, t.radius};
        validate_bump_support(b, delta, "make_pullback_metric");
    }
    std::array<int, N> idx{};
    const auto advance = [&]() {
        for (int d = N - 1; d >= 0; --d) {
            if (++idx[d] <= verification_intervals) return true;
            idx[d] = 0;
        }
        return false;
    };
    do {
        Vec<N> x;
        for (int d = 0; d < N; ++d) x[d] = -1.0 + 2.0 * idx[d] / verification_intervals;
        const double det = determinant(spec.psi_jacobian(x));
        if (det <= spec.invertibility_margin) {
            std::ostringstream os;
            os << "make_pullback_metric: det psi' = " << det << " <= margin "
               << spec.invertibility_margin << " at x = " << x << " (not a diffeomorphism)";
            throw Error(os.str());
        }
    } while (advance());
    Medium<N> m;
    m.kind = MediumKind::Metric;
    m.delta = delta;
    m.diffeo = spec;
    return m;
}

template <int N>
inline Medium<N> make_diagonal_metric(const std::array<std::vector<Bump<N>>, N>& axis_bumps,
                                      double delta = 0.1) {
    for (int d = 0; d < N; ++d) {
        double neg = 0;
        for (const auto& b : axis_bumps[d]) {
            validate_bump_support(b, delta, "make_diagonal_metric");
            if (b.amplitude < 0) neg += b.amplitude;
        }
        if (1.0 + neg <= 0)
            throw Error("make_diagonal_metric: axis bumps allow a non-positive-definite metric");
    }
    Medium<N> m;
    m.kind = MediumKind::Metric;
    m.delta = delta;
    m.axis_bumps = axis_bumps;
    return m;
}

// ---- serialization -------------------------------------------------------

template <int N>
inline nlohmann::json to_json(const Vec<N>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (int i = 0; i < N; ++i) a.push_back(v[i]);
    return a;
}

template <int N>
inline Vec<N> vec_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != static_cast<std::size_t>(N))
        throw Error("vec_from_json: expected an array of length " + std::to_string(N));
    Vec<N> v;
    for (int i = 0; i < N; ++i) v[i] = j[static_cast<std::size_t>(i)].get<double>();
    return v;
}

template <int N>
inline nlohmann::json medium_to_json(const Medium<N>& m) {
    nlohmann::json j;
    j["kind"] = m.kind == MediumKind::IsotropicDensity ? "density" : "metric";
    j["dimension"] = N;
    j["delta"] = m.delta;
    if (!m.bumps.empty()) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& b : m.bumps)
            arr.push_back({{"amplitude", b.amplitude},
                           {"center", to_json(b.center)},
                           {"radius", b.radius}});
        j["bumps"] = arr;
    }
    if (!m.diffeo.empty()) {
        nlohmann::json terms = nlohmann::json::array();
        for (const auto& t : m.diffeo.terms) {
            nlohmann::json tj = {{"amplitude", t.amplitude},
                                 {"center", to_json(t.center)},
                                 {"radius", t.radius}};
            if (t.type == DisplacementTerm<N>::Type::Translation) {
                tj["type"] = "translation";
                tj["direction"] = to_json(t.direction);
            } else {
                tj["type"] = "rotation";
                tj["axes"] = {t.axis_p, t.axis_q};
            }
            terms.push_back(tj);
        }
        j["diffeo"] = {{"displacements", terms},
                       {"margin", m.diffeo.invertibility_margin}};
    }
    bool any_axis = false;
    for (const auto& ab : m.axis_bumps) any_axis |= !ab.empty();
    if (any_axis) {
        nlohmann::json arr = nlohmann::json::array();
        for (int d = 0; d < N; ++d)
            for (const auto& b : m.axis_bumps[d])
                arr.push_back({{"axis", d},
                               {"amplitude", b.amplitude},
                               {"center", to_json(b.center)},
                               {"radius", b.radius}});
        j["gbumps"] = arr;
    }
    return j;
}

template <int N>
inline Medium<N> medium_from_json(const nlohmann::json& j) {
    if (j.at("dimension").get<int>() != N)
        throw Error("medium_from_json: dimension mismatch");
    const std::string kind = j.at("kind").get<std::string>();
    const double delta = j.at("delta").get<double>();
    if (delta <= 0 || delta >= 1) throw Error("medium_from_json: delta must lie in (0,1)");

    if (kind == "density") {
        std::vector<Bump<N>> bumps;
        if (j.contains("bumps"))
            for (const auto& bj : j.at("bumps"))
                bumps.push_back(Bump<N>{bj.at("amplitude").get<double>(),
                                        vec_from_json<N>(bj.at("center")),
                                        bj.at("radius").get<double>()});
        return make_multi_bump_density(bumps, delta);
    }
    if (kind != "metric") throw Error("medium_from_json: kind must be 'density' or 'metric'");

    const bool has_diffeo = j.contains("diffeo");
    const bool has_gbumps = j.contains("gbumps");
    if (has_diffeo && has_gbumps)
        throw Error("medium_from_json: 'diffeo' and 'gbumps' are mutually exclusive");
    if (has_diffeo) {
        DiffeoSpec<N> spec;
        const auto& dj = j.at("diffeo");
        if (dj.contains("margin")) spec.invertibility_margin = dj.at("margin").get<double>();
        if (spec.invertibility_margin <= 0)
            throw Error("medium_from_json: diffeo.margin must be positive");
        for (const auto& tj : dj.at("displacements")) {
            DisplacementTerm<N> t;
            t.amplitude = tj.at("amplitude").get<double>();
            t.center = vec_from_json<N>(tj.at("center"));
            t.radius = tj.at("radius").get<double>();
            const std::string type = tj.at("type").get<std::string>();
            if (type == "translation") {
                t.type = DisplacementTerm<N>::Type::Translation;
                t.direction = vec_from_json<N>(tj.at("direction"));
            } else if (type == "rotation") {
                t.type = DisplacementTerm<N>::Type::Rotation;
                t.axis_p = tj.at("axes")[0].get<int>();
                t.axis_q = tj.at("axes")[1].get<int>();
                if (t.axis_p == t.axis_q || t.axis_p < 0 || t.axis_q < 0 ||
                    t.axis_p >= N || t.axis_q >= N)
                    throw Error("medium_from_json: bad rotation axes");
            } else {
                throw Error("medium_from_json: displacement type must be "
                            "'translation' or 'rotation'");
            }
            spec.terms.push_back(t);
        }
        return make_pullback_metric(spec, delta);
    }
    std::array<std::vector<Bump<N>>, N> axis_bumps;
    if (has_gbumps)
        for (const auto& bj : j.at("gbumps")) {
            const int axis = bj.at("axis").get<int>();
            if (axis < 0 || axis >= N) throw Error("medium_from_json: bad gbump axis");
            axis_bumps[axis].push_back(Bump<N>{bj.at("amplitude").get<double>(),
                                               vec_from_json<N>(bj.at("center")),
                                               bj.at("radius").get<double>()});
        }
    return make_diagonal_metric<N>(axis_bumps, delta);
}

} // namespace faslab
