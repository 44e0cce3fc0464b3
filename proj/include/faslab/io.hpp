#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "faslab/arrival.hpp"
#include "faslab/forward.hpp"
#include "faslab/geodesics.hpp"
#include "faslab/grid.hpp"

#include <json.hpp>

namespace faslab {

// Shortest-exact decimal form; CSV outputs are reproducible byte for byte.
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("write_text_file: cannot open " + path.string());
    os << content;
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("read_text_file: cannot open " + path.string());
    std::string s((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return s;
}

// ---- SHA-256 (for the output manifest) --------------------------------------

namespace detail {

struct Sha256 {
    std::uint32_t state[8] = {0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a,
                              0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19};
    std::uint64_t total = 0;
    unsigned char buffer[64];
    std::size_t buffered = 0;

    static std::uint32_t rotr(std::uint32_t x, int n) { return (x >> n) | (x << (32 - n)); }

    void process(const unsigned char* p) {
        static const std::uint32_t K[64] = {
            0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1,
            0x923f82a4, 0xab1c5ed5, 0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3,
            0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786,
            0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da,
            0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147,
            0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13,
            0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b,
            0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070,
            0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a,
            0x5b9cca4f, 0x682e6ff3, 0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208,
            0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2};
        std::uint32_t w[64];
        for (int i = 0; i < 16; ++i)
            w[i] = (std::uint32_t(p[4 * i]) << 24) | (std::uint32_t(p[4 * i + 1]) << 16) |
                   (std::uint32_t(p[4 * i + 2]) << 8) | std::uint32_t(p[4 * i + 3]);
        for (int i = 16; i < 64; ++i) {
            const std::uint32_t s0 = rotr(w[i - 15], 7) ^ rotr(w[i - 15], 18) ^ (w[i - 15] >> 3);
            const std::uint32_t s1 = rotr(w[i - 2], 17) ^ rotr(w[i - 2], 19) ^ (w[i - 2] >> 10);
            w[i] = w[i - 16] + s0 + w[i - 7] + s1;
        }
        std::uint32_t a = state[0], b = state[1], c = state[2], d = state[3];
        std::uint32_t e = state[4], f = state[5], g = state[6], h = state[7];
        for (int i = 0; i < 64; ++i) {
            const std::uint32_t S1 = rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25);
            const std::uint32_t ch = (e & f) ^ (~e & g);
            const std::uint32_t t1 = h + S1 + ch + K[i] + w[i];
            const std::uint32_t S0 = rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22);
            const std::uint32_t maj = (a & b) ^ (a & c) ^ (b & c);
            const std::uint32_t t2 = S0 + maj;
            h = g; g = f; f = e; e = d + t1;
            d = c; c = b; b = a; a = t1 + t2;
        }
        state[0] += a; state[1] += b; state[2] += c; state[3] += d;
        state[4] += e; state[5] += f; state[6] += g; state[7] += h;
    }

    void update(const void* data, std::size_t len) {
        const unsigned char* p = static_cast<const unsigned char*>(data);
        total += len;
        while (len > 0) {
            const std::size_t take = std::min(len, 64 - buffered);
            std::memcpy(buffer + buffered, p, take);
            buffered += take;
            p += take;
            len -= take;
            if (buffered == 64) {
                process(buffer);
                buffered = 0;
            }
        }
    }

    std::string hex_digest() {
        const std::uint64_t bits = total * 8;
        unsigned char pad = 0x80;
        update(&pad, 1);
        const unsigned char zero = 0;
        while (buffered != 56) update(&zero, 1);
        unsigned char lenb[8];
        for (int i = 0; i < 8; ++i) lenb[i] = static_cast<unsigned char>(bits >> (56 - 8 * i));
        update(lenb, 8);
        char out[65];
        for (int i = 0; i < 8; ++i) std::snprintf(out + 8 * i, 9, "%08x", state[i]);
        return std::string(out, 64);
    }
};

} // namespace detail

inline std::string sha256_hex(const std::string& bytes) {
    detail::Sha256 h;
    h.update(bytes.data(), bytes.size());
    return h.hex_digest();
}

inline std::string sha256_file(const std::filesystem::path& path) {
    return sha256_hex(read_text_file(path));
}

// ---- CSV / PGM writers -------------------------------------------------------

template <int N>
inline std::string csv_header_block(const nlohmann::json& meta) {
    std::string out;
    for (auto it = meta.begin(); it != meta.end(); ++it)
        out += "# " + it.key() + " = " + it.value().dump() + "\n";
    return out;
}

template <int N>
inline void write_rays_csv(const std::filesystem::path& path,
                           const std::vector<OmegaRay<N>>& rays, int sample_stride = 1) {
    std::string out = "ray";
    for (int d = 0; d < N; ++d) out += ",a" + std::to_string(d);
    out += ",t";
    for (int d = 0; d < N; ++d) out += ",x" + std::to_string(d);
    for (int d = 0; d < N; ++d) out += ",v" + std::to_string(d);
    out += "\n";
    for (std::size_t r = 0; r < rays.size(); ++r) {
        for (std::size_t s = 0; s < rays[r].samples.size(); s += sample_stride) {
            const auto& smp = rays[r].samples[s];
            out += std::to_string(r);
            for (int d = 0; d < N; ++d) out += "," + fmt_double(rays[r].a[d]);
            out += "," + fmt_double(smp.t);
            for (int d = 0; d < N; ++d) out += "," + fmt_double(smp.x[d]);
            for (int d = 0; d < N; ++d) out += "," + fmt_double(smp.v[d]);
            out += "\n";
        }
    }
    write_text_file(path, out);
}

template <int N>
inline void write_exit_map_csv(const std::filesystem::path& path, const ExitMapResult<N>& em) {
    std::string out = "fan_index";
    for (int d = 0; d < N; ++d) out += ",a" + std::to_string(d);
    out += ",crossed,t_star";
    for (int d = 0; d < N; ++d) out += ",x_star" + std::to_string(d);
    out += ",recrossed\n";
    for (std::size_t i = 0; i < em.crossings.size(); ++i) {
        const auto& c = em.crossings[i];
        out += std::to_string(i);
        for (int d = 0; d < N; ++d) out += "," + fmt_double(em.fan.points[i][d]);
        out += std::string(",") + (c.crossed ? "1" : "0") + "," + fmt_double(c.t_star);
        for (int d = 0; d < N; ++d) out += "," + fmt_double(c.x_star[d]);
        out += std::string(",") + (c.recrossed ? "1" : "0") + "\n";
    }
    write_text_file(path, out);
}

template <int N>
inline void write_arrival_csv(const std::filesystem::path& path, const ArrivalField<N>& f) {
    std::string out;
    for (int d = 0; d < N; ++d) out += "x" + std::to_string(d) + ",";
    out += "alpha,residual,reached,kink\n";
    f.grid.for_each([&](const std::array<int, N>& idx, std::int64_t flat) {
        const std::size_t i = static_cast<std::size_t>(flat);
        const Vec<N> x = f.grid.point(idx);
        for (int d = 0; d < N; ++d) out += fmt_double(x[d]) + ",";
        out += fmt_double(f.reached[i] ? f.alpha[i] : std::nan("")) + "," +
               fmt_double(f.residual[i]) + "," + std::to_string(int(f.reached[i])) + "," +
               std::to_string(int(f.kink[i])) + "\n";
    });
    write_text_file(path, out);
}

template <int N>
inline void write_trace_csv(const std::filesystem::path& path, const BoundaryTrace<N>& trace,
                            const nlohmann::json& config_meta) {
    std::string out = csv_header_block<N>(config_meta);
    out += "sample";
    for (int d = 0; d < N; ++d) out += ",p" + std::to_string(d);
    out += ",t,u\n";
    const std::size_t P = trace.points.size();
    for (std::size_t ti = 0; ti < trace.times.size(); ++ti)
        for (std::size_t pi = 0; pi < P; ++pi) {
            out += std::to_string(pi);
            for (int d = 0; d < N; ++d) out += "," + fmt_double(trace.points[pi][d]);
            out += "," + fmt_double(trace.times[ti]) + "," +
                   fmt_double(trace.values[ti * P + pi]) + "\n";
        }
    write_text_file(path, out);
}

inline void write_energy_csv(const std::filesystem::path& path, const EnergySeries& e) {
    std::string out = "t,energy,boundary_flux\n";
    for (std::size_t i = 0; i < e.times.size(); ++i)
        out += fmt_double(e.times[i]) + "," + fmt_double(e.energy[i]) + "," +
               fmt_double(e.boundary_flux[i]) + "\n";
    write_text_file(path, out);
}

// Generic nodal scalar field.
template <int N>
inline void write_field_csv(const std::filesystem::path& path, const Grid<N>& grid,
                            const std::vector<double>& values, const std::string& name) {
    std::string out;
    for (int d = 0; d < N; ++d) out += "x" + std::to_string(d) + ",";
    out += name + "\n";
    grid.for_each([&](const std::array<int, N>& idx, std::int64_t f) {
        const Vec<N> x = grid.point(idx);
        for (int d = 0; d < N; ++d) out += fmt_double(x[d]) + ",";
        out += fmt_double(values[static_cast<std::size_t>(f)]) + "\n";
    });
    write_text_file(path, out);
}

// 8-bit binary PGM scaled to [lo, hi]; non-finite values map to 0. For N = 3
// the central slice along the last axis is written.
template <int N>
inline void write_pgm(const std::filesystem::path& path, const Grid<N>& grid,
                      const std::vector<double>& values) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double v : values)
        if (std::isfinite(v)) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    if (!(hi > lo)) {
        lo = 0;
        hi = 1;
    }
    const int W = grid.dims[N - 2], H = grid.dims[N - 1];
    std::string out = "P5\n" + std::to_string(W) + " " + std::to_string(H) + "\n255\n";
    std::array<int, N> idx{};
    if constexpr (N == 3) idx[0] = grid.dims[0] / 2;
    for (int j = H - 1; j >= 0; --j)
        for (int i = 0; i < W; ++i) {
            idx[N - 2] = i;
            idx[N - 1] = j;
            const double v = values[static_cast<std::size_t>(grid.flat(idx))];
            unsigned char byte = 0;
            if (std::isfinite(v)) {
                double s = (v - lo) / (hi - lo);
                s = std::min(1.0, std::max(0.0, s));
                byte = static_cast<unsigned char>(std::lround(255 * s));
            }
            out.push_back(static_cast<char>(byte));
        }
    write_text_file(path, out);
}

// ---- output manifest ---------------------------------------------------------

struct Manifest {
    std::string experiment;
    nlohmann::json parameters;
    std::map<std::string, std::string> hashes; // artifact name -> sha256

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["experiment"] = experiment;
        j["parameters"] = parameters;
        nlohmann::json outs = nlohmann::json::object();
        for (const auto& [k, v] : hashes) outs[k] = v;
        j["outputs"] = outs;
        return j;
    }

    static Manifest from_json(const nlohmann::json& j) {
        Manifest m;
        m.experiment = j.at("experiment").get<std::string>();
        m.parameters = j.at("parameters");
        for (auto it = j.at("outputs").begin(); it != j.at("outputs").end(); ++it)
            m.hashes[it.key()] = it.value().get<std::string>();
        return m;
    }
};

// Tracks every artifact written into the output directory and hashes it.
class ArtifactWriter {
public:
    ArtifactWriter(std::filesystem::path dir, std::string experiment)
        : dir_(std::move(dir)) {
        manifest_.experiment = std::move(experiment);
        std::filesystem::create_directories(dir_);
    }

    std::filesystem::path dir() const { return dir_; }
    Manifest& manifest() { return manifest_; }

    template <class WriteFn>
    void emit(const std::string& name, WriteFn&& fn) {
        const std::filesystem::path p = dir_ / name;
        fn(p);
        manifest_.hashes[name] = sha256_file(p);
    }

    void finalize() {
        const std::string text = manifest_.to_json().dump(2) + "\n";
        write_text_file(dir_ / "manifest.json", text);
    }

private:
    std::filesystem::path dir_;
    Manifest manifest_;
};

} // namespace faslab
