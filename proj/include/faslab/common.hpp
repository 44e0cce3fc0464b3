#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace faslab {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Splits [0, count) into contiguous chunks, one thread per chunk. Bodies must
// write disjoint outputs only; results do not depend on the worker count.
inline void parallel_for(std::size_t count,
                         const std::function<void(std::size_t, std::size_t)>& body,
                         int jobs = 1) {
    if (count == 0) return;
    std::size_t workers = jobs > 1 ? static_cast<std::size_t>(jobs) : 1;
    if (workers > count) workers = count;
    if (workers <= 1) {
        body(0, count);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (count + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(count, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&body, lo, hi] { body(lo, hi); });
    }
    for (auto& t : pool) t.join();
}

} // namespace faslab
