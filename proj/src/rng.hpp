#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace pacvd::detail {

// Uniform integer in [0, n) by rejection, independent of the standard library's distributions.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
        const std::uint64_t x = rng();
        if (x >= threshold) return x % n;
    }
}

// Moves a uniform k-subset to the front (partial Fisher-Yates) and drops the rest.
template <class T>
void sample_prefix(std::vector<T>& pool, std::size_t k, std::mt19937_64& rng) {
    if (k > pool.size()) k = pool.size();
    for (std::size_t i = 0; i < k; ++i) {
        const auto j = i + static_cast<std::size_t>(uniform_below(rng, pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
}

}  // namespace pacvd::detail
