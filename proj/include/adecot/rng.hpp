#pragma once

// Counter-based random draws. Every value is a pure function of its key, so
// results do not depend on evaluation order or thread scheduling.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <string_view>

namespace adecot {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// FNV-1a, finished with a splitmix round.
inline constexpr std::uint64_t hash_string(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return splitmix64(h);
}

inline constexpr std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) {
    return splitmix64(seed ^ (value + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2)));
}

/// Stream of draws addressed by (key, counter).
class KeyedRng {
  public:
    KeyedRng(std::initializer_list<std::uint64_t> key) {
        for (auto k : key) key_ = hash_combine(key_, k);
    }
    explicit KeyedRng(std::uint64_t key) : key_(splitmix64(key)) {}

    std::uint64_t next_u64() { return splitmix64(key_ + 0x632be59bd9b4e019ULL * ++counter_); }

    /// Uniform in [0,1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller (one variate per pair of uniforms).
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

  private:
    std::uint64_t key_ = 0x243f6a8885a308d3ULL;
    std::uint64_t counter_ = 0;
};

/// Seed of the index-th candidate under a run seed.
inline std::uint64_t candidate_seed(std::uint64_t run_seed, int index) {
    return hash_combine(splitmix64(run_seed), static_cast<std::uint64_t>(index) + 1);
}

}  // namespace adecot
