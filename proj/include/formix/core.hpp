#pragma once

// Shared vocabulary: error types, seed derivation and small numeric helpers.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace formix {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what, std::string kind = "error")
        : std::runtime_error(what), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error(what, "validation") {}
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error(what, "domain") {}
};

class NotFound : public Error {
public:
    explicit NotFound(const std::string& what) : Error(what, "not_found") {}
};

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent sub-seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Sub-seed for stream `index` of a master seed. Independent of call order.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
    return mix64(mix64(seed) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

inline std::uint64_t derive_seed(std::uint64_t seed, const std::vector<std::uint64_t>& path) {
    std::uint64_t s = seed;
    for (auto p : path) s = derive_seed(s, p);
    return s;
}

/// Uniform draw on the open interval (0, 1).
inline double uniform_open(Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double v = 0.0;
    while (v <= 0.0) v = u(rng);
    return v;
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    std::uniform_int_distribution<std::size_t> d(0, n - 1);
    return d(rng);
}

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

} // namespace formix
