#pragma once

// Geometry of the simplex slab {lo <= x <= hi, sum(x) = total}.

#include "formix/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

namespace formix::slab {

inline double sum(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); }

inline bool feasible(std::span<const double> lo, std::span<const double> hi, double total, double tol = 1e-12) {
    return sum(lo) <= total + tol && sum(hi) >= total - tol;
}

/// Uniform draw from the slab: Dirichlet(1,...,1) on the pseudo-component
/// simplex, mapped affinely onto the slab, rejected against the upper bounds.
inline std::vector<double> sample(std::span<const double> lo, std::span<const double> hi, double total, Rng& rng,
                                  std::size_t max_draws = 10000) {
    const std::size_t m = lo.size();
    std::vector<double> x(lo.begin(), lo.end());
    if (m == 0) return x;
    double free = total - sum(lo);
    if (free < -1e-12) throw DomainError("mixture slab is empty: lower bounds exceed the total");
    if (free <= 1e-12) return x;  // the slab collapses to its single vertex
    std::exponential_distribution<double> expo(1.0);
    std::vector<double> e(m);
    for (std::size_t draw = 0; draw < max_draws; ++draw) {
        double s = 0.0;
        for (auto& v : e) s += (v = expo(rng));
        bool ok = true;
        for (std::size_t i = 0; i < m; ++i) {
            x[i] = lo[i] + free * e[i] / s;
            if (x[i] > hi[i]) { ok = false; break; }
        }
        if (ok) return x;
    }
    throw DomainError("could not draw a feasible mixture after " + std::to_string(max_draws) +
                      " attempts; the slab is too thin, review the mixture bounds");
}

/// Move `x` onto the slab: clamp to the box, then spread the remaining
/// deficit over the components in proportion to their room toward the bound
/// in the needed direction. Returns nullopt when the slab is empty.
inline std::optional<std::vector<double>> clip_and_redistribute(std::vector<double> x, std::span<const double> lo,
                                                                std::span<const double> hi, double total) {
    if (!feasible(lo, hi, total, 1e-12)) return std::nullopt;
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lo[i], hi[i]);
    double diff = total - sum(x);
    if (diff == 0.0) return x;
    double room = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) room += diff > 0 ? hi[i] - x[i] : x[i] - lo[i];
    if (room < std::fabs(diff) - 1e-12) return std::nullopt;
    if (room > 0.0)
        for (std::size_t i = 0; i < x.size(); ++i) {
            double r = diff > 0 ? hi[i] - x[i] : x[i] - lo[i];
            x[i] = std::clamp(x[i] + diff * r / room, lo[i], hi[i]);
        }
    return x;
}

/// Proportional renormalization to `total` followed by clip-and-redistribute.
inline std::optional<std::vector<double>> project(std::vector<double> x, std::span<const double> lo,
                                                  std::span<const double> hi, double total) {
    double s = sum(x);
    if (s > 0.0)
        for (auto& v : x) v *= total / s;
    return clip_and_redistribute(std::move(x), lo, hi, total);
}

/// Number of integer vectors k with klo <= k <= khi and sum(k) = K. Saturates
/// at a large value instead of overflowing.
inline double count_grid(const std::vector<long long>& klo, const std::vector<long long>& khi, long long K) {
    if (K < 0) return 0.0;
    std::vector<double> ways(static_cast<std::size_t>(K) + 1, 0.0), next(ways.size());
    ways[0] = 1.0;
    for (std::size_t i = 0; i < klo.size(); ++i) {
        // next[s] = sum_{k=klo..khi} ways[s-k], via a running prefix sum
        std::vector<double> prefix(ways.size() + 1, 0.0);
        for (std::size_t s = 0; s < ways.size(); ++s) prefix[s + 1] = std::min(prefix[s] + ways[s], 1e300);
        for (long long s = 0; s <= K; ++s) {
            long long a = s - khi[i], b = s - klo[i];
            if (b < 0) { next[static_cast<std::size_t>(s)] = 0.0; continue; }
            a = std::max(a, 0LL);
            next[static_cast<std::size_t>(s)] = prefix[static_cast<std::size_t>(b) + 1] - prefix[static_cast<std::size_t>(a)];
        }
        ways.swap(next);
    }
    return ways[static_cast<std::size_t>(K)];
}

} // namespace formix::slab
