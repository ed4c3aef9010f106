#pragma once

// Space-filling design over the mixture slab x process space: candidate
// sampling, clustering, rounding with sum repair, benchmarks, randomization,
// follow-up augmentation and ternary coordinates.

#include "formix/core.hpp"
#include "formix/slab.hpp"
#include "formix/study.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace formix {

struct Design {
    StudyDefinition study;
    DataTable table;
    std::uint64_t seed = 0;
    std::string method = "fast-flexible-filling";
    std::size_t oversample = 50;
    std::vector<std::string> infeasible_runs;  // rows the rounding repair could not fix
};

/// Optional pinned value per factor (study order); empty means no locks.
using Locks = std::vector<std::optional<double>>;

// ---------------------------------------------------------------------------
// Sampling

/// Uniform feasible point. Mixture part uniform on the slab, continuous
/// uniform on its range, categorical uniform over its levels. Blocking factors
/// are set to their last (reference) level. Locked entries are kept as given.
inline Settings sample_feasible_point(const StudyDefinition& def, Rng& rng, const Locks& locks = {}) {
    const auto& fs = def.factors;
    Settings s(fs.size(), 0.0);
    auto locked = [&](std::size_t i) { return !locks.empty() && locks[i].has_value(); };
    std::vector<std::size_t> free_mix;
    std::vector<double> lo, hi;
    double total = 1.0;
    for (std::size_t i = 0; i < fs.size(); ++i) {
        if (fs[i].role != FactorRole::mixture) continue;
        if (locked(i)) {
            total -= *locks[i];
        } else {
            free_mix.push_back(i);
            lo.push_back(fs[i].low);
            hi.push_back(fs[i].high);
        }
    }
    if (!free_mix.empty()) {
        auto x = slab::sample(lo, hi, total, rng);
        for (std::size_t k = 0; k < free_mix.size(); ++k) s[free_mix[k]] = x[k];
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t i = 0; i < fs.size(); ++i) {
        if (locked(i)) { s[i] = *locks[i]; continue; }
        switch (fs[i].role) {
        case FactorRole::mixture: break;
        case FactorRole::continuous: s[i] = fs[i].low + unit(rng) * fs[i].span(); break;
        case FactorRole::categorical: s[i] = static_cast<double>(uniform_index(rng, fs[i].levels.size())); break;
        case FactorRole::blocking: s[i] = static_cast<double>(fs[i].levels.size() - 1); break;
        }
    }
    return s;
}

/// Coordinates used for clustering and distances: mixture fractions as-is,
/// continuous factors scaled to [0, 1]. Discrete factors are left out.
inline std::vector<double> standardized(const std::vector<Factor>& fs, const Settings& s) {
    std::vector<double> z;
    for (std::size_t i = 0; i < fs.size(); ++i) {
        if (fs[i].role == FactorRole::mixture) z.push_back(s[i]);
        else if (fs[i].role == FactorRole::continuous) z.push_back((s[i] - fs[i].low) / fs[i].span());
    }
    return z;
}

/// Euclidean distance on standardized coordinates; each categorical mismatch
/// adds one unit of squared distance. Blocking factors are ignored.
inline double standardized_distance(const std::vector<Factor>& fs, const Settings& a, const Settings& b) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < fs.size(); ++i) {
        switch (fs[i].role) {
        case FactorRole::mixture: d2 += (a[i] - b[i]) * (a[i] - b[i]); break;
        case FactorRole::continuous: {
            double t = (a[i] - b[i]) / fs[i].span();
            d2 += t * t;
            break;
        }
        case FactorRole::categorical: d2 += a[i] != b[i] ? 1.0 : 0.0; break;
        case FactorRole::blocking: break;
        }
    }
    return std::sqrt(d2);
}

inline double min_pairwise_distance(const std::vector<Factor>& fs, const std::vector<Settings>& pts) {
    double best = kInf;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) best = std::min(best, standardized_distance(fs, pts[i], pts[j]));
    return best;
}

// ---------------------------------------------------------------------------
// Grid arithmetic

namespace grid {

/// Value of `k` grid steps. When 1/g is an integer the division form is used
/// so that on-grid values are the doubles nearest their decimal spelling.
inline double value(long long k, double g) {
    double inv = 1.0 / g;
    double r = std::round(inv);
    if (std::fabs(inv - r) < 1e-9 * std::max(1.0, r)) return static_cast<double>(k) / r;
    return static_cast<double>(k) * g;
}
inline long long steps(double v, double g) { return std::llround(v / g); }
inline long long lo_steps(double lo, double g) { return static_cast<long long>(std::ceil(lo / g - 1e-9)); }
inline long long hi_steps(double hi, double g) { return static_cast<long long>(std::floor(hi / g + 1e-9)); }
inline double snap(double v, double g) { return value(steps(v, g), g); }

} // namespace grid

/// Round one row to the factor granularities, then repair the mixture part so
/// it sums to exactly one grid total. Repair moves one step at a time, each
/// time on the free component farthest from its bound in the needed
/// direction. Frozen components are snapped but never adjusted. Returns
/// nullopt when no in-bound repair exists.
inline std::optional<Settings> round_settings(const std::vector<Factor>& fs, Settings s,
                                              const std::vector<double>& granularity = {},
                                              const std::vector<bool>& frozen = {}) {
    auto g_of = [&](std::size_t i) { return granularity.empty() ? fs[i].granularity : granularity[i]; };
    std::vector<std::size_t> mix;
    std::vector<long long> k, klo, khi;
    for (std::size_t i = 0; i < fs.size(); ++i) {
        const auto& f = fs[i];
        if (!f.numeric()) continue;
        double g = g_of(i);
        if (!(g > 0.0)) continue;
        long long kl = grid::lo_steps(f.low, g), kh = grid::hi_steps(f.high, g);
        long long ki = std::clamp(grid::steps(s[i], g), kl, kh);
        if (f.role == FactorRole::mixture) {
            mix.push_back(i);
            k.push_back(ki);
            klo.push_back(kl);
            khi.push_back(kh);
        } else {
            s[i] = grid::value(ki, g);
        }
    }
    if (!mix.empty()) {
        double g = g_of(mix.front());
        long long K = std::llround(1.0 / g);
        long long residual = K - std::accumulate(k.begin(), k.end(), 0LL);
        while (residual != 0) {
            int dir = residual > 0 ? 1 : -1;
            std::size_t best = mix.size();
            long long best_room = 0;
            for (std::size_t j = 0; j < mix.size(); ++j) {
                if (!frozen.empty() && frozen[mix[j]]) continue;
                long long room = dir > 0 ? khi[j] - k[j] : k[j] - klo[j];
                if (room > best_room) { best_room = room; best = j; }
            }
            if (best == mix.size()) return std::nullopt;
            k[best] += dir;
            residual -= dir;
        }
        for (std::size_t j = 0; j < mix.size(); ++j) s[mix[j]] = grid::value(k[j], g);
    }
    return s;
}

/// True when the mixture part sums to the grid total exactly in grid steps.
inline bool mixture_on_grid(const std::vector<Factor>& fs, const Settings& s) {
    long long total = 0;
    double g = 0.0;
    for (std::size_t i = 0; i < fs.size(); ++i) {
        if (fs[i].role != FactorRole::mixture) continue;
        g = fs[i].granularity;
        long long k = grid::steps(s[i], g);
        if (std::fabs(s[i] - grid::value(k, g)) > 1e-12) return false;
        total += k;
    }
    return g == 0.0 || total == std::llround(1.0 / g);
}

/// Number of distinct feasible settings on the granularity grid (saturating).
inline double count_grid_points(const StudyDefinition& def) {
    double count = 1.0;
    std::vector<long long> klo, khi;
    double g_mix = 0.0;
    for (const auto& f : def.factors) {
        if (f.role == FactorRole::mixture) {
            g_mix = f.granularity;
            klo.push_back(grid::lo_steps(f.low, f.granularity));
            khi.push_back(grid::hi_steps(f.high, f.granularity));
        } else if (f.role == FactorRole::continuous) {
            count *= static_cast<double>(grid::hi_steps(f.high, f.granularity) - grid::lo_steps(f.low, f.granularity) + 1);
        } else if (f.role == FactorRole::categorical) {
            count *= static_cast<double>(f.levels.size());
        }
    }
    if (!klo.empty()) count *= slab::count_grid(klo, khi, std::llround(1.0 / g_mix));
    return count;
}

// ---------------------------------------------------------------------------
// Fast flexible filling

namespace detail {

/// Lloyd's k-means with k-means++ seeding over `pts` (row-major, dim `d`).
/// Returns cluster centroids.
inline std::vector<std::vector<double>> kmeans(const std::vector<double>& pts, std::size_t d, std::size_t k, Rng& rng,
                                               std::size_t max_iter = 100) {
    const std::size_t n = pts.size() / d;
    auto dist2 = [&](const double* a, const double* b) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
        return s;
    };
    std::vector<std::vector<double>> c;
    c.reserve(k);
    std::size_t first = uniform_index(rng, n);
    c.emplace_back(pts.begin() + static_cast<std::ptrdiff_t>(first * d),
                   pts.begin() + static_cast<std::ptrdiff_t>((first + 1) * d));
    std::vector<double> nearest(n, kInf);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    while (c.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            nearest[i] = std::min(nearest[i], dist2(&pts[i * d], c.back().data()));
            total += nearest[i];
        }
        std::size_t pick = n - 1;
        if (total > 0.0) {
            double r = unit(rng) * total;
            for (std::size_t i = 0; i < n; ++i) {
                r -= nearest[i];
                if (r <= 0.0) { pick = i; break; }
            }
        } else {
            pick = uniform_index(rng, n);
        }
        c.emplace_back(pts.begin() + static_cast<std::ptrdiff_t>(pick * d),
                       pts.begin() + static_cast<std::ptrdiff_t>((pick + 1) * d));
    }

    std::vector<std::size_t> assign(n, k);
    for (std::size_t it = 0; it < max_iter; ++it) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double bd = kInf;
            for (std::size_t j = 0; j < k; ++j) {
                double dd = dist2(&pts[i * d], c[j].data());
                if (dd < bd) { bd = dd; best = j; }
            }
            if (assign[i] != best) { assign[i] = best; changed = true; }
        }
        if (!changed) break;
        std::vector<std::vector<double>> sum(k, std::vector<double>(d, 0.0));
        std::vector<std::size_t> cnt(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < d; ++j) sum[assign[i]][j] += pts[i * d + j];
            ++cnt[assign[i]];
        }
        for (std::size_t j = 0; j < k; ++j) {
            if (cnt[j] == 0) {
                // re-seed an empty cluster at the point farthest from its centroid
                std::size_t far = 0;
                double fd = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    double dd = dist2(&pts[i * d], c[assign[i]].data());
                    if (dd > fd) { fd = dd; far = i; }
                }
                c[j].assign(pts.begin() + static_cast<std::ptrdiff_t>(far * d),
                            pts.begin() + static_cast<std::ptrdiff_t>((far + 1) * d));
                assign[far] = j;
                continue;
            }
            for (std::size_t t = 0; t < d; ++t) c[j][t] = sum[j][t] / static_cast<double>(cnt[j]);
        }
    }
    return c;
}

inline std::vector<std::vector<std::size_t>> level_combinations(const std::vector<Factor>& fs) {
    std::vector<std::size_t> cat;
    for (std::size_t i = 0; i < fs.size(); ++i)
        if (fs[i].role == FactorRole::categorical) cat.push_back(i);
    std::vector<std::vector<std::size_t>> combos{{}};
    for (auto ci : cat) {
        std::vector<std::vector<std::size_t>> next;
        for (const auto& c : combos)
            for (std::size_t l = 0; l < fs[ci].levels.size(); ++l) {
                auto e = c;
                e.push_back(l);
                next.push_back(std::move(e));
            }
        combos = std::move(next);
    }
    return combos;
}

inline std::string run_id(const StudyDefinition& def, std::size_t row) {
    std::string id;
    if (!def.date.empty()) id += def.date + "-";
    if (!def.name.empty()) id += def.name + "-";
    return id + std::to_string(row + 1);
}

inline void assign_blocks(const StudyDefinition& def, DataTable& t) {
    for (std::size_t i = 0; i < def.factors.size(); ++i) {
        if (def.factors[i].role != FactorRole::blocking) continue;
        std::size_t nl = def.factors[i].levels.size();
        std::size_t r = 0;
        for (auto& row : t.rows) row.factors[i] = static_cast<double>(r++ % nl);
    }
}

inline void renumber(const StudyDefinition& def, DataTable& t) {
    for (std::size_t r = 0; r < t.rows.size(); ++r) t.rows[r].run_id = run_id(def, r);
}

} // namespace detail

/// Fast-flexible-filling design: oversample feasible candidates, cluster them
/// into n groups by k-means on standardized coordinates and keep each
/// cluster's centroid projected back onto the slab. Categorical factors are
/// stratified: the run budget is split as evenly as possible across level
/// combinations and clustering runs within each stratum. Rows come out in
/// random order with blocking labels assigned round-robin.
inline Design generate_space_filling(const StudyDefinition& def, std::size_t n, std::uint64_t seed,
                                     std::size_t oversample = 50, std::size_t kmeans_restarts = 10) {
    require_valid(def);
    if (n == 0) throw ValidationError("design size must be >= 1");
    if (oversample == 0) throw ValidationError("oversample factor must be >= 1");
    if (static_cast<double>(n) > count_grid_points(def))
        throw ValidationError("requested " + std::to_string(n) +
                              " runs but the factor grid has fewer distinct feasible points");

    const auto& fs = def.factors;
    Rng rng(derive_seed(seed, 0));
    auto combos = detail::level_combinations(fs);
    std::vector<std::size_t> budget(combos.size(), n / combos.size());
    {
        std::vector<std::size_t> order(combos.size());
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t r = 0; r < n % combos.size(); ++r) ++budget[order[r]];
    }

    std::vector<std::size_t> mix, cont, cat;
    for (std::size_t i = 0; i < fs.size(); ++i) {
        if (fs[i].role == FactorRole::mixture) mix.push_back(i);
        else if (fs[i].role == FactorRole::continuous) cont.push_back(i);
        else if (fs[i].role == FactorRole::categorical) cat.push_back(i);
    }
    std::vector<double> lo, hi;
    for (auto i : mix) { lo.push_back(fs[i].low); hi.push_back(fs[i].high); }
    const std::size_t d = mix.size() + cont.size();

    Design design;
    design.study = def;
    design.seed = seed;
    design.oversample = oversample;
    design.table = make_table(def);

    for (std::size_t s = 0; s < combos.size(); ++s) {
        const std::size_t k = budget[s];
        if (k == 0) continue;
        Rng srng(derive_seed(seed, 1 + s));
        Settings base(fs.size(), 0.0);
        for (std::size_t c = 0; c < cat.size(); ++c) base[cat[c]] = static_cast<double>(combos[s][c]);
        std::vector<Settings> out;
        if (d == 0) {
            out.assign(k, base);
        } else {
            const std::size_t m = k * oversample;
            std::vector<double> pts;
            pts.reserve(m * d);
            Locks locks(fs.size());
            for (auto ci : cat) locks[ci] = base[ci];
            for (std::size_t p = 0; p < m; ++p) {
                auto x = sample_feasible_point(def, srng, locks);
                auto z = standardized(fs, x);
                pts.insert(pts.end(), z.begin(), z.end());
            }
            // several k-means restarts; keep the clustering whose centroids are
            // farthest apart (largest minimum pairwise distance)
            std::vector<std::vector<double>> centroids;
            double best_sep = -1.0;
            for (std::size_t rep = 0; rep < kmeans_restarts; ++rep) {
                auto c = detail::kmeans(pts, d, k, srng);
                double sep = kInf;
                for (std::size_t a = 0; a < c.size(); ++a)
                    for (std::size_t b = a + 1; b < c.size(); ++b) {
                        double s2 = 0.0;
                        for (std::size_t t = 0; t < d; ++t) s2 += (c[a][t] - c[b][t]) * (c[a][t] - c[b][t]);
                        sep = std::min(sep, s2);
                    }
                if (sep > best_sep) { best_sep = sep; centroids = std::move(c); }
            }
            for (const auto& c : centroids) {
                Settings x = base;
                std::vector<double> mx(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(mix.size()));
                if (!mix.empty()) {
                    auto proj = slab::project(mx, lo, hi, 1.0);
                    if (!proj) throw DomainError("mixture slab is empty");
                    for (std::size_t j = 0; j < mix.size(); ++j) x[mix[j]] = (*proj)[j];
                }
                for (std::size_t j = 0; j < cont.size(); ++j) {
                    const auto& f = fs[cont[j]];
                    x[cont[j]] = std::clamp(f.low + c[mix.size() + j] * f.span(), f.low, f.high);
                }
                out.push_back(std::move(x));
            }
        }
        for (auto& x : out) {
            DataRow row;
            row.factors = std::move(x);
            row.values.resize(design.table.columns.size());
            design.table.rows.push_back(std::move(row));
        }
    }
    std::shuffle(design.table.rows.begin(), design.table.rows.end(), rng);
    detail::assign_blocks(def, design.table);
    detail::renumber(def, design.table);
    return design;
}

/// Round every row to its granularity and repair mixture sums. Excluded rows
/// (out-of-range benchmarks) are left untouched; rows that cannot be repaired
/// inside the bounds are recorded in `infeasible_runs` and flagged.
inline Design round_and_repair(Design design, const std::vector<double>& granularity = {}) {
    design.infeasible_runs.clear();
    for (auto& row : design.table.rows) {
        if (row.exclude) continue;
        auto r = round_settings(design.table.factors, row.factors, granularity);
        if (!r) {
            design.infeasible_runs.push_back(row.run_id);
            row.exclude = true;
            if (!row.notes.empty()) row.notes += "; ";
            row.notes += "infeasible after rounding";
            continue;
        }
        row.factors = std::move(*r);
    }
    return design;
}

struct BenchmarkRun {
    std::string label = "benchmark";
    Settings settings;
    std::size_t copies = 1;  // total rows to add; 2 gives a replicated benchmark
};

/// Append benchmark control rows. Recipes outside the study range are kept
/// but flagged for exclusion from analysis.
inline Design add_benchmark_runs(Design design, const std::vector<BenchmarkRun>& runs) {
    const auto& fs = design.table.factors;
    for (const auto& b : runs) {
        if (b.settings.size() != fs.size()) throw ValidationError("benchmark '" + b.label + "' has wrong width");
        bool inside = std::fabs(mixture_sum(fs, b.settings) -
                                (design.study.count(FactorRole::mixture) ? 1.0 : 0.0)) <= 1e-6;
        for (std::size_t i = 0; i < fs.size(); ++i) inside = inside && within_bounds(fs[i], b.settings[i]);
        for (std::size_t c = 0; c < b.copies; ++c) {
            DataRow row;
            row.factors = b.settings;
            row.values.resize(design.table.columns.size());
            row.notes = b.label;
            if (!inside) {
                row.exclude = true;
                row.notes += " (outside study range; excluded from analysis)";
            }
            row.run_id = detail::run_id(design.study, design.table.rows.size());
            design.table.rows.push_back(std::move(row));
        }
    }
    detail::renumber(design.study, design.table);
    return design;
}

/// Uniform random permutation of the rows. Run ids are regenerated as
/// date-name-rownumber and blocking labels reassigned round-robin.
inline Design randomize_order(Design design, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0x5eedULL));
    std::shuffle(design.table.rows.begin(), design.table.rows.end(), rng);
    detail::assign_blocks(design.study, design.table);
    detail::renumber(design.study, design.table);
    return design;
}

/// Follow-up design in a new region: n space-filling runs plus up to `anchors`
/// prior runs that fall inside the new region, picked greedily to maximize the
/// minimum distance to the runs already chosen. Rows are randomized.
inline Design augment_followup(const DataTable& prior, const StudyDefinition& next, std::size_t n,
                               std::size_t anchors, std::uint64_t seed, std::size_t oversample = 50) {
    require_valid(next);
    // the two regions must share every factor range and the mixture slab
    std::vector<double> lo, hi;
    for (const auto& f : next.factors) {
        auto it = std::find_if(prior.factors.begin(), prior.factors.end(),
                               [&](const Factor& g) { return g.name == f.name; });
        if (it == prior.factors.end()) continue;  // a newly introduced factor
        if (f.numeric()) {
            double a = std::max(f.low, it->low), b = std::min(f.high, it->high);
            if (!(a < b)) throw ValidationError("no overlap with the prior study region; a new study must be designed");
            if (f.role == FactorRole::mixture) { lo.push_back(a); hi.push_back(b); }
        } else {
            bool shared = std::any_of(f.levels.begin(), f.levels.end(), [&](const std::string& l) {
                return std::find(it->levels.begin(), it->levels.end(), l) != it->levels.end();
            });
            if (!shared) throw ValidationError("no overlap with the prior study region; a new study must be designed");
        }
    }
    if (!lo.empty() && !slab::feasible(lo, hi, 1.0))
        throw ValidationError("no overlap with the prior study region; a new study must be designed");

    Design design = generate_space_filling(next, n, seed, oversample);
    design = round_and_repair(std::move(design));

    // prior rows mapped into the new factor order, kept only when inside the new bounds
    std::vector<std::pair<const DataRow*, Settings>> eligible;
    for (const auto& row : prior.rows) {
        if (row.exclude) continue;
        Settings s(next.factors.size(), 0.0);
        bool ok = true;
        for (std::size_t i = 0; i < next.factors.size() && ok; ++i) {
            const auto& f = next.factors[i];
            std::size_t j = 0;
            while (j < prior.factors.size() && prior.factors[j].name != f.name) ++j;
            if (j == prior.factors.size()) { ok = false; break; }
            if (f.numeric()) {
                s[i] = row.factors[j];
                ok = within_bounds(f, s[i]);
            } else {
                const auto& label = prior.factors[j].levels[static_cast<std::size_t>(row.factors[j])];
                auto it = std::find(f.levels.begin(), f.levels.end(), label);
                ok = it != f.levels.end();
                if (ok) s[i] = static_cast<double>(it - f.levels.begin());
            }
        }
        if (ok) eligible.emplace_back(&row, std::move(s));
    }

    std::vector<Settings> chosen_pts;
    for (const auto& r : design.table.rows) chosen_pts.push_back(r.factors);
    std::vector<bool> used(eligible.size(), false);
    for (std::size_t a = 0; a < std::min(anchors, eligible.size()); ++a) {
        std::size_t best = eligible.size();
        double best_d = -1.0;
        for (std::size_t e = 0; e < eligible.size(); ++e) {
            if (used[e]) continue;
            double dmin = kInf;
            for (const auto& p : chosen_pts) dmin = std::min(dmin, standardized_distance(next.factors, eligible[e].second, p));
            if (dmin > best_d) { best_d = dmin; best = e; }
        }
        used[best] = true;
        chosen_pts.push_back(eligible[best].second);
        DataRow row;
        row.factors = eligible[best].second;
        row.values.resize(design.table.columns.size());
        row.notes = "anchor from prior run " + eligible[best].first->run_id;
        design.table.rows.push_back(std::move(row));
    }
    design.method = "fast-flexible-filling+anchors";
    return randomize_order(std::move(design), derive_seed(seed, 0xa7c4ULL));
}

// ---------------------------------------------------------------------------
// Ternary coordinates

struct TernaryPanel {
    std::string a, b;
    std::vector<std::array<double, 3>> points;  // (x_a, x_b, others)
};

/// Two lipids against an "others" axis. Without an explicit pair every
/// mixture pair is emitted.
inline std::vector<TernaryPanel> ternary_coordinates(const std::vector<Factor>& fs, const std::vector<Settings>& rows,
                                                     std::optional<std::pair<std::string, std::string>> pair = {}) {
    std::vector<std::size_t> mix;
    for (std::size_t i = 0; i < fs.size(); ++i)
        if (fs[i].role == FactorRole::mixture) mix.push_back(i);
    if (mix.size() < 3) throw ValidationError("ternary coordinates need >= 3 mixture factors");
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    if (pair) {
        std::size_t a = fs.size(), b = fs.size();
        for (auto i : mix) {
            if (fs[i].name == pair->first) a = i;
            if (fs[i].name == pair->second) b = i;
        }
        if (a == fs.size() || b == fs.size() || a == b)
            throw ValidationError("ternary pair must name two distinct mixture factors");
        pairs.emplace_back(a, b);
    } else {
        for (std::size_t i = 0; i < mix.size(); ++i)
            for (std::size_t j = i + 1; j < mix.size(); ++j) pairs.emplace_back(mix[i], mix[j]);
    }
    std::vector<TernaryPanel> out;
    for (auto [a, b] : pairs) {
        TernaryPanel p{fs[a].name, fs[b].name, {}};
        for (const auto& r : rows) p.points.push_back({r[a], r[b], 1.0 - r[a] - r[b]});
        out.push_back(std::move(p));
    }
    return out;
}

inline std::vector<TernaryPanel> ternary_coordinates(const DataTable& t,
                                                     std::optional<std::pair<std::string, std::string>> pair = {}) {
    std::vector<Settings> rows;
    for (const auto& r : t.rows) rows.push_back(r.factors);
    return ternary_coordinates(t.factors, rows, std::move(pair));
}

} // namespace formix
