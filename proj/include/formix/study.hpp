#pragma once

// Study data model: factors, responses, the run table and the table utilities
// used between the design and analysis phases.

#include "formix/core.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace formix {

enum class FactorRole { mixture, continuous, categorical, blocking };
enum class Goal { maximize, minimize, target, none };
enum class Transform { identity, log, logit };

inline std::string to_string(FactorRole r) {
    switch (r) {
    case FactorRole::mixture: return "mixture";
    case FactorRole::continuous: return "continuous";
    case FactorRole::categorical: return "categorical";
    case FactorRole::blocking: return "blocking";
    }
    return "?";
}
inline std::string to_string(Goal g) {
    switch (g) {
    case Goal::maximize: return "maximize";
    case Goal::minimize: return "minimize";
    case Goal::target: return "target";
    case Goal::none: return "none";
    }
    return "?";
}
inline std::string to_string(Transform t) {
    switch (t) {
    case Transform::identity: return "identity";
    case Transform::log: return "log";
    case Transform::logit: return "logit";
    }
    return "?";
}
inline FactorRole parse_role(const std::string& s) {
    if (s == "mixture") return FactorRole::mixture;
    if (s == "continuous") return FactorRole::continuous;
    if (s == "categorical") return FactorRole::categorical;
    if (s == "blocking") return FactorRole::blocking;
    throw ValidationError("unknown factor role '" + s + "'");
}
inline Goal parse_goal(const std::string& s) {
    if (s == "maximize") return Goal::maximize;
    if (s == "minimize") return Goal::minimize;
    if (s == "target") return Goal::target;
    if (s == "none") return Goal::none;
    throw ValidationError("unknown goal '" + s + "'");
}
inline Transform parse_transform(const std::string& s) {
    if (s == "identity") return Transform::identity;
    if (s == "log") return Transform::log;
    if (s == "logit") return Transform::logit;
    throw ValidationError("unknown transform '" + s + "'");
}

/// One study factor. Mixture bounds are fractions of the total; continuous
/// bounds are in natural units; categorical and blocking factors use `levels`.
struct Factor {
    std::string name;
    FactorRole role = FactorRole::continuous;
    double low = 0.0;
    double high = 1.0;
    double granularity = 0.0;
    std::vector<std::string> levels;

    bool numeric() const { return role == FactorRole::mixture || role == FactorRole::continuous; }
    bool discrete() const { return !numeric(); }
    double span() const { return high - low; }

    std::size_t level_index(const std::string& label) const {
        auto it = std::find(levels.begin(), levels.end(), label);
        if (it == levels.end())
            throw ValidationError("factor '" + name + "' has no level '" + label + "'");
        return static_cast<std::size_t>(it - levels.begin());
    }

    static Factor mixture(std::string n, double lo, double hi, double g) {
        return {std::move(n), FactorRole::mixture, lo, hi, g, {}};
    }
    static Factor continuous(std::string n, double lo, double hi, double g) {
        return {std::move(n), FactorRole::continuous, lo, hi, g, {}};
    }
    static Factor categorical(std::string n, std::vector<std::string> lv) {
        return {std::move(n), FactorRole::categorical, 0.0, 0.0, 0.0, std::move(lv)};
    }
    static Factor blocking(std::string n, std::vector<std::string> lv) {
        return {std::move(n), FactorRole::blocking, 0.0, 0.0, 0.0, std::move(lv)};
    }
};

struct ResponseSpec {
    std::string name;
    Goal goal = Goal::none;
    double target = kNaN;
    double importance = 1.0;
    Transform transform = Transform::identity;
    bool bounded01 = false;
};

struct StudyDefinition {
    std::string name;
    std::string date;  // ISO-8601, e.g. 2022-09-02
    std::vector<Factor> factors;
    std::vector<ResponseSpec> responses;

    std::size_t factor_index(const std::string& n) const {
        for (std::size_t i = 0; i < factors.size(); ++i)
            if (factors[i].name == n) return i;
        throw ValidationError("unknown factor '" + n + "'");
    }
    std::vector<std::size_t> indices(FactorRole role) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < factors.size(); ++i)
            if (factors[i].role == role) out.push_back(i);
        return out;
    }
    std::size_t count(FactorRole role) const { return indices(role).size(); }
};

/// A point in factor space, one entry per factor in study order. Categorical
/// and blocking entries hold the level index.
using Settings = std::vector<double>;

// ---------------------------------------------------------------------------
// Validation

struct Violation {
    std::string subject;  // factor or response name, or "study"
    std::string message;
};
using ValidationReport = std::vector<Violation>;

namespace detail {
inline bool divides(double span, double g) {
    if (!(g > 0.0)) return false;
    double q = span / g;
    return std::fabs(q - std::round(q)) <= 1e-9 * std::max(1.0, std::fabs(q));
}
} // namespace detail

inline ValidationReport validate_study(const StudyDefinition& def) {
    ValidationReport out;
    std::set<std::string> names;
    std::size_t n_mix = 0;
    double sum_lo = 0.0, sum_hi = 0.0;
    std::optional<double> mix_g;
    for (const auto& f : def.factors) {
        if (f.name.empty()) out.push_back({"study", "factor with empty name"});
        if (!names.insert(f.name).second) out.push_back({f.name, "duplicate factor name"});
        switch (f.role) {
        case FactorRole::mixture:
            ++n_mix;
            sum_lo += f.low;
            sum_hi += f.high;
            if (!(0.0 <= f.low && f.low < f.high && f.high <= 1.0))
                out.push_back({f.name, "mixture bounds must satisfy 0 <= low < high <= 1"});
            if (mix_g && std::fabs(*mix_g - f.granularity) > 1e-12)
                out.push_back({f.name, "mixture factors must share one granularity"});
            mix_g = f.granularity;
            if (f.granularity > 0.0 && !detail::divides(1.0, f.granularity))
                out.push_back({f.name, "mixture granularity must divide 1"});
            [[fallthrough]];
        case FactorRole::continuous:
            if (!(f.low < f.high)) out.push_back({f.name, "low must be below high"});
            if (!(f.granularity > 0.0))
                out.push_back({f.name, "granularity must be positive"});
            else if (!detail::divides(f.high - f.low, f.granularity))
                out.push_back({f.name, "granularity does not divide the factor range"});
            break;
        case FactorRole::categorical:
        case FactorRole::blocking: {
            std::set<std::string> lv(f.levels.begin(), f.levels.end());
            if (f.levels.size() < 2 || lv.size() != f.levels.size())
                out.push_back({f.name, "needs >= 2 distinct levels"});
            break;
        }
        }
    }
    if (n_mix == 1) out.push_back({"study", "needs >= 2 mixture factors"});
    if (n_mix >= 2) {
        if (!(sum_lo < 1.0)) out.push_back({"study", "sum of mixture lows >= 1"});
        if (!(sum_hi > 1.0)) out.push_back({"study", "sum of mixture highs <= 1"});
    }
    std::set<std::string> rnames;
    for (const auto& r : def.responses) {
        if (!rnames.insert(r.name).second || names.count(r.name))
            out.push_back({r.name, "duplicate response name"});
        if (!(r.importance >= 0.0)) out.push_back({r.name, "importance must be >= 0"});
        if (r.goal == Goal::target && !std::isfinite(r.target))
            out.push_back({r.name, "target goal needs a finite target value"});
        if (r.transform == Transform::logit && !r.bounded01)
            out.push_back({r.name, "logit transform requires a response bounded in (0,1)"});
    }
    return out;
}

inline void require_valid(const StudyDefinition& def) {
    auto report = validate_study(def);
    if (!report.empty()) {
        std::string msg = "invalid study:";
        for (const auto& v : report) msg += " [" + v.subject + ": " + v.message + "]";
        throw ValidationError(msg);
    }
}

// ---------------------------------------------------------------------------
// Run-size heuristics

/// Three runs per mixture factor, two per continuous factor, one per level of
/// each categorical factor. Blocking factors do not count.
inline std::size_t min_run_heuristic(const StudyDefinition& def) {
    require_valid(def);
    std::size_t n = 0;
    for (const auto& f : def.factors) {
        if (f.role == FactorRole::mixture) n += 3;
        else if (f.role == FactorRole::continuous) n += 2;
        else if (f.role == FactorRole::categorical) n += f.levels.size();
    }
    return n;
}

/// Term count of the second-order mixture-process model. Non-mixture main
/// effects are left out: with sum(x) = 1 they lie in the span of the
/// mixture-by-process interactions.
inline std::size_t second_order_term_count(const StudyDefinition& def) {
    std::size_t m = 0;
    std::vector<std::size_t> process_width;  // columns contributed per process factor
    std::size_t n_cont = 0;
    for (const auto& f : def.factors) {
        if (f.role == FactorRole::mixture) ++m;
        else if (f.role == FactorRole::continuous) { process_width.push_back(1); ++n_cont; }
        else if (f.role == FactorRole::categorical) process_width.push_back(f.levels.size() - 1);
    }
    std::size_t process_cols = std::accumulate(process_width.begin(), process_width.end(), std::size_t{0});
    std::size_t pp = 0;
    for (std::size_t i = 0; i < process_width.size(); ++i)
        for (std::size_t j = i + 1; j < process_width.size(); ++j) pp += process_width[i] * process_width[j];
    return m + m * (m - 1) / 2 + m * process_cols + pp + n_cont;
}

inline std::size_t max_run_heuristic(const StudyDefinition& def) {
    require_valid(def);
    return second_order_term_count(def) + 1;
}

// ---------------------------------------------------------------------------
// Data table

struct DataRow {
    std::string run_id;
    Settings factors;
    std::vector<std::optional<double>> values;  // one per measurement column
    std::string notes;
    bool exclude = false;
    std::string source;
};

/// The run table of a study: factor columns, measurement columns (responses,
/// assay replicates, issue indicators), notes and an optional source label.
struct DataTable {
    std::vector<Factor> factors;
    std::vector<std::string> columns;
    std::string source_column;  // empty when the table has no source column
    std::vector<DataRow> rows;

    std::size_t column_index(const std::string& name) const {
        auto it = std::find(columns.begin(), columns.end(), name);
        if (it == columns.end()) throw NotFound("unknown column '" + name + "'");
        return static_cast<std::size_t>(it - columns.begin());
    }
    bool has_column(const std::string& name) const {
        return std::find(columns.begin(), columns.end(), name) != columns.end();
    }
    std::size_t factor_index(const std::string& name) const {
        for (std::size_t i = 0; i < factors.size(); ++i)
            if (factors[i].name == name) return i;
        throw NotFound("unknown factor '" + name + "'");
    }
    std::size_t add_column(const std::string& name) {
        if (has_column(name)) return column_index(name);
        columns.push_back(name);
        for (auto& r : rows) r.values.emplace_back();
        return columns.size() - 1;
    }
};

/// Empty table with factor columns and one column per study response.
inline DataTable make_table(const StudyDefinition& def) {
    DataTable t;
    t.factors = def.factors;
    for (const auto& r : def.responses) t.columns.push_back(r.name);
    return t;
}

inline double mixture_sum(const std::vector<Factor>& factors, const Settings& s) {
    double sum = 0.0;
    for (std::size_t i = 0; i < factors.size(); ++i)
        if (factors[i].role == FactorRole::mixture) sum += s[i];
    return sum;
}

inline bool within_bounds(const Factor& f, double v, double tol = 1e-9) {
    if (f.numeric()) return v >= f.low - tol && v <= f.high + tol;
    return v >= 0.0 && v < static_cast<double>(f.levels.size()) && v == std::floor(v);
}

/// Table invariants. Rows flagged for exclusion are exempt from the bound
/// checks since out-of-range benchmarks are allowed in that state.
inline ValidationReport validate_table(const DataTable& t) {
    ValidationReport out;
    std::set<std::string> ids;
    bool has_mix = std::any_of(t.factors.begin(), t.factors.end(),
                               [](const Factor& f) { return f.role == FactorRole::mixture; });
    for (const auto& r : t.rows) {
        if (!ids.insert(r.run_id).second) out.push_back({r.run_id, "duplicate run id"});
        if (r.factors.size() != t.factors.size() || r.values.size() != t.columns.size()) {
            out.push_back({r.run_id, "row width does not match schema"});
            continue;
        }
        if (r.exclude) continue;
        if (has_mix && std::fabs(mixture_sum(t.factors, r.factors) - 1.0) > 1e-6)
            out.push_back({r.run_id, "mixture components do not sum to 1"});
        for (std::size_t i = 0; i < t.factors.size(); ++i)
            if (!within_bounds(t.factors[i], r.factors[i]))
                out.push_back({r.run_id, "factor '" + t.factors[i].name + "' out of bounds"});
    }
    return out;
}

/// Per-row mean of the named columns, ignoring missing cells. A row with every
/// cell missing gets a missing mean.
inline DataTable average_assay_columns(DataTable table, const std::vector<std::string>& cols,
                                       const std::string& out) {
    std::vector<std::size_t> idx;
    for (const auto& c : cols) idx.push_back(table.column_index(c));
    std::size_t oi = table.add_column(out);
    for (auto& r : table.rows) {
        double sum = 0.0;
        std::size_t n = 0;
        for (auto i : idx)
            if (r.values[i]) { sum += *r.values[i]; ++n; }
        r.values[oi] = n ? std::optional<double>(sum / static_cast<double>(n)) : std::nullopt;
    }
    return table;
}

/// Stack tables that share a factor schema. Factor bounds widen to the union
/// of the input ranges and categorical levels to the union of level sets.
inline DataTable concat_experiments(const std::vector<DataTable>& tables, const std::string& source_column,
                                    std::vector<std::string> labels = {}) {
    if (tables.empty()) throw ValidationError("concat_experiments: no tables");
    if (labels.empty())
        for (std::size_t i = 0; i < tables.size(); ++i) labels.push_back(std::to_string(i + 1));
    if (labels.size() != tables.size()) throw ValidationError("concat_experiments: one label per table required");

    DataTable out;
    out.factors = tables.front().factors;
    out.source_column = source_column;
    for (const auto& t : tables) {
        if (t.factors.size() != out.factors.size())
            throw ValidationError("concat_experiments: incompatible factor schemas");
        for (const auto& f : t.factors) {
            auto it = std::find_if(out.factors.begin(), out.factors.end(),
                                   [&](const Factor& g) { return g.name == f.name; });
            if (it == out.factors.end() || it->role != f.role)
                throw ValidationError("concat_experiments: incompatible factor schemas ('" + f.name + "')");
            if (f.numeric()) {
                it->low = std::min(it->low, f.low);
                it->high = std::max(it->high, f.high);
            } else {
                for (const auto& l : f.levels)
                    if (std::find(it->levels.begin(), it->levels.end(), l) == it->levels.end())
                        it->levels.push_back(l);
            }
        }
        for (const auto& c : t.columns)
            if (std::find(out.columns.begin(), out.columns.end(), c) == out.columns.end()) out.columns.push_back(c);
    }

    std::set<std::string> used;
    for (std::size_t ti = 0; ti < tables.size(); ++ti) {
        const auto& t = tables[ti];
        for (const auto& r : t.rows) {
            DataRow nr;
            nr.notes = r.notes;
            nr.exclude = r.exclude;
            nr.source = labels[ti];
            nr.factors.resize(out.factors.size());
            for (std::size_t i = 0; i < t.factors.size(); ++i) {
                std::size_t oi = out.factor_index(t.factors[i].name);
                const auto& of = out.factors[oi];
                nr.factors[oi] = of.numeric() ? r.factors[i]
                                              : static_cast<double>(of.level_index(
                                                    t.factors[i].levels[static_cast<std::size_t>(r.factors[i])]));
            }
            nr.values.resize(out.columns.size());
            for (std::size_t c = 0; c < t.columns.size(); ++c) nr.values[out.column_index(t.columns[c])] = r.values[c];
            nr.run_id = r.run_id;
            for (int k = 2; used.count(nr.run_id); ++k) nr.run_id = r.run_id + "-" + std::to_string(k);
            used.insert(nr.run_id);
            out.rows.push_back(std::move(nr));
        }
    }
    return out;
}

inline DataTable filter_by_source(const DataTable& t, const std::string& label) {
    DataTable out = t;
    out.rows.clear();
    for (const auto& r : t.rows)
        if (r.source == label) out.rows.push_back(r);
    return out;
}

// ---------------------------------------------------------------------------
// Benchmark shift check

struct ShiftEntry {
    std::string response;
    double old_value = kNaN;
    double new_value = kNaN;
    double delta = kNaN;
    double noise = kNaN;  // replicate-based standard deviation
    double ratio = kNaN;  // |delta| / noise
    bool flagged = false;
};

struct ShiftMatch {
    std::vector<std::string> old_runs;
    std::string new_run;
    std::vector<ShiftEntry> entries;
};

struct ShiftReport {
    std::vector<ShiftMatch> matches;
    bool any_flagged() const {
        for (const auto& m : matches)
            for (const auto& e : m.entries)
                if (e.flagged) return true;
        return false;
    }
};

namespace detail {
inline bool same_recipe(const std::vector<Factor>& fa, const Settings& a, const std::vector<Factor>& fb,
                        const Settings& b, const std::vector<double>& tol) {
    for (std::size_t i = 0; i < fa.size(); ++i) {
        std::size_t j = 0;
        while (j < fb.size() && fb[j].name != fa[i].name) ++j;
        if (j == fb.size()) return false;
        if (fa[i].numeric()) {
            if (std::fabs(a[i] - b[j]) > tol[i] + 1e-12) return false;
        } else if (fa[i].levels[static_cast<std::size_t>(a[i])] != fb[j].levels[static_cast<std::size_t>(b[j])]) {
            return false;
        }
    }
    return true;
}
} // namespace detail

/// Pooled standard deviation of replicate groups (rows with matching settings).
inline std::optional<double> replicate_noise(const DataTable& t, std::size_t column, const std::vector<double>& tol) {
    std::vector<bool> seen(t.rows.size(), false);
    double ss = 0.0;
    std::size_t df = 0;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        if (seen[i] || !t.rows[i].values[column]) continue;
        std::vector<double> group{*t.rows[i].values[column]};
        for (std::size_t j = i + 1; j < t.rows.size(); ++j) {
            if (seen[j] || !t.rows[j].values[column]) continue;
            if (detail::same_recipe(t.factors, t.rows[i].factors, t.factors, t.rows[j].factors, tol)) {
                group.push_back(*t.rows[j].values[column]);
                seen[j] = true;
            }
        }
        if (group.size() < 2) continue;
        double mean = std::accumulate(group.begin(), group.end(), 0.0) / static_cast<double>(group.size());
        for (double v : group) ss += (v - mean) * (v - mean);
        df += group.size() - 1;
    }
    if (df == 0) return std::nullopt;
    return std::sqrt(ss / static_cast<double>(df));
}

/// Compare readouts of recipes repeated between two batches. Tolerance defaults
/// to one granularity step per factor. `noise_override` supplies a noise
/// estimate per response when the tables hold no replicates.
inline ShiftReport benchmark_shift_check(const DataTable& old_t, const DataTable& new_t,
                                         std::vector<double> tolerance = {},
                                         const std::map<std::string, double>& noise_override = {}) {
    if (tolerance.empty())
        for (const auto& f : old_t.factors) tolerance.push_back(f.numeric() ? f.granularity : 0.0);
    ShiftReport report;
    std::vector<std::string> shared;
    for (const auto& c : old_t.columns)
        if (new_t.has_column(c)) shared.push_back(c);

    std::map<std::string, std::optional<double>> noise;
    for (const auto& c : shared) {
        if (auto it = noise_override.find(c); it != noise_override.end()) {
            noise[c] = it->second;
            continue;
        }
        auto a = replicate_noise(old_t, old_t.column_index(c), tolerance);
        noise[c] = a ? a : replicate_noise(new_t, new_t.column_index(c), tolerance);
    }

    for (const auto& nr : new_t.rows) {
        ShiftMatch m;
        m.new_run = nr.run_id;
        std::vector<const DataRow*> olds;
        for (const auto& orow : old_t.rows)
            if (detail::same_recipe(old_t.factors, orow.factors, new_t.factors, nr.factors, tolerance)) {
                olds.push_back(&orow);
                m.old_runs.push_back(orow.run_id);
            }
        if (olds.empty()) continue;
        for (const auto& c : shared) {
            ShiftEntry e;
            e.response = c;
            std::size_t oc = old_t.column_index(c), nc = new_t.column_index(c);
            double sum = 0.0;
            std::size_t n = 0;
            for (auto* o : olds)
                if (o->values[oc]) { sum += *o->values[oc]; ++n; }
            if (n == 0 || !nr.values[nc]) continue;
            e.old_value = sum / static_cast<double>(n);
            e.new_value = *nr.values[nc];
            e.delta = e.new_value - e.old_value;
            if (noise[c]) {
                e.noise = *noise[c];
                e.ratio = e.noise > 0.0 ? std::fabs(e.delta) / e.noise : (e.delta == 0.0 ? 0.0 : kInf);
                e.flagged = std::fabs(e.delta) > 3.0 * e.noise;
            }
            m.entries.push_back(e);
        }
        report.matches.push_back(std::move(m));
    }
    if (report.matches.empty()) throw NotFound("benchmark_shift_check: no matched recipes between the tables");
    return report;
}

} // namespace formix
