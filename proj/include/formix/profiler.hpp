#pragma once

// Desirability, response traces, constrained desirability maximization,
// remembered settings and random prediction tables.

#include "formix/core.hpp"
#include "formix/design.hpp"
#include "formix/slab.hpp"
#include "formix/study.hpp"
#include "formix/svem.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace formix {

struct DesirabilitySpec {
    std::string response;
    Goal goal = Goal::maximize;
    double low = 0.0;
    double high = 1.0;
    double target = kNaN;
    double importance = 1.0;
};

/// Linear ramps for maximize and minimize, a triangle peaking at the target.
inline double desirability(double v, const DesirabilitySpec& s) {
    if (!(s.low < s.high)) throw ValidationError("desirability anchors for '" + s.response + "' need low < high");
    switch (s.goal) {
    case Goal::maximize: return std::clamp((v - s.low) / (s.high - s.low), 0.0, 1.0);
    case Goal::minimize: return std::clamp((s.high - v) / (s.high - s.low), 0.0, 1.0);
    case Goal::target: {
        if (!(s.target > s.low && s.target < s.high))
            throw ValidationError("target for '" + s.response + "' must lie strictly between the anchors");
        if (v <= s.low || v >= s.high) return 0.0;
        return v <= s.target ? (v - s.low) / (s.target - s.low) : (s.high - v) / (s.high - s.target);
    }
    case Goal::none: return 1.0;
    }
    return 0.0;
}

/// Weighted geometric mean exp(sum w ln d / sum w); entries with zero weight
/// are ignored.
inline double overall_desirability(const std::vector<double>& d, const std::vector<double>& w) {
    if (d.size() != w.size()) throw ValidationError("desirability and weight vectors differ in length");
    double sw = 0.0, acc = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (w[i] < 0.0) throw ValidationError("importance weights must be non-negative");
        if (w[i] == 0.0) continue;
        if (!(d[i] >= 0.0 && d[i] <= 1.0)) throw ValidationError("desirability values must lie in [0, 1]");
        if (d[i] == 0.0) return 0.0;
        sw += w[i];
        acc += w[i] * std::log(d[i]);
    }
    if (!(sw > 0.0)) throw ValidationError("at least one importance weight must be positive");
    return std::exp(acc / sw);
}

/// A response predictor over natural factor settings.
struct ResponseModel {
    std::string name;
    std::function<double(const Settings&)> predict;
    std::string tag;
};

inline ResponseModel as_response_model(std::shared_ptr<const EnsembleModel> m) {
    std::string name = m->response, tag = to_string(m->method);
    return {name, [m](const Settings& s) { return m->predict(s); }, tag};
}

/// Default anchors: the observed range of each response in the training table.
inline std::vector<DesirabilitySpec> default_desirability(const StudyDefinition& def, const DataTable& table) {
    std::vector<DesirabilitySpec> out;
    for (const auto& r : def.responses) {
        DesirabilitySpec s{r.name, r.goal, kInf, -kInf, r.target, r.importance};
        if (table.has_column(r.name)) {
            auto c = table.column_index(r.name);
            for (const auto& row : table.rows)
                if (row.values[c] && !row.exclude) {
                    s.low = std::min(s.low, *row.values[c]);
                    s.high = std::max(s.high, *row.values[c]);
                }
        }
        if (!(s.low < s.high)) throw ValidationError("response '" + r.name + "' needs at least two distinct observations to set desirability anchors");
        out.push_back(s);
    }
    return out;
}

/// Models paired with desirability specs; predictions and D at a point.
class Profile {
public:
    Profile(StudyDefinition def, std::vector<ResponseModel> models, std::vector<DesirabilitySpec> specs)
        : def_(std::move(def)), models_(std::move(models)), specs_(std::move(specs)) {
        for (const auto& s : specs_) {
            if (s.goal == Goal::none || s.importance == 0.0) continue;
            if (s.importance < 0.0) throw ValidationError("importance weights must be non-negative");
            bool found = false;
            for (const auto& m : models_) found = found || m.name == s.response;
            if (!found) throw ValidationError("no fitted model for response '" + s.response + "'");
            active_ = true;
        }
        if (!active_) throw ValidationError("at least one response needs a goal other than none and a positive weight");
    }

    const StudyDefinition& study() const { return def_; }
    const std::vector<ResponseModel>& models() const { return models_; }
    const std::vector<DesirabilitySpec>& specs() const { return specs_; }

    std::vector<double> predict(const Settings& s) const {
        std::vector<double> out(models_.size());
        for (std::size_t i = 0; i < models_.size(); ++i) out[i] = models_[i].predict(s);
        return out;
    }

    double overall(const std::vector<double>& preds) const {
        std::vector<double> d, w;
        for (const auto& s : specs_) {
            if (s.goal == Goal::none || s.importance == 0.0) continue;
            d.push_back(desirability(preds[model_index(s.response)], s));
            w.push_back(s.importance);
        }
        return overall_desirability(d, w);
    }

    double evaluate(const Settings& s) const { return overall(predict(s)); }

    std::size_t model_index(const std::string& name) const {
        for (std::size_t i = 0; i < models_.size(); ++i)
            if (models_[i].name == name) return i;
        throw NotFound("no model for response '" + name + "'");
    }

    std::string tag() const {
        std::string t;
        for (const auto& m : models_)
            if (t.find(m.tag) == std::string::npos) t += (t.empty() ? "" : "+") + m.tag;
        return t;
    }

private:
    StudyDefinition def_;
    std::vector<ResponseModel> models_;
    std::vector<DesirabilitySpec> specs_;
    bool active_ = false;
};

// ---------------------------------------------------------------- traces

struct Trace {
    std::string factor;
    std::vector<double> grid;
    std::vector<std::string> labels;  // level labels for discrete sweeps
    std::vector<std::pair<std::string, std::vector<double>>> responses;
    std::vector<double> desirability;
    std::vector<bool> feasible;
};

/// Sets mixture component `i` to `v` and rescales the other components
/// proportionally to fill the rest, clipping and redistributing at bounds.
inline std::optional<Settings> set_mixture_component(const std::vector<Factor>& fs, Settings s, std::size_t i, double v) {
    std::vector<std::size_t> others;
    std::vector<double> x, lo, hi;
    for (std::size_t j = 0; j < fs.size(); ++j)
        if (fs[j].role == FactorRole::mixture && j != i) {
            others.push_back(j);
            x.push_back(s[j]);
            lo.push_back(fs[j].low);
            hi.push_back(fs[j].high);
        }
    s[i] = v;
    auto r = slab::project(x, lo, hi, 1.0 - v);
    if (!r) return std::nullopt;
    for (std::size_t k = 0; k < others.size(); ++k) s[others[k]] = (*r)[k];
    if (std::fabs(mixture_sum(fs, s) - 1.0) > 1e-9) return std::nullopt;
    return s;
}

inline Trace profiler_trace(const Profile& profile, const Settings& base, std::size_t factor, std::size_t grid_size = 41) {
    const auto& fs = profile.study().factors;
    if (factor >= fs.size()) throw NotFound("no factor with index " + std::to_string(factor));
    for (std::size_t i = 0; i < fs.size(); ++i)
        if (!within_bounds(fs[i], base[i], 1e-9)) throw DomainError("base settings are outside the factor bounds");
    const auto& f = fs[factor];
    Trace t;
    t.factor = f.name;
    if (f.discrete()) {
        for (std::size_t l = 0; l < f.levels.size(); ++l) t.grid.push_back(static_cast<double>(l)), t.labels.push_back(f.levels[l]);
    } else {
        if (grid_size < 2) throw ValidationError("trace grid needs at least 2 points");
        for (std::size_t g = 0; g < grid_size; ++g)
            t.grid.push_back(g + 1 == grid_size ? f.high : f.low + f.span() * static_cast<double>(g) / static_cast<double>(grid_size - 1));
    }
    for (const auto& m : profile.models()) t.responses.push_back({m.name, {}});
    for (double v : t.grid) {
        std::optional<Settings> s = base;
        if (f.role == FactorRole::mixture) s = set_mixture_component(fs, base, factor, v);
        else (*s)[factor] = v;
        if (!s) {
            t.feasible.push_back(false);
            for (auto& r : t.responses) r.second.push_back(kNaN);
            t.desirability.push_back(kNaN);
            continue;
        }
        auto preds = profile.predict(*s);
        t.feasible.push_back(true);
        for (std::size_t k = 0; k < preds.size(); ++k) t.responses[k].second.push_back(preds[k]);
        t.desirability.push_back(profile.overall(preds));
    }
    return t;
}

// ---------------------------------------------------------------- optimizer

struct CandidateRecipe {
    std::string label;
    Settings settings;
    std::vector<double> predictions;  // one per profile model
    double desirability = 0.0;
    std::string model_tag;
    std::vector<std::pair<std::string, double>> weights;
};

inline CandidateRecipe make_recipe(const Profile& p, const std::string& label, const Settings& s) {
    CandidateRecipe r{label, s, p.predict(s), 0.0, p.tag(), {}};
    r.desirability = p.overall(r.predictions);
    for (const auto& sp : p.specs()) r.weights.push_back({sp.response, sp.goal == Goal::none ? 0.0 : sp.importance});
    return r;
}

struct OptimizeOptions {
    std::size_t starts = 5000;
    std::size_t refine = 20;
    double initial_step = 0.25;  // fraction of the range
    double min_step = 1e-6;
    bool round = true;  // off returns the refined optimum off the granularity grid
};

namespace detail {

inline void check_locks(const StudyDefinition& def, const Locks& locks) {
    if (locks.empty()) return;
    const auto& fs = def.factors;
    if (locks.size() != fs.size()) throw ValidationError("lock vector width does not match the factors");
    double locked = 0.0, lo = 0.0, hi = 0.0;
    for (std::size_t i = 0; i < fs.size(); ++i) {
        if (locks[i] && !within_bounds(fs[i], *locks[i], 1e-12))
            throw DomainError("lock for '" + fs[i].name + "' is outside its range");
        if (fs[i].role != FactorRole::mixture) continue;
        if (locks[i]) locked += *locks[i];
        else lo += fs[i].low, hi += fs[i].high;
    }
    if (locked + lo > 1.0 + 1e-12 || locked + hi < 1.0 - 1e-12)
        throw DomainError("locked mixture components leave no feasible way to sum to one");
}

/// Opportunistic compass search. Mixture moves exchange mass between two free
/// components (keeping the sum), continuous moves step one coordinate; the
/// step halves when no move improves.
inline Settings pattern_search(const Profile& p, const StudyDefinition& def, Settings x, double& dx,
                               const std::vector<bool>& locked, const OptimizeOptions& opt) {
    const auto& fs = def.factors;
    std::vector<std::size_t> mix, cont;
    double free_mass = 1.0;
    for (std::size_t i = 0; i < fs.size(); ++i) {
        if (fs[i].role == FactorRole::mixture) free_mass -= fs[i].low;
        if (locked[i]) continue;
        if (fs[i].role == FactorRole::mixture) mix.push_back(i);
        if (fs[i].role == FactorRole::continuous) cont.push_back(i);
    }
    double h = opt.initial_step;
    std::size_t polls = 0;
    while (h >= opt.min_step && polls < 200000) {
        bool improved = false;
        for (std::size_t a = 0; a < mix.size(); ++a)
            for (std::size_t b = 0; b < mix.size(); ++b) {
                if (a == b) continue;
                const auto i = mix[a], j = mix[b];
                double d = std::min({h * free_mass, fs[i].high - x[i], x[j] - fs[j].low});
                if (d <= 0.0) continue;
                Settings y = x;
                y[i] += d;
                y[j] -= d;
                ++polls;
                double dy = p.evaluate(y);
                if (dy > dx) x = std::move(y), dx = dy, improved = true;
            }
        for (auto i : cont)
            for (double sign : {1.0, -1.0}) {
                double v = std::clamp(x[i] + sign * h * fs[i].span(), fs[i].low, fs[i].high);
                if (v == x[i]) continue;
                Settings y = x;
                y[i] = v;
                ++polls;
                double dy = p.evaluate(y);
                if (dy > dx) x = std::move(y), dx = dy, improved = true;
            }
        if (!improved) h *= 0.5;
    }
    return x;
}

} // namespace detail

/// Multi-start maximization of the overall desirability. Every level
/// combination of the unlocked categorical factors is searched separately
/// with a sub-seed keyed on the full combination, so a locked search repeats
/// the matching part of the unlocked one exactly. Blocking factors sit at
/// their reference level. The refined candidates are rounded to the factor
/// granularity (locked values frozen) and the best rounded one is returned.
inline CandidateRecipe maximize_desirability(const Profile& p, const Locks& locks_in, std::uint64_t seed,
                                             const OptimizeOptions& opt = {}, const std::string& label = "optimum") {
    const auto& def = p.study();
    const auto& fs = def.factors;
    detail::check_locks(def, locks_in);
    Locks locks = locks_in.empty() ? Locks(fs.size()) : locks_in;
    std::vector<bool> frozen(fs.size());
    for (std::size_t i = 0; i < fs.size(); ++i) frozen[i] = locks[i].has_value();

    std::vector<std::size_t> free_cat;
    for (std::size_t i = 0; i < fs.size(); ++i)
        if (fs[i].role == FactorRole::categorical && !locks[i]) free_cat.push_back(i);
    std::vector<std::vector<std::size_t>> combos{{}};
    for (auto ci : free_cat) {
        std::vector<std::vector<std::size_t>> next;
        for (const auto& c : combos)
            for (std::size_t l = 0; l < fs[ci].levels.size(); ++l) {
                auto e = c;
                e.push_back(l);
                next.push_back(std::move(e));
            }
        combos = std::move(next);
    }

    struct Scored {
        Settings x;
        double d;
    };
    std::vector<Scored> refined;
    for (const auto& combo : combos) {
        Locks full = locks;
        for (std::size_t k = 0; k < free_cat.size(); ++k) full[free_cat[k]] = static_cast<double>(combo[k]);
        std::vector<std::uint64_t> key;
        for (std::size_t i = 0; i < fs.size(); ++i)
            if (fs[i].role == FactorRole::categorical) key.push_back(static_cast<std::uint64_t>(*full[i]));
        Rng rng(derive_seed(seed, key));
        std::vector<Scored> starts;
        starts.reserve(opt.starts);
        for (std::size_t s = 0; s < opt.starts; ++s) {
            auto x = sample_feasible_point(def, rng, full);
            double d = p.evaluate(x);
            starts.push_back({std::move(x), d});
        }
        std::size_t keep = std::min(opt.refine, starts.size());
        std::stable_sort(starts.begin(), starts.end(), [](const Scored& a, const Scored& b) { return a.d > b.d; });
        std::vector<bool> lk(fs.size());
        for (std::size_t i = 0; i < fs.size(); ++i) lk[i] = full[i].has_value() || fs[i].discrete();
        for (std::size_t s = 0; s < keep; ++s) {
            double d = starts[s].d;
            auto x = detail::pattern_search(p, def, starts[s].x, d, lk, opt);
            refined.push_back({std::move(x), d});
        }
    }

    std::optional<Scored> best;
    for (const auto& r : refined) {
        if (!opt.round) {
            if (!best || r.d > best->d) best = r;
            continue;
        }
        auto rounded = round_settings(fs, r.x, {}, frozen);
        if (!rounded) continue;
        double d = p.evaluate(*rounded);
        if (!best || d > best->d) best = Scored{std::move(*rounded), d};
    }
    if (!best) throw DomainError("no refined candidate could be rounded to the factor granularity");
    return make_recipe(p, label, best->x);
}

/// Reruns the optimization for each importance-weight vector (one weight per
/// spec, in spec order), one recipe per grid point.
inline std::vector<CandidateRecipe> weight_sensitivity(const Profile& p, const std::vector<std::vector<double>>& grid,
                                                       const Locks& locks, std::uint64_t seed,
                                                       const OptimizeOptions& opt = {}) {
    std::vector<CandidateRecipe> out;
    for (const auto& w : grid) {
        auto specs = p.specs();
        if (w.size() != specs.size()) throw ValidationError("each weight vector needs one weight per response");
        std::string label = "weights";
        for (std::size_t i = 0; i < specs.size(); ++i) {
            specs[i].importance = w[i];
            char buf[64];
            std::snprintf(buf, sizeof buf, " %s=%g", specs[i].response.c_str(), w[i]);
            label += buf;
        }
        Profile q(p.study(), p.models(), specs);
        out.push_back(maximize_desirability(q, locks, seed, opt, label));
    }
    return out;
}

// ---------------------------------------------------------------- candidates

struct CandidateStore {
    std::vector<CandidateRecipe> items;
};

inline void remember_setting(CandidateStore& store, CandidateRecipe recipe, const std::string& label) {
    for (const auto& r : store.items)
        if (r.label == label) throw ValidationError("a remembered setting is already labelled '" + label + "'");
    recipe.label = label;
    store.items.push_back(std::move(recipe));
}

struct CandidateTable {
    std::vector<Factor> factors;
    std::vector<std::string> responses;
    std::vector<CandidateRecipe> rows;
};

/// Remembered settings, then benchmark controls, then the best prior runs,
/// each repeated `replicates` times.
inline CandidateTable export_candidates(const CandidateStore& store, const std::vector<CandidateRecipe>& benchmarks,
                                        const std::vector<CandidateRecipe>& prior_best, const std::vector<Factor>& factors,
                                        const std::vector<std::string>& responses, std::size_t replicates = 1) {
    CandidateTable t{factors, responses, {}};
    std::vector<std::string> seen;
    for (const auto* group : {&store.items, &benchmarks, &prior_best})
        for (const auto& r : *group) {
            if (std::find(seen.begin(), seen.end(), r.label) != seen.end())
                throw ValidationError("duplicate candidate label '" + r.label + "'");
            seen.push_back(r.label);
            for (std::size_t k = 0; k < std::max<std::size_t>(replicates, 1); ++k) t.rows.push_back(r);
        }
    return t;
}

/// The `count` observed runs with the highest desirability computed from
/// their measured responses; rows missing any active response are skipped.
inline std::vector<CandidateRecipe> best_observed_runs(const DataTable& table, const std::vector<DesirabilitySpec>& specs,
                                                       std::size_t count = 1,
                                                       const std::string& label = "best run from previous experiment") {
    struct Row {
        std::size_t index;
        double d;
        std::vector<double> values;
    };
    std::vector<Row> rows;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        if (row.exclude) continue;
        std::vector<double> dv, w, vals;
        bool ok = true;
        for (const auto& s : specs) {
            if (!table.has_column(s.response)) { ok = false; break; }
            auto v = row.values[table.column_index(s.response)];
            if (!v) { ok = false; break; }
            vals.push_back(*v);
            if (s.goal == Goal::none || s.importance == 0.0) continue;
            dv.push_back(desirability(*v, s));
            w.push_back(s.importance);
        }
        if (ok) rows.push_back({r, overall_desirability(dv, w), std::move(vals)});
    }
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.d > b.d; });
    std::vector<CandidateRecipe> out;
    for (std::size_t k = 0; k < std::min(count, rows.size()); ++k) {
        CandidateRecipe c;
        c.label = count == 1 ? label : label + " " + std::to_string(k + 1);
        c.settings = table.rows[rows[k].index].factors;
        c.predictions = rows[k].values;
        c.desirability = rows[k].d;
        for (const auto& s : specs) c.weights.push_back({s.response, s.goal == Goal::none ? 0.0 : s.importance});
        out.push_back(std::move(c));
    }
    return out;
}

// ---------------------------------------------------------------- random table

struct RandomTable {
    std::vector<Factor> factors;
    std::vector<std::string> responses;
    std::vector<Settings> settings;
    std::vector<std::vector<double>> predictions;
    std::vector<double> desirability;
    std::vector<double> cumulative;
};

/// Midrank cumulative probability (#less + #equal / 2) / n of each value.
inline std::vector<double> midrank_cumulative(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && v[idx[j]] == v[idx[i]]) ++j;
        double c = (static_cast<double>(i) + 0.5 * static_cast<double>(j - i)) / static_cast<double>(n);
        for (std::size_t k = i; k < j; ++k) out[idx[k]] = c;
        i = j;
    }
    return out;
}

inline RandomTable random_table(const Profile& p, std::size_t n = 50000, std::uint64_t seed = 1) {
    RandomTable t;
    t.factors = p.study().factors;
    for (const auto& m : p.models()) t.responses.push_back(m.name);
    Rng rng(seed);
    t.settings.reserve(n);
    t.predictions.reserve(n);
    t.desirability.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto s = sample_feasible_point(p.study(), rng);
        auto preds = p.predict(s);
        t.desirability.push_back(p.overall(preds));
        t.predictions.push_back(std::move(preds));
        t.settings.push_back(std::move(s));
    }
    t.cumulative = midrank_cumulative(t.desirability);
    return t;
}

} // namespace formix
