#pragma once

// Archive-level steps shared by the command line and the HTTP service.

#include "formix/archive.hpp"
#include "formix/presets.hpp"
#include "formix/sim.hpp"

#include <map>
#include <memory>

namespace formix::workflow {

/// Which models and desirability settings a profiler call uses. Weights and
/// anchors override the study importance and the observed-range anchors.
struct ProfileRequest {
    std::string set;
    std::map<std::string, double> weights;
    std::map<std::string, std::pair<double, double>> anchors;
};

/// "name=value" split at the last '='.
inline std::pair<std::string, std::string> split_assignment(const std::string& s) {
    auto eq = s.rfind('=');
    if (eq == std::string::npos || eq == 0) throw ValidationError("expected name=value, got '" + s + "'");
    return {s.substr(0, eq), s.substr(eq + 1)};
}

inline Locks parse_locks(const StudyDefinition& def, const std::map<std::string, std::string>& named) {
    Locks locks(def.factors.size());
    for (const auto& [name, value] : named) {
        auto i = def.factor_index(name);
        const auto& f = def.factors[i];
        if (f.role == FactorRole::blocking) throw ValidationError("blocking factor '" + name + "' cannot be locked");
        locks[i] = f.discrete() ? static_cast<double>(f.level_index(value)) : io::parse_number(value, "lock " + name);
    }
    return locks;
}

inline Locks parse_locks(const StudyDefinition& def, const std::vector<std::string>& assignments) {
    std::map<std::string, std::string> named;
    for (const auto& a : assignments) named.insert(split_assignment(a));
    return parse_locks(def, named);
}

inline std::map<std::string, double> parse_weights(const std::vector<std::string>& assignments) {
    std::map<std::string, double> out;
    for (const auto& a : assignments) {
        auto [k, v] = split_assignment(a);
        out[k] = io::parse_number(v, "weight " + k);
    }
    return out;
}

/// Full settings from "name=value" assignments; every factor must be given.
inline Settings parse_settings(const StudyDefinition& def, const std::vector<std::string>& assignments) {
    Settings s(def.factors.size(), kNaN);
    for (const auto& a : assignments) {
        auto [name, value] = split_assignment(a);
        auto i = def.factor_index(name);
        const auto& f = def.factors[i];
        s[i] = f.discrete() ? static_cast<double>(f.level_index(value)) : io::parse_number(value, "setting " + name);
    }
    for (std::size_t i = 0; i < s.size(); ++i)
        if (std::isnan(s[i])) throw ValidationError("no value for factor '" + def.factors[i].name + "'");
    return s;
}

struct DesignRequest {
    std::size_t n = 0;  // 0 uses the minimum run heuristic
    std::uint64_t seed = 1;
    std::size_t oversample = 50;
    std::vector<BenchmarkRun> benchmarks;
    bool randomize = true;
};

/// Space-filling design, rounded to granularity, with benchmark rows, in
/// randomized run order; saved to the archive.
inline Design make_design(Archive& a, const DesignRequest& r) {
    auto def = a.study();
    auto n = r.n ? r.n : min_run_heuristic(def);
    auto d = round_and_repair(generate_space_filling(def, n, r.seed, r.oversample));
    d = add_benchmark_runs(std::move(d), r.benchmarks);
    if (r.randomize) d = randomize_order(std::move(d), derive_seed(r.seed, 0xd0ULL));
    a.put_design(d);
    return d;
}

/// Data rows of an archive, or its design when no data was recorded.
inline DataTable runs_of(const Archive& a) { return a.has_data() ? a.data() : a.design(); }

/// Follow-up design over this archive's study, reusing up to `anchors` runs
/// of the prior archive that fall inside the new region.
inline Design augment_design(Archive& a, const Archive& prior, std::size_t n, std::size_t anchors,
                             std::uint64_t seed, std::size_t oversample = 50) {
    auto d = augment_followup(runs_of(prior), a.study(), n, anchors, seed, oversample);
    a.put_design(d);
    return d;
}

/// Stacks the runs of several archives into this one. The study takes the
/// first archive's responses and the widened factor ranges.
inline DataTable concat_archives(Archive& a, const std::vector<Archive>& from, const std::string& source_column,
                                 const std::vector<std::string>& labels) {
    if (from.empty()) throw ValidationError("nothing to concatenate");
    std::vector<DataTable> tables;
    for (const auto& f : from) tables.push_back(runs_of(f));
    auto t = io::canonical(concat_experiments(tables, source_column, labels));
    auto def = from.front().study();
    def.factors = t.factors;
    a.put_study(def);
    a.put_data(t, "concat");
    return t;
}

inline DataTable average_columns(Archive& a, const std::vector<std::string>& columns, const std::string& into) {
    auto t = io::canonical(average_assay_columns(a.data(), columns, into));
    a.put_data(t, "average " + into);
    return t;
}

/// Desirability specs from the study and the data, with overrides applied.
inline std::vector<DesirabilitySpec> desirability_specs(const StudyDefinition& def, const DataTable& data,
                                                        const ProfileRequest& req) {
    auto specs = default_desirability(def, data);
    for (const auto& [name, w] : req.weights) {
        auto it = std::find_if(specs.begin(), specs.end(), [&](const DesirabilitySpec& s) { return s.response == name; });
        if (it == specs.end()) throw ValidationError("no response named '" + name + "'");
        if (w < 0.0) throw ValidationError("importance weights must be non-negative");
        it->importance = w;
    }
    for (const auto& [name, lh] : req.anchors) {
        auto it = std::find_if(specs.begin(), specs.end(), [&](const DesirabilitySpec& s) { return s.response == name; });
        if (it == specs.end()) throw ValidationError("no response named '" + name + "'");
        if (!(lh.first < lh.second)) throw ValidationError("anchors for '" + name + "' need low < high");
        it->low = lh.first;
        it->high = lh.second;
    }
    return specs;
}

/// Profile over the archive's study, data and a model set. Responses without
/// a fitted model predict NaN and must carry no weight.
inline Profile load_profile(const Archive& a, const ProfileRequest& req) {
    auto def = a.study();
    auto data = a.data();
    auto specs = desirability_specs(def, data, req);
    std::vector<ResponseModel> models;
    for (const auto& s : specs) {
        if (a.has_model(req.set, s.response)) {
            models.push_back(as_response_model(std::make_shared<const EnsembleModel>(a.model(req.set, s.response))));
        } else {
            if (s.goal != Goal::none && s.importance > 0.0)
                throw NotFound("no fitted model for '" + s.response + "'" + (req.set.empty() ? "" : " in set '" + req.set + "'"));
            models.push_back({s.response, [](const Settings&) { return kNaN; }, ""});
        }
    }
    return Profile(def, models, specs);
}

/// Fits each named response (every study response with data when empty),
/// using the study transform unless `opt.transform` is forced by the caller.
inline std::vector<EnsembleModel> fit_models(Archive& a, std::vector<std::string> responses, FitOptions opt,
                                             const std::string& set, bool use_study_transform = true) {
    Archive::check_set_name(set);
    auto def = a.study();
    auto data = a.data();
    if (responses.empty())
        for (const auto& r : def.responses)
            if (data.has_column(r.name)) responses.push_back(r.name);
    if (responses.empty()) throw ValidationError("no responses to fit");
    auto effects = build_candidate_effects(def);
    std::vector<EnsembleModel> out;
    for (const auto& name : responses) {
        auto o = opt;
        if (use_study_transform)
            for (const auto& r : def.responses)
                if (r.name == name) o.transform = r.transform;
        out.push_back(fit_response(data.factors, effects, data, name, o));
    }
    a.put_models(set, out);
    return out;
}

inline CandidateRecipe optimize(const Archive& a, const ProfileRequest& req, const Locks& locks, std::uint64_t seed,
                                const OptimizeOptions& opt, const std::string& label) {
    auto p = load_profile(a, req);
    return maximize_desirability(p, locks, seed, opt, label);
}

inline CandidateRecipe remember(Archive& a, CandidateRecipe c, const std::string& label) {
    auto store = a.candidates();
    remember_setting(store, std::move(c), label);
    a.put_candidates(store, "remember " + label);
    return store.items.back();
}

/// Remembered settings, then benchmark rows of the data (notes starting with
/// "benchmark"), then the best observed run; predictions from `req`'s models.
inline CandidateTable candidate_table(const Archive& a, const ProfileRequest& req, std::size_t replicates = 1) {
    auto def = a.study();
    auto data = a.data();
    auto p = load_profile(a, req);
    std::vector<CandidateRecipe> benchmarks;
    for (const auto& r : data.rows) {
        std::string lower = r.notes;
        std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
        if (lower.rfind("benchmark", 0) != 0) continue;
        bool seen = false;
        for (const auto& b : benchmarks) seen = seen || b.settings == r.factors || b.label == r.notes;
        if (seen) continue;
        auto c = make_recipe(p, r.notes, r.factors);
        c.model_tag.clear();
        benchmarks.push_back(std::move(c));
    }
    std::vector<CandidateRecipe> prior;
    for (auto& b : best_observed_runs(data, p.specs(), 1)) {
        auto c = make_recipe(p, b.label, b.settings);
        c.model_tag.clear();
        prior.push_back(std::move(c));
    }
    return export_candidates(a.candidates(), benchmarks, prior, def.factors, Archive::response_names(def), replicates);
}

/// Middle of the design space: mixture midpoints projected onto the slab,
/// continuous midpoints, first categorical level.
inline Settings center_settings(const StudyDefinition& def) {
    Settings s(def.factors.size(), 0.0);
    std::vector<std::size_t> mix;
    std::vector<double> x, lo, hi;
    for (std::size_t i = 0; i < def.factors.size(); ++i) {
        const auto& f = def.factors[i];
        if (f.role == FactorRole::mixture) {
            mix.push_back(i);
            x.push_back(0.5 * (f.low + f.high));
            lo.push_back(f.low);
            hi.push_back(f.high);
        } else if (f.role == FactorRole::continuous) {
            s[i] = 0.5 * (f.low + f.high);
        } else if (f.role == FactorRole::blocking) {
            s[i] = static_cast<double>(f.levels.size() - 1);
        }
    }
    if (!mix.empty()) {
        auto p = slab::project(x, lo, hi, 1.0);
        if (!p) throw DomainError("the mixture region is empty");
        for (std::size_t k = 0; k < mix.size(); ++k) s[mix[k]] = (*p)[k];
    }
    return s;
}

inline Trace trace(const Archive& a, const ProfileRequest& req, const std::string& factor, const io::Json& at,
                   std::size_t grid) {
    auto p = load_profile(a, req);
    const auto& def = p.study();
    auto base = io::settings_from_json(def.factors, at, center_settings(def));
    return profiler_trace(p, base, def.factor_index(factor), grid);
}

/// Builtin truth functions, available when the study has the worked factors.
inline const sim::GeneratingFunction& builtin_truth(const StudyDefinition& def) {
    static const sim::GeneratingFunction g = sim::builtin_generators();
    if (def.factors.size() != g.study.factors.size())
        throw ValidationError("builtin truth functions need the worked study's factors");
    for (std::size_t i = 0; i < def.factors.size(); ++i)
        if (def.factors[i].name != g.study.factors[i].name || def.factors[i].role != g.study.factors[i].role)
            throw ValidationError("builtin truth functions need the worked study's factors");
    return g;
}

/// Design rows with simulated Potency and Size from the builtin truth.
inline DataTable simulate_data(const Archive& a, std::uint64_t seed, double noise_scale) {
    auto def = a.study();
    const auto& g = builtin_truth(def);
    auto t = a.design();
    for (const auto& r : g.responses) {
        if (!t.has_column(r.name)) continue;
        auto c = t.column_index(r.name);
        t.columns.erase(t.columns.begin() + static_cast<long>(c));
        for (auto& row : t.rows) row.values.erase(row.values.begin() + static_cast<long>(c));
    }
    sim::simulate_responses(g, t, seed, noise_scale);
    for (const auto& r : def.responses)
        if (!t.has_column(r.name)) t.add_column(r.name);
    return io::canonical(t);
}

inline io::TruthColumns truth_columns(const StudyDefinition& def) {
    const auto& g = builtin_truth(def);
    io::TruthColumns out;
    for (const auto& r : g.responses) out.push_back({r.name, r.f});
    return out;
}

} // namespace formix::workflow
