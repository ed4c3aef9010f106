#pragma once

// Simulation benchmark: known truth functions over the worked study, noisy
// space-filling experiments, fitted models scored by the true desirability
// of the candidate they nominate.

#include "formix/core.hpp"
#include "formix/design.hpp"
#include "formix/presets.hpp"
#include "formix/profiler.hpp"
#include "formix/svem.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace formix::sim {

struct TruthResponse {
    std::string name;
    std::function<double(const Settings&)> f;
    double sigma = 0.0;
    DesirabilitySpec spec;
};

struct GeneratingFunction {
    StudyDefinition study;
    std::vector<TruthResponse> responses;
    Settings optimum;
    double optimum_d = 0.0;

    Profile truth_profile() const {
        std::vector<ResponseModel> models;
        std::vector<DesirabilitySpec> specs;
        for (const auto& r : responses) {
            models.push_back({r.name, r.f, "truth"});
            specs.push_back(r.spec);
        }
        return Profile(study, models, specs);
    }

    double true_desirability(const Settings& s) const { return truth_profile().evaluate(s); }
};

namespace detail {

// Lipids rescaled to their own ranges, process factors coded to [-1, 1].
struct Vars {
    double peg, helper, ion, chol, np, flow;
    int type;
};

inline Vars vars(const Settings& s) {
    return {(s[0] - 0.01) / 0.04, (s[1] - 0.1) / 0.5, (s[2] - 0.1) / 0.5, (s[3] - 0.1) / 0.5,
            (s[5] - 10.0) / 4.0, (s[6] - 2.0), static_cast<int>(s[4])};
}

} // namespace detail

/// Potency rises with PEG, falls with ionizable lipid, peaks at a helper
/// fraction near 0.4 and favours H102; N:P acts with PEG and curves, flow
/// acts with helper. Size falls with helper, rises with ionizable lipid and
/// flow, curves in N:P and is smallest for H102.
inline double potency_truth(const Settings& s) {
    auto v = detail::vars(s);
    static constexpr double type_effect[3] = {0.0, 5.0, -3.0};
    return 78.0 + 10.0 * v.peg - 9.0 * v.ion + 4.0 * v.helper - 14.0 * (v.helper - 0.6) * (v.helper - 0.6) +
           type_effect[v.type] + 2.5 * v.np - 3.0 * v.np * v.np + 3.0 * v.np * v.peg + 2.0 * v.flow * (v.helper - 0.4) -
           1.5 * v.flow * v.flow;
}

inline double size_truth(const Settings& s) {
    auto v = detail::vars(s);
    static constexpr double type_effect[3] = {0.0, -4.0, 3.0};
    return 95.0 - 24.0 * v.helper + 14.0 * v.ion + 5.0 * v.flow - 3.0 * v.np + 6.0 * v.np * v.np + 6.0 * v.flow * v.ion +
           type_effect[v.type];
}

/// Builtin Potency/Size truth pair over the worked study. Noise SDs 2.5 and
/// 4.0 make a replicated pair differ by about 6.5% of each response's range
/// over the region on average; the optimum of the true
/// desirability (Potency weight 1, Size weight 0.2) is found by a long
/// multi-start search without rounding.
inline GeneratingFunction builtin_generators(std::uint64_t seed = 2022) {
    GeneratingFunction g;
    g.study = presets::lnp_study();
    g.responses = {
        {"Potency", potency_truth, 2.5, {"Potency", Goal::maximize, 40.0, 120.0, kNaN, 1.0}},
        {"Size", size_truth, 4.0, {"Size", Goal::minimize, 40.0, 150.0, kNaN, 0.2}},
    };
    OptimizeOptions opt;
    opt.starts = 20000;
    opt.refine = 40;
    opt.min_step = 1e-9;
    opt.round = false;
    auto best = maximize_desirability(g.truth_profile(), {}, seed, opt, "truth optimum");
    g.optimum = best.settings;
    g.optimum_d = best.desirability;
    return g;
}

/// Max of the true desirability over a dense grid (lipid steps of 1%, PEG in
/// 0.5% steps, 9 levels per process factor, every lipid type).
inline std::pair<Settings, double> dense_grid_optimum(const GeneratingFunction& g) {
    auto p = g.truth_profile();
    Settings best;
    double bd = -1.0;
    for (int ip = 0; ip <= 8; ++ip)
        for (int ih = 10; ih <= 60; ++ih)
            for (int ii = 10; ii <= 60; ++ii) {
                double peg = 0.01 + 0.005 * ip, h = ih / 100.0, io = ii / 100.0;
                double ch = 1.0 - peg - h - io;
                if (ch < 0.1 - 1e-12 || ch > 0.6 + 1e-12) continue;
                for (int t = 0; t < 3; ++t)
                    for (int a = 0; a <= 8; ++a)
                        for (int b = 0; b <= 8; ++b) {
                            Settings s{peg, h, io, ch, static_cast<double>(t), 6.0 + a, 1.0 + 0.25 * b};
                            double d = p.evaluate(s);
                            if (d > bd) bd = d, best = s;
                        }
            }
    return {best, bd};
}

/// Adds truth plus Gaussian noise (scaled by `noise_scale`) to every row.
inline void simulate_responses(const GeneratingFunction& g, DataTable& t, std::uint64_t seed, double noise_scale = 1.0) {
    Rng rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (const auto& r : g.responses) {
        auto c = t.add_column(r.name);
        for (auto& row : t.rows) {
            double e = nd(rng);
            row.values[c] = r.f(row.factors) + noise_scale * r.sigma * e;
        }
    }
}

/// Rounded space-filling design with simulated responses.
inline DataTable simulate_experiment(const GeneratingFunction& g, std::size_t n, std::uint64_t seed, double noise_scale = 1.0) {
    auto d = round_and_repair(generate_space_filling(g.study, n, seed));
    simulate_responses(g, d.table, derive_seed(seed, std::uint64_t{7}), noise_scale);
    return d.table;
}

struct BenchmarkConfig {
    std::vector<std::size_t> sizes{16, 24, 36};
    std::vector<FitMethod> methods{FitMethod::full, FitMethod::forward_aicc, FitMethod::svem_forward};
    std::size_t replicates = 30;
    double noise_scale = 1.0;
    std::uint64_t seed = 1;
    std::size_t samples = 200;
    OptimizeOptions optimize{};
};

struct SimResult {
    std::size_t size = 0;
    FitMethod method = FitMethod::svem_forward;
    std::size_t replicate = 0;
    bool available = true;
    double percent = kNaN;
    Settings candidate;
};

/// Scores one fitted profile: percent of the true optimum desirability reached
/// by the candidate the fitted models nominate.
inline double percent_of_max(const GeneratingFunction& g, const Settings& candidate) {
    return std::clamp(100.0 * g.true_desirability(candidate) / g.optimum_d, 0.0, 100.0);
}

/// Paired design: every method at a (size, replicate) analyses the same
/// simulated table.
inline std::vector<SimResult> run_benchmark(const GeneratingFunction& g, const BenchmarkConfig& cfg,
                                            const std::function<void(const SimResult&)>& progress = {}) {
    std::vector<SimResult> out;
    std::vector<DesirabilitySpec> specs;
    for (const auto& r : g.responses) specs.push_back(r.spec);
    const auto effects = build_candidate_effects(g.study);
    for (auto n : cfg.sizes)
        for (std::size_t rep = 0; rep < cfg.replicates; ++rep) {
            std::uint64_t cell = derive_seed(cfg.seed, std::vector<std::uint64_t>{n, rep});
            auto table = simulate_experiment(g, n, cell, cfg.noise_scale);
            for (auto method : cfg.methods) {
                SimResult res{n, method, rep, true, kNaN, {}};
                try {
                    std::vector<ResponseModel> models;
                    for (const auto& r : g.responses) {
                        FitOptions fo;
                        fo.method = method;
                        fo.samples = cfg.samples;
                        fo.seed = derive_seed(cell, std::uint64_t{11});
                        auto m = std::make_shared<const EnsembleModel>(fit_response(g.study.factors, effects, table, r.name, fo));
                        models.push_back(as_response_model(m));
                    }
                    Profile p(g.study, models, specs);
                    auto cand = maximize_desirability(p, {}, derive_seed(cell, std::uint64_t{13}), cfg.optimize);
                    res.candidate = cand.settings;
                    res.percent = percent_of_max(g, cand.settings);
                } catch (const DomainError&) {
                    if (method != FitMethod::full) throw;
                    res.available = false;
                }
                if (progress) progress(res);
                out.push_back(std::move(res));
            }
        }
    return out;
}

struct CellSummary {
    std::size_t size = 0;
    FitMethod method = FitMethod::svem_forward;
    std::size_t count = 0;
    bool available = false;
    double mean = kNaN;
    double sd = kNaN;
    double ci_half_width = kNaN;  // 95% t interval
};

struct PairedTest {
    std::size_t size = 0;
    FitMethod better;  // hypothesised better method
    FitMethod worse;
    std::size_t pairs = 0;
    double mean_difference = kNaN;
    double t = kNaN;
    double p_greater = kNaN;  // one-sided p for better > worse
    double p_less = kNaN;     // one-sided p for better < worse
};

struct BenchmarkSummary {
    std::vector<CellSummary> cells;
    std::vector<PairedTest> tests;
};

inline PairedTest paired_test(std::size_t size, FitMethod better, FitMethod worse, const std::vector<double>& a,
                              const std::vector<double>& b) {
    PairedTest t{size, better, worse, a.size()};
    const double n = static_cast<double>(a.size());
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m += a[i] - b[i];
    m /= n;
    double ss = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) ss += (a[i] - b[i] - m) * (a[i] - b[i] - m);
    t.mean_difference = m;
    double se = std::sqrt(ss / (n - 1.0) / n);
    if (se == 0.0) {
        t.t = m == 0.0 ? 0.0 : std::copysign(kInf, m);
        t.p_greater = m > 0.0 ? 0.0 : (m == 0.0 ? 0.5 : 1.0);
        t.p_less = m < 0.0 ? 0.0 : (m == 0.0 ? 0.5 : 1.0);
        return t;
    }
    t.t = m / se;
    boost::math::students_t dist(n - 1.0);
    t.p_greater = boost::math::cdf(boost::math::complement(dist, t.t));
    t.p_less = boost::math::cdf(dist, t.t);
    return t;
}

/// Per-cell means with 95% intervals and one-sided paired tests for the
/// orderings svem-forward over forward-aicc, forward-aicc over full and
/// svem-forward over full at each size where both are available.
inline BenchmarkSummary summarize_benchmark(const std::vector<SimResult>& results) {
    BenchmarkSummary s;
    std::map<std::pair<std::size_t, int>, std::map<std::size_t, double>> by_cell;
    std::map<std::pair<std::size_t, int>, std::size_t> seen;
    for (const auto& r : results) {
        auto key = std::make_pair(r.size, static_cast<int>(r.method));
        ++seen[key];
        if (r.available && std::isfinite(r.percent)) by_cell[key][r.replicate] = r.percent;
    }
    for (const auto& [key, count] : seen) {
        CellSummary c{key.first, static_cast<FitMethod>(key.second), 0, false};
        auto it = by_cell.find(key);
        if (it != by_cell.end() && !it->second.empty()) {
            const auto& v = it->second;
            c.count = v.size();
            c.available = true;
            double m = 0.0;
            for (const auto& [rep, x] : v) m += x;
            m /= static_cast<double>(v.size());
            double ss = 0.0;
            for (const auto& [rep, x] : v) ss += (x - m) * (x - m);
            c.mean = m;
            if (v.size() >= 2) {
                c.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
                boost::math::students_t dist(static_cast<double>(v.size() - 1));
                c.ci_half_width = boost::math::quantile(boost::math::complement(dist, 0.025)) * c.sd /
                                  std::sqrt(static_cast<double>(v.size()));
            }
        }
        s.cells.push_back(c);
    }
    const std::pair<FitMethod, FitMethod> orders[] = {{FitMethod::svem_forward, FitMethod::forward_aicc},
                                                      {FitMethod::forward_aicc, FitMethod::full},
                                                      {FitMethod::svem_forward, FitMethod::full}};
    std::vector<std::size_t> sizes;
    for (const auto& c : s.cells)
        if (std::find(sizes.begin(), sizes.end(), c.size) == sizes.end()) sizes.push_back(c.size);
    for (auto n : sizes)
        for (auto [hi, lo] : orders) {
            auto a = by_cell.find({n, static_cast<int>(hi)}), b = by_cell.find({n, static_cast<int>(lo)});
            if (a == by_cell.end() || b == by_cell.end()) continue;
            std::vector<double> xa, xb;
            for (const auto& [rep, x] : a->second) {
                auto j = b->second.find(rep);
                if (j == b->second.end()) continue;
                xa.push_back(x);
                xb.push_back(j->second);
            }
            if (xa.size() >= 2) s.tests.push_back(paired_test(n, hi, lo, xa, xb));
        }
    return s;
}

} // namespace formix::sim
