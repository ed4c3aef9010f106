#pragma once

// Self-validated ensembles: fractional random weights around forward
// selection or the lasso, members averaged on the transformed scale.

#include "formix/core.hpp"
#include "formix/model.hpp"
#include "formix/regression.hpp"
#include "formix/response.hpp"
#include "formix/study.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace formix {

struct WeightPair {
    Eigen::VectorXd train;
    Eigen::VectorXd valid;
    std::uint64_t seed = 0;
};

/// Per row (-ln u, -ln(1-u)) for one u ~ Uniform(0, 1).
inline WeightPair fractional_weights(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    WeightPair wp{Eigen::VectorXd(static_cast<Eigen::Index>(n)), Eigen::VectorXd(static_cast<Eigen::Index>(n)), seed};
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
        double u = uniform_open(rng);
        wp.train(i) = -std::log(u);
        wp.valid(i) = -std::log1p(-u);
    }
    return wp;
}

enum class FitMethod { svem_forward, svem_lasso, forward_aicc, full };

inline std::string to_string(FitMethod m) {
    switch (m) {
    case FitMethod::svem_forward: return "svem-forward";
    case FitMethod::svem_lasso: return "svem-lasso";
    case FitMethod::forward_aicc: return "forward-aicc";
    case FitMethod::full: return "full";
    }
    return "?";
}

inline FitMethod parse_fit_method(const std::string& s) {
    for (auto m : {FitMethod::svem_forward, FitMethod::svem_lasso, FitMethod::forward_aicc, FitMethod::full})
        if (to_string(m) == s) return m;
    throw ValidationError("unknown fit method '" + s + "' (svem-forward, svem-lasso, forward-aicc, full)");
}

enum class MemberScore { validation, aicc };

struct FitOptions {
    FitMethod method = FitMethod::svem_forward;
    std::size_t samples = 200;
    std::uint64_t seed = 1;
    bool force_mixture_mains = false;
    MemberScore member_score = MemberScore::validation;
    bool unit_weights = false;  // replaces the fractional weights by ones
    Transform transform = Transform::identity;
    std::optional<std::size_t> max_terms;  // per-member forward path length, n/2 when empty
};

/// A fitted response model: one member for the classical methods, `samples`
/// members for the ensembles. Predictions average members on the transformed
/// scale and then invert the transform.
class EnsembleModel {
public:
    std::string response;
    FitMethod method = FitMethod::svem_forward;
    Transform transform = Transform::identity;
    std::vector<Factor> factors;
    EffectList effects;
    std::vector<LinearFit> members;
    std::size_t samples = 0;
    std::uint64_t seed = 0;
    std::size_t skipped = 0;
    std::size_t rows = 0;

    /// Must be called after the members are set.
    void finalize() {
        space_ = CodedFactorSpace(factors);
        mean_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(effects.size()));
        for (const auto& m : members) mean_ += m.dense(effects.size());
        if (!members.empty()) mean_ /= static_cast<double>(members.size());
    }

    const CodedFactorSpace& space() const { return space_; }
    const Eigen::VectorXd& mean_coefficients() const { return mean_; }

    Eigen::VectorXd row(const Settings& s) const { return expand(effects, space_.code(s)); }
    double predict_transformed(const Settings& s) const { return mean_.dot(row(s)); }
    double predict(const Settings& s) const { return inverse_transform(predict_transformed(s), transform); }

private:
    CodedFactorSpace space_;
    Eigen::VectorXd mean_;
};

namespace detail {

/// Intercept plus, on request, the mixture mains that are independent of it
/// (with an intercept the mixture mains sum to one, so the last is aliased).
inline std::vector<std::size_t> forced_columns(const EffectList& effects, const DesignMatrix& dm, bool mixture_mains) {
    std::vector<std::size_t> forced{0};
    if (!mixture_mains) return forced;
    IncrementalQR qr(dm.X, dm.y, Eigen::VectorXd::Ones(dm.X.rows()));
    qr.add(0);
    for (auto j : mixture_main_columns(effects))
        if (qr.add(j)) forced.push_back(j);
    return forced;
}

inline LinearFit fit_member(const DesignMatrix& dm, const Eigen::VectorXd& yt, const Eigen::VectorXd& w,
                            const Eigen::VectorXd& v, const std::vector<std::size_t>& forced, FitMethod method,
                            MemberScore ms, std::optional<std::size_t> max_terms) {
    SelectionScore score = ms == MemberScore::aicc ? SelectionScore{AiccScore{}} : SelectionScore{ValidationScore{v}};
    if (method == FitMethod::svem_lasso) return lasso_path(dm.X, yt, w, score, 0).best_fit();
    // every row keeps some validation weight, so the validation SSE falls to
    // zero as the path approaches interpolation; stop well short of it
    auto cap = max_terms.value_or(static_cast<std::size_t>(dm.X.rows()) / 2);
    return forward_path(dm.X, yt, w, score, forced, cap).best_fit();
}

} // namespace detail

/// Fits one response. The ensembles draw member m's weights from
/// derive_seed(seed, m); a failing member is retried once with a fresh
/// sub-seed and then skipped (counted in `skipped`).
inline EnsembleModel fit_response(const std::vector<Factor>& factors, const EffectList& effects, const DataTable& table,
                                  const std::string& response, const FitOptions& opt) {
    if (effects.empty() || effects[0].kind != EffectKind::intercept)
        throw ValidationError("the effect list must start with the intercept");
    EnsembleModel model;
    model.response = response;
    model.method = opt.method;
    model.transform = opt.transform;
    model.factors = factors;
    model.effects = effects;
    model.seed = opt.seed;

    CodedFactorSpace space(factors);
    auto dm = design_matrix(effects, space, table, response);
    const auto n = static_cast<std::size_t>(dm.X.rows());
    model.rows = n;
    Eigen::VectorXd yt(dm.y.size());
    for (Eigen::Index i = 0; i < dm.y.size(); ++i) yt(i) = apply_transform(dm.y(i), opt.transform);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));

    switch (opt.method) {
    case FitMethod::full: {
        if (n < effects.size())
            throw DomainError("the full model has " + std::to_string(effects.size()) + " effects and cannot be fit with " +
                              std::to_string(n) + " usable runs");
        model.members.push_back(fit_wls_skipping(dm.X, yt, ones));
        model.samples = 1;
        break;
    }
    case FitMethod::forward_aicc: {
        auto forced = detail::forced_columns(effects, dm, opt.force_mixture_mains);
        model.members.push_back(forward_selection(dm.X, yt, ones, AiccScore{}, forced));
        model.samples = 1;
        break;
    }
    case FitMethod::svem_forward:
    case FitMethod::svem_lasso: {
        if (n < 6) throw ValidationError("an ensemble fit needs at least 6 usable runs, got " + std::to_string(n));
        if (opt.samples == 0) throw ValidationError("samples must be at least 1");
        auto forced = detail::forced_columns(effects, dm, opt.force_mixture_mains);
        model.samples = opt.samples;
        for (std::size_t m = 0; m < opt.samples; ++m) {
            std::uint64_t sub = derive_seed(opt.seed, m);
            bool done = false;
            for (int attempt = 0; attempt < 2 && !done; ++attempt) {
                try {
                    auto wp = fractional_weights(n, attempt == 0 ? sub : derive_seed(sub, std::uint64_t{1}));
                    const auto& w = opt.unit_weights ? ones : wp.train;
                    const auto& v = opt.unit_weights ? ones : wp.valid;
                    auto fit = detail::fit_member(dm, yt, w, v, forced, opt.method, opt.member_score, opt.max_terms);
                    for (double c : fit.coef)
                        if (!std::isfinite(c)) throw DomainError("non-finite member coefficient");
                    model.members.push_back(std::move(fit));
                    done = true;
                } catch (const Error&) {
                }
            }
            if (!done) ++model.skipped;
        }
        if (model.members.empty()) throw DomainError("every ensemble member failed to fit");
        break;
    }
    }
    model.finalize();
    return model;
}

inline EnsembleModel fit_response(const StudyDefinition& def, const DataTable& table, const std::string& response,
                                  const FitOptions& opt) {
    return fit_response(table.factors.empty() ? def.factors : table.factors, build_candidate_effects(def), table,
                        response, opt);
}

struct ActualPredicted {
    std::vector<std::string> run_ids;
    std::vector<double> actual;
    std::vector<double> predicted;
    std::optional<double> correlation;  // empty when either side has zero variance
    std::vector<std::size_t> outliers;  // indices beyond 3 residual standard deviations
};

inline std::optional<double> pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) ma += a[i], mb += b[i];
    ma /= n, mb /= n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    double scale = std::max(std::fabs(ma), std::fabs(mb)) + 1e-300;
    if (saa <= 1e-24 * scale * scale * n || sbb <= 1e-24 * scale * scale * n) return std::nullopt;
    return sab / std::sqrt(saa * sbb);
}

/// Actual versus predicted on the original response scale for rows with an
/// observed response (excluded rows included, as they are still data).
inline ActualPredicted actual_by_predicted(const EnsembleModel& model, const DataTable& table) {
    const auto col = table.column_index(model.response);
    ActualPredicted out;
    for (const auto& r : table.rows) {
        if (!r.values[col]) continue;
        out.run_ids.push_back(r.run_id);
        out.actual.push_back(*r.values[col]);
        out.predicted.push_back(model.predict(r.factors));
    }
    if (out.actual.size() < 3) throw ValidationError("actual-by-predicted needs at least 3 observed rows");
    out.correlation = pearson(out.actual, out.predicted);
    double ss = 0.0;
    for (std::size_t i = 0; i < out.actual.size(); ++i) ss += std::pow(out.actual[i] - out.predicted[i], 2);
    double sd = std::sqrt(ss / static_cast<double>(out.actual.size()));
    if (sd > 0.0)
        for (std::size_t i = 0; i < out.actual.size(); ++i)
            if (std::fabs(out.actual[i] - out.predicted[i]) > 3.0 * sd) out.outliers.push_back(i);
    return out;
}

} // namespace formix
