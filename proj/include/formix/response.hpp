#pragma once

// Response distribution diagnostics and variance-stabilizing transforms.

#include "formix/core.hpp"
#include "formix/regression.hpp"
#include "formix/study.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace formix {

inline double apply_transform(double v, Transform t) {
    switch (t) {
    case Transform::identity: return v;
    case Transform::log:
        if (!(v > 0.0)) throw DomainError("log transform needs positive values, got " + std::to_string(v));
        return std::log(v);
    case Transform::logit:
        if (!(v > 0.0 && v < 1.0)) throw DomainError("logit transform needs values inside (0, 1), got " + std::to_string(v));
        return std::log(v / (1.0 - v));
    }
    return v;
}

inline double inverse_transform(double v, Transform t) {
    switch (t) {
    case Transform::identity: return v;
    case Transform::log: return std::exp(v);
    case Transform::logit: return 1.0 / (1.0 + std::exp(-v));
    }
    return v;
}

inline std::vector<double> apply_transform(const std::vector<double>& v, Transform t) {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = apply_transform(v[i], t);
    return out;
}

inline std::vector<double> inverse_transform(const std::vector<double>& v, Transform t) {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = inverse_transform(v[i], t);
    return out;
}

struct DistributionFit {
    std::string family;
    std::vector<std::pair<std::string, double>> params;
    double loglik = 0.0;
    double aicc = 0.0;
};

/// AICc of a likelihood fit with `p` distribution parameters.
inline double likelihood_aicc(double loglik, std::size_t n, std::size_t p) {
    const double nn = static_cast<double>(n), pp = static_cast<double>(p);
    if (nn - pp - 1.0 <= 0.0) return kInf;
    return -2.0 * loglik + 2.0 * pp + 2.0 * pp * (pp + 1.0) / (nn - pp - 1.0);
}

namespace detail {
inline void require_finite(const std::vector<double>& v, std::size_t min_n) {
    if (v.size() < min_n) throw ValidationError("at least " + std::to_string(min_n) + " values are needed");
    for (double x : v)
        if (!std::isfinite(x)) throw ValidationError("response values must be finite");
}
} // namespace detail

inline DistributionFit fit_normal(const std::vector<double>& v) {
    detail::require_finite(v, 2);
    const double n = static_cast<double>(v.size());
    double mu = 0.0;
    for (double x : v) mu += x;
    mu /= n;
    double ss = 0.0;
    for (double x : v) ss += (x - mu) * (x - mu);
    double var = ss / n;
    if (!(var > 0.0)) throw DomainError("normal fit needs values that are not all equal");
    double ll = -0.5 * n * (std::log(2.0 * std::numbers::pi * var) + 1.0);
    return {"normal", {{"mu", mu}, {"sigma", std::sqrt(var)}}, ll, likelihood_aicc(ll, v.size(), 2)};
}

inline DistributionFit fit_lognormal(const std::vector<double>& v) {
    detail::require_finite(v, 2);
    std::vector<double> lv(v.size());
    double jac = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!(v[i] > 0.0)) throw DomainError("lognormal fit needs positive values");
        lv[i] = std::log(v[i]);
        jac += lv[i];
    }
    auto f = fit_normal(lv);
    double ll = f.loglik - jac;
    return {"lognormal", f.params, ll, likelihood_aicc(ll, v.size(), 2)};
}

inline double beta_loglik(double a, double b, double slx, double sl1x, double n) {
    return n * (std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b)) + (a - 1.0) * slx + (b - 1.0) * sl1x;
}

/// Beta MLE by Newton iterations on the score equations, started from the
/// method-of-moments estimate.
inline DistributionFit fit_beta(const std::vector<double>& v, double tol = 1e-10, int max_iter = 200) {
    detail::require_finite(v, 2);
    const double n = static_cast<double>(v.size());
    double slx = 0.0, sl1x = 0.0, m = 0.0;
    for (double x : v) {
        if (!(x > 0.0 && x < 1.0)) throw DomainError("beta fit needs values strictly inside (0, 1)");
        slx += std::log(x);
        sl1x += std::log1p(-x);
        m += x;
    }
    m /= n;
    double var = 0.0;
    for (double x : v) var += (x - m) * (x - m);
    var /= n;
    if (!(var > 0.0)) throw DomainError("beta fit needs values that are not all equal");
    double common = std::max(m * (1.0 - m) / var - 1.0, 1e-3);
    double a = m * common, b = (1.0 - m) * common;
    using boost::math::digamma;
    using boost::math::trigamma;
    for (int it = 0; it < max_iter; ++it) {
        double dab = digamma(a + b), tab = trigamma(a + b);
        double g1 = n * (dab - digamma(a)) + slx;
        double g2 = n * (dab - digamma(b)) + sl1x;
        double h11 = n * (tab - trigamma(a)), h22 = n * (tab - trigamma(b)), h12 = n * tab;
        double det = h11 * h22 - h12 * h12;
        double da = -(h22 * g1 - h12 * g2) / det;
        double db = -(h11 * g2 - h12 * g1) / det;
        double step = 1.0;
        while (a + step * da <= 0.0 || b + step * db <= 0.0) step *= 0.5;
        a += step * da;
        b += step * db;
        if (std::fabs(step * da) <= tol * (1.0 + a) && std::fabs(step * db) <= tol * (1.0 + b)) break;
    }
    double ll = beta_loglik(a, b, slx, sl1x, n);
    return {"beta", {{"alpha", a}, {"beta", b}}, ll, likelihood_aicc(ll, v.size(), 2)};
}

struct TransformRecommendation {
    Transform transform = Transform::identity;
    DistributionFit normal;
    DistributionFit alternative;  // lognormal or beta
};

/// log when the lognormal fits better by AICc (beta and logit when the
/// response is declared bounded in (0, 1)); identity otherwise and on ties.
inline TransformRecommendation recommend_transform(const std::vector<double>& values, bool bounded01) {
    detail::require_finite(values, 5);
    TransformRecommendation rec;
    rec.normal = fit_normal(values);
    rec.alternative = bounded01 ? fit_beta(values) : fit_lognormal(values);
    if (rec.alternative.aicc < rec.normal.aicc - 1e-9) rec.transform = bounded01 ? Transform::logit : Transform::log;
    return rec;
}

} // namespace formix
