#pragma once

// Weighted least squares, forward selection and the lasso.

#include "formix/core.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace formix {

class RankDeficient : public Error {
public:
    explicit RankDeficient(std::size_t column)
        : Error("design column " + std::to_string(column) + " is linearly dependent on earlier columns", "rank_deficient"),
          column_(column) {}
    std::size_t column() const { return column_; }

private:
    std::size_t column_;
};

/// Coefficients over a subset of design columns.
struct LinearFit {
    std::vector<std::size_t> columns;
    std::vector<double> coef;
    double sse = 0.0;  // weighted residual sum of squares on the fitting weights
    std::size_t n = 0;

    std::size_t k() const { return columns.size(); }

    double predict_row(const Eigen::Ref<const Eigen::VectorXd>& row) const {
        double v = 0.0;
        for (std::size_t j = 0; j < columns.size(); ++j) v += coef[j] * row(static_cast<Eigen::Index>(columns[j]));
        return v;
    }

    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const {
        Eigen::VectorXd out = Eigen::VectorXd::Zero(X.rows());
        for (std::size_t j = 0; j < columns.size(); ++j) out += coef[j] * X.col(static_cast<Eigen::Index>(columns[j]));
        return out;
    }

    /// Dense coefficient vector of width p.
    Eigen::VectorXd dense(std::size_t p) const {
        Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
        for (std::size_t j = 0; j < columns.size(); ++j) b(static_cast<Eigen::Index>(columns[j])) = coef[j];
        return b;
    }
};

/// Small-sample corrected AIC with k fitted coefficients plus the variance.
inline double aicc(double sse, std::size_t n, std::size_t k) {
    const double p = static_cast<double>(k) + 1.0;
    const double nn = static_cast<double>(n);
    if (n <= k + 2) return kInf;
    if (sse <= 0.0) return -kInf;
    return nn * std::log(sse / nn) + 2.0 * p + 2.0 * p * (p + 1.0) / (nn - p - 1.0);
}

inline constexpr double kPivotTolerance = 1e-10;
inline constexpr double kZeroSse = 1e-20;  // relative to the uncentered sum of squares of y

/// Incremental modified Gram-Schmidt with one re-orthogonalization pass, on
/// rows scaled by sqrt(w).
class IncrementalQR {
public:
    IncrementalQR(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w)
        : sw_(w.cwiseMax(0.0).cwiseSqrt()), Xw_(sw_.asDiagonal() * X), yw_(sw_.cwiseProduct(y)), r_(yw_) {
        Q_.resize(X.rows(), 0);
    }

    const Eigen::MatrixXd& weighted_X() const { return Xw_; }
    const Eigen::VectorXd& residual() const { return r_; }
    const Eigen::MatrixXd& Q() const { return Q_; }
    const std::vector<std::size_t>& columns() const { return cols_; }
    double yy() const { return yw_.squaredNorm(); }

    /// Adds column j; false (and no change) when it is dependent on the span.
    bool add(std::size_t j) {
        const auto k = Q_.cols();
        Eigen::VectorXd v = Xw_.col(static_cast<Eigen::Index>(j));
        const double norm0 = v.norm();
        if (norm0 == 0.0 || !std::isfinite(norm0)) return false;
        Eigen::VectorXd rcol = Eigen::VectorXd::Zero(k + 1);
        for (int pass = 0; pass < 2; ++pass)
            for (Eigen::Index i = 0; i < k; ++i) {
                double d = Q_.col(i).dot(v);
                rcol(i) += d;
                v -= d * Q_.col(i);
            }
        const double nv = v.norm();
        if (nv <= kPivotTolerance * norm0) return false;
        rcol(k) = nv;
        Q_.conservativeResize(Eigen::NoChange, k + 1);
        Q_.col(k) = v / nv;
        Eigen::MatrixXd R(k + 1, k + 1);
        R.setZero();
        R.topLeftCorner(k, k) = R_;
        R.col(k) = rcol;
        R_ = std::move(R);
        const double qy = Q_.col(k).dot(yw_);
        qty_.conservativeResize(k + 1);
        qty_(k) = qy;
        r_ -= qy * Q_.col(k);
        r_ -= Q_.col(k).dot(r_) * Q_.col(k);
        cols_.push_back(j);
        return true;
    }

    double sse() const { return r_.squaredNorm(); }

    std::vector<double> coefficients() const {
        const auto k = R_.cols();
        if (k == 0) return {};
        Eigen::VectorXd b = R_.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(qty_);
        return {b.data(), b.data() + k};
    }

private:
    Eigen::VectorXd sw_;
    Eigen::MatrixXd Xw_;
    Eigen::VectorXd yw_;
    Eigen::VectorXd r_;
    Eigen::MatrixXd Q_;
    Eigen::MatrixXd R_;
    Eigen::VectorXd qty_;
    std::vector<std::size_t> cols_;
};

inline double weighted_sse(const LinearFit& fit, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           const Eigen::VectorXd& w) {
    Eigen::VectorXd r = y - fit.predict(X);
    return (w.array() * r.array().square()).sum();
}

/// Weighted least squares on the listed columns (all when empty). Throws
/// RankDeficient naming the first dependent column.
inline LinearFit fit_wls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                         std::vector<std::size_t> columns = {}) {
    if (columns.empty())
        for (Eigen::Index j = 0; j < X.cols(); ++j) columns.push_back(static_cast<std::size_t>(j));
    IncrementalQR qr(X, y, w);
    for (auto j : columns)
        if (!qr.add(j)) throw RankDeficient(j);
    LinearFit fit{qr.columns(), qr.coefficients(), 0.0, static_cast<std::size_t>(X.rows())};
    fit.sse = weighted_sse(fit, X, y, w);
    if (fit.sse <= kZeroSse * qr.yy()) fit.sse = 0.0;
    return fit;
}

/// Weighted least squares that skips dependent columns instead of failing.
inline LinearFit fit_wls_skipping(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                                  std::vector<std::size_t>* dropped = nullptr) {
    IncrementalQR qr(X, y, w);
    for (Eigen::Index j = 0; j < X.cols(); ++j)
        if (!qr.add(static_cast<std::size_t>(j)) && dropped) dropped->push_back(static_cast<std::size_t>(j));
    LinearFit fit{qr.columns(), qr.coefficients(), 0.0, static_cast<std::size_t>(X.rows())};
    fit.sse = weighted_sse(fit, X, y, w);
    if (fit.sse <= kZeroSse * qr.yy()) fit.sse = 0.0;
    return fit;
}

/// Score by weighted SSE on the given validation weights.
struct ValidationScore {
    Eigen::VectorXd weights;
};
/// Score by AICc of the fitting-weighted SSE.
struct AiccScore {};
using SelectionScore = std::variant<ValidationScore, AiccScore>;

struct PathPoint {
    LinearFit fit;
    double score = 0.0;
};

struct ForwardPath {
    std::vector<PathPoint> points;
    std::size_t best = 0;
    const LinearFit& best_fit() const { return points[best].fit; }
};

/// Greedy forward stepwise path. At each step adds the candidate with the
/// largest reduction of the fitting-weighted SSE (lowest index on ties); stops
/// at n-1 columns or when no independent candidate remains. The best point is
/// the earliest one with the minimum score.
inline ForwardPath forward_path(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                                const SelectionScore& score, const std::vector<std::size_t>& forced = {},
                                std::optional<std::size_t> max_terms = {}) {
    const auto n = static_cast<std::size_t>(X.rows());
    const auto p = static_cast<std::size_t>(X.cols());
    std::size_t cap = n > 0 ? n - 1 : 0;
    if (max_terms) cap = std::min(cap, *max_terms);
    cap = std::max(cap, forced.size());

    IncrementalQR qr(X, y, w);
    for (auto j : forced)
        if (!qr.add(j)) throw RankDeficient(j);

    // candidate columns kept orthogonal to the current span
    Eigen::MatrixXd C = qr.weighted_X();
    Eigen::VectorXd norm0 = C.colwise().norm().transpose();
    C -= qr.Q() * (qr.Q().transpose() * C);
    std::vector<char> used(p, 0), dead(p, 0);
    for (auto j : forced) used[j] = 1;

    const double yy = qr.yy();
    double vyy = 0.0;
    if (auto vs = std::get_if<ValidationScore>(&score)) vyy = (vs->weights.array() * y.array().square()).sum();

    ForwardPath path;
    auto record = [&] {
        LinearFit fit{qr.columns(), qr.coefficients(), 0.0, n};
        fit.sse = qr.sse();
        if (fit.sse <= kZeroSse * yy) fit.sse = 0.0;
        double s;
        if (auto vs = std::get_if<ValidationScore>(&score)) {
            s = weighted_sse(fit, X, y, vs->weights);
            if (s <= kZeroSse * vyy) s = 0.0;
        } else {
            s = aicc(fit.sse, n, fit.k());
        }
        if (path.points.empty() || s < path.points[path.best].score) path.best = path.points.size();
        path.points.push_back({std::move(fit), s});
    };
    record();

    while (qr.columns().size() < cap) {
        const Eigen::VectorXd& r = qr.residual();
        std::size_t pick = p;
        double best_gain = -1.0;
        for (std::size_t j = 0; j < p; ++j) {
            if (used[j] || dead[j]) continue;
            const auto jj = static_cast<Eigen::Index>(j);
            double nn = C.col(jj).squaredNorm();
            if (norm0(jj) == 0.0 || nn <= kPivotTolerance * kPivotTolerance * norm0(jj) * norm0(jj)) {
                dead[j] = 1;
                continue;
            }
            double d = C.col(jj).dot(r);
            double gain = d * d / nn;
            if (gain > best_gain) best_gain = gain, pick = j;
        }
        if (pick == p) break;
        if (!qr.add(pick)) {
            dead[pick] = 1;
            continue;
        }
        used[pick] = 1;
        auto q = qr.Q().col(qr.Q().cols() - 1);
        C -= q * (q.transpose() * C);
        record();
    }
    return path;
}

inline LinearFit forward_selection(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                                   const SelectionScore& score, const std::vector<std::size_t>& forced = {}) {
    return forward_path(X, y, w, score, forced).best_fit();
}

// ---------------------------------------------------------------- lasso

struct LassoProblem {
    Eigen::MatrixXd Xs;           // standardized penalized columns
    std::vector<std::size_t> map; // original column of each standardized one
    Eigen::VectorXd mean, sd;
    Eigen::VectorXd yc;           // centered response
    Eigen::VectorXd wn;           // weights / sum(w)
    double ymean = 0.0;
    std::size_t intercept = 0;
    std::size_t n = 0;
};

/// Standardizes with weighted means and variances. Constant columns (the
/// intercept among them) are left out of the penalized set.
inline LassoProblem lasso_problem(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                                  std::size_t intercept_column = 0) {
    LassoProblem lp;
    lp.intercept = intercept_column;
    lp.n = static_cast<std::size_t>(X.rows());
    const double W = w.sum();
    if (!(W > 0.0)) throw DomainError("lasso weights sum to zero");
    lp.wn = w / W;
    lp.ymean = lp.wn.dot(y);
    lp.yc = y.array() - lp.ymean;
    std::vector<double> means, sds;
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        if (static_cast<std::size_t>(j) == intercept_column) continue;
        double m = lp.wn.dot(X.col(j));
        double var = (lp.wn.array() * (X.col(j).array() - m).square()).sum();
        double scale = X.col(j).cwiseAbs().maxCoeff();
        if (!(var > 0.0) || std::sqrt(var) <= 1e-12 * (scale + 1.0)) continue;
        lp.map.push_back(static_cast<std::size_t>(j));
        means.push_back(m);
        sds.push_back(std::sqrt(var));
    }
    const auto q = static_cast<Eigen::Index>(lp.map.size());
    lp.mean = Eigen::Map<Eigen::VectorXd>(means.data(), q);
    lp.sd = Eigen::Map<Eigen::VectorXd>(sds.data(), q);
    lp.Xs.resize(X.rows(), q);
    for (Eigen::Index j = 0; j < q; ++j)
        lp.Xs.col(j) = (X.col(static_cast<Eigen::Index>(lp.map[static_cast<std::size_t>(j)])).array() - lp.mean(j)) / lp.sd(j);
    return lp;
}

/// Smallest penalty at which every penalized coefficient is zero.
inline double lambda_max(const LassoProblem& lp) {
    if (lp.Xs.cols() == 0) return 0.0;
    return (lp.Xs.transpose() * lp.wn.cwiseProduct(lp.yc)).cwiseAbs().maxCoeff();
}

inline double soft_threshold(double z, double g) {
    if (z > g) return z - g;
    if (z < -g) return z + g;
    return 0.0;
}

/// Coordinate descent on (1/2) sum wn (yc - Xs b)^2 + lambda |b|_1, warm
/// started from `beta`.
inline void lasso_descend(const LassoProblem& lp, double lambda, Eigen::VectorXd& beta, Eigen::VectorXd& r,
                          double tol = 1e-7, int max_sweeps = 100000) {
    const auto q = lp.Xs.cols();
    const double ysd = std::sqrt(std::max(lp.wn.dot(lp.yc.cwiseAbs2()), 1e-300));
    Eigen::MatrixXd WX = lp.wn.asDiagonal() * lp.Xs;
    auto sweep = [&](bool active_only) {
        double delta = 0.0;
        for (Eigen::Index j = 0; j < q; ++j) {
            if (active_only && beta(j) == 0.0) continue;
            double rho = WX.col(j).dot(r) + beta(j);
            double nb = soft_threshold(rho, lambda * (1.0 + 1e-12));  // absorbs rounding at lambda_max
            double d = nb - beta(j);
            if (d != 0.0) {
                r -= d * lp.Xs.col(j);
                beta(j) = nb;
                delta = std::max(delta, std::fabs(d));
            }
        }
        return delta;
    };
    // full sweeps settle the active set, active-only sweeps refine it; the
    // budget counts both
    int used = 0;
    while (used < max_sweeps) {
        ++used;
        if (sweep(false) <= tol * ysd) return;
        while (used < max_sweeps) {
            ++used;
            if (sweep(true) <= tol * ysd) break;
        }
    }
}

inline LinearFit lasso_to_fit(const LassoProblem& lp, const Eigen::VectorXd& beta, const Eigen::MatrixXd& X,
                              const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
    LinearFit fit;
    fit.n = lp.n;
    double b0 = lp.ymean;
    std::vector<std::pair<std::size_t, double>> terms;
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
        if (beta(j) == 0.0) continue;
        double b = beta(j) / lp.sd(j);
        b0 -= b * lp.mean(j);
        terms.emplace_back(lp.map[static_cast<std::size_t>(j)], b);
    }
    fit.columns.push_back(lp.intercept);
    fit.coef.push_back(b0);
    for (auto& [c, b] : terms) fit.columns.push_back(c), fit.coef.push_back(b);
    fit.sse = weighted_sse(fit, X, y, w);
    return fit;
}

/// Lasso at a single penalty; the intercept column must be constant one.
inline LinearFit lasso_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w, double lambda,
                           std::size_t intercept_column = 0) {
    auto lp = lasso_problem(X, y, w, intercept_column);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(lp.Xs.cols());
    Eigen::VectorXd r = lp.yc;
    lasso_descend(lp, lambda, beta, r);
    return lasso_to_fit(lp, beta, X, y, w);
}

/// Geometric grid from lambda_max down to ratio * lambda_max.
inline std::vector<double> lambda_grid(double lmax, std::size_t count = 100, double ratio = 1e-4) {
    std::vector<double> g(count);
    for (std::size_t i = 0; i < count; ++i)
        g[i] = count == 1 ? lmax : lmax * std::pow(ratio, static_cast<double>(i) / static_cast<double>(count - 1));
    return g;
}

struct LassoPath {
    std::vector<double> lambdas;
    std::vector<PathPoint> points;
    std::size_t best = 0;
    const LinearFit& best_fit() const { return points[best].fit; }
};

/// Warm-started lasso path; the best point is the earliest minimum of the
/// score (validation SSE, or AICc with k counting nonzero coefficients). The
/// path stops early once 99.9% of the weighted variance is explained.
inline LassoPath lasso_path(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                            const SelectionScore& score, std::size_t intercept_column = 0, std::size_t count = 100,
                            double ratio = 1e-4) {
    auto lp = lasso_problem(X, y, w, intercept_column);
    LassoPath path;
    path.lambdas = lambda_grid(lambda_max(lp), count, ratio);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(lp.Xs.cols());
    Eigen::VectorXd r = lp.yc;
    const auto* vs = std::get_if<ValidationScore>(&score);
    const double vyy = vs ? (vs->weights.array() * y.array().square()).sum() : 0.0;
    const double null_dev = lp.wn.dot(lp.yc.cwiseAbs2());
    for (double lambda : path.lambdas) {
        // path points only rank candidates, so a looser tolerance suffices
        lasso_descend(lp, lambda, beta, r, 1e-5);
        auto fit = lasso_to_fit(lp, beta, X, y, w);
        double s;
        if (vs) {
            s = weighted_sse(fit, X, y, vs->weights);
            if (s <= kZeroSse * vyy) s = 0.0;
        } else {
            s = aicc(fit.sse, lp.n, fit.k());
        }
        if (path.points.empty() || s < path.points[path.best].score) path.best = path.points.size();
        path.points.push_back({std::move(fit), s});
        if (lp.wn.dot(r.cwiseAbs2()) <= 1e-3 * null_dev) break;
    }
    return path;
}

} // namespace formix
