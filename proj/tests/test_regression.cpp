#include "formix/regression.hpp"

#include <boost/math/distributions/fisher_f.hpp>
#include <gtest/gtest.h>

#include <random>

using namespace formix;

namespace {

Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index n, Eigen::Index p, bool intercept = true) {
    std::normal_distribution<double> nd;
    Eigen::MatrixXd X(n, p);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < p; ++j) X(i, j) = (intercept && j == 0) ? 1.0 : nd(rng);
    return X;
}

Eigen::VectorXd normal_equations(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
    Eigen::MatrixXd A = X.transpose() * w.asDiagonal() * X;
    Eigen::VectorXd b = X.transpose() * w.asDiagonal() * y;
    return A.fullPivLu().solve(b);
}

} // namespace

TEST(Wls, ExactLine) {
    Eigen::MatrixXd X(5, 2);
    Eigen::VectorXd y(5);
    for (int i = 0; i < 5; ++i) X(i, 0) = 1, X(i, 1) = i, y(i) = 2 + 3.0 * i;
    auto fit = fit_wls(X, y, Eigen::VectorXd::Ones(5));
    EXPECT_NEAR(fit.coef[0], 2.0, 1e-9);
    EXPECT_NEAR(fit.coef[1], 3.0, 1e-9);
    EXPECT_EQ(fit.sse, 0.0);
}

TEST(Wls, DuplicateColumnReported) {
    Rng rng(1);
    Eigen::MatrixXd X = random_matrix(rng, 10, 4);
    X.col(3) = X.col(1);
    Eigen::VectorXd y = Eigen::VectorXd::Random(10);
    try {
        fit_wls(X, y, Eigen::VectorXd::Ones(10));
        FAIL() << "expected rank deficiency";
    } catch (const RankDeficient& e) {
        EXPECT_EQ(e.column(), 3u);
    }
}

TEST(Wls, MatchesNormalEquations) {
    Rng rng(2);
    std::uniform_real_distribution<double> uw(0.1, 3.0);
    for (int t = 0; t < 20; ++t) {
        Eigen::MatrixXd X = random_matrix(rng, 20, 5);
        Eigen::VectorXd y = random_matrix(rng, 20, 1, false).col(0);
        Eigen::VectorXd w(20);
        for (auto& v : w) v = uw(rng);
        auto fit = fit_wls(X, y, w);
        Eigen::VectorXd b = normal_equations(X, y, w);
        for (int j = 0; j < 5; ++j) EXPECT_NEAR(fit.coef[static_cast<std::size_t>(j)], b(j), 1e-7);
        Eigen::VectorXd r = y - X * b;
        EXPECT_NEAR(fit.sse, (w.array() * r.array().square()).sum(), 1e-9);
    }
}

TEST(Aicc, SpotValue) {
    EXPECT_NEAR(aicc(10.0, 20, 2), 20.0 * std::log(0.5) + 6.0 + 24.0 / 16.0, 1e-9);
    EXPECT_NEAR(aicc(10.0, 20, 2), -6.3629436, 1e-7);
}

TEST(Aicc, BoundaryAndMonotone) {
    EXPECT_TRUE(std::isfinite(aicc(1.0, 5, 2)));
    EXPECT_EQ(aicc(1.0, 4, 2), kInf);
    EXPECT_EQ(aicc(0.0, 20, 2), -kInf);
    EXPECT_LT(aicc(5.0, 20, 3), aicc(6.0, 20, 3));
}

TEST(Forward, NoiselessRecoversTwoColumns) {
    Rng rng(3);
    Eigen::MatrixXd X = random_matrix(rng, 30, 11);
    Eigen::VectorXd y = 1.0 + 2.0 * X.col(3).array() - 1.5 * X.col(8).array();
    auto fit = forward_selection(X, y, Eigen::VectorXd::Ones(30), AiccScore{}, {0});
    std::vector<std::size_t> cols = fit.columns;
    std::sort(cols.begin(), cols.end());
    EXPECT_EQ(cols, (std::vector<std::size_t>{0, 3, 8}));
}

TEST(Forward, InterceptOnlyWithoutCandidates) {
    Rng rng(4);
    Eigen::MatrixXd X = Eigen::MatrixXd::Ones(12, 1);
    Eigen::VectorXd y = random_matrix(rng, 12, 1, false).col(0);
    auto fit = forward_selection(X, y, Eigen::VectorXd::Ones(12), AiccScore{}, {0});
    ASSERT_EQ(fit.columns, std::vector<std::size_t>{0});
    EXPECT_NEAR(fit.coef[0], y.mean(), 1e-12);
}

namespace {
// One candidate column, pure-noise response, n = 30: the fraction of datasets
// for which AICc keeps the intercept-only model.
double pure_noise_intercept_rate(int datasets, std::uint64_t seed) {
    Rng rng(seed);
    int intercept_only = 0;
    for (int t = 0; t < datasets; ++t) {
        Eigen::MatrixXd X = random_matrix(rng, 30, 2);
        Eigen::VectorXd y = random_matrix(rng, 30, 1, false).col(0);
        auto fit = forward_selection(X, y, Eigen::VectorXd::Ones(30), AiccScore{}, {0});
        intercept_only += fit.columns.size() == 1;
    }
    return static_cast<double>(intercept_only) / datasets;
}
} // namespace

TEST(Forward, PureNoiseInterceptOnlyAtLeast90Percent) {
    // many datasets so the observed rate reflects the long-run rate rather
    // than the luck of one 200-dataset draw
    EXPECT_GE(pure_noise_intercept_rate(4000, 5), 0.90);
}

TEST(Forward, PureNoiseRateMatchesExactFTail) {
    // AICc prefers one extra term when n ln(SSE0/SSE1) exceeds the penalty
    // gap; under the null SSE0/SSE1 - 1 = F/(n-2) with F ~ F(1, n-2).
    const double n = 30;
    double gap = 2.0 + (2.0 * 3 * 4 / (n - 4)) - (2.0 * 2 * 3 / (n - 3));
    double fcrit = (std::exp(gap / n) - 1.0) * (n - 2);
    boost::math::fisher_f dist(1, n - 2);
    double expected = boost::math::cdf(dist, fcrit);
    double rate = pure_noise_intercept_rate(4000, 6);
    EXPECT_NEAR(rate, expected, 3 * std::sqrt(expected * (1 - expected) / 4000));
}

TEST(Forward, TrainingSseNonIncreasingAlongPath) {
    Rng rng(7);
    for (int t = 0; t < 10; ++t) {
        Eigen::MatrixXd X = random_matrix(rng, 25, 40);
        Eigen::VectorXd y = random_matrix(rng, 25, 1, false).col(0);
        std::exponential_distribution<double> ex;
        Eigen::VectorXd w(25), v(25);
        for (int i = 0; i < 25; ++i) w(i) = ex(rng), v(i) = ex(rng);
        auto path = forward_path(X, y, w, ValidationScore{v}, {0});
        EXPECT_EQ(path.points.size(), 24u);  // capped at n - 1 columns
        for (std::size_t k = 1; k < path.points.size(); ++k)
            EXPECT_LE(path.points[k].fit.sse, path.points[k - 1].fit.sse * (1 + 1e-12));
    }
}

TEST(Forward, SkipsDependentCandidates) {
    Rng rng(8);
    Eigen::MatrixXd X = random_matrix(rng, 20, 6);
    X.col(4) = X.col(1) + X.col(2);
    X.col(5) = X.col(3);
    Eigen::VectorXd y = X.col(1) + X.col(2) + X.col(3);
    auto path = forward_path(X, y, Eigen::VectorXd::Ones(20), AiccScore{}, {0});
    EXPECT_LE(path.points.back().fit.k(), 4u);
    auto fit = fit_wls(X, y, Eigen::VectorXd::Ones(20), path.best_fit().columns);
    EXPECT_NEAR(fit.sse, 0.0, 1e-12);
}

TEST(Lasso, ZeroAboveLambdaMax) {
    Rng rng(9);
    Eigen::MatrixXd X = random_matrix(rng, 30, 6);
    Eigen::VectorXd y = X.col(1) * 2.0 + random_matrix(rng, 30, 1, false).col(0);
    Eigen::VectorXd w = Eigen::VectorXd::Ones(30);
    auto lp = lasso_problem(X, y, w);
    double lmax = lambda_max(lp);
    // the identity on the standardized scale: max |X~' W y~| / sum(w)
    double direct = 0;
    for (Eigen::Index j = 1; j < 6; ++j) {
        Eigen::VectorXd c = X.col(j).array() - X.col(j).mean();
        c /= std::sqrt(c.squaredNorm() / 30);
        direct = std::max(direct, std::fabs(c.dot((y.array() - y.mean()).matrix()) / 30));
    }
    EXPECT_NEAR(lmax, direct, 1e-12);
    for (double f : {1.0, 1.5, 10.0}) {
        auto fit = lasso_fit(X, y, w, f * lmax);
        ASSERT_EQ(fit.columns.size(), 1u);
        EXPECT_NEAR(fit.coef[0], y.mean(), 1e-12);
    }
}

TEST(Lasso, VanishingPenaltyMatchesWls) {
    Rng rng(10);
    std::uniform_real_distribution<double> uw(0.2, 2.0);
    for (int t = 0; t < 5; ++t) {
        Eigen::MatrixXd X = random_matrix(rng, 40, 6);
        Eigen::VectorXd y = X * Eigen::VectorXd::LinSpaced(6, -2, 3) + random_matrix(rng, 40, 1, false).col(0);
        Eigen::VectorXd w(40);
        for (auto& v : w) v = uw(rng);
        auto ls = fit_wls(X, y, w);
        auto la = lasso_fit(X, y, w, 1e-9 * lambda_max(lasso_problem(X, y, w)));
        auto b1 = ls.dense(6), b2 = la.dense(6);
        for (int j = 0; j < 6; ++j) EXPECT_NEAR(b1(j), b2(j), 1e-4);
    }
}

TEST(Lasso, OrthonormalSoftThreshold) {
    // centered columns with unit mean square and mutually orthogonal
    const int n = 8;
    Eigen::MatrixXd H(n, n);
    H << 1, 1, 1, 1, 1, 1, 1, 1, 1, -1, 1, -1, 1, -1, 1, -1, 1, 1, -1, -1, 1, 1, -1, -1, 1, -1, -1, 1, 1, -1, -1, 1,
        1, 1, 1, 1, -1, -1, -1, -1, 1, -1, 1, -1, -1, 1, -1, 1, 1, 1, -1, -1, -1, -1, 1, 1, 1, -1, -1, 1, -1, 1, 1, -1;
    Eigen::MatrixXd X = H.leftCols(5);
    Eigen::VectorXd y(n);
    y << 3.1, -0.4, 2.2, 0.9, -1.7, 0.3, 1.1, 2.5;
    Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
    for (double lambda : {0.05, 0.3, 0.6}) {
        auto fit = lasso_fit(X, y, w, lambda);
        auto b = fit.dense(5);
        for (int j = 1; j < 5; ++j) {
            double z = X.col(j).dot(y) / n;
            EXPECT_NEAR(b(j), soft_threshold(z, lambda), 1e-8);
        }
        EXPECT_NEAR(b(0), y.mean(), 1e-8);
    }
}

TEST(Lasso, PathGridAndSelection) {
    Rng rng(12);
    Eigen::MatrixXd X = random_matrix(rng, 20, 30);
    Eigen::VectorXd y = 2.0 * X.col(2) - X.col(5) + 0.1 * random_matrix(rng, 20, 1, false).col(0);
    std::exponential_distribution<double> ex;
    Eigen::VectorXd w(20), v(20);
    for (int i = 0; i < 20; ++i) w(i) = ex(rng), v(i) = ex(rng);
    auto path = lasso_path(X, y, w, ValidationScore{v});
    ASSERT_EQ(path.lambdas.size(), 100u);
    EXPECT_LE(path.points.size(), 100u);
    EXPECT_NEAR(path.lambdas.back() / path.lambdas.front(), 1e-4, 1e-15);
    EXPECT_EQ(path.points.front().fit.columns.size(), 1u);
    auto b = path.best_fit().dense(30);
    EXPECT_GT(std::fabs(b(2)), 1.0);
}
