#include "formix/response.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace formix;

TEST(Transform, RoundTrips) {
    for (double v : {0.001, 0.5, 3.0, 1234.5}) EXPECT_NEAR(inverse_transform(apply_transform(v, Transform::log), Transform::log), v, 1e-12 * v);
    for (double v : {0.001, 0.27, 0.5, 0.73, 0.999})
        EXPECT_NEAR(inverse_transform(apply_transform(v, Transform::logit), Transform::logit), v, 1e-12);
    EXPECT_EQ(apply_transform(0.5, Transform::logit), 0.0);
    EXPECT_EQ(apply_transform(-2.0, Transform::identity), -2.0);
}

TEST(Transform, DomainErrors) {
    EXPECT_THROW(apply_transform(0.0, Transform::log), DomainError);
    EXPECT_THROW(apply_transform(1.0, Transform::logit), DomainError);
    EXPECT_THROW(apply_transform(0.0, Transform::logit), DomainError);
}

TEST(Recommend, LognormalSamplesGetLog) {
    Rng rng(1);
    std::lognormal_distribution<double> d(0.0, 1.0);
    int logs = 0;
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<double> v(200);
        for (auto& x : v) x = d(rng);
        logs += recommend_transform(v, false).transform == Transform::log;
    }
    EXPECT_GE(logs, 95);
}

TEST(Recommend, NormalSamplesStayIdentity) {
    Rng rng(2);
    std::normal_distribution<double> d(100.0, 5.0);
    int ident = 0;
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<double> v(200);
        for (auto& x : v) x = d(rng);
        ident += recommend_transform(v, false).transform == Transform::identity;
    }
    EXPECT_GE(ident, 95);
}

TEST(Recommend, BoundedWithZeroIsDomainError) {
    std::vector<double> v{0.0, 0.2, 0.3, 0.4, 0.5, 0.6};
    EXPECT_THROW(recommend_transform(v, true), DomainError);
    std::vector<double> neg{-1.0, 2, 3, 4, 5};
    EXPECT_THROW(recommend_transform(neg, false), DomainError);
    EXPECT_THROW(recommend_transform({1, 2, 3}, false), ValidationError);
}

TEST(Recommend, InvariantToOrdering) {
    Rng rng(3);
    std::gamma_distribution<double> g(2.0, 1.5);
    std::vector<double> v(60);
    for (auto& x : v) x = g(rng);
    auto a = recommend_transform(v, false);
    std::shuffle(v.begin(), v.end(), rng);
    auto b = recommend_transform(v, false);
    EXPECT_EQ(a.transform, b.transform);
    EXPECT_NEAR(a.normal.aicc, b.normal.aicc, 1e-9);
    EXPECT_NEAR(a.alternative.aicc, b.alternative.aicc, 1e-9);
}

TEST(Recommend, NormalFitClosedForm) {
    std::vector<double> v{1, 2, 3, 4, 5};
    auto f = fit_normal(v);
    EXPECT_DOUBLE_EQ(f.params[0].second, 3.0);
    EXPECT_NEAR(f.params[1].second, std::sqrt(2.0), 1e-15);
    double ll = -2.5 * (std::log(2 * M_PI * 2.0) + 1.0);
    EXPECT_NEAR(f.loglik, ll, 1e-12);
    EXPECT_NEAR(f.aicc, -2 * ll + 4 + 12.0 / 2.0, 1e-12);
}

TEST(BetaFit, MatchesGridSearch) {
    Rng rng(4);
    for (auto [a, b] : {std::pair{2.0, 5.0}, std::pair{0.7, 0.9}, std::pair{8.0, 3.0}}) {
        std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
        std::vector<double> v(200);
        double slx = 0, sl1x = 0;
        for (auto& x : v) {
            double p = ga(rng), q = gb(rng);
            x = p / (p + q);
            slx += std::log(x);
            sl1x += std::log1p(-x);
        }
        auto fit = fit_beta(v);
        double ah = fit.params[0].second, bh = fit.params[1].second;
        double best = -kInf, ga_ = 0, gb_ = 0;
        for (double x = std::max(0.01, ah - 1.5); x <= ah + 1.5; x += 0.01)
            for (double y = std::max(0.01, bh - 1.5); y <= bh + 1.5; y += 0.01) {
                double ll = beta_loglik(x, y, slx, sl1x, 200);
                if (ll > best) best = ll, ga_ = x, gb_ = y;
            }
        EXPECT_NEAR(ah, ga_, 0.02);
        EXPECT_NEAR(bh, gb_, 0.02);
        EXPECT_GE(fit.loglik, best - 1e-9);
    }
}

TEST(Recommend, BoundedBetaSamplesPreferLogit) {
    Rng rng(5);
    std::gamma_distribution<double> ga(0.8, 1.0), gb(4.0, 1.0);
    std::vector<double> v(200);
    for (auto& x : v) {
        double p = ga(rng), q = gb(rng);
        x = p / (p + q);
    }
    auto rec = recommend_transform(v, true);
    EXPECT_EQ(rec.alternative.family, "beta");
    EXPECT_EQ(rec.transform, Transform::logit);
}
