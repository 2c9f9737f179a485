#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "mlsm/error.hpp"
#include "mlsm/family.hpp"

using namespace mlsm;

namespace {

const FamilySpec kFamilies[] = {FamilySpec::gaussian(1.0), FamilySpec::gaussian(2.0), FamilySpec::poisson(),
                                FamilySpec::bernoulli()};

std::vector<double> support_grid(const FamilySpec& f) {
    if (f.kind == FamilyKind::Bernoulli) return {0, 1};
    return {0, 1, 2, 5};
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST(Loglik, ClosedFormValues) {
    EXPECT_NEAR(loglik(0, 0, FamilySpec::gaussian(1.0)), -0.5 * std::log(2 * std::numbers::pi), 1e-15);
    EXPECT_NEAR(loglik(0, 0, FamilySpec::gaussian(1.0)), -0.9189385, 1e-7);
    EXPECT_DOUBLE_EQ(loglik(0, 0, FamilySpec::poisson()), -1.0);
    EXPECT_NEAR(loglik(1, 0, FamilySpec::bernoulli()), -std::log(2.0), 1e-15);
    EXPECT_NEAR(loglik(3, 0.7, FamilySpec::poisson()), -std::exp(0.7) + 2.1 - std::log(6.0), 1e-13);
}

TEST(Loglik, BernoulliStableForLargeArguments) {
    const FamilySpec f = FamilySpec::bernoulli();
    EXPECT_NEAR(loglik(1, 800, f), 0.0, 1e-300);
    EXPECT_NEAR(loglik(0, 800, f), -800.0, 1e-12);
    EXPECT_NEAR(loglik(0, -800, f), 0.0, 1e-300);
    EXPECT_NEAR(loglik(1, -40, f), -40.0 - std::log1p(std::exp(-40.0)), 1e-12);
    EXPECT_TRUE(std::isfinite(loglik(1, -1e6, f)));
}

TEST(Loglik, SupportViolationsThrow) {
    EXPECT_THROW(loglik(-1, 0, FamilySpec::poisson()), DomainError);
    EXPECT_THROW(loglik(1.5, 0, FamilySpec::poisson()), DomainError);
    EXPECT_THROW(loglik(2, 0, FamilySpec::bernoulli()), DomainError);
    EXPECT_THROW(score(0.5, 0, FamilySpec::bernoulli()), DomainError);
    EXPECT_THROW(check_support(std::nan(""), FamilySpec::gaussian()), DomainError);
    EXPECT_NO_THROW(check_support(-3.2, FamilySpec::gaussian()));
}

TEST(Score, ClosedFormValues) {
    EXPECT_DOUBLE_EQ(score(2, 0.5, FamilySpec::gaussian(1.0)), 1.5);
    EXPECT_DOUBLE_EQ(score(3, 0, FamilySpec::poisson()), 2.0);
    EXPECT_DOUBLE_EQ(score(1, 0, FamilySpec::bernoulli()), 0.5);
    EXPECT_DOUBLE_EQ(score(2, 0.5, FamilySpec::gaussian(0.5)), 3.0);
}

TEST(NegHess, ClosedFormValues) {
    EXPECT_DOUBLE_EQ(neg_hess(0, 1.7, FamilySpec::gaussian(2.0)), 0.5);
    EXPECT_DOUBLE_EQ(neg_hess(1, -4, FamilySpec::gaussian(2.0)), 0.5);
    EXPECT_DOUBLE_EQ(neg_hess(0, 0, FamilySpec::bernoulli()), 0.25);
    EXPECT_DOUBLE_EQ(neg_hess(4, 0, FamilySpec::poisson()), 1.0);
}

TEST(Derivatives, MatchCentralDifferencesOnGrid) {
    const double h = 1e-5;
    for (const FamilySpec& f : kFamilies)
        for (double y : support_grid(f))
            for (int k = -30; k <= 30; ++k) {
                const double x = 0.1 * k;
                const double fd_score = (loglik(y, x + h, f) - loglik(y, x - h, f)) / (2 * h);
                const double fd_hess = -(score(y, x + h, f) - score(y, x - h, f)) / (2 * h);
                EXPECT_LT(rel_err(score(y, x, f), fd_score), 1e-6) << to_string(f.kind) << " y=" << y << " x=" << x;
                EXPECT_LT(rel_err(neg_hess(y, x, f), fd_hess), 1e-5) << to_string(f.kind) << " y=" << y << " x=" << x;
            }
}

TEST(NegHess, PositiveAndBoundedOnClampedDomain) {
    for (const FamilySpec& f : kFamilies) {
        double lo = INFINITY, hi = 0;
        for (int k = -300; k <= 300; ++k) {
            const double x = 0.1 * k;
            const double h = neg_hess(0, x, f);
            lo = std::min(lo, h);
            hi = std::max(hi, h);
        }
        EXPECT_GT(lo, 0.0) << to_string(f.kind);
        EXPECT_TRUE(std::isfinite(hi));
        // Beyond the clamp the curvature is frozen at its boundary value.
        EXPECT_EQ(neg_hess(0, 1e4, f), neg_hess(0, f.clamp, f));
        EXPECT_EQ(neg_hess(0, -1e4, f), neg_hess(0, -f.clamp, f));
    }
}

TEST(MeanLink, Values) {
    EXPECT_DOUBLE_EQ(mean_link(1.3, FamilySpec::gaussian()), 1.3);
    EXPECT_DOUBLE_EQ(mean_link(0.0, FamilySpec::poisson()), 1.0);
    EXPECT_DOUBLE_EQ(mean_link(0.0, FamilySpec::bernoulli()), 0.5);
    EXPECT_NEAR(logistic(-800), 0.0, 1e-300);
    EXPECT_DOUBLE_EQ(logistic(800), 1.0);
}

TEST(Sample, GaussianZeroVarianceIsExact) {
    std::mt19937_64 rng(1);
    EXPECT_EQ(sample(1.234, FamilySpec::gaussian(0.0), rng), 1.234);
}

TEST(Sample, PoissonVanishingRate) {
    std::mt19937_64 rng(2);
    const FamilySpec f = FamilySpec::poisson(50.0);
    int nonzero = 0;
    for (int i = 0; i < 1000; ++i) nonzero += sample(-f.clamp, f, rng) != 0.0;
    EXPECT_EQ(nonzero, 0);
}

TEST(Sample, BernoulliMonteCarloMean) {
    std::mt19937_64 rng(3);
    const FamilySpec f = FamilySpec::bernoulli();
    double sum = 0;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) {
        const double y = sample(0.0, f, rng);
        ASSERT_TRUE(y == 0.0 || y == 1.0);
        sum += y;
    }
    EXPECT_NEAR(sum / draws, 0.5, 0.01);
}

TEST(Sample, PoissonMonteCarloMean) {
    std::mt19937_64 rng(4);
    const FamilySpec f = FamilySpec::poisson();
    double sum = 0;
    const int draws = 50000;
    for (int i = 0; i < draws; ++i) sum += sample(1.0, f, rng);
    EXPECT_NEAR(sum / draws, std::exp(1.0), 0.05);
}

TEST(FamilySpec, Validation) {
    EXPECT_NO_THROW(FamilySpec::gaussian(1.0).validate());
    EXPECT_THROW((FamilySpec{FamilyKind::Gaussian, -1.0, 30.0}).validate(), ConfigError);
    EXPECT_THROW((FamilySpec{FamilyKind::Poisson, 2.0, 30.0}).validate(), ConfigError);
    EXPECT_THROW((FamilySpec{FamilyKind::Bernoulli, 1.0, 0.0}).validate(), ConfigError);
    EXPECT_EQ(parse_family_kind("poisson"), FamilyKind::Poisson);
    EXPECT_EQ(to_string(FamilyKind::Bernoulli), "bernoulli");
    EXPECT_THROW(parse_family_kind("gamma"), ConfigError);
}
