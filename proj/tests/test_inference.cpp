#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mlsm/error.hpp"
#include "mlsm/inference.hpp"
#include "mlsm/simgen.hpp"
#include "oracles.hpp"

using namespace mlsm;

namespace {

struct Instance {
    ModelParams truth;
    Tensor3 y;
    FitResult fit;
};

Instance make_instance(const FamilySpec& f, Index n, Index layers, std::uint64_t seed, CoreKind core = CoreKind::Random,
                       double signal = 2.0) {
    std::mt19937_64 rng(seed);
    SimConfig s;
    s.n = n;
    s.layers = layers;
    s.k1 = s.k2 = 2;
    s.k_alpha = s.k_beta = 1;
    s.signal = signal;
    s.intercept_scale = 0.5;
    s.core = core;
    Instance in;
    in.truth = gen_params(s, rng);
    in.y = gen_network(in.truth, f, rng);
    FitConfig cfg;
    cfg.k1 = cfg.k2 = 2;
    cfg.k_alpha = cfg.k_beta = 1;
    in.fit = estimate(in.y, f, cfg);
    return in;
}

// A fit assembled by hand, for closed-form sandwich cases.
FitResult manual_fit(const Matrix& u1, const Matrix& v1, const Matrix& u2, const Matrix& v2, std::vector<Index> s1,
                     std::vector<Index> s2) {
    FitResult fit;
    fit.n = u1.rows();
    fit.layers = v1.rows() / fit.n;
    fit.pair1 = {Mode::One, u1, v1};
    fit.pair2 = {Mode::Two, u2, v2};
    fit.s1 = std::move(s1);
    fit.s2 = std::move(s2);
    auto take = [](const Matrix& m, const std::vector<Index>& idx) {
        Matrix out(m.rows(), static_cast<Index>(idx.size()));
        for (std::size_t c = 0; c < idx.size(); ++c) out.col(static_cast<Index>(c)) = m.col(idx[c]);
        return out;
    };
    fit.theta = take(u1, fit.s1);
    fit.phi = take(u2, fit.s2);
    fit.v1c = take(v1, fit.s1);
    fit.v2c = take(v2, fit.s2);
    fit.core = fuse_core(fit.v1c, fit.phi, fit.n, fit.layers);
    return fit;
}

Matrix sub(const Matrix& m, const std::vector<Index>& idx) {
    Matrix out(idx.size(), idx.size());
    for (std::size_t a = 0; a < idx.size(); ++a)
        for (std::size_t b = 0; b < idx.size(); ++b) out(a, b) = m(idx[a], idx[b]);
    return out;
}

}  // namespace

TEST(Quantiles, KnownValues) {
    EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-12);
    EXPECT_TRUE(std::isinf(normal_quantile(1.0)));
    EXPECT_NEAR(chi_square_quantile(0.95, 2), 5.991464547107979, 1e-10);
}

TEST(Sandwich, MatchesLoopOracleAllFamiliesAndModes) {
    for (const FamilySpec& f : {FamilySpec::gaussian(1.0), FamilySpec::poisson(), FamilySpec::bernoulli()}) {
        const Instance in = make_instance(f, 10, 4, 301, CoreKind::Random, 1.0);
        const Inference inf(in.y, in.fit, f);
        for (Mode m : {Mode::One, Mode::Two}) {
            const FactorPair& p = in.fit.pair(m);
            const Matrix y = oracle::unfold_loop(in.y, static_cast<int>(m));
            const Matrix x = p.U * p.V.transpose();
            for (Index i : {0, 3, 9}) {
                const auto ref = oracle::sandwich_loop(
                    p.V, [&](Index s) { return neg_hess(y(i, s), x(i, s), f); },
                    [&](Index s) { return score(y(i, s), x(i, s), f); });
                const SandwichCov cov = inf.sandwich_row_v(m, i);
                const double scale = std::max(1.0, oracle::max_abs(ref.sigma));
                EXPECT_LT(oracle::max_abs(cov.sigma - ref.sigma), 1e-10 * scale);
                EXPECT_LT(oracle::max_abs(cov.omega - ref.omega), 1e-10 * std::max(1.0, oracle::max_abs(ref.omega)));
                EXPECT_LT(oracle::max_abs(cov.sub_block - sub(ref.cov, in.fit.selected(m))),
                          1e-10 * std::max(1.0, oracle::max_abs(ref.cov)));
                EXPECT_GT(cov.min_eigenvalue, 0.0);
            }
            for (Index j : {0, 7, 39}) {
                const auto ref = oracle::sandwich_loop(
                    p.U, [&](Index s) { return neg_hess(y(s, j), x(s, j), f); },
                    [&](Index s) { return score(y(s, j), x(s, j), f); });
                const SandwichCov cov = inf.sandwich_col_u(m, j);
                EXPECT_LT(oracle::max_abs(cov.sigma - ref.sigma), 1e-10 * std::max(1.0, oracle::max_abs(ref.sigma)));
                EXPECT_LT(oracle::max_abs(cov.sub_block - sub(ref.cov, in.fit.selected(m))),
                          1e-10 * std::max(1.0, oracle::max_abs(ref.cov)));
                Eigen::SelfAdjointEigenSolver<Matrix> eig(cov.sub_block);
                EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-12);
            }
        }
    }
}

TEST(Sandwich, GaussianCollapsesWhenSquaredResidualsEqualVariance) {
    std::mt19937_64 rng(303);
    const Index n = 8, layers = 3, d = 3;
    const double var = 2.0;
    const Matrix u = oracle::random_matrix(n, d, rng);
    const Matrix v = oracle::random_matrix(n * layers, d, rng);
    // Residuals of exactly +-sigma make every squared score 1/var.
    Matrix m1 = u * v.transpose();
    for (Index k = 0; k < m1.size(); ++k) m1.data()[k] += (k % 2 ? 1.0 : -1.0) * std::sqrt(var);
    const Tensor3 y = refold(m1, Mode::One, {n, n, layers});
    const Matrix u2 = oracle::random_matrix(n, d, rng);
    const Matrix v2 = oracle::random_matrix(n * layers, d, rng);
    const FitResult fit = manual_fit(u, v, u2, v2, {0, 1, 2}, {0, 1});
    const Inference inf(y, fit, FamilySpec::gaussian(var));
    for (Index i = 0; i < n; ++i) {
        const SandwichCov cov = inf.sandwich_row_v(Mode::One, i);
        EXPECT_LT(oracle::max_abs(cov.sub_block - var * Matrix(v.transpose() * v).inverse()), 1e-10);
    }
    const SandwichCov col = inf.sandwich_col_u(Mode::One, 5);
    EXPECT_LT(oracle::max_abs(col.sub_block - var * Matrix(u.transpose() * u).inverse()), 1e-10);
}

TEST(Sandwich, ScalarCase) {
    std::mt19937_64 rng(305);
    const Index n = 5, layers = 2;
    const Matrix u = oracle::random_matrix(n, 1, rng);
    const Matrix v = Matrix::Ones(n * layers, 1);
    const Tensor3 y = oracle::random_tensor({n, n, layers}, rng);
    const FitResult fit = manual_fit(u, v, u, v, {0}, {0});
    const Inference inf(y, fit, FamilySpec::gaussian(1.0));
    const Index i = 2;
    const Matrix resid = unfold(y, Mode::One).row(i) - u(i, 0) * v.transpose();
    const double nt = static_cast<double>(n * layers);
    const SandwichCov cov = inf.sandwich_row_v(Mode::One, i);
    EXPECT_NEAR(cov.sigma(0, 0), nt, 1e-12);
    EXPECT_NEAR(cov.omega(0, 0), resid.squaredNorm(), 1e-12);
    EXPECT_NEAR(cov.sub_block(0, 0), resid.squaredNorm() / (nt * nt), 1e-12);
}

TEST(Sandwich, OrthogonalLatentBlockCurvature) {
    std::mt19937_64 rng(307);
    const Index n = 9, layers = 2;
    const double var = 0.5;
    const Matrix q = Eigen::HouseholderQR<Matrix>(oracle::random_matrix(n, 2, rng)).householderQ() *
                     Matrix::Identity(n, 2);
    const Matrix u = std::sqrt(double(n)) * q;
    const Matrix v = oracle::random_matrix(n * layers, 2, rng);
    const Tensor3 y = oracle::random_tensor({n, n, layers}, rng);
    const FitResult fit = manual_fit(u, v, u, v, {0, 1}, {0, 1});
    const Inference inf(y, fit, FamilySpec::gaussian(var));
    const SandwichCov cov = inf.sandwich_col_u(Mode::One, 4);
    EXPECT_LT(oracle::max_abs(cov.sigma - (n / var) * Matrix::Identity(2, 2)), 1e-10);
}

TEST(Sandwich, SingularCurvatureIsConditioningError) {
    const Index n = 4, layers = 2;
    Matrix u(n, 2);
    u << 1, 1, 1, 1, 1, 1, 1, 1;  // identical columns
    const Matrix v = Matrix::Ones(n * layers, 2);
    const FitResult fit = manual_fit(u, v, u, v, {0}, {0});
    const Tensor3 y({n, n, layers});
    const Inference inf(y, fit, FamilySpec::gaussian(1.0));
    EXPECT_THROW(inf.sandwich_col_u(Mode::One, 0), ConditioningError);
    EXPECT_THROW(inf.sandwich_row_v(Mode::One, 0), ConditioningError);
}

TEST(CoreVariance, MatchesProjectedSandwichSumLoop) {
    const FamilySpec f = FamilySpec::poisson();
    const Instance in = make_instance(f, 10, 3, 311, CoreKind::Random, 1.0);
    const Inference inf(in.y, in.fit, f);
    const Index n = in.fit.n;
    for (Index t = 0; t < 3; ++t) {
        const Matrix all = inf.core_variances(t);
        for (Index i = 0; i < 2; ++i)
            for (Index j = 0; j < 2; ++j) {
                double ref = 0;
                for (Index s = 0; s < n; ++s) {
                    const double proj = in.fit.pair2.U(s, in.fit.s2[static_cast<std::size_t>(j)]);
                    ref += proj * proj * inf.sandwich_col_u(Mode::One, s + n * t).sub_block(i, i);
                }
                ref /= double(n * n);
                EXPECT_NEAR(inf.core_variance(i, j, t), ref, 1e-12 * std::max(1.0, ref));
                EXPECT_NEAR(all(i, j), ref, 1e-12 * std::max(1.0, ref));
                EXPECT_GT(ref, 0.0);
            }
    }
}

TEST(CoreVariance, ConstantSummand) {
    // sub_block = c I on every column and unit projections give c / n.
    const Index n = 6, layers = 2;
    const double var = 3.0;
    const Matrix u = Matrix::Ones(n, 1);
    const Matrix v = Matrix::Ones(n * layers, 1);
    Matrix m1 = u * v.transpose();
    for (Index k = 0; k < m1.size(); ++k) m1.data()[k] += (k % 2 ? 1.0 : -1.0) * std::sqrt(var);
    const Tensor3 y = refold(m1, Mode::One, {n, n, layers});
    const FitResult fit = manual_fit(u, v, u, v, {0}, {0});
    const Inference inf(y, fit, FamilySpec::gaussian(var));
    // With u = 1: sub_block = var / n on every column.
    const double c = var / n;
    EXPECT_NEAR(inf.core_variance(0, 0, 1), c / n, 1e-14);
}

TEST(Intervals, PositionUsesNormalQuantile) {
    const FamilySpec f = FamilySpec::gaussian(1.0);
    const Instance in = make_instance(f, 30, 3, 313);
    const Inference inf(in.y, in.fit, f);
    const PositionCI ci = inf.ci_position(Target::Theta, 0, 0.95);
    ASSERT_EQ(ci.estimate.size(), 2);
    EXPECT_NEAR(ci.quantile, 1.959964, 1e-6);
    for (Index r = 0; r < 2; ++r) {
        EXPECT_NEAR(ci.upper(r) - ci.estimate(r), ci.quantile * ci.se(r), 1e-12);
        EXPECT_NEAR(ci.se(r) * ci.se(r), ci.covariance(r, r), 1e-14);
    }
    EXPECT_NEAR(ci.ellipsoid_radius, std::sqrt(5.991464547107979), 1e-9);
    EXPECT_EQ(inf.ci_position(Target::Phi, 3, 0.9).estimate, in.fit.phi.row(3).transpose());
    EXPECT_THROW(inf.ci_position(Target::Theta, 0, 1.5), ConfigError);
    const CoreCI cc = inf.ci_core(1, 0, 2, 0.95);
    EXPECT_NEAR(cc.upper - cc.estimate, 1.959963984540054 * cc.se, 1e-12);
}

TEST(DiffTest, NullDifferenceNeverRejects) {
    const FamilySpec f = FamilySpec::gaussian(1.0);
    Instance in = make_instance(f, 20, 3, 317);
    // Copy layer 0 of the fitted core into layer 2.
    for (Index i = 0; i < 2; ++i)
        for (Index j = 0; j < 2; ++j) in.fit.core(i, j, 2) = in.fit.core(i, j, 0);
    const Inference inf(in.y, in.fit, f);
    const TestResult r = inf.diff_test(0, 1, 2, 0, 0.05);
    EXPECT_EQ(r.delta_hat, 0.0);
    EXPECT_EQ(r.p_value, 1.0);
    EXPECT_FALSE(r.reject);
    EXPECT_THROW(inf.diff_test(0, 0, 1, 1, 0.05), ConfigError);
}

TEST(DiffTest, StatisticDefinition) {
    const FamilySpec f = FamilySpec::gaussian(1.0);
    const Instance in = make_instance(f, 20, 3, 319);
    const Inference inf(in.y, in.fit, f);
    const TestResult r = inf.diff_test(1, 1, 2, 1, 0.05);
    const double se = std::sqrt(inf.core_variance(1, 1, 2) + inf.core_variance(1, 1, 1));
    EXPECT_NEAR(r.delta_hat, in.fit.core(1, 1, 2) - in.fit.core(1, 1, 1), 1e-15);
    EXPECT_NEAR(r.se, se, 1e-14);
    EXPECT_NEAR(r.z, r.delta_hat / se, 1e-12);
    EXPECT_NEAR(r.p_value, std::erfc(std::abs(r.z) / std::sqrt(2.0)), 1e-14);
    EXPECT_EQ(r.reject, std::abs(r.z) > normal_quantile(0.975));
    EXPECT_EQ(r.correction, Correction::None);
}

TEST(LayerTest, BonferroniCriticalValueAndRejectingEntries) {
    const FamilySpec f = FamilySpec::gaussian(1.0);
    Instance in = make_instance(f, 20, 3, 323, CoreKind::Constant);
    in.fit.core(1, 0, 2) += 50.0;
    const Inference inf(in.y, in.fit, f);
    const LayerTestResult lt = inf.layer_test(2, 1, 0.05);
    EXPECT_NEAR(lt.critical_value, normal_quantile(1.0 - 0.05 / 8.0), 1e-12);
    EXPECT_EQ(lt.entries.size(), 4u);
    EXPECT_TRUE(lt.reject);
    ASSERT_FALSE(lt.rejecting.empty());
    EXPECT_NE(std::find(lt.rejecting.begin(), lt.rejecting.end(), std::pair<Index, Index>{1, 0}), lt.rejecting.end());
    for (const auto& e : lt.entries) EXPECT_EQ(e.reject, std::abs(e.z) > lt.critical_value);
}

TEST(LayerTest, SingleEntryEqualsDiffTest) {
    std::mt19937_64 rng(327);
    SimConfig s;
    s.n = 30;
    s.layers = 3;
    s.k1 = s.k2 = 1;
    s.k_alpha = s.k_beta = 1;
    const ModelParams truth = gen_params(s, rng);
    const Tensor3 y = gen_network(truth, FamilySpec::gaussian(1.0), rng);
    FitConfig cfg;
    cfg.k1 = cfg.k2 = 1;
    cfg.k_alpha = cfg.k_beta = 1;
    const FitResult fit = estimate(y, FamilySpec::gaussian(1.0), cfg);
    const Inference inf(y, fit, FamilySpec::gaussian(1.0));
    const LayerTestResult lt = inf.layer_test(1, 0, 0.05);
    const TestResult d = inf.diff_test(0, 0, 1, 0, 0.05);
    EXPECT_EQ(lt.critical_value, normal_quantile(0.975));
    ASSERT_EQ(lt.entries.size(), 1u);
    EXPECT_NEAR(lt.entries[0].z, d.z, 1e-12 * std::max(1.0, std::abs(d.z)));
    EXPECT_EQ(lt.reject, d.reject);
}

TEST(Changepoints, ShortSequences) {
    const FamilySpec f = FamilySpec::gaussian(1.0);
    const Instance two = make_instance(f, 20, 2, 329);
    const ChangepointReport r2 = Inference(two.y, two.fit, f).changepoint_scan(0.05);
    EXPECT_EQ(r2.tests.size(), 1u);
    EXPECT_LE(r2.detected.size(), 1u);
    const Instance one = make_instance(f, 20, 1, 331);
    EXPECT_TRUE(Inference(one.y, one.fit, f).changepoint_scan(0.05).tests.empty());
}

TEST(Changepoints, LargePlantedJumpDetected) {
    std::mt19937_64 rng(333);
    SimConfig s;
    s.n = 60;
    s.layers = 6;
    s.core = CoreKind::Constant;
    s.jump_layer = 3;
    s.jump_size = 3.0;
    const ModelParams truth = gen_params(s, rng);
    const Tensor3 y = gen_network(truth, FamilySpec::gaussian(1.0), rng);
    FitConfig cfg;
    cfg.k1 = cfg.k2 = 2;
    cfg.k_alpha = cfg.k_beta = 1;
    const FitResult fit = estimate(y, FamilySpec::gaussian(1.0), cfg);
    const ChangepointReport rep = Inference(y, fit, FamilySpec::gaussian(1.0)).changepoint_scan(0.05);
    EXPECT_NE(std::find(rep.detected.begin(), rep.detected.end(), 3), rep.detected.end());
    EXPECT_EQ(rep.tests.size(), 5u);
    for (const auto& t : rep.tests) EXPECT_EQ(t.t_prime, t.t - 1);
}

TEST(Sigma0, NoiselessAndFamilyCheck) {
    const Instance in = make_instance(FamilySpec::gaussian(1e-12), 30, 3, 337);
    EXPECT_LT(gaussian_sigma0_hat(in.y, in.fit, FamilySpec::gaussian(1e-12)), 1e-8);
    EXPECT_THROW(gaussian_sigma0_hat(in.y, in.fit, FamilySpec::poisson()), ConfigError);
}

TEST(Sigma0, ResidualMatchesEntrywiseLoop) {
    const FamilySpec f = FamilySpec::gaussian(1.0);
    const Instance in = make_instance(f, 12, 3, 339);
    const Index n = 12, layers = 3;
    const Matrix resid = centered_residual(in.y, in.fit);
    const Matrix jn = oracle::centering(n);
    double sq = 0;
    for (Index t = 0; t < layers; ++t) {
        Matrix yt(n, n);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j) yt(i, j) = in.y(i, j, t);
        Matrix lt(2, 2);
        for (Index a = 0; a < 2; ++a)
            for (Index b = 0; b < 2; ++b) lt(a, b) = in.fit.core(a, b, t);
        const Matrix r = jn * yt * jn - in.fit.theta * lt * in.fit.phi.transpose();
        EXPECT_LT(oracle::max_abs(resid.middleCols(n * t, n) - r), 1e-10);
        sq += r.squaredNorm();
    }
    EXPECT_NEAR(gaussian_sigma0_hat(in.y, in.fit, f), sq / double(n * n * layers), 1e-12);
}

TEST(Sigma0, ConsistentForUnitVariance) {
    for (std::uint64_t seed : {341, 343}) {
        const Instance in = make_instance(FamilySpec::gaussian(1.0), 200, 20, seed, CoreKind::Random, 4.0);
        const double s2 = gaussian_sigma0_hat(in.y, in.fit, FamilySpec::gaussian(1.0));
        EXPECT_GT(s2, 0.9);
        EXPECT_LT(s2, 1.1);
    }
}

TEST(Inference, SignConventionLeavesAbsoluteZUnchanged) {
    std::mt19937_64 rng(347);
    SimConfig s;
    s.n = 40;
    s.layers = 4;
    const ModelParams truth = gen_params(s, rng);
    const Tensor3 y = gen_network(truth, FamilySpec::poisson(), rng);
    FitConfig cfg;
    cfg.k1 = cfg.k2 = 2;
    cfg.k_alpha = cfg.k_beta = 1;
    const FitResult plus = estimate(y, FamilySpec::poisson(), cfg);
    cfg.sign_convention = -1;
    const FitResult minus = estimate(y, FamilySpec::poisson(), cfg);
    const Inference a(y, plus, FamilySpec::poisson());
    const Inference b(y, minus, FamilySpec::poisson());
    for (Index i = 0; i < 2; ++i)
        for (Index j = 0; j < 2; ++j)
            EXPECT_NEAR(std::abs(a.diff_test(i, j, 3, 1, 0.05).z), std::abs(b.diff_test(i, j, 3, 1, 0.05).z), 1e-8);
}
