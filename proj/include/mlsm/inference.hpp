#pragma once

#include <string>
#include <vector>

#include "mlsm/estimate.hpp"
#include "mlsm/family.hpp"
#include "mlsm/tensor.hpp"

namespace mlsm {

// Plug-in sandwich for one row of Theta/Phi (row form) or one row of V^c (column form).
struct SandwichCov {
    Matrix sigma;      // d x d curvature
    Matrix omega;      // d x d squared-score outer products
    Matrix sub_block;  // k x k block of sigma^-1 omega sigma^-1 at the selected indices
    double min_eigenvalue = 0;
    std::string target;
};

enum class Correction { None, Bonferroni };

struct TestResult {
    Index i = 0;  // core row (0-based)
    Index j = 0;  // core column (0-based)
    double delta_hat = 0;
    double se = 0;
    double z = 0;
    double p_value = 1;
    bool reject = false;
    double alpha = 0.05;
    Correction correction = Correction::None;
};

struct LayerTestResult {
    Index t = 0;
    Index t_prime = 0;
    double alpha = 0.05;
    double critical_value = 0;
    bool reject = false;
    std::vector<TestResult> entries;  // all k1*k2 entries, row-major in (i, j)
    std::vector<std::pair<Index, Index>> rejecting;
};

struct ChangepointReport {
    double alpha = 0.05;
    std::vector<Index> detected;  // 0-based layer indices t with H0(t, t-1) rejected
    std::vector<LayerTestResult> tests;
};

enum class Target { Theta, Phi };

struct PositionCI {
    Target which = Target::Theta;
    Index node = 0;
    double level = 0.95;
    Vector estimate;
    Vector se;
    Vector lower;
    Vector upper;
    double quantile = 0;          // q_{1 - alpha/2}
    double ellipsoid_radius = 0;  // sqrt of the chi-square(k) quantile
    Matrix covariance;
};

struct CoreCI {
    Index i = 0;
    Index j = 0;
    Index t = 0;
    double level = 0.95;
    double estimate = 0;
    double se = 0;
    double lower = 0;
    double upper = 0;
};

/// Standard normal quantile; +inf at p = 1.
double normal_quantile(double p);
double chi_square_quantile(double p, double dof);

// Read-only view over an observed tensor and its fit. Every function here is a
// pure computation over that pair.
class Inference {
public:
    Inference(const Tensor3& y, const FitResult& fit, const FamilySpec& family, const Tolerances& tol = {});

    const FitResult& fit() const { return fit_; }

    /// Sandwich for row i of the mode-m left factor, summing over the nT columns.
    SandwichCov sandwich_row_v(Mode mode, Index i) const;
    /// Sandwich for row j (a column of the unfolding) of the mode-m right factor, summing over n rows.
    SandwichCov sandwich_col_u(Mode mode, Index j) const;

    PositionCI ci_position(Target which, Index node, double level) const;

    /// sigma-hat^2_{i,j,t}.
    double core_variance(Index i, Index j, Index t) const;
    /// sigma-hat^2_{., ., t} for all (i, j) of one layer.
    Matrix core_variances(Index t) const;
    CoreCI ci_core(Index i, Index j, Index t, double level) const;

    TestResult diff_test(Index i, Index j, Index t, Index t_prime, double alpha) const;
    LayerTestResult layer_test(Index t, Index t_prime, double alpha) const;
    ChangepointReport changepoint_scan(double alpha) const;

    /// Observation for row r, column c of the mode-m unfolding.
    double observed(Mode mode, Index r, Index c) const;

private:
    LayerTestResult layer_test_with(Index t, Index t_prime, double alpha, const Matrix& var_t,
                                    const Matrix& var_tp) const;
    Matrix sandwich_inverse(const Matrix& sigma, const Matrix& omega, double& min_eig) const;

    const Tensor3& y_;
    const FitResult& fit_;
    FamilySpec family_;
    Tolerances tol_;
};

/// Mean of squares of J_n Y_t J_n - Theta Lambda_t Phi' over all entries.
double gaussian_sigma0_hat(const Tensor3& y, const FitResult& fit, const FamilySpec& f);

/// The residual tensor used by gaussian_sigma0_hat, in mode-1 unfolded form.
Matrix centered_residual(const Tensor3& y, const FitResult& fit);

}  // namespace mlsm
