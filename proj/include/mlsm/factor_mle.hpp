#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mlsm/family.hpp"
#include "mlsm/tensor.hpp"
#include "mlsm/tolerances.hpp"

namespace mlsm {

// Low-rank factors of one unfolding, Z = U V'. In the identified form
// U'U = n I and V'V is diagonal with decreasing entries.
struct FactorPair {
    Mode mode = Mode::One;
    Matrix U;  // n x d
    Matrix V;  // nT x d

    Index rank() const { return U.cols(); }
    Matrix product() const { return U * V.transpose(); }
};

struct FitConfig {
    Index k1 = 0;
    Index k2 = 0;
    Index k_alpha = 0;
    Index k_beta = 0;
    // Mode ranks; 0 means derive as d1 = k1 + k_beta + 1, d2 = k2 + k_alpha + 1.
    Index d1 = 0;
    Index d2 = 0;
    // Row-norm bound C; 0 selects 3x the largest row norm of the spectral initializer.
    double row_norm_bound = 0.0;
    int max_iters = 500;
    double tol_loglik = 1e-8;
    double newton_damping = 1.0;
    std::uint64_t seed = 0;
    // +1: largest-magnitude entry of each U column is positive; -1: negative.
    int sign_convention = 1;
    int threads = 1;
    Tolerances tol{};

    Index mode1_rank() const { return d1 > 0 ? d1 : k1 + k_beta + 1; }
    Index mode2_rank() const { return d2 > 0 ? d2 : k2 + k_alpha + 1; }

    /// Throws ConfigError on inconsistent ranks or solver settings.
    void validate() const;
};

struct SweepRecord {
    double start = 0;    // after the previous normalization
    double after_u = 0;  // after the U half-sweep
    double after_v = 0;  // after the V half-sweep, before projection and normalization
    double end = 0;      // after projection, normalization and any accepted extrapolation
    Index projected_rows = 0;
    double extrapolation = 0;  // accepted extrapolation factor, 0 when none
};

struct ModeDiagnostics {
    bool converged = false;
    int iterations = 0;
    double final_loglik = 0;
    double row_norm_bound = 0;
    bool boundary_hit = false;
    bool row_norm_satisfied = true;
    std::vector<SweepRecord> trace;
    std::vector<std::string> warnings;
};

struct ModeFit {
    FactorPair pair;
    ModeDiagnostics diagnostics;
};

/// Family-specific matrix whose rank-d SVD seeds the solver.
Matrix spectral_transform(const Matrix& y, const FamilySpec& f, Index d);

/// Rank-d truncated SVD of the transform, returned in identified form. Throws
/// RankError when the transform has fewer than d non-negligible singular values.
FactorPair spectral_init(const Matrix& y, const FamilySpec& f, Index d, int sign_convention = 1,
                         const Tolerances& tol = {});

/// Re-expresses (U, V) as the identified representative of U V'. Throws RankError
/// when U is column-rank deficient.
FactorPair normalize_pair(const Matrix& u, const Matrix& v, int sign_convention = 1, const Tolerances& tol = {});

/// Sum of per-entry log-likelihoods of y under linear predictor x.
double total_loglik(const Matrix& y, const Matrix& x, const FamilySpec& f);

/// Constrained maximum likelihood for one unfolding: spectral start, then
/// alternating damped row-wise Newton sweeps with projection and normalization.
ModeFit fit_mode(const Matrix& y, const FamilySpec& f, Index d, const FitConfig& cfg, Mode mode = Mode::One);

/// All singular values of J_n Y J_{n,T}' in decreasing order (scree diagnostic).
Vector centered_singular_values(const Matrix& y, Index layers);

struct TruncatedSvd {
    Matrix left;   // rows x d, orthonormal columns
    Vector values; // decreasing
    Matrix right;  // cols x d, orthonormal columns
};

/// Leading-d singular triplets via the eigendecomposition of the smaller Gram matrix.
TruncatedSvd truncated_svd(const Matrix& a, Index d);

double max_row_norm(const Matrix& m);

}  // namespace mlsm
