#pragma once

#include <string>
#include <vector>

#include "mlsm/factor_mle.hpp"
#include "mlsm/family.hpp"
#include "mlsm/tensor.hpp"

namespace mlsm {

// Output of the unfolding-and-fusion estimator.
struct FitResult {
    Index n = 0;
    Index layers = 0;
    Matrix theta;       // n x k1, columns s1 of pair1.U
    Matrix phi;         // n x k2, columns s2 of pair2.U
    Tensor3 core;       // k1 x k2 x T, slice t is Lambda_t
    Matrix v1c;         // nT x k1, columns s1 of pair1.V
    Matrix v2c;         // nT x k2, columns s2 of pair2.V
    std::vector<Index> s1;  // 0-based, ordered by decreasing V Gram diagonal
    std::vector<Index> s2;
    FactorPair pair1;
    FactorPair pair2;
    ModeDiagnostics diag1;
    ModeDiagnostics diag2;
    Vector proj_norms1;  // s_{1,j}, j in [d1]
    Vector proj_norms2;
    // Max-abs gap between the mode-1 fused core and the mode-2 fusion formula.
    double mode2_core_discrepancy = 0;
    std::vector<std::string> warnings;

    Index k1() const { return theta.cols(); }
    Index k2() const { return phi.cols(); }
    const FactorPair& pair(Mode m) const { return m == Mode::One ? pair1 : pair2; }
    const std::vector<Index>& selected(Mode m) const { return m == Mode::One ? s1 : s2; }
};

struct Selection {
    std::vector<Index> indices;
    Vector norms;
    Index numerical_rank = 0;
    bool tie = false;
};

/// Leading left singular vectors and values of J_n U V' J_{n,T}', computed from
/// the factors without forming the n x nT product.
TruncatedSvd centered_product_svd(const Matrix& u, const Matrix& v, Index layers);

/// Column selection given an orthonormal basis of the centered product's column
/// space (with singular values) and the V Gram diagonal used for ordering.
Selection select_from_basis(const Matrix& u_hat, const Vector& gram_diag, const Matrix& basis, const Vector& values,
                            Index k, const Tolerances& tol = {});

/// Projects the columns of U onto the leading-k column space of the centered
/// product Zc and keeps the k largest projection norms, ordered by decreasing
/// Gram diagonal of the matching V columns. Throws RankError when Zc has
/// numerical rank below k.
Selection select_columns(const Matrix& u_hat, const Matrix& v_hat, const Matrix& zc, Index k,
                         const Tolerances& tol = {});

/// Core tensor whose mode-1 unfolding is V1c' (I_T kron Phi) / n.
Tensor3 fuse_core(const Matrix& v1c, const Matrix& phi, Index n, Index layers);

/// Full estimator: fit both unfoldings, center, select, fuse.
FitResult estimate(const Tensor3& y, const FamilySpec& f, const FitConfig& cfg);

/// Assembles a FitResult from two fitted pairs (the estimator after the solver step).
FitResult assemble_fit(FactorPair pair1, FactorPair pair2, Index k1, Index k2, const Tolerances& tol = {});

}  // namespace mlsm
