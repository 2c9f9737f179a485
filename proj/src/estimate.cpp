#include "mlsm/estimate.hpp"

#include <algorithm>
#include <numeric>

#include "mlsm/error.hpp"

namespace mlsm {

TruncatedSvd centered_product_svd(const Matrix& u, const Matrix& v, Index layers) {
    const Index n = u.rows();
    const CenteringOps ops(n, layers);
    const Matrix uc = ops.left(u);
    const Matrix vc = ops.rows_blockwise(v);
    const Index d = u.cols();

    Eigen::HouseholderQR<Matrix> qu(uc);
    Eigen::HouseholderQR<Matrix> qv(vc);
    const Matrix qu_thin = qu.householderQ() * Matrix::Identity(n, d);
    const Matrix qv_thin = qv.householderQ() * Matrix::Identity(vc.rows(), d);
    const Matrix ru = qu.matrixQR().topRows(d).triangularView<Eigen::Upper>();
    const Matrix rv = qv.matrixQR().topRows(d).triangularView<Eigen::Upper>();

    Eigen::JacobiSVD<Matrix> small(ru * rv.transpose(), Eigen::ComputeFullU | Eigen::ComputeFullV);
    TruncatedSvd out;
    out.left = qu_thin * small.matrixU();
    out.values = small.singularValues();
    out.right = qv_thin * small.matrixV();
    return out;
}

Selection select_from_basis(const Matrix& u_hat, const Vector& gram_diag, const Matrix& basis, const Vector& values,
                            Index k, const Tolerances& tol) {
    const Index d = u_hat.cols();
    if (k < 1 || k > d) throw ConfigError("selection size must lie in [1, d]");
    Selection sel;
    const double top = values.size() > 0 ? values(0) : 0.0;
    for (Index j = 0; j < values.size(); ++j)
        if (top > 0 && values(j) > tol.rank_relative * top) ++sel.numerical_rank;
    if (sel.numerical_rank < k)
        throw RankError("centered product has numerical rank " + std::to_string(sel.numerical_rank) + " < k = " +
                        std::to_string(k));

    const Matrix lead = basis.leftCols(k);
    sel.norms = (lead.transpose() * u_hat).colwise().norm().transpose();

    std::vector<Index> order(static_cast<std::size_t>(d));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return sel.norms(a) > sel.norms(b); });
    if (k < d) {
        const double kth = sel.norms(order[static_cast<std::size_t>(k - 1)]);
        const double next = sel.norms(order[static_cast<std::size_t>(k)]);
        sel.tie = std::abs(kth - next) <= tol.selection_tie;
    }
    sel.indices.assign(order.begin(), order.begin() + k);
    std::stable_sort(sel.indices.begin(), sel.indices.end(),
                     [&](Index a, Index b) { return gram_diag(a) > gram_diag(b); });
    return sel;
}

Selection select_columns(const Matrix& u_hat, const Matrix& v_hat, const Matrix& zc, Index k, const Tolerances& tol) {
    if (zc.rows() != u_hat.rows()) throw DimensionError("select_columns: Zc and U have different row counts");
    Eigen::BDCSVD<Matrix> svd(zc, Eigen::ComputeThinU);
    const Vector gram = v_hat.colwise().squaredNorm().transpose();
    return select_from_basis(u_hat, gram, svd.matrixU(), svd.singularValues(), k, tol);
}

Tensor3 fuse_core(const Matrix& v1c, const Matrix& phi, Index n, Index layers) {
    if (v1c.rows() != n * layers || phi.rows() != n)
        throw DimensionError("fuse_core: V1c must have nT rows and Phi n rows");
    const Matrix m1 = kron_rightmul(v1c, phi) / static_cast<double>(n);
    return refold(m1, Mode::One, Dims{v1c.cols(), phi.cols(), layers});
}

namespace {

Matrix take_columns(const Matrix& m, const std::vector<Index>& idx) {
    Matrix out(m.rows(), static_cast<Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) out.col(static_cast<Index>(j)) = m.col(idx[j]);
    return out;
}

}  // namespace

FitResult assemble_fit(FactorPair pair1, FactorPair pair2, Index k1, Index k2, const Tolerances& tol) {
    FitResult fit;
    fit.n = pair1.U.rows();
    if (fit.n == 0 || pair1.V.rows() % fit.n != 0) throw DimensionError("assemble_fit: V must have nT rows");
    fit.layers = pair1.V.rows() / fit.n;

    auto select = [&](const FactorPair& p, Index k, Vector& norms, const char* label) {
        const TruncatedSvd c = centered_product_svd(p.U, p.V, fit.layers);
        const Vector gram = p.V.colwise().squaredNorm().transpose();
        Selection sel = select_from_basis(p.U, gram, c.left, c.values, k, tol);
        if (sel.tie)
            fit.warnings.push_back(std::string("selection tie in ") + label +
                                   ": k-th and (k+1)-th projection norms coincide; kept the smaller index");
        norms = sel.norms;
        return sel.indices;
    };
    fit.s1 = select(pair1, k1, fit.proj_norms1, "mode 1");
    fit.s2 = select(pair2, k2, fit.proj_norms2, "mode 2");

    fit.theta = take_columns(pair1.U, fit.s1);
    fit.phi = take_columns(pair2.U, fit.s2);
    fit.v1c = take_columns(pair1.V, fit.s1);
    fit.v2c = take_columns(pair2.V, fit.s2);
    fit.core = fuse_core(fit.v1c, fit.phi, fit.n, fit.layers);

    // Symmetric fusion from mode 2, reported only as a consistency check.
    const Matrix m2 = kron_rightmul(fit.v2c, fit.theta) / static_cast<double>(fit.n);
    const Matrix m2_from_core = unfold(fit.core, Mode::Two);
    fit.mode2_core_discrepancy = (m2 - m2_from_core).cwiseAbs().maxCoeff();

    fit.pair1 = std::move(pair1);
    fit.pair2 = std::move(pair2);
    return fit;
}

FitResult estimate(const Tensor3& y, const FamilySpec& f, const FitConfig& cfg) {
    cfg.validate();
    const Dims& d = y.dims();
    if (d.d1 != d.d2) throw DimensionError("estimate: tensor must be n x n x T");
    if (d.d1 < 2 || d.d3 < 1) throw DimensionError("estimate: need n >= 2 and T >= 1");

    ModeFit fit1 = fit_mode(unfold(y, Mode::One), f, cfg.mode1_rank(), cfg, Mode::One);
    ModeFit fit2 = fit_mode(unfold(y, Mode::Two), f, cfg.mode2_rank(), cfg, Mode::Two);

    FitResult fit = assemble_fit(std::move(fit1.pair), std::move(fit2.pair), cfg.k1, cfg.k2, cfg.tol);
    fit.diag1 = std::move(fit1.diagnostics);
    fit.diag2 = std::move(fit2.diagnostics);
    for (const auto& w : fit.diag1.warnings) fit.warnings.push_back("mode 1: " + w);
    for (const auto& w : fit.diag2.warnings) fit.warnings.push_back("mode 2: " + w);
    return fit;
}

}  // namespace mlsm
