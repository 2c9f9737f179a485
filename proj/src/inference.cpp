#include "mlsm/inference.hpp"

#include <cmath>
#include <limits>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "mlsm/error.hpp"

namespace mlsm {

double normal_quantile(double p) {
    if (p >= 1.0) return std::numeric_limits<double>::infinity();
    if (p <= 0.0) return -std::numeric_limits<double>::infinity();
    return boost::math::quantile(boost::math::normal_distribution<double>(0.0, 1.0), p);
}

double chi_square_quantile(double p, double dof) {
    if (p >= 1.0) return std::numeric_limits<double>::infinity();
    if (p <= 0.0) return 0.0;
    return boost::math::quantile(boost::math::chi_squared_distribution<double>(dof), p);
}

namespace {

double two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

Matrix select_block(const Matrix& m, const std::vector<Index>& idx) {
    const Index k = static_cast<Index>(idx.size());
    Matrix out(k, k);
    for (Index a = 0; a < k; ++a)
        for (Index b = 0; b < k; ++b) out(a, b) = m(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
    return out;
}

void check_level(double level) {
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must lie in (0, 1)");
}

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
}

}  // namespace

Inference::Inference(const Tensor3& y, const FitResult& fit, const FamilySpec& family, const Tolerances& tol)
    : y_(y), fit_(fit), family_(family), tol_(tol) {
    const Dims& d = y.dims();
    if (d.d1 != fit.n || d.d2 != fit.n || d.d3 != fit.layers)
        throw DimensionError("Inference: tensor dimensions do not match the fit");
    if (family_.kind == FamilyKind::Gaussian && !(family_.dispersion > 0))
        throw ConfigError("inference needs a positive gaussian dispersion");
}

double Inference::observed(Mode mode, Index r, Index c) const {
    const Index n = fit_.n;
    return mode == Mode::One ? y_(r, c % n, c / n) : y_(c % n, r, c / n);
}

Matrix Inference::sandwich_inverse(const Matrix& sigma, const Matrix& omega, double& min_eig) const {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma);
    min_eig = eig.eigenvalues().minCoeff();
    const double floor = tol_.curvature_floor * sigma.trace();
    if (!(min_eig > floor))
        throw ConditioningError("curvature matrix is singular (min eigenvalue " + std::to_string(min_eig) + ")", min_eig);
    const Matrix inv = eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
    Matrix out = inv * omega * inv;
    return 0.5 * (out + out.transpose());
}

SandwichCov Inference::sandwich_row_v(Mode mode, Index i) const {
    if (i < 0 || i >= fit_.n) throw ConfigError("node index out of range");
    const FactorPair& p = fit_.pair(mode);
    const Vector x = p.V * p.U.row(i).transpose();
    Vector w(x.size());
    Vector s2(x.size());
    for (Index s = 0; s < x.size(); ++s) {
        const double y = observed(mode, i, s);
        w(s) = neg_hess(y, x(s), family_);
        const double sc = score(y, x(s), family_);
        s2(s) = sc * sc;
    }
    SandwichCov out;
    out.sigma = p.V.transpose() * w.asDiagonal() * p.V;
    out.omega = p.V.transpose() * s2.asDiagonal() * p.V;
    const Matrix full = sandwich_inverse(out.sigma, out.omega, out.min_eigenvalue);
    out.sub_block = select_block(full, fit_.selected(mode));
    out.target = std::string(mode == Mode::One ? "theta" : "phi") + " row " + std::to_string(i + 1);
    return out;
}

SandwichCov Inference::sandwich_col_u(Mode mode, Index j) const {
    const FactorPair& p = fit_.pair(mode);
    if (j < 0 || j >= p.V.rows()) throw ConfigError("column index out of range");
    const Vector x = p.U * p.V.row(j).transpose();
    Vector w(x.size());
    Vector s2(x.size());
    for (Index s = 0; s < x.size(); ++s) {
        const double y = observed(mode, s, j);
        w(s) = neg_hess(y, x(s), family_);
        const double sc = score(y, x(s), family_);
        s2(s) = sc * sc;
    }
    SandwichCov out;
    out.sigma = p.U.transpose() * w.asDiagonal() * p.U;
    out.omega = p.U.transpose() * s2.asDiagonal() * p.U;
    const Matrix full = sandwich_inverse(out.sigma, out.omega, out.min_eigenvalue);
    out.sub_block = select_block(full, fit_.selected(mode));
    out.target = std::string("v") + (mode == Mode::One ? "1" : "2") + "c row " + std::to_string(j + 1);
    return out;
}

PositionCI Inference::ci_position(Target which, Index node, double level) const {
    check_level(level);
    const Mode mode = which == Target::Theta ? Mode::One : Mode::Two;
    const SandwichCov cov = sandwich_row_v(mode, node);
    PositionCI ci;
    ci.which = which;
    ci.node = node;
    ci.level = level;
    ci.estimate = (which == Target::Theta ? fit_.theta : fit_.phi).row(node).transpose();
    ci.covariance = cov.sub_block;
    ci.se = cov.sub_block.diagonal().cwiseMax(0.0).cwiseSqrt();
    ci.quantile = normal_quantile(1.0 - (1.0 - level) / 2.0);
    ci.lower = ci.estimate - ci.quantile * ci.se;
    ci.upper = ci.estimate + ci.quantile * ci.se;
    ci.ellipsoid_radius = std::sqrt(chi_square_quantile(level, static_cast<double>(ci.estimate.size())));
    return ci;
}

Matrix Inference::core_variances(Index t) const {
    if (t < 0 || t >= fit_.layers) throw ConfigError("layer index out of range");
    const Index n = fit_.n;
    const Index k1 = fit_.k1();
    Matrix diag(n, k1);
    for (Index s = 0; s < n; ++s)
        diag.row(s) = sandwich_col_u(Mode::One, s + n * t).sub_block.diagonal().transpose();
    const Matrix phi_sq = fit_.phi.array().square().matrix();
    return diag.transpose() * phi_sq / static_cast<double>(n * n);
}

double Inference::core_variance(Index i, Index j, Index t) const {
    if (i < 0 || i >= fit_.k1() || j < 0 || j >= fit_.k2()) throw ConfigError("core index out of range");
    if (t < 0 || t >= fit_.layers) throw ConfigError("layer index out of range");
    const Index n = fit_.n;
    double sum = 0;
    for (Index s = 0; s < n; ++s) {
        const double proj = fit_.phi(s, j);
        sum += proj * proj * sandwich_col_u(Mode::One, s + n * t).sub_block(i, i);
    }
    return sum / static_cast<double>(n * n);
}

CoreCI Inference::ci_core(Index i, Index j, Index t, double level) const {
    check_level(level);
    CoreCI ci;
    ci.i = i;
    ci.j = j;
    ci.t = t;
    ci.level = level;
    ci.estimate = fit_.core(i, j, t);
    ci.se = std::sqrt(core_variance(i, j, t));
    const double q = normal_quantile(1.0 - (1.0 - level) / 2.0);
    ci.lower = ci.estimate - q * ci.se;
    ci.upper = ci.estimate + q * ci.se;
    return ci;
}

namespace {

TestResult make_test(Index i, Index j, double delta, double var, double alpha, double critical, Correction c) {
    TestResult r;
    r.i = i;
    r.j = j;
    r.delta_hat = delta;
    r.se = std::sqrt(var);
    r.z = delta == 0.0 ? 0.0 : delta / r.se;
    r.p_value = two_sided_p(r.z);
    r.reject = std::abs(r.z) > critical;
    r.alpha = alpha;
    r.correction = c;
    return r;
}

}  // namespace

TestResult Inference::diff_test(Index i, Index j, Index t, Index t_prime, double alpha) const {
    check_alpha(alpha);
    if (t == t_prime) throw ConfigError("diff_test needs two distinct layers");
    const double var = core_variance(i, j, t) + core_variance(i, j, t_prime);
    const double delta = fit_.core(i, j, t) - fit_.core(i, j, t_prime);
    return make_test(i, j, delta, var, alpha, normal_quantile(1.0 - alpha / 2.0), Correction::None);
}

LayerTestResult Inference::layer_test_with(Index t, Index t_prime, double alpha, const Matrix& var_t,
                                           const Matrix& var_tp) const {
    const Index k1 = fit_.k1();
    const Index k2 = fit_.k2();
    LayerTestResult out;
    out.t = t;
    out.t_prime = t_prime;
    out.alpha = alpha;
    out.critical_value = normal_quantile(1.0 - alpha / (2.0 * static_cast<double>(k1 * k2)));
    for (Index i = 0; i < k1; ++i) {
        for (Index j = 0; j < k2; ++j) {
            const double delta = fit_.core(i, j, t) - fit_.core(i, j, t_prime);
            TestResult r = make_test(i, j, delta, var_t(i, j) + var_tp(i, j), alpha, out.critical_value,
                                     Correction::Bonferroni);
            if (r.reject) out.rejecting.emplace_back(i, j);
            out.entries.push_back(r);
        }
    }
    out.reject = !out.rejecting.empty();
    return out;
}

LayerTestResult Inference::layer_test(Index t, Index t_prime, double alpha) const {
    check_alpha(alpha);
    if (t == t_prime) throw ConfigError("layer_test needs two distinct layers");
    return layer_test_with(t, t_prime, alpha, core_variances(t), core_variances(t_prime));
}

ChangepointReport Inference::changepoint_scan(double alpha) const {
    check_alpha(alpha);
    ChangepointReport report;
    report.alpha = alpha;
    if (fit_.layers < 2) return report;
    Matrix previous = core_variances(0);
    for (Index t = 1; t < fit_.layers; ++t) {
        Matrix current = core_variances(t);
        LayerTestResult r = layer_test_with(t, t - 1, alpha, current, previous);
        if (r.reject) report.detected.push_back(t);
        report.tests.push_back(std::move(r));
        previous = std::move(current);
    }
    return report;
}

Matrix centered_residual(const Tensor3& y, const FitResult& fit) {
    const Index n = fit.n;
    const CenteringOps ops(n, fit.layers);
    Matrix out = two_sided_center(y.mode1(), ops);
    for (Index t = 0; t < fit.layers; ++t)
        out.middleCols(n * t, n) -= fit.theta * fit.core.slice(t) * fit.phi.transpose();
    return out;
}

double gaussian_sigma0_hat(const Tensor3& y, const FitResult& fit, const FamilySpec& f) {
    if (f.kind != FamilyKind::Gaussian) throw ConfigError("noise-variance estimation is defined for the gaussian family only");
    const Matrix r = centered_residual(y, fit);
    return r.squaredNorm() / static_cast<double>(r.size());
}

}  // namespace mlsm
