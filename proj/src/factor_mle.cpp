#include "mlsm/factor_mle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "mlsm/error.hpp"
#include "mlsm/parallel.hpp"

namespace mlsm {

namespace {

// Per-entry log-likelihood without the y-only normalizing term. Support has
// already been checked by the caller.
inline double loglik_kernel(double y, double x, FamilyKind kind, double dispersion) {
    switch (kind) {
        case FamilyKind::Gaussian: {
            const double r = y - x;
            return -r * r / (2.0 * dispersion);
        }
        case FamilyKind::Poisson: return y * x - std::exp(x);
        case FamilyKind::Bernoulli: return y * x - (x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)));
    }
    return 0.0;
}

double normalizing_constant(const Matrix& y, const FamilySpec& f) {
    switch (f.kind) {
        case FamilyKind::Gaussian:
            return -0.5 * std::log(2.0 * std::numbers::pi * f.dispersion) * static_cast<double>(y.size());
        case FamilyKind::Poisson: {
            double c = 0;
            for (Index k = 0; k < y.size(); ++k) c -= std::lgamma(y.data()[k] + 1.0);
            return c;
        }
        case FamilyKind::Bernoulli: return 0.0;
    }
    return 0.0;
}

void check_all_support(const Matrix& y, const FamilySpec& f) {
    for (Index c = 0; c < y.cols(); ++c)
        for (Index r = 0; r < y.rows(); ++r)
            if (!in_support(y(r, c), f))
                throw DomainError("entry (" + std::to_string(r + 1) + ", " + std::to_string(c + 1) + ") = " +
                                  std::to_string(y(r, c)) + " is outside the " + to_string(f.kind) + " support");
}

struct RowOutcome {
    double loglik = 0;
    bool at_boundary = false;
};

// One damped Newton step for row r of `rows`, holding `fixed` constant. Column r
// of `data` holds the observations paired with that row. The step is halved until
// the row log-likelihood does not decrease and, for bounded families, every
// predictor stays within the clamp.
RowOutcome update_row(Matrix& rows, const Matrix& fixed, const Matrix& data, Index r, const FamilySpec& f,
                      double damping) {
    const auto y = data.col(r);
    const Vector a = rows.row(r).transpose();
    const Vector x = fixed * a;

    double ll0 = 0;
    Vector s(x.size());
    Vector w(x.size());
    for (Index k = 0; k < x.size(); ++k) {
        ll0 += loglik_kernel(y(k), x(k), f.kind, f.dispersion);
        s(k) = score(y(k), x(k), f);
        w(k) = neg_hess(y(k), x(k), f);
    }
    const Vector g = fixed.transpose() * s;
    const Matrix h = fixed.transpose() * w.asDiagonal() * fixed;
    Eigen::LDLT<Matrix> ldlt(h);
    const double bound = f.clamp;
    const double max_x = x.cwiseAbs().maxCoeff();
    RowOutcome out{ll0, f.bounded_domain() && max_x >= bound * 0.999};
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return out;
    const Vector delta = ldlt.solve(g);
    if (!delta.allFinite() || delta.squaredNorm() == 0.0) return out;

    double step = damping;
    for (int attempt = 0; attempt < 40; ++attempt, step *= 0.5) {
        const Vector cand = a + step * delta;
        const Vector xc = fixed * cand;
        if (f.bounded_domain() && xc.cwiseAbs().maxCoeff() > bound) {
            out.at_boundary = true;
            continue;
        }
        double ll = 0;
        for (Index k = 0; k < xc.size(); ++k) ll += loglik_kernel(y(k), xc(k), f.kind, f.dispersion);
        if (std::isfinite(ll) && ll >= ll0) {
            rows.row(r) = cand.transpose();
            out.loglik = ll;
            return out;
        }
    }
    return out;
}

struct HalfSweep {
    double loglik = 0;
    bool boundary = false;
};

HalfSweep half_sweep(Matrix& rows, const Matrix& fixed, const Matrix& data, const FamilySpec& f, double damping,
                     int threads) {
    std::vector<RowOutcome> outcomes(static_cast<std::size_t>(rows.rows()));
    parallel_for(rows.rows(), threads, [&](Index r) {
        outcomes[static_cast<std::size_t>(r)] = update_row(rows, fixed, data, r, f, damping);
    });
    HalfSweep hs;
    for (const auto& o : outcomes) {
        hs.loglik += o.loglik;
        hs.boundary = hs.boundary || o.at_boundary;
    }
    return hs;
}

Index project_rows(Matrix& m, double radius) {
    Index count = 0;
    for (Index r = 0; r < m.rows(); ++r) {
        const double norm = m.row(r).norm();
        if (norm > radius) {
            m.row(r) *= radius / norm;
            ++count;
        }
    }
    return count;
}

bool within_bound(const FactorPair& p, double radius) {
    const double slack = radius * (1.0 + 1e-12);
    return max_row_norm(p.U) <= slack && max_row_norm(p.V) <= slack;
}

}  // namespace

void FitConfig::validate() const {
    if (k1 < 1 || k2 < 1) throw ConfigError("latent ranks k1 and k2 must be at least 1");
    if (k_alpha < 0 || k_beta < 0) throw ConfigError("intercept ranks must be non-negative");
    if (d1 != 0 && d1 != k1 + k_beta + 1)
        throw ConfigError("d1 must equal k1 + k_beta + 1 = " + std::to_string(k1 + k_beta + 1));
    if (d2 != 0 && d2 != k2 + k_alpha + 1)
        throw ConfigError("d2 must equal k2 + k_alpha + 1 = " + std::to_string(k2 + k_alpha + 1));
    if (max_iters < 1) throw ConfigError("max_iters must be positive");
    if (!(tol_loglik > 0)) throw ConfigError("tol_loglik must be positive");
    if (!(newton_damping > 0 && newton_damping <= 1)) throw ConfigError("newton_damping must lie in (0, 1]");
    if (row_norm_bound < 0) throw ConfigError("row_norm_bound must be non-negative");
    if (sign_convention != 1 && sign_convention != -1) throw ConfigError("sign_convention must be +1 or -1");
    if (threads < 1) throw ConfigError("threads must be positive");
}

double max_row_norm(const Matrix& m) { return m.rows() == 0 ? 0.0 : m.rowwise().norm().maxCoeff(); }

TruncatedSvd truncated_svd(const Matrix& a, Index d) {
    const bool wide = a.rows() <= a.cols();
    const Matrix gram = wide ? Matrix(a * a.transpose()) : Matrix(a.transpose() * a);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    const Index m = gram.rows();
    TruncatedSvd out;
    out.values.resize(d);
    Matrix basis(m, d);
    for (Index j = 0; j < d; ++j) {
        const Index src = m - 1 - j;
        out.values(j) = std::sqrt(std::max(0.0, eig.eigenvalues()(src)));
        basis.col(j) = eig.eigenvectors().col(src);
    }
    Matrix other = wide ? Matrix(a.transpose() * basis) : Matrix(a * basis);
    for (Index j = 0; j < d; ++j)
        if (out.values(j) > 0) other.col(j) /= out.values(j);
    if (wide) {
        out.left = std::move(basis);
        out.right = std::move(other);
    } else {
        out.left = std::move(other);
        out.right = std::move(basis);
    }
    return out;
}

Matrix spectral_transform(const Matrix& y, const FamilySpec& f, Index d) {
    switch (f.kind) {
        case FamilyKind::Gaussian: return y;
        case FamilyKind::Poisson: return (y.array() + 0.5).log().matrix();
        case FamilyKind::Bernoulli: {
            // Rank-d smoothing of the +-1 matrix estimates tanh(x/2); invert the link
            // after clipping away from +-1.
            const Matrix signs = (2.0 * y.array() - 1.0).matrix();
            const TruncatedSvd svd = truncated_svd(signs, std::min(d, std::min(y.rows(), y.cols())));
            const Matrix smooth = svd.left * svd.values.asDiagonal() * svd.right.transpose();
            return (2.0 * smooth.array().max(-0.95).min(0.95).atanh()).matrix();
        }
    }
    return y;
}

FactorPair spectral_init(const Matrix& y, const FamilySpec& f, Index d, int sign_convention, const Tolerances& tol) {
    if (d < 1) throw ConfigError("rank must be at least 1");
    if (d > std::min(y.rows(), y.cols()))
        throw RankError("rank " + std::to_string(d) + " exceeds min(rows, cols) of the data");
    const Matrix a = spectral_transform(y, f, d);
    const TruncatedSvd svd = truncated_svd(a, d);
    const double top = svd.values(0);
    if (!(top > 0) || svd.values(d - 1) <= std::sqrt(tol.factor_rank) * top)
        throw RankError("spectral initializer: transform has fewer than " + std::to_string(d) +
                        " non-negligible singular values");
    const double root_n = std::sqrt(static_cast<double>(y.rows()));
    const Matrix u = root_n * svd.left;
    const Matrix v = svd.right * (svd.values / root_n).asDiagonal();
    return normalize_pair(u, v, sign_convention, tol);
}

FactorPair normalize_pair(const Matrix& u, const Matrix& v, int sign_convention, const Tolerances& tol) {
    const Index n = u.rows();
    const Index d = u.cols();
    if (v.cols() != d) throw DimensionError("normalize_pair: U and V have different column counts");
    Eigen::HouseholderQR<Matrix> qr(u);
    const Matrix q = qr.householderQ() * Matrix::Identity(n, d);
    const Matrix r = qr.matrixQR().topRows(d).triangularView<Eigen::Upper>();
    const double rmax = r.diagonal().cwiseAbs().maxCoeff();
    if (!(rmax > 0) || r.diagonal().cwiseAbs().minCoeff() <= tol.factor_rank * rmax)
        throw RankError("normalize_pair: U is column-rank deficient");

    const Matrix w = v * r.transpose();
    Eigen::JacobiSVD<Matrix> svd(w, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double root_n = std::sqrt(static_cast<double>(n));
    FactorPair out;
    out.U = root_n * q * svd.matrixV();
    out.V = svd.matrixU() * (svd.singularValues() / root_n).asDiagonal();

    for (Index j = 0; j < d; ++j) {
        Index arg = 0;
        out.U.col(j).cwiseAbs().maxCoeff(&arg);
        const double s = out.U(arg, j) * sign_convention;
        if (s < 0) {
            out.U.col(j) *= -1.0;
            out.V.col(j) *= -1.0;
        }
    }
    return out;
}

double total_loglik(const Matrix& y, const Matrix& x, const FamilySpec& f) {
    if (y.rows() != x.rows() || y.cols() != x.cols()) throw DimensionError("total_loglik: shape mismatch");
    double sum = 0;
    for (Index c = 0; c < y.cols(); ++c)
        for (Index r = 0; r < y.rows(); ++r) sum += loglik(y(r, c), x(r, c), f);
    return sum;
}

ModeFit fit_mode(const Matrix& y, const FamilySpec& f, Index d, const FitConfig& cfg, Mode mode) {
    f.validate();
    if (f.kind == FamilyKind::Gaussian && !(f.dispersion > 0))
        throw ConfigError("fitting needs a positive gaussian dispersion");
    check_all_support(y, f);

    ModeFit result;
    FactorPair pair = spectral_init(y, f, d, cfg.sign_convention, cfg.tol);
    pair.mode = mode;
    ModeDiagnostics& diag = result.diagnostics;
    diag.row_norm_bound = cfg.row_norm_bound > 0 ? cfg.row_norm_bound
                                                 : 3.0 * std::max(max_row_norm(pair.U), max_row_norm(pair.V));

    const Matrix yt = y.transpose();
    const double constant = normalizing_constant(y, f);
    auto full_loglik = [&](const FactorPair& p) {
        const Matrix x = p.U * p.V.transpose();
        double sum = 0;
        for (Index c = 0; c < y.cols(); ++c)
            for (Index r = 0; r < y.rows(); ++r) sum += loglik_kernel(y(r, c), x(r, c), f.kind, f.dispersion);
        return sum + constant;
    };

    double current = full_loglik(pair);
    if (!std::isfinite(current)) throw DivergedError("non-finite log-likelihood at the spectral start", 0);

    // Extrapolation along the last sweep's direction in identified coordinates.
    // A step is kept only when it is feasible and raises the likelihood, so the
    // trace stays monotone; the factor doubles after each success.
    auto feasible = [&](const FactorPair& p) {
        if (max_row_norm(p.U) > diag.row_norm_bound || max_row_norm(p.V) > diag.row_norm_bound) return false;
        return !f.bounded_domain() || (p.U * p.V.transpose()).cwiseAbs().maxCoeff() <= f.clamp;
    };
    double step = 1.0;

    bool boundary = false;
    for (int it = 1; it <= cfg.max_iters; ++it) {
        SweepRecord rec;
        rec.start = current;
        const FactorPair previous = pair;
        HalfSweep hu = half_sweep(pair.U, pair.V, yt, f, cfg.newton_damping, cfg.threads);
        rec.after_u = hu.loglik + constant;
        HalfSweep hv = half_sweep(pair.V, pair.U, y, f, cfg.newton_damping, cfg.threads);
        rec.after_v = hv.loglik + constant;
        boundary = hu.boundary || hv.boundary;

        // Normalization rotates rows and can push a projected row back over C, so
        // the two steps alternate until both hold (or the attempt budget runs out).
        rec.projected_rows = project_rows(pair.U, diag.row_norm_bound) + project_rows(pair.V, diag.row_norm_bound);
        pair = normalize_pair(pair.U, pair.V, cfg.sign_convention, cfg.tol);
        for (int pass = 0; pass < 50 && rec.projected_rows > 0 && !within_bound(pair, diag.row_norm_bound); ++pass) {
            rec.projected_rows += project_rows(pair.U, diag.row_norm_bound) + project_rows(pair.V, diag.row_norm_bound);
            pair = normalize_pair(pair.U, pair.V, cfg.sign_convention, cfg.tol);
        }
        pair.mode = mode;
        rec.end = rec.projected_rows > 0 ? full_loglik(pair) : rec.after_v;
        if (it > 1 && std::isfinite(rec.end)) {
            try {
                FactorPair trial = normalize_pair(pair.U + step * (pair.U - previous.U),
                                                  pair.V + step * (pair.V - previous.V), cfg.sign_convention, cfg.tol);
                const double value = feasible(trial) ? full_loglik(trial) : -std::numeric_limits<double>::infinity();
                if (value > rec.end) {
                    pair = std::move(trial);
                    pair.mode = mode;
                    rec.end = value;
                    rec.extrapolation = step;
                    step = std::min(2.0 * step, 64.0);
                } else {
                    step = 1.0;
                }
            } catch (const RankError&) {
                step = 1.0;
            }
        }
        diag.trace.push_back(rec);
        diag.iterations = it;
        if (!std::isfinite(rec.end)) throw DivergedError("non-finite log-likelihood", it);

        const double change = std::abs(rec.end - current);
        current = rec.end;
        if (change <= cfg.tol_loglik * std::abs(current)) {
            diag.converged = true;
            break;
        }
    }

    diag.final_loglik = full_loglik(pair);
    if (f.bounded_domain()) {
        const double max_x = (pair.U * pair.V.transpose()).cwiseAbs().maxCoeff();
        if (boundary || max_x >= cfg.tol.boundary_fraction * f.clamp) {
            diag.boundary_hit = true;
            diag.warnings.push_back("linear predictor reached the clamp boundary (max |x| = " +
                                    std::to_string(max_x) + ")");
        }
    }
    diag.row_norm_satisfied = within_bound(pair, diag.row_norm_bound);
    if (!diag.row_norm_satisfied) diag.warnings.push_back("row-norm bound exceeded after normalization");
    if (!diag.converged) diag.warnings.push_back("reached max_iters without meeting tol_loglik");
    result.pair = std::move(pair);
    return result;
}

Vector centered_singular_values(const Matrix& y, Index layers) {
    const CenteringOps ops(y.rows(), layers);
    const Matrix c = two_sided_center(y, ops);
    const Matrix gram = c * c.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
    const Vector ev = eig.eigenvalues().reverse();
    return ev.cwiseMax(0.0).cwiseSqrt();
}

}  // namespace mlsm
