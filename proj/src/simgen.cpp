#include "mlsm/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mlsm/error.hpp"
#include "mlsm/inference.hpp"
#include "mlsm/parallel.hpp"

namespace mlsm {

namespace {

Matrix normal_matrix(Index rows, Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Matrix m(rows, cols);
    // Fill column by column so the draw order is fixed by the layout.
    for (Index c = 0; c < cols; ++c)
        for (Index r = 0; r < rows; ++r) m(r, c) = dist(rng);
    return m;
}

Matrix orthonormal_columns(const Matrix& m) {
    Eigen::HouseholderQR<Matrix> qr(m);
    return qr.householderQ() * Matrix::Identity(m.rows(), m.cols());
}

// Latent positions scaled to L'L = n I and centered, plus intercept loadings
// orthogonal to span{1, L}.
void latent_and_intercept(Index n, Index k, Index k_int, std::mt19937_64& rng, Matrix& latent, Matrix& intercept) {
    const Matrix g = normal_matrix(n, k + k_int, rng);
    Matrix head = g.leftCols(k);
    head.rowwise() -= head.colwise().mean();
    latent = std::sqrt(static_cast<double>(n)) * orthonormal_columns(head);
    Matrix rest = g.rightCols(k_int);
    rest.rowwise() -= rest.colwise().mean();
    rest -= latent * (latent.transpose() * rest) / static_cast<double>(n);
    intercept = rest;
}

Matrix time_factors(Index layers, Index k, double scale, std::mt19937_64& rng) {
    if (k == 0) return Matrix(layers, 0);
    const Matrix g = normal_matrix(layers, k, rng);
    Eigen::JacobiSVD<Matrix> svd(g, Eigen::ComputeThinU);
    return svd.matrixU() * (scale * std::sqrt(static_cast<double>(layers)));
}

Vector sorted_diagonal(Index k, double signal, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<double> v(static_cast<std::size_t>(k));
    for (auto& x : v) x = signal * dist(rng);
    std::sort(v.begin(), v.end(), [](double a, double b) { return std::abs(a) > std::abs(b); });
    return Eigen::Map<Vector>(v.data(), k);
}

Tensor3 make_core(const SimConfig& cfg, std::mt19937_64& rng) {
    Tensor3 core(Dims{cfg.k1, cfg.k2, cfg.layers});
    switch (cfg.core) {
        case CoreKind::Random:
            for (Index t = 0; t < cfg.layers; ++t) {
                const Vector d = sorted_diagonal(cfg.k1, cfg.signal, rng);
                for (Index r = 0; r < cfg.k1; ++r) core(r, r, t) = d(r);
            }
            break;
        case CoreKind::Constant: {
            const Vector d = cfg.core_diagonal.empty()
                                 ? sorted_diagonal(cfg.k1, cfg.signal, rng)
                                 : Vector(Eigen::Map<const Vector>(cfg.core_diagonal.data(), cfg.k1));
            for (Index t = 0; t < cfg.layers; ++t)
                for (Index r = 0; r < cfg.k1; ++r) core(r, r, t) = d(r);
            break;
        }
        case CoreKind::Dense: {
            // HOSVD rotation of a Gaussian core makes both M1(S) M1(S)' and
            // M2(S) M2(S)' diagonal with decreasing entries.
            const Matrix g1 = cfg.signal * normal_matrix(cfg.k1, cfg.k2 * cfg.layers, rng);
            const Tensor3 g = refold(g1, Mode::One, core.dims());
            Eigen::JacobiSVD<Matrix> s1(unfold(g, Mode::One), Eigen::ComputeThinU);
            Eigen::JacobiSVD<Matrix> s2(unfold(g, Mode::Two), Eigen::ComputeThinU);
            const Matrix a = s1.matrixU();
            const Matrix b = s2.matrixU();
            for (Index t = 0; t < cfg.layers; ++t) {
                const Matrix slice = a.transpose() * g.slice(t) * b;
                for (Index i = 0; i < cfg.k1; ++i)
                    for (Index j = 0; j < cfg.k2; ++j) core(i, j, t) = slice(i, j);
            }
            break;
        }
    }
    if (cfg.jump_layer >= 0)
        for (Index t = cfg.jump_layer; t < cfg.layers; ++t) core(cfg.jump_i, cfg.jump_j, t) += cfg.jump_size;
    return core;
}

bool distinct_spectrum(const ModelParams& p, double gap) {
    for (Mode m : {Mode::One, Mode::Two}) {
        const FactorPair f = true_pair(p, m);
        Eigen::HouseholderQR<Matrix> qu(f.U);
        Eigen::HouseholderQR<Matrix> qv(f.V);
        const Index d = f.U.cols();
        const Matrix ru = qu.matrixQR().topRows(d).triangularView<Eigen::Upper>();
        const Matrix rv = qv.matrixQR().topRows(d).triangularView<Eigen::Upper>();
        Eigen::JacobiSVD<Matrix> svd(ru * rv.transpose());
        const Vector s = svd.singularValues();
        if (!(s(d - 1) > 0)) return false;
        for (Index j = 0; j + 1 < d; ++j)
            if ((s(j) - s(j + 1)) <= gap * s(j)) return false;
    }
    return true;
}

}  // namespace

void SimConfig::validate() const {
    if (n < 2 || layers < 1) throw ConfigError("simulation needs n >= 2 and T >= 1");
    if (k1 < 1 || k2 < 1 || k_alpha < 0 || k_beta < 0) throw ConfigError("invalid simulation ranks");
    if (k1 + k_beta + 1 > n || k2 + k_alpha + 1 > n) throw ConfigError("ranks too large for n");
    if (k_alpha > layers || k_beta > layers) throw ConfigError("intercept ranks cannot exceed T");
    if (core != CoreKind::Dense && k1 != k2) throw ConfigError("diagonal cores need k1 == k2; use the dense core");
    if (!core_diagonal.empty()) {
        if (core != CoreKind::Constant) throw ConfigError("a fixed core diagonal needs the constant core");
        if (static_cast<Index>(core_diagonal.size()) != k1) throw ConfigError("core diagonal must have k1 entries");
        for (std::size_t r = 1; r < core_diagonal.size(); ++r)
            if (!(std::abs(core_diagonal[r - 1]) > std::abs(core_diagonal[r])))
                throw ConfigError("core diagonal must strictly decrease in magnitude");
        if (!(std::abs(core_diagonal.back()) > 0)) throw ConfigError("core diagonal entries must be nonzero");
    }
    if (jump_layer >= layers) throw ConfigError("jump layer out of range");
    if (jump_layer >= 0 && (jump_i < 0 || jump_i >= k1 || jump_j < 0 || jump_j >= k2))
        throw ConfigError("jump entry out of range");
}

Matrix ModelParams::alpha() const { return u_alpha * v_alpha.transpose(); }
Matrix ModelParams::beta() const { return u_beta * v_beta.transpose(); }

Tensor3 ModelParams::linear_predictor() const { return tucker_linpred(core, theta, phi, alpha(), beta()); }

ModelParams gen_params(const SimConfig& cfg, std::mt19937_64& rng) {
    cfg.validate();
    const Tolerances tol{};
    for (int attempt = 0; attempt < 100; ++attempt) {
        ModelParams p;
        latent_and_intercept(cfg.n, cfg.k1, cfg.k_beta, rng, p.theta, p.u_beta);
        latent_and_intercept(cfg.n, cfg.k2, cfg.k_alpha, rng, p.phi, p.u_alpha);
        p.v_beta = time_factors(cfg.layers, cfg.k_beta, cfg.intercept_scale, rng);
        p.v_alpha = time_factors(cfg.layers, cfg.k_alpha, cfg.intercept_scale, rng);
        p.core = make_core(cfg, rng);
        if (distinct_spectrum(p, tol.gram_gap)) return p;
    }
    throw RankError("gen_params: could not draw parameters with distinct singular values");
}

ModelParams gen_params(Index n, Index layers, Index k1, Index k2, Index k_alpha, Index k_beta, std::mt19937_64& rng) {
    SimConfig cfg;
    cfg.n = n;
    cfg.layers = layers;
    cfg.k1 = k1;
    cfg.k2 = k2;
    cfg.k_alpha = k_alpha;
    cfg.k_beta = k_beta;
    if (k1 != k2) cfg.core = CoreKind::Dense;
    return gen_params(cfg, rng);
}

FactorPair true_pair(const ModelParams& p, Mode mode) {
    const Index n = p.n();
    const Index layers = p.layers();
    const bool one = mode == Mode::One;
    const Matrix& lead = one ? p.theta : p.phi;
    const Matrix& other = one ? p.phi : p.theta;
    const Matrix& u_int = one ? p.u_beta : p.u_alpha;
    const Matrix& v_int = one ? p.v_beta : p.v_alpha;
    const Matrix last = one ? p.alpha() : p.beta();
    const Index k = lead.cols();
    const Index ki = u_int.cols();

    FactorPair f;
    f.mode = mode;
    f.U.resize(n, k + ki + 1);
    f.U << lead, u_int, Vector::Ones(n);
    f.V.resize(n * layers, k + ki + 1);
    for (Index t = 0; t < layers; ++t) {
        auto block = f.V.middleRows(n * t, n);
        const Matrix slice = p.core.slice(t);
        block.leftCols(k) = one ? Matrix(other * slice.transpose()) : Matrix(other * slice);
        for (Index c = 0; c < ki; ++c) block.col(k + c).setConstant(v_int(t, c));
        block.col(k + ki) = last.col(t);
    }
    return f;
}

Tensor3 gen_network(const ModelParams& p, const FamilySpec& f, std::mt19937_64& rng) {
    f.validate();
    const Tensor3 x = p.linear_predictor();
    Tensor3 y(x.dims());
    auto src = x.values();
    auto dst = y.values();
    for (std::size_t k = 0; k < src.size(); ++k) dst[k] = sample(src[k], f, rng);
    return y;
}

double two_to_inf_norm(const Matrix& m) { return m.rows() == 0 ? 0.0 : m.rowwise().norm().maxCoeff(); }

AlignmentResult alignment_errors(const FitResult& fit, const ModelParams& truth, const Vector& r1, const Vector& r2) {
    AlignmentResult a;
    a.r1 = r1;
    a.r2 = r2;
    a.d_theta = two_to_inf_norm(fit.theta - truth.theta * r1.asDiagonal());
    a.d_phi = two_to_inf_norm(fit.phi - truth.phi * r2.asDiagonal());
    double worst = 0;
    for (Index t = 0; t < truth.layers(); ++t) {
        const Matrix diff = Matrix(fit.core.slice(t)) - r1.asDiagonal() * Matrix(truth.core.slice(t)) * r2.asDiagonal();
        worst = std::max(worst, diff.cwiseAbs().maxCoeff());
    }
    a.d_lambda = worst;
    return a;
}

AlignmentResult align_signs(const FitResult& fit, const ModelParams& truth) {
    const Index k1 = truth.theta.cols();
    const Index k2 = truth.phi.cols();
    if (fit.k1() != k1 || fit.k2() != k2 || fit.n != truth.n() || fit.layers != truth.layers())
        throw DimensionError("align_signs: fit and truth have different shapes");
    if (k1 + k2 > 24) throw ConfigError("align_signs: too many sign patterns to enumerate");

    auto pattern = [](Index bits, Index k) {
        Vector r(k);
        for (Index j = 0; j < k; ++j) r(j) = (bits >> j) & 1 ? -1.0 : 1.0;
        return r;
    };
    AlignmentResult best;
    double best_total = std::numeric_limits<double>::infinity();
    for (Index b1 = 0; b1 < (Index{1} << k1); ++b1) {
        const Vector r1 = pattern(b1, k1);
        for (Index b2 = 0; b2 < (Index{1} << k2); ++b2) {
            AlignmentResult a = alignment_errors(fit, truth, r1, pattern(b2, k2));
            const double total = a.d_theta + a.d_phi + a.d_lambda;
            if (total < best_total) {
                best_total = total;
                best = std::move(a);
            }
        }
    }
    return best;
}

CoverageConfig scenario_defaults(FamilyKind kind, Index n, Index layers) {
    CoverageConfig cfg;
    cfg.sim.n = n;
    cfg.sim.layers = layers;
    cfg.sim.k1 = cfg.sim.k2 = 3;
    cfg.sim.k_alpha = cfg.sim.k_beta = 2;
    cfg.fit.k1 = cfg.fit.k2 = 3;
    cfg.fit.k_alpha = cfg.fit.k_beta = 2;
    switch (kind) {
        case FamilyKind::Gaussian:
            cfg.family = FamilySpec::gaussian(1.0);
            cfg.sim.signal = 4.0;
            cfg.sim.intercept_scale = 1.0;
            break;
        case FamilyKind::Poisson:
            cfg.family = FamilySpec::poisson();
            cfg.sim.signal = 1.0;
            cfg.sim.intercept_scale = 0.3;
            break;
        case FamilyKind::Bernoulli:
            cfg.family = FamilySpec::bernoulli();
            cfg.sim.signal = 1.0;
            cfg.sim.intercept_scale = 0.5;
            break;
    }
    return cfg;
}

namespace {

struct RepOutcome {
    bool ok = false;
    std::string message;
    bool hit_theta = false;
    bool hit_phi = false;
    bool hit_lambda = false;
    AlignmentResult align;
};

RepOutcome run_rep(const CoverageConfig& cfg, Index rep) {
    RepOutcome out;
    try {
        std::mt19937_64 rng(cfg.seed + static_cast<std::uint64_t>(rep));
        const ModelParams truth = gen_params(cfg.sim, rng);
        const Tensor3 y = gen_network(truth, cfg.family, rng);
        FitConfig fit_cfg = cfg.fit;
        fit_cfg.threads = 1;
        const FitResult fit = estimate(y, cfg.family, fit_cfg);
        out.align = align_signs(fit, truth);
        const Inference inf(y, fit, cfg.family, fit_cfg.tol);

        const double q = normal_quantile(1.0 - (1.0 - cfg.level) / 2.0);
        auto covers = [q](double est, double se, double target) { return std::abs(est - target) <= q * se; };

        const SandwichCov st = inf.sandwich_row_v(Mode::One, 0);
        const SandwichCov sp = inf.sandwich_row_v(Mode::Two, 0);
        const double var_l = inf.core_variance(0, 0, 0);
        const double r1 = out.align.r1(0);
        const double r2 = out.align.r2(0);
        out.hit_theta = covers(fit.theta(0, 0), std::sqrt(st.sub_block(0, 0)), truth.theta(0, 0) * r1);
        out.hit_phi = covers(fit.phi(0, 0), std::sqrt(sp.sub_block(0, 0)), truth.phi(0, 0) * r2);
        out.hit_lambda = covers(fit.core(0, 0, 0), std::sqrt(var_l), r1 * truth.core(0, 0, 0) * r2);
        out.ok = true;
    } catch (const Error& e) {
        out.message = "rep " + std::to_string(rep) + ": " + e.what();
    }
    return out;
}

}  // namespace

CoverageReport coverage_experiment(const CoverageConfig& cfg) {
    if (cfg.reps < 1) throw ConfigError("coverage needs at least one replication");
    if (!(cfg.level > 0.0 && cfg.level <= 1.0)) throw ConfigError("coverage level must lie in (0, 1]");
    cfg.sim.validate();
    cfg.fit.validate();

    std::vector<RepOutcome> outcomes(static_cast<std::size_t>(cfg.reps));
    parallel_for(cfg.reps, cfg.threads, [&](Index r) { outcomes[static_cast<std::size_t>(r)] = run_rep(cfg, r); });

    CoverageReport report;
    report.scenario = to_string(cfg.family.kind);
    report.n = cfg.sim.n;
    report.layers = cfg.sim.layers;
    report.level = cfg.level;
    CoverageRow theta{"theta_11"}, phi{"phi_11"}, lambda{"lambda1_11"};
    for (Index r = 0; r < cfg.reps; ++r) {
        const RepOutcome& o = outcomes[static_cast<std::size_t>(r)];
        if (!o.ok) {
            ++report.failures;
            report.failure_messages.push_back(o.message);
            continue;
        }
        theta.hits += o.hit_theta;
        phi.hits += o.hit_phi;
        lambda.hits += o.hit_lambda;
        ++theta.trials;
        ++phi.trials;
        ++lambda.trials;
        report.errors.push_back({r, "d_theta", o.align.d_theta});
        report.errors.push_back({r, "d_phi", o.align.d_phi});
        report.errors.push_back({r, "d_lambda", o.align.d_lambda});
    }
    for (CoverageRow* row : {&theta, &phi, &lambda}) {
        if (row->trials > 0) {
            row->coverage = static_cast<double>(row->hits) / static_cast<double>(row->trials);
            row->se = std::sqrt(row->coverage * (1.0 - row->coverage) / static_cast<double>(row->trials));
        }
        report.rows.push_back(*row);
    }
    return report;
}

}  // namespace mlsm
