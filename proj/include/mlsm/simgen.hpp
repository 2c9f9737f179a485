#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mlsm/estimate.hpp"
#include "mlsm/family.hpp"
#include "mlsm/tensor.hpp"

namespace mlsm {

enum class CoreKind {
    Random,    // independent diagonal Lambda_t per layer
    Constant,  // one diagonal Lambda shared by all layers
    Dense,     // dense k1 x k2 slices, rotated to an all-orthogonal core
};

struct SimConfig {
    Index n = 100;
    Index layers = 10;
    Index k1 = 2;
    Index k2 = 2;
    Index k_alpha = 1;
    Index k_beta = 1;
    // Scale of the normal draws for the core entries.
    double signal = 4.0;
    // Scale applied to the intercept factors alpha and beta.
    double intercept_scale = 1.0;
    CoreKind core = CoreKind::Random;
    // Fixed diagonal for the constant core, ordered by decreasing magnitude; empty draws it.
    std::vector<double> core_diagonal;
    // Planted break: jump_size is added to core(jump_i, jump_j, t) for every t >= jump_layer.
    Index jump_layer = -1;
    Index jump_i = 0;
    Index jump_j = 0;
    double jump_size = 0.0;

    void validate() const;
};

struct ModelParams {
    Matrix theta;    // n x k1
    Matrix phi;      // n x k2
    Tensor3 core;    // k1 x k2 x T
    Matrix u_alpha;  // n x k_alpha
    Matrix v_alpha;  // T x k_alpha
    Matrix u_beta;   // n x k_beta
    Matrix v_beta;   // T x k_beta

    Matrix alpha() const;  // n x T
    Matrix beta() const;   // n x T
    Tensor3 linear_predictor() const;
    Index n() const { return theta.rows(); }
    Index layers() const { return core.dims().d3; }
};

ModelParams gen_params(const SimConfig& cfg, std::mt19937_64& rng);
ModelParams gen_params(Index n, Index layers, Index k1, Index k2, Index k_alpha, Index k_beta, std::mt19937_64& rng);

/// Observations drawn entrywise from the family around the model's linear predictor.
Tensor3 gen_network(const ModelParams& p, const FamilySpec& f, std::mt19937_64& rng);

struct AlignmentResult {
    Vector r1;  // diagonal of R1, entries +-1
    Vector r2;
    double d_theta = 0;   // ||Theta_hat - Theta R1||_{2->inf}
    double d_phi = 0;     // ||Phi_hat - Phi R2||_{2->inf}
    double d_lambda = 0;  // max_t ||Lambda_hat_t - R1 Lambda_t R2||_max
};

/// Exhaustive search over all 2^(k1+k2) sign patterns minimizing the summed errors.
AlignmentResult align_signs(const FitResult& fit, const ModelParams& truth);
/// Errors for one fixed sign pattern.
AlignmentResult alignment_errors(const FitResult& fit, const ModelParams& truth, const Vector& r1, const Vector& r2);

double two_to_inf_norm(const Matrix& m);

struct CoverageConfig {
    FamilySpec family = FamilySpec::gaussian(1.0);
    SimConfig sim{};
    FitConfig fit{};
    Index reps = 200;
    double level = 0.95;
    std::uint64_t seed = 1;
    int threads = 1;
};

struct CoverageRow {
    std::string parameter;  // theta_11, phi_11, lambda1_11
    Index hits = 0;
    Index trials = 0;
    double coverage = 0;
    double se = 0;  // binomial standard error
};

struct ErrorRecord {
    Index rep = 0;
    std::string metric;  // d_theta, d_phi, d_lambda
    double value = 0;
};

struct CoverageReport {
    std::string scenario;
    Index n = 0;
    Index layers = 0;
    double level = 0.95;
    std::vector<CoverageRow> rows;
    std::vector<ErrorRecord> errors;
    Index failures = 0;
    std::vector<std::string> failure_messages;
};

/// Repeated simulate-fit-align-interval runs; rep r uses seed + r.
CoverageReport coverage_experiment(const CoverageConfig& cfg);

/// Scenario defaults: the ranks used in the coverage tables and a per-family signal scale.
CoverageConfig scenario_defaults(FamilyKind kind, Index n, Index layers);

}  // namespace mlsm

namespace mlsm {

/// Unnormalized factors U_m = [Theta, U_beta, 1], V_m = [(I kron Phi) M1(S)', (I kron 1) V_beta, vec(alpha)]
/// for mode 1, and the symmetric construction for mode 2.
FactorPair true_pair(const ModelParams& p, Mode mode);

}  // namespace mlsm
