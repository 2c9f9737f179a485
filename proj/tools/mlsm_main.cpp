// mlsm: simulate, fit and run inference for multilayer latent space models.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "mlsm/error.hpp"
#include "mlsm/estimate.hpp"
#include "mlsm/inference.hpp"
#include "mlsm/io.hpp"
#include "mlsm/parallel.hpp"
#include "mlsm/simgen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mlsm;

namespace {

// Flag values; unset optionals leave the config file (or the default) alone.
struct Flags {
    std::string config;
    std::optional<std::string> family;
    std::optional<double> dispersion;
    std::optional<double> clamp;
    std::optional<Index> k1, k2, k_alpha, k_beta;
    std::optional<int> max_iters;
    std::optional<double> tol_loglik;
    std::optional<double> row_norm_bound;
    std::optional<int> sign_convention;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<Index> n, layers;
    std::optional<double> signal, intercept_scale;
    std::optional<std::string> core;
    std::optional<Index> jump_layer, jump_i, jump_j;
    std::optional<double> jump_size;
    std::vector<double> core_diagonal;
    std::optional<double> level, alpha;
    std::optional<Index> reps;

    std::string data;
    std::string format = "auto";
    std::string out;
    std::string fit_dir;
    std::string target = "theta";
    Index node = 1;
    Index layer = 1;
};

void add_model_flags(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config, "JSON run configuration")->check(CLI::ExistingFile);
    cmd->add_option("--family", f.family, "gaussian | poisson | bernoulli");
    cmd->add_option("--dispersion", f.dispersion, "Gaussian noise variance");
    cmd->add_option("--clamp", f.clamp, "bound on |x| for Poisson/Bernoulli derivatives");
    cmd->add_option("--k1", f.k1, "latent rank of sending positions");
    cmd->add_option("--k2", f.k2, "latent rank of receiving positions");
    cmd->add_option("--k-alpha", f.k_alpha, "rank of the in-degree intercepts");
    cmd->add_option("--k-beta", f.k_beta, "rank of the out-degree intercepts");
    cmd->add_option("--seed", f.seed, "random seed");
    cmd->add_option("--threads", f.threads, "worker threads (default: MLSM_THREADS or 1)");
}

void add_solver_flags(CLI::App* cmd, Flags& f) {
    cmd->add_option("--max-iters", f.max_iters, "maximum alternating sweeps");
    cmd->add_option("--tol", f.tol_loglik, "relative log-likelihood stopping tolerance");
    cmd->add_option("--row-norm-bound", f.row_norm_bound, "row-norm bound C (0: automatic)");
    cmd->add_option("--sign-convention", f.sign_convention, "+1 or -1")->check(CLI::IsMember({1, -1}));
}

void add_sim_flags(CLI::App* cmd, Flags& f) {
    cmd->add_option("-n,--nodes", f.n, "number of nodes");
    cmd->add_option("-T,--layers", f.layers, "number of layers");
    cmd->add_option("--signal", f.signal, "scale of the core entries");
    cmd->add_option("--intercept-scale", f.intercept_scale, "scale of the degree intercepts");
    cmd->add_option("--core", f.core, "random | constant | dense");
    cmd->add_option("--core-diagonal", f.core_diagonal, "fixed diagonal for the constant core")->delimiter(',');
    cmd->add_option("--jump-layer", f.jump_layer, "first layer (1-based) carrying a planted core jump");
    cmd->add_option("--jump-i", f.jump_i, "core row of the jump (1-based)");
    cmd->add_option("--jump-j", f.jump_j, "core column of the jump (1-based)");
    cmd->add_option("--jump-size", f.jump_size, "size of the planted jump");
}

void add_data_flags(CLI::App* cmd, Flags& f, bool required = true) {
    auto* opt = cmd->add_option("--data", f.data, "observed tensor file");
    if (required) opt->required();
    cmd->add_option("--format", f.format, "binary | triples | auto")->check(CLI::IsMember({"binary", "triples", "auto"}));
}

io::RunConfig resolve(const Flags& f) {
    json file;
    if (!f.config.empty()) {
        std::ifstream in(f.config);
        try {
            in >> file;
        } catch (const json::exception& e) {
            throw ConfigError(f.config + ": " + e.what());
        }
    }

    // Family-specific simulation scales first, so that the file and flags override them.
    FamilyKind kind = FamilyKind::Gaussian;
    if (f.family) kind = parse_family_kind(*f.family);
    else if (file.contains("family")) kind = io::family_from_json(file.at("family")).kind;
    io::RunConfig base;
    const CoverageConfig defaults = scenario_defaults(kind, base.sim.n, base.sim.layers);
    base.family = defaults.family;
    base.sim.signal = defaults.sim.signal;
    base.sim.intercept_scale = defaults.sim.intercept_scale;

    io::RunConfig cfg = f.config.empty() ? base : io::run_config_from_json(file, base);

    if (f.family) cfg.family.kind = kind;
    if (f.family && cfg.family.kind != FamilyKind::Gaussian) cfg.family.dispersion = 1.0;
    if (f.dispersion) cfg.family.dispersion = *f.dispersion;
    if (f.clamp) cfg.family.clamp = *f.clamp;

    if (f.n) cfg.sim.n = *f.n;
    if (f.layers) cfg.sim.layers = *f.layers;
    if (f.signal) cfg.sim.signal = *f.signal;
    if (f.intercept_scale) cfg.sim.intercept_scale = *f.intercept_scale;
    if (f.core) {
        json j = {{"simulation", {{"core", *f.core}}}};
        cfg.sim.core = io::run_config_from_json(j, cfg).sim.core;
    }
    if (f.jump_layer) cfg.sim.jump_layer = *f.jump_layer - 1;
    if (f.jump_i) cfg.sim.jump_i = *f.jump_i - 1;
    if (f.jump_j) cfg.sim.jump_j = *f.jump_j - 1;
    if (f.jump_size) cfg.sim.jump_size = *f.jump_size;
    if (!f.core_diagonal.empty()) cfg.sim.core_diagonal = f.core_diagonal;

    // Ranks apply to both the simulator and the fit unless the file set them apart.
    if (cfg.fit.k1 == 0) cfg.fit.k1 = cfg.sim.k1;
    if (cfg.fit.k2 == 0) cfg.fit.k2 = cfg.sim.k2;
    if (!file.contains("ranks")) {
        cfg.fit.k_alpha = cfg.sim.k_alpha;
        cfg.fit.k_beta = cfg.sim.k_beta;
    }
    if (f.k1) cfg.fit.k1 = cfg.sim.k1 = *f.k1;
    if (f.k2) cfg.fit.k2 = cfg.sim.k2 = *f.k2;
    if (f.k_alpha) cfg.fit.k_alpha = cfg.sim.k_alpha = *f.k_alpha;
    if (f.k_beta) cfg.fit.k_beta = cfg.sim.k_beta = *f.k_beta;

    if (f.max_iters) cfg.fit.max_iters = *f.max_iters;
    if (f.tol_loglik) cfg.fit.tol_loglik = *f.tol_loglik;
    if (f.row_norm_bound) cfg.fit.row_norm_bound = *f.row_norm_bound;
    if (f.sign_convention) cfg.fit.sign_convention = *f.sign_convention;

    if (f.seed) cfg.seed = *f.seed;
    if (std::getenv("MLSM_THREADS")) cfg.threads = default_threads();
    if (f.threads) cfg.threads = *f.threads;
    if (f.level) cfg.level = *f.level;
    if (f.alpha) cfg.alpha = *f.alpha;
    if (f.reps) cfg.reps = *f.reps;

    cfg.fit.seed = cfg.seed;
    cfg.fit.threads = cfg.threads;
    cfg.validate();
    return cfg;
}

Tensor3 load_data(const Flags& f, const FamilySpec& family) {
    Tensor3 y = io::read_tensor(f.data, io::parse_tensor_format(f.format));
    if (y.dims().d1 != y.dims().d2)
        throw DimensionError(f.data + ": expected an n x n x T tensor, got " + std::to_string(y.dims().d1) + " x " +
                             std::to_string(y.dims().d2) + " x " + std::to_string(y.dims().d3));
    for (double v : y.values()) check_support(v, family);
    return y;
}

void write_json(const fs::path& path, const json& j) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    out << j.dump(2) << '\n';
}

// Shortest representation that reads back to the same double.
std::string num(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// A saved bundle when --fit is given, otherwise a fresh fit of the data.
FitResult obtain_fit(const Flags& f, const io::RunConfig& cfg, const Tensor3& y) {
    const FitResult fit = f.fit_dir.empty() ? estimate(y, cfg.family, cfg.fit) : io::read_fit(f.fit_dir);
    if (fit.n != y.dims().d1 || fit.layers != y.dims().d3)
        throw DimensionError("fit bundle dimensions do not match the data");
    return fit;
}

// Writes to the file when a path is given, otherwise to stdout.
class Sink {
public:
    explicit Sink(const std::string& path) {
        if (!path.empty()) {
            const fs::path p(path);
            if (p.has_parent_path()) fs::create_directories(p.parent_path());
            file_.open(p);
            if (!file_) throw ConfigError("cannot open " + path + " for writing");
        }
    }
    std::ostream& out() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

private:
    std::ofstream file_;
};

int run_simulate(const Flags& f) {
    const io::RunConfig cfg = resolve(f);
    cfg.sim.validate();
    std::mt19937_64 rng(cfg.seed);
    const ModelParams truth = gen_params(cfg.sim, rng);
    const Tensor3 y = gen_network(truth, cfg.family, rng);
    const fs::path dir = f.out.empty() ? fs::path("sim") : fs::path(f.out);
    const io::TensorFormat fmt =
        f.format == "triples" ? io::TensorFormat::Triples : io::TensorFormat::Binary;
    const fs::path data = dir / (fmt == io::TensorFormat::Triples ? "y.txt" : "y.mlsm");
    io::write_tensor(data, y, fmt, io::value_kind_for(cfg.family.kind));
    io::write_params(dir / "truth", truth);
    write_json(dir / "config.json", io::to_json(cfg));
    std::cout << data.string() << '\n';
    return 0;
}

int run_fit(const Flags& f) {
    const io::RunConfig cfg = resolve(f);
    const Tensor3 y = load_data(f, cfg.family);
    const FitResult fit = estimate(y, cfg.family, cfg.fit);
    const fs::path dir = f.out.empty() ? fs::path("fit") : fs::path(f.out);
    io::write_fit(dir, fit, cfg.family, cfg.fit);
    for (const auto& w : fit.warnings) std::cerr << "warning: " << w << '\n';
    if (!fit.diag1.converged || !fit.diag2.converged) {
        std::cerr << "error: solver did not converge within " << cfg.fit.max_iters << " sweeps\n";
        return static_cast<int>(ExitCode::Convergence);
    }
    return 0;
}

int run_infer(const Flags& f) {
    const io::RunConfig cfg = resolve(f);
    const Tensor3 y = load_data(f, cfg.family);
    const FitResult fit = obtain_fit(f, cfg, y);
    const Inference inf(y, fit, cfg.family, cfg.fit.tol);
    Sink sink(f.out);
    std::ostream& out = sink.out();

    if (f.target == "theta" || f.target == "phi") {
        const Target which = f.target == "theta" ? Target::Theta : Target::Phi;
        if (f.node < 1 || f.node > fit.n) throw ConfigError("--node must lie in [1, n]");
        const PositionCI ci = inf.ci_position(which, f.node - 1, cfg.level);
        out << "target,node,dim,level,estimate,se,lower,upper\n";
        for (Index r = 0; r < ci.estimate.size(); ++r)
            out << f.target << ',' << f.node << ',' << r + 1 << ',' << num(cfg.level) << ',' << num(ci.estimate(r))
                << ',' << num(ci.se(r)) << ',' << num(ci.lower(r)) << ',' << num(ci.upper(r)) << '\n';
    } else {
        if (f.layer < 1 || f.layer > fit.layers) throw ConfigError("--layer must lie in [1, T]");
        out << "target,t,i,j,level,estimate,se,lower,upper\n";
        for (Index i = 0; i < fit.k1(); ++i)
            for (Index j = 0; j < fit.k2(); ++j) {
                const CoreCI ci = inf.ci_core(i, j, f.layer - 1, cfg.level);
                out << "core," << f.layer << ',' << i + 1 << ',' << j + 1 << ',' << num(cfg.level) << ','
                    << num(ci.estimate) << ',' << num(ci.se) << ',' << num(ci.lower) << ',' << num(ci.upper) << '\n';
            }
    }
    if (cfg.family.kind == FamilyKind::Gaussian)
        std::cerr << "sigma0^2 estimate: " << num(gaussian_sigma0_hat(y, fit, cfg.family)) << '\n';
    return 0;
}

int run_changepoints(const Flags& f) {
    const io::RunConfig cfg = resolve(f);
    const Tensor3 y = load_data(f, cfg.family);
    const FitResult fit = obtain_fit(f, cfg, y);
    const Inference inf(y, fit, cfg.family, cfg.fit.tol);
    const ChangepointReport rep = inf.changepoint_scan(cfg.alpha);

    const fs::path dir = f.out.empty() ? fs::path("changepoints") : fs::path(f.out);
    fs::create_directories(dir);
    std::ofstream tests(dir / "tests.csv");
    tests << "t,t_prime,i,j,delta_hat,se,z,p_value,critical_value,reject\n";
    for (const auto& lt : rep.tests)
        for (const auto& e : lt.entries)
            tests << lt.t + 1 << ',' << lt.t_prime + 1 << ',' << e.i + 1 << ',' << e.j + 1 << ','
                  << num(e.delta_hat) << ',' << num(e.se) << ',' << num(e.z) << ',' << num(e.p_value) << ','
                  << num(lt.critical_value) << ',' << (e.reject ? 1 : 0) << '\n';
    std::ofstream det(dir / "detected.csv");
    det << "t\n";
    for (Index t : rep.detected) {
        det << t + 1 << '\n';
        std::cout << t + 1 << '\n';
    }
    return 0;
}

int run_coverage(const Flags& f) {
    const io::RunConfig cfg = resolve(f);
    CoverageConfig cc;
    cc.family = cfg.family;
    cc.sim = cfg.sim;
    cc.fit = cfg.fit;
    cc.reps = cfg.reps;
    cc.level = cfg.level;
    cc.seed = cfg.seed;
    cc.threads = cfg.threads;
    const CoverageReport report = coverage_experiment(cc);
    const fs::path dir = f.out.empty() ? fs::path("coverage") : fs::path(f.out);
    io::write_coverage(dir, report);
    write_json(dir / "config.json", io::to_json(cfg));
    for (const auto& r : report.rows)
        std::cout << r.parameter << ' ' << num(r.coverage) << " (se " << num(r.se) << ", " << r.trials << " reps)\n";
    if (report.failures > 0) std::cerr << report.failures << " replications failed\n";
    return 0;
}

int run_scree(const Flags& f) {
    const io::RunConfig cfg = resolve(f);
    const Tensor3 y = load_data(f, cfg.family);
    Sink sink(f.out);
    std::ostream& out = sink.out();
    out << "mode,index,value\n";
    for (Mode m : {Mode::One, Mode::Two}) {
        const Vector s = centered_singular_values(unfold(y, m), y.dims().d3);
        for (Index r = 0; r < s.size(); ++r)
            out << static_cast<int>(m) << ',' << r + 1 << ',' << num(s(r)) << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multilayer latent space model estimation and inference"};
    app.require_subcommand(1);
    Flags f;

    auto* sim = app.add_subcommand("simulate", "draw a network and its ground truth");
    add_model_flags(sim, f);
    add_sim_flags(sim, f);
    sim->add_option("--out", f.out, "output directory (default: sim)");
    sim->add_option("--format", f.format, "binary | triples")->check(CLI::IsMember({"binary", "triples", "auto"}));

    auto* fit = app.add_subcommand("fit", "estimate latent positions and the core tensor");
    add_model_flags(fit, f);
    add_solver_flags(fit, f);
    add_data_flags(fit, f);
    fit->add_option("--out", f.out, "output directory (default: fit)");

    auto* infer = app.add_subcommand("infer", "confidence intervals for positions or core entries");
    add_model_flags(infer, f);
    add_data_flags(infer, f);
    infer->add_option("--fit", f.fit_dir, "fit bundle directory; omitted means fit the data now");
    infer->add_option("--target", f.target, "theta | phi | core")->check(CLI::IsMember({"theta", "phi", "core"}));
    infer->add_option("--node", f.node, "node (1-based) for theta/phi");
    infer->add_option("--layer", f.layer, "layer (1-based) for core");
    infer->add_option("--level", f.level, "confidence level");
    infer->add_option("--out", f.out, "CSV output file (default: stdout)");

    auto* cp = app.add_subcommand("changepoints", "scan consecutive layers for changes in the core");
    add_model_flags(cp, f);
    add_data_flags(cp, f);
    cp->add_option("--fit", f.fit_dir, "fit bundle directory; omitted means fit the data now");
    cp->add_option("--alpha", f.alpha, "family-wise level per layer pair");
    cp->add_option("--out", f.out, "output directory (default: changepoints)");

    auto* cov = app.add_subcommand("coverage", "Monte Carlo coverage of the confidence intervals");
    add_model_flags(cov, f);
    add_solver_flags(cov, f);
    add_sim_flags(cov, f);
    cov->add_option("--reps", f.reps, "replications");
    cov->add_option("--level", f.level, "confidence level");
    cov->add_option("--out", f.out, "output directory (default: coverage)");

    auto* scree = app.add_subcommand("scree", "singular values of the two-sided-centered unfoldings");
    add_model_flags(scree, f);
    add_data_flags(scree, f);
    scree->add_option("--out", f.out, "CSV output file (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(ExitCode::Config);
    }

    try {
        if (sim->parsed()) return run_simulate(f);
        if (fit->parsed()) return run_fit(f);
        if (infer->parsed()) return run_infer(f);
        if (cp->parsed()) return run_changepoints(f);
        if (cov->parsed()) return run_coverage(f);
        if (scree->parsed()) return run_scree(f);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::Data);
    }
    return 0;
}
