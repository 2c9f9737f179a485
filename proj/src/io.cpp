#include "mlsm/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mlsm/error.hpp"

namespace mlsm::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little, "binary tensor I/O assumes a little-endian host");

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view s, const std::string& where) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    double v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ParseError(where + ": cannot parse number '" + std::string(s) + "'");
    return v;
}

long long parse_integer(std::string_view s, const std::string& where) {
    const double v = parse_double(s, where);
    if (std::floor(v) != v) throw ParseError(where + ": expected an integer, got '" + std::string(s) + "'");
    return static_cast<long long>(v);
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, mode);
    if (!out) throw ParseError("cannot open " + path.string() + " for writing");
    return out;
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
    std::ifstream in(path, mode);
    if (!in) throw ParseError("cannot open " + path.string());
    return in;
}

const char* kind_name(ValueKind k) {
    switch (k) {
        case ValueKind::Real: return "real";
        case ValueKind::Count: return "count";
        case ValueKind::Binary: return "binary";
    }
    return "real";
}

ValueKind parse_kind(std::string_view s, const std::string& where) {
    if (s == "real") return ValueKind::Real;
    if (s == "count") return ValueKind::Count;
    if (s == "binary") return ValueKind::Binary;
    throw ParseError(where + ": unknown value kind '" + std::string(s) + "'");
}

void write_binary(const fs::path& path, const Tensor3& x, ValueKind kind) {
    std::ofstream out = open_out(path, std::ios::out | std::ios::binary);
    out.write(kMagic, 5);
    const std::uint8_t head[3] = {kFormatVersion, static_cast<std::uint8_t>('B'), static_cast<std::uint8_t>(kind)};
    out.write(reinterpret_cast<const char*>(head), 3);
    const std::uint64_t dims[3] = {static_cast<std::uint64_t>(x.dims().d1), static_cast<std::uint64_t>(x.dims().d2),
                                   static_cast<std::uint64_t>(x.dims().d3)};
    out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    const auto v = x.values();
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!out) throw ParseError("write failed for " + path.string());
}

Tensor3 read_binary(const fs::path& path) {
    std::ifstream in = open_in(path, std::ios::in | std::ios::binary);
    char magic[5];
    std::uint8_t head[3];
    std::uint64_t dims[3];
    in.read(magic, 5);
    in.read(reinterpret_cast<char*>(head), 3);
    in.read(reinterpret_cast<char*>(dims), sizeof(dims));
    if (!in) throw ParseError(path.string() + ": truncated header (offset 0..32)");
    if (std::memcmp(magic, kMagic, 5) != 0) throw ParseError(path.string() + ": bad magic at offset 0");
    if (head[0] != kFormatVersion) throw ParseError(path.string() + ": unsupported version at offset 5");
    if (head[1] != 'B') throw ParseError(path.string() + ": not a binary tensor (offset 6)");
    if (head[2] > 2) throw ParseError(path.string() + ": unknown value kind at offset 7");
    const Dims d{static_cast<Index>(dims[0]), static_cast<Index>(dims[1]), static_cast<Index>(dims[2])};
    if (dims[0] > (1u << 24) || dims[1] > (1u << 24) || dims[2] > (1u << 24))
        throw ParseError(path.string() + ": implausible dimensions at offset 8");
    Tensor3 x(d);
    auto v = x.values();
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!in || in.gcount() != static_cast<std::streamsize>(v.size() * sizeof(double)))
        throw ParseError(path.string() + ": payload shorter than header dims (offset 32)");
    in.peek();
    if (!in.eof()) throw ParseError(path.string() + ": trailing bytes after payload");
    return x;
}

void write_triples(const fs::path& path, const Tensor3& x, ValueKind kind) {
    std::ofstream out = open_out(path);
    const Dims& d = x.dims();
    out << kMagic << " triples " << d.d1 << ' ' << d.d2 << ' ' << d.d3 << ' ' << kind_name(kind) << '\n';
    for (Index t = 0; t < d.d3; ++t)
        for (Index j = 0; j < d.d2; ++j)
            for (Index i = 0; i < d.d1; ++i)
                if (const double v = x(i, j, t); v != 0.0)
                    out << i + 1 << ',' << j + 1 << ',' << t + 1 << ',' << format_double(v) << '\n';
    if (!out) throw ParseError("write failed for " + path.string());
}

Tensor3 read_triples(const fs::path& path) {
    std::ifstream in = open_in(path);
    std::string line;
    std::size_t lineno = 0;
    auto where = [&] { return path.string() + ":" + std::to_string(lineno); };

    Dims d{};
    bool have_header = false;
    while (!have_header && std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream hs(line);
        std::string magic, tag, kind;
        long long a = -1, b = -1, c = -1;
        hs >> magic >> tag >> a >> b >> c >> kind;
        if (magic != kMagic || tag != "triples" || a < 0 || b < 0 || c < 0 || kind.empty())
            throw ParseError(where() + ": malformed header (expected 'MLSM1 triples d1 d2 d3 kind')");
        parse_kind(kind, where());
        d = Dims{a, b, c};
        have_header = true;
    }
    if (!have_header) throw ParseError(path.string() + ": missing header");

    Tensor3 x(d);
    std::vector<bool> seen(static_cast<std::size_t>(d.size()), false);
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#' || line == "\r") continue;
        const auto parts = split(line, ',');
        if (parts.size() != 4) throw ParseError(where() + ": expected 'i,j,t,value'");
        const long long i = parse_integer(parts[0], where());
        const long long j = parse_integer(parts[1], where());
        const long long t = parse_integer(parts[2], where());
        if (i < 1 || i > d.d1 || j < 1 || j > d.d2 || t < 1 || t > d.d3)
            throw ParseError(where() + ": index (" + std::to_string(i) + "," + std::to_string(j) + "," +
                             std::to_string(t) + ") out of range for dims " + std::to_string(d.d1) + "x" +
                             std::to_string(d.d2) + "x" + std::to_string(d.d3));
        const std::size_t flat = static_cast<std::size_t>((i - 1) + d.d1 * ((j - 1) + d.d2 * (t - 1)));
        if (seen[flat]) throw ParseError(where() + ": duplicate entry");
        seen[flat] = true;
        x(i - 1, j - 1, t - 1) = parse_double(parts[3], where());
    }
    return x;
}

TensorFormat sniff(const fs::path& path) {
    std::ifstream in = open_in(path, std::ios::in | std::ios::binary);
    char buf[7] = {};
    in.read(buf, 7);
    if (in.gcount() < 6 || std::memcmp(buf, kMagic, 5) != 0)
        throw ParseError(path.string() + ": not an MLSM1 tensor file (bad magic at offset 0)");
    if (buf[5] == ' ') return TensorFormat::Triples;
    return TensorFormat::Binary;
}

json diagnostics_json(const ModeDiagnostics& d) {
    json j;
    j["converged"] = d.converged;
    j["iterations"] = d.iterations;
    j["final_loglik"] = d.final_loglik;
    j["row_norm_bound"] = d.row_norm_bound;
    j["row_norm_satisfied"] = d.row_norm_satisfied;
    j["boundary_hit"] = d.boundary_hit;
    j["warnings"] = d.warnings;
    json trace = json::array();
    for (const auto& r : d.trace)
        trace.push_back({{"start", r.start}, {"after_u", r.after_u}, {"after_v", r.after_v}, {"end", r.end},
                         {"projected_rows", r.projected_rows}, {"extrapolation", r.extrapolation}});
    j["trace"] = std::move(trace);
    return j;
}

ModeDiagnostics diagnostics_from_json(const json& j) {
    ModeDiagnostics d;
    d.converged = j.at("converged").get<bool>();
    d.iterations = j.at("iterations").get<int>();
    d.final_loglik = j.at("final_loglik").get<double>();
    d.row_norm_bound = j.at("row_norm_bound").get<double>();
    d.row_norm_satisfied = j.at("row_norm_satisfied").get<bool>();
    d.boundary_hit = j.at("boundary_hit").get<bool>();
    d.warnings = j.at("warnings").get<std::vector<std::string>>();
    for (const auto& r : j.value("trace", json::array()))
        d.trace.push_back({r.at("start").get<double>(), r.at("after_u").get<double>(), r.at("after_v").get<double>(),
                           r.at("end").get<double>(), r.at("projected_rows").get<Index>(),
                           r.value("extrapolation", 0.0)});
    return d;
}

std::vector<std::string> numbered(const std::string& prefix, Index k) {
    std::vector<std::string> h;
    for (Index c = 0; c < k; ++c) h.push_back(prefix + std::to_string(c + 1));
    return h;
}

std::vector<Index> one_based(const std::vector<Index>& v) {
    std::vector<Index> out;
    for (Index x : v) out.push_back(x + 1);
    return out;
}

Tolerances tolerances_from_json(const json& j, Tolerances t) {
    t.rank_relative = j.value("rank_relative", t.rank_relative);
    t.selection_tie = j.value("selection_tie", t.selection_tie);
    t.curvature_floor = j.value("curvature_floor", t.curvature_floor);
    t.factor_rank = j.value("factor_rank", t.factor_rank);
    t.gram_gap = j.value("gram_gap", t.gram_gap);
    t.boundary_fraction = j.value("boundary_fraction", t.boundary_fraction);
    return t;
}

json to_json(const Tolerances& t) {
    return json{{"rank_relative", t.rank_relative},     {"selection_tie", t.selection_tie},
                {"curvature_floor", t.curvature_floor}, {"factor_rank", t.factor_rank},
                {"gram_gap", t.gram_gap},               {"boundary_fraction", t.boundary_fraction}};
}

const char* core_kind_name(CoreKind k) {
    switch (k) {
        case CoreKind::Random: return "random";
        case CoreKind::Constant: return "constant";
        case CoreKind::Dense: return "dense";
    }
    return "random";
}

CoreKind parse_core_kind(const std::string& s) {
    if (s == "random") return CoreKind::Random;
    if (s == "constant") return CoreKind::Constant;
    if (s == "dense") return CoreKind::Dense;
    throw ConfigError("unknown core kind '" + s + "' (expected random, constant or dense)");
}

}  // namespace

TensorFormat parse_tensor_format(const std::string& name) {
    if (name == "binary") return TensorFormat::Binary;
    if (name == "triples") return TensorFormat::Triples;
    if (name == "auto") return TensorFormat::Auto;
    throw ConfigError("unknown tensor format '" + name + "' (expected binary, triples or auto)");
}

ValueKind value_kind_for(FamilyKind kind) {
    switch (kind) {
        case FamilyKind::Gaussian: return ValueKind::Real;
        case FamilyKind::Poisson: return ValueKind::Count;
        case FamilyKind::Bernoulli: return ValueKind::Binary;
    }
    return ValueKind::Real;
}

void write_tensor(const fs::path& path, const Tensor3& x, TensorFormat format, ValueKind kind) {
    if (format == TensorFormat::Triples) return write_triples(path, x, kind);
    write_binary(path, x, kind);
}

Tensor3 read_tensor(const fs::path& path, TensorFormat format) {
    if (format == TensorFormat::Auto) format = sniff(path);
    return format == TensorFormat::Triples ? read_triples(path) : read_binary(path);
}

void write_matrix_csv(const fs::path& path, const Matrix& m, const std::vector<std::string>& header) {
    std::ofstream out = open_out(path);
    for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
    out << '\n';
    for (Index r = 0; r < m.rows(); ++r) {
        for (Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << format_double(m(r, c));
        out << '\n';
    }
    if (!out) throw ParseError("write failed for " + path.string());
}

Matrix read_matrix_csv(const fs::path& path) {
    std::ifstream in = open_in(path);
    std::string line;
    std::size_t lineno = 1;
    if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file");
    const Index cols = static_cast<Index>(split(line, ',').size());
    std::vector<double> values;
    Index rows = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto parts = split(line, ',');
        const std::string where = path.string() + ":" + std::to_string(lineno);
        if (static_cast<Index>(parts.size()) != cols) throw ParseError(where + ": wrong number of columns");
        for (auto p : parts) values.push_back(parse_double(p, where));
        ++rows;
    }
    Matrix m(rows, cols);
    for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < cols; ++c) m(r, c) = values[static_cast<std::size_t>(r * cols + c)];
    return m;
}

void write_core_csv(const fs::path& path, const Tensor3& core) {
    std::ofstream out = open_out(path);
    out << "t,i,j,value\n";
    const Dims& d = core.dims();
    for (Index t = 0; t < d.d3; ++t)
        for (Index i = 0; i < d.d1; ++i)
            for (Index j = 0; j < d.d2; ++j)
                out << t + 1 << ',' << i + 1 << ',' << j + 1 << ',' << format_double(core(i, j, t)) << '\n';
}

void write_fit(const fs::path& dir, const FitResult& fit, const FamilySpec& family, const FitConfig& cfg) {
    fs::create_directories(dir);
    write_matrix_csv(dir / "u1.csv", fit.pair1.U, numbered("u", fit.pair1.U.cols()));
    write_matrix_csv(dir / "v1.csv", fit.pair1.V, numbered("v", fit.pair1.V.cols()));
    write_matrix_csv(dir / "u2.csv", fit.pair2.U, numbered("u", fit.pair2.U.cols()));
    write_matrix_csv(dir / "v2.csv", fit.pair2.V, numbered("v", fit.pair2.V.cols()));
    write_matrix_csv(dir / "theta.csv", fit.theta, numbered("theta_", fit.k1()));
    write_matrix_csv(dir / "phi.csv", fit.phi, numbered("phi_", fit.k2()));
    write_core_csv(dir / "core.csv", fit.core);

    json j;
    j["format"] = std::string(kMagic) + "-fit";
    j["n"] = fit.n;
    j["T"] = fit.layers;
    j["k1"] = fit.k1();
    j["k2"] = fit.k2();
    j["d1"] = fit.pair1.rank();
    j["d2"] = fit.pair2.rank();
    j["S1"] = one_based(fit.s1);
    j["S2"] = one_based(fit.s2);
    j["projection_norms1"] = std::vector<double>(fit.proj_norms1.data(), fit.proj_norms1.data() + fit.proj_norms1.size());
    j["projection_norms2"] = std::vector<double>(fit.proj_norms2.data(), fit.proj_norms2.data() + fit.proj_norms2.size());
    j["mode2_core_discrepancy"] = fit.mode2_core_discrepancy;
    j["family"] = to_json(family);
    j["solver"] = {{"max_iters", cfg.max_iters},
                   {"tol_loglik", cfg.tol_loglik},
                   {"newton_damping", cfg.newton_damping},
                   {"row_norm_bound", cfg.row_norm_bound},
                   {"sign_convention", cfg.sign_convention}};
    j["tolerances"] = to_json(cfg.tol);
    j["diagnostics"] = {{"mode1", diagnostics_json(fit.diag1)}, {"mode2", diagnostics_json(fit.diag2)}};
    j["warnings"] = fit.warnings;
    std::ofstream out = open_out(dir / "fit.json");
    out << j.dump(2) << '\n';
}

FitResult read_fit(const fs::path& dir) {
    std::ifstream in = open_in(dir / "fit.json");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError((dir / "fit.json").string() + ": " + e.what());
    }
    FactorPair p1{Mode::One, read_matrix_csv(dir / "u1.csv"), read_matrix_csv(dir / "v1.csv")};
    FactorPair p2{Mode::Two, read_matrix_csv(dir / "u2.csv"), read_matrix_csv(dir / "v2.csv")};
    const Index n = j.at("n").get<Index>();
    const Index layers = j.at("T").get<Index>();
    if (p1.U.rows() != n || p2.U.rows() != n || p1.V.rows() != n * layers || p2.V.rows() != n * layers)
        throw ParseError(dir.string() + ": factor shapes disagree with fit.json");

    auto zero_based = [&](const char* key, Index d) {
        std::vector<Index> v;
        for (Index x : j.at(key).get<std::vector<Index>>()) {
            if (x < 1 || x > d) throw ParseError(dir.string() + ": " + key + " index out of range");
            v.push_back(x - 1);
        }
        return v;
    };
    FitResult fit;
    fit.n = n;
    fit.layers = layers;
    fit.s1 = zero_based("S1", p1.rank());
    fit.s2 = zero_based("S2", p2.rank());
    auto take = [](const Matrix& m, const std::vector<Index>& idx) {
        Matrix out(m.rows(), static_cast<Index>(idx.size()));
        for (std::size_t c = 0; c < idx.size(); ++c) out.col(static_cast<Index>(c)) = m.col(idx[c]);
        return out;
    };
    fit.theta = take(p1.U, fit.s1);
    fit.phi = take(p2.U, fit.s2);
    fit.v1c = take(p1.V, fit.s1);
    fit.v2c = take(p2.V, fit.s2);
    fit.core = fuse_core(fit.v1c, fit.phi, n, layers);
    const auto pn1 = j.at("projection_norms1").get<std::vector<double>>();
    const auto pn2 = j.at("projection_norms2").get<std::vector<double>>();
    fit.proj_norms1 = Eigen::Map<const Vector>(pn1.data(), static_cast<Index>(pn1.size()));
    fit.proj_norms2 = Eigen::Map<const Vector>(pn2.data(), static_cast<Index>(pn2.size()));
    fit.mode2_core_discrepancy = j.at("mode2_core_discrepancy").get<double>();
    fit.diag1 = diagnostics_from_json(j.at("diagnostics").at("mode1"));
    fit.diag2 = diagnostics_from_json(j.at("diagnostics").at("mode2"));
    fit.warnings = j.at("warnings").get<std::vector<std::string>>();
    fit.pair1 = std::move(p1);
    fit.pair2 = std::move(p2);
    return fit;
}

void write_params(const fs::path& dir, const ModelParams& p) {
    fs::create_directories(dir);
    write_matrix_csv(dir / "theta.csv", p.theta, numbered("theta_", p.theta.cols()));
    write_matrix_csv(dir / "phi.csv", p.phi, numbered("phi_", p.phi.cols()));
    write_core_csv(dir / "core.csv", p.core);
    write_matrix_csv(dir / "u_alpha.csv", p.u_alpha, numbered("u_alpha_", p.u_alpha.cols()));
    write_matrix_csv(dir / "v_alpha.csv", p.v_alpha, numbered("v_alpha_", p.v_alpha.cols()));
    write_matrix_csv(dir / "u_beta.csv", p.u_beta, numbered("u_beta_", p.u_beta.cols()));
    write_matrix_csv(dir / "v_beta.csv", p.v_beta, numbered("v_beta_", p.v_beta.cols()));
}

void write_coverage(const fs::path& dir, const CoverageReport& report) {
    fs::create_directories(dir);
    {
        std::ofstream out = open_out(dir / "coverage.csv");
        out << "scenario,n,T,parameter,level,coverage,se,hits,trials,failures\n";
        for (const auto& r : report.rows)
            out << report.scenario << ',' << report.n << ',' << report.layers << ',' << r.parameter << ','
                << format_double(report.level) << ',' << format_double(r.coverage) << ',' << format_double(r.se)
                << ',' << r.hits << ',' << r.trials << ',' << report.failures << '\n';
    }
    std::ofstream out = open_out(dir / "errors.csv");
    out << "scenario,n,T,rep,metric,value\n";
    for (const auto& e : report.errors)
        out << report.scenario << ',' << report.n << ',' << report.layers << ',' << e.rep + 1 << ',' << e.metric
            << ',' << format_double(e.value) << '\n';
}

json to_json(const FamilySpec& f) {
    return json{{"kind", to_string(f.kind)}, {"dispersion", f.dispersion}, {"clamp", f.clamp}};
}

FamilySpec family_from_json(const json& j) {
    FamilySpec f;
    f.kind = parse_family_kind(j.at("kind").get<std::string>());
    f.dispersion = j.value("dispersion", 1.0);
    f.clamp = j.value("clamp", 30.0);
    f.validate();
    return f;
}

void RunConfig::validate() const {
    family.validate();
    fit.validate();
    if (!(level > 0.0 && level <= 1.0)) throw ConfigError("level must lie in (0, 1]");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    if (reps < 1) throw ConfigError("reps must be positive");
    if (threads < 1) throw ConfigError("threads must be positive");
}

RunConfig run_config_from_json(const json& j, RunConfig cfg) {
    try {
        if (j.contains("family")) cfg.family = family_from_json(j.at("family"));
        if (j.contains("ranks")) {
            const json& r = j.at("ranks");
            cfg.fit.k1 = r.value("k1", cfg.fit.k1);
            cfg.fit.k2 = r.value("k2", cfg.fit.k2);
            cfg.fit.k_alpha = r.value("k_alpha", cfg.fit.k_alpha);
            cfg.fit.k_beta = r.value("k_beta", cfg.fit.k_beta);
            cfg.fit.d1 = r.value("d1", cfg.fit.d1);
            cfg.fit.d2 = r.value("d2", cfg.fit.d2);
        }
        if (j.contains("solver")) {
            const json& s = j.at("solver");
            cfg.fit.max_iters = s.value("max_iters", cfg.fit.max_iters);
            cfg.fit.tol_loglik = s.value("tol_loglik", cfg.fit.tol_loglik);
            cfg.fit.newton_damping = s.value("newton_damping", cfg.fit.newton_damping);
            cfg.fit.row_norm_bound = s.value("row_norm_bound", cfg.fit.row_norm_bound);
            cfg.fit.sign_convention = s.value("sign_convention", cfg.fit.sign_convention);
        }
        if (j.contains("tolerances")) cfg.fit.tol = tolerances_from_json(j.at("tolerances"), cfg.fit.tol);
        if (j.contains("simulation")) {
            const json& s = j.at("simulation");
            cfg.sim.n = s.value("n", cfg.sim.n);
            cfg.sim.layers = s.value("T", cfg.sim.layers);
            cfg.sim.signal = s.value("signal", cfg.sim.signal);
            cfg.sim.intercept_scale = s.value("intercept_scale", cfg.sim.intercept_scale);
            if (s.contains("core")) cfg.sim.core = parse_core_kind(s.at("core").get<std::string>());
            if (s.contains("core_diagonal")) cfg.sim.core_diagonal = s.at("core_diagonal").get<std::vector<double>>();
            // 1-based in the file; 0 disables the planted break.
            cfg.sim.jump_layer = s.value("jump_layer", cfg.sim.jump_layer + 1) - 1;
            cfg.sim.jump_i = s.value("jump_i", cfg.sim.jump_i + 1) - 1;
            cfg.sim.jump_j = s.value("jump_j", cfg.sim.jump_j + 1) - 1;
            cfg.sim.jump_size = s.value("jump_size", cfg.sim.jump_size);
        }
        cfg.seed = j.value("seed", cfg.seed);
        cfg.threads = j.value("threads", cfg.threads);
        cfg.level = j.value("level", cfg.level);
        cfg.alpha = j.value("alpha", cfg.alpha);
        cfg.reps = j.value("reps", cfg.reps);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    cfg.fit.seed = cfg.seed;
    cfg.fit.threads = cfg.threads;
    return cfg;
}

json to_json(const RunConfig& cfg) {
    json j;
    j["family"] = to_json(cfg.family);
    j["ranks"] = {{"k1", cfg.fit.k1},           {"k2", cfg.fit.k2},
                  {"k_alpha", cfg.fit.k_alpha}, {"k_beta", cfg.fit.k_beta},
                  {"d1", cfg.fit.mode1_rank()}, {"d2", cfg.fit.mode2_rank()}};
    j["solver"] = {{"max_iters", cfg.fit.max_iters},
                   {"tol_loglik", cfg.fit.tol_loglik},
                   {"newton_damping", cfg.fit.newton_damping},
                   {"row_norm_bound", cfg.fit.row_norm_bound},
                   {"sign_convention", cfg.fit.sign_convention}};
    j["tolerances"] = to_json(cfg.fit.tol);
    j["simulation"] = {{"n", cfg.sim.n},
                       {"T", cfg.sim.layers},
                       {"signal", cfg.sim.signal},
                       {"intercept_scale", cfg.sim.intercept_scale},
                       {"core", core_kind_name(cfg.sim.core)},
                       {"core_diagonal", cfg.sim.core_diagonal},
                       {"jump_layer", cfg.sim.jump_layer + 1},
                       {"jump_i", cfg.sim.jump_i + 1},
                       {"jump_j", cfg.sim.jump_j + 1},
                       {"jump_size", cfg.sim.jump_size}};
    j["seed"] = cfg.seed;
    j["threads"] = cfg.threads;
    j["level"] = cfg.level;
    j["alpha"] = cfg.alpha;
    j["reps"] = cfg.reps;
    return j;
}

RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return run_config_from_json(j);
}

}  // namespace mlsm::io
