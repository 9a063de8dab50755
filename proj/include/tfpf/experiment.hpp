#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "json.hpp"
#include "tfpf/diagnostics.hpp"
#include "tfpf/fractional_kernels.hpp"
#include "tfpf/io.hpp"
#include "tfpf/kernel_oracle.hpp"
#include "tfpf/krylov.hpp"
#include "tfpf/models.hpp"
#include "tfpf/spectral_domain.hpp"
#include "tfpf/temporal_mesh.hpp"

namespace tfpf {

enum ExitCode : int { kSuccess = 0, kConfigError = 2, kSolverFailure = 3, kVerificationFailure = 4 };

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Configuration

/// Recognised keys and their defaults. An empty default means "unset".
inline const std::vector<std::pair<std::string, std::string>>& config_schema() {
    static const std::vector<std::pair<std::string, std::string>> keys = {
        {"model", "tfac"},   {"alpha", "0.4"},    {"sigma", "0.6"},    {"gamma", ""},       {"N", "8,16,32,64"},
        {"grid", "64"},      {"Lx", "2pi"},       {"Ly", "2pi"},       {"T", "1"},          {"M", "0.01"},
        {"epsilon", ""},     {"g", "1"},          {"delta", "0.2"},    {"S", "2"},          {"lambda", "100"},
        {"tau_min", "1e-3"}, {"tau_max", "0.5"},  {"mesh", "graded"},  {"tol", "1e-12"},    {"seed", "1"},
        {"snapshot_times", ""}, {"out_dir", "out"},
    };
    return keys;
}

inline bool is_config_key(const std::string& key) {
    const auto& s = config_schema();
    return std::any_of(s.begin(), s.end(), [&](const auto& kv) { return kv.first == key; });
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, sep)) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
    std::string s = trim(v);
    double factor = 1.0;
    if (s.size() >= 2 && s.compare(s.size() - 2, 2, "pi") == 0) {
        factor = std::numbers::pi;
        s = trim(s.substr(0, s.size() - 2));
        if (!s.empty() && s.back() == '*') s = trim(s.substr(0, s.size() - 1));
        if (s.empty()) return factor;
    }
    try {
        std::size_t used = 0;
        const double x = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument("trailing");
        return x * factor;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': cannot parse '" + v + "' as a number");
    }
}

inline long parse_long(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const long x = std::stol(trim(v), &used);
        if (used != trim(v).size()) throw std::invalid_argument("trailing");
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': cannot parse '" + v + "' as an integer");
    }
}

}  // namespace detail

/// Flat `key = value` text; '#' starts a comment. Unknown keys are rejected.
inline std::map<std::string, std::string> parse_config_text(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (!is_config_key(key)) throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        out[key] = value;
    }
    return out;
}

inline std::map<std::string, std::string> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

struct ExperimentConfig {
    ModelKind model = ModelKind::AllenCahnVC;
    double alpha = 0.4;
    double sigma = 0.6;
    double gamma = 2.0 / 0.6;
    std::vector<long> levels{8, 16, 32, 64};
    int nx = 64, ny = 64;
    double lx = 2.0 * std::numbers::pi, ly = 2.0 * std::numbers::pi;
    double horizon = 1.0;
    double mobility = 0.01;
    std::optional<double> epsilon;
    double g = 1.0, delta = 0.2, stabilizer = 2.0;
    double lambda = 100.0, tau_min = 1e-3, tau_max = 0.5;
    std::string mesh = "graded";
    double tol = 1e-12;
    std::uint64_t seed = 1;
    std::vector<double> snapshot_times;
    std::string out_dir = "out";

    /// Effective key/value pairs after defaults and overrides.
    std::map<std::string, std::string> echo;

    PeriodicGrid grid() const { return PeriodicGrid(lx, ly, nx, ny); }

    ModelParams model_params() const {
        ModelParams p;
        p.kind = model;
        p.alpha = alpha;
        p.mobility = mobility;
        p.epsilon = epsilon.value_or(0.0);
        p.g = g;
        p.delta = delta;
        p.stabilizer = stabilizer;
        return p;
    }

    SolverConfig solver() const {
        SolverConfig c;
        c.tolerance = tol;
        return c;
    }

    AdaptiveParams adaptive() const {
        AdaptiveParams a;
        a.lambda = lambda;
        a.tau_min = tau_min;
        a.tau_max = tau_max;
        a.kernel_order = 1.0 - alpha;
        return a;
    }

    TemporalMesh fixed_mesh(long count) const {
        if (mesh == "uniform") return build_uniform(horizon, count);
        if (mesh == "graded") return build_graded(horizon, count, gamma);
        throw ConfigError("mesh '" + mesh + "' has no fixed step count");
    }
};

/// Merges defaults, file values and overrides (later wins), then validates.
inline ExperimentConfig make_config(const std::map<std::string, std::string>& file_values,
                                    const std::map<std::string, std::string>& overrides) {
    std::map<std::string, std::string> raw;
    for (const auto& [k, v] : config_schema()) raw[k] = v;
    for (const auto& [k, v] : file_values) {
        if (!is_config_key(k)) throw ConfigError("unknown key '" + k + "'");
        raw[k] = v;
    }
    for (const auto& [k, v] : overrides) {
        if (!is_config_key(k)) throw ConfigError("unknown key '" + k + "'");
        raw[k] = v;
    }

    ExperimentConfig c;
    using detail::parse_double;
    using detail::parse_long;
    try {
        c.model = parse_model_kind(raw["model"]);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    c.alpha = parse_double("alpha", raw["alpha"]);
    c.sigma = parse_double("sigma", raw["sigma"]);
    if (!(c.sigma > 0.0)) throw ConfigError("sigma must be positive");
    c.gamma = raw["gamma"].empty() || raw["gamma"] == "auto" ? 2.0 / c.sigma : parse_double("gamma", raw["gamma"]);
    if (!(c.gamma >= 1.0)) throw ConfigError("gamma must be >= 1");

    c.levels.clear();
    for (const auto& item : detail::split(raw["N"], ',')) {
        const long n = parse_long("N", item);
        if (n < 0) throw ConfigError("N entries must be nonnegative");
        c.levels.push_back(n);
    }
    if (c.levels.empty()) throw ConfigError("N must list at least one step count");

    {
        const std::string gs = raw["grid"];
        const auto x = gs.find_first_of("xX");
        c.nx = static_cast<int>(parse_long("grid", gs.substr(0, x)));
        c.ny = x == std::string::npos ? c.nx : static_cast<int>(parse_long("grid", gs.substr(x + 1)));
    }
    c.lx = parse_double("Lx", raw["Lx"]);
    c.ly = parse_double("Ly", raw["Ly"]);
    c.horizon = parse_double("T", raw["T"]);
    c.mobility = parse_double("M", raw["M"]);
    if (!raw["epsilon"].empty()) c.epsilon = parse_double("epsilon", raw["epsilon"]);
    c.g = parse_double("g", raw["g"]);
    c.delta = parse_double("delta", raw["delta"]);
    c.stabilizer = parse_double("S", raw["S"]);
    c.lambda = parse_double("lambda", raw["lambda"]);
    c.tau_min = parse_double("tau_min", raw["tau_min"]);
    c.tau_max = parse_double("tau_max", raw["tau_max"]);
    c.mesh = raw["mesh"];
    if (c.mesh != "uniform" && c.mesh != "graded" && c.mesh != "adaptive") {
        throw ConfigError("mesh must be uniform, graded or adaptive");
    }
    c.tol = parse_double("tol", raw["tol"]);
    {
        const long s = parse_long("seed", raw["seed"]);
        if (s < 0) throw ConfigError("seed must be nonnegative");
        c.seed = static_cast<std::uint64_t>(s);
    }
    for (const auto& item : detail::split(raw["snapshot_times"], ',')) {
        const double t = parse_double("snapshot_times", item);
        if (!(t >= 0.0)) throw ConfigError("snapshot times must be nonnegative");
        c.snapshot_times.push_back(t);
    }
    std::sort(c.snapshot_times.begin(), c.snapshot_times.end());
    c.out_dir = raw["out_dir"];
    if (c.out_dir.empty()) throw ConfigError("out_dir must not be empty");

    if (!(c.horizon >= 0.0) || !std::isfinite(c.horizon)) throw ConfigError("T must be finite and nonnegative");
    if (!c.snapshot_times.empty() && c.snapshot_times.back() > c.horizon) throw ConfigError("snapshot time beyond T");
    try {
        c.grid();
        if (c.epsilon || c.model == ModelKind::SwiftHohenberg) c.model_params().validate();
        c.solver().validate();
        if (c.mesh == "adaptive") c.adaptive().validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    c.echo = raw;
    return c;
}

/// Model-level checks for the commands that integrate in time. epsilon has
/// no default: the AC and CH experiments use different widths.
inline void require_model(const ExperimentConfig& c) {
    if (c.model != ModelKind::SwiftHohenberg && !c.epsilon) {
        throw ConfigError("epsilon is required for model " + to_string(c.model));
    }
    try {
        c.model_params().validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

// ---------------------------------------------------------------------------
// Initial data

/// Uniform random values in (-0.2, 0.2) from a seeded 64-bit Mersenne twister.
inline ScalarField random_initial(const PeriodicGrid& grid, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> dist(-0.2, 0.2);
    ScalarField u(grid);
    for (std::size_t k = 0; k < u.size(); ++k) u[k] = dist(gen);
    return u;
}

/// Swift-Hohenberg pattern seed on (0, 32)^2 (evaluated at the grid's own coordinates).
inline ScalarField sh_pattern_initial(const PeriodicGrid& grid) {
    const double pi = std::numbers::pi;
    return ScalarField::from_function(grid, [pi](double x, double y) {
        const double a = std::cos((x + 10.0) / 32.0 * pi);
        const double b = std::sin((y + 3.0) / 32.0 * pi);
        const double c = std::sin(x / 32.0 * 4.0 * pi);
        const double d = std::sin((y - 6.0) / 32.0 * 4.0 * pi);
        return 0.07 - 0.02 * std::cos((x - 12.0) / 32.0 * 2.0 * pi) * std::sin((y - 1.0) / 32.0 * 2.0 * pi) +
               0.02 * a * a * b * b - 0.01 * c * c * d * d;
    });
}

inline ScalarField initial_condition(const ExperimentConfig& c) {
    if (c.model == ModelKind::SwiftHohenberg) return sh_pattern_initial(c.grid());
    return random_initial(c.grid(), c.seed);
}

// ---------------------------------------------------------------------------
// Run loops

using StepObserver = std::function<void(const ModelState&, const DiagnosticsRecord&)>;

struct RunResult {
    ModelState state;
    std::vector<DiagnosticsRecord> records;
    std::vector<double> nodes;
};

/// Steps through a prescribed mesh. The observer also sees the initial state.
inline RunResult run_fixed(const Model& model, const ScalarField& phi0, const TemporalMesh& mesh, const SolverConfig& cfg,
                           const SourceFn& source = {}, const StepObserver& observe = {}) {
    RunResult out;
    out.state = initial_state(model, phi0);
    out.nodes.assign(mesh.nodes().begin(), mesh.nodes().end());
    DiagnosticsTracker tracker(model, phi0);
    out.records.push_back(tracker.initial(out.state));
    if (observe) observe(out.state, out.records.back());
    for (std::size_t n = 1; n <= mesh.steps(); ++n) {
        const StepReport rep = advance(out.state, mesh, model, cfg, source);
        out.records.push_back(tracker.after_step(out.state, mesh, rep));
        if (observe) observe(out.state, out.records.back());
    }
    return out;
}

/// Steps with the feed-forward adaptive controller up to `horizon`.
inline RunResult run_adaptive(const Model& model, const ScalarField& phi0, double horizon, const AdaptiveParams& params,
                              const SolverConfig& cfg, const StepObserver& observe = {}) {
    AdaptiveParams p = params;
    p.kernel_order = model.params().nu();
    AdaptiveController ctl(horizon, p);
    RunResult out;
    out.state = initial_state(model, phi0);
    DiagnosticsTracker tracker(model, phi0);
    out.records.push_back(tracker.initial(out.state));
    if (observe) observe(out.state, out.records.back());
    double grad = 0.0;
    while (!ctl.done()) {
        ctl.accept(ctl.propose(grad));
        const TemporalMesh mesh = ctl.mesh();
        const StepReport rep = advance(out.state, mesh, model, cfg);
        out.records.push_back(tracker.after_step(out.state, mesh, rep));
        if (observe) observe(out.state, out.records.back());
        grad = norm_l2(out.state.history.back()) / rep.tau;
    }
    out.nodes = ctl.nodes();
    return out;
}

// ---------------------------------------------------------------------------
// Manufactured-solution convergence

struct ConvergenceLevel {
    long steps = 0;
    double error_phi = 0.0;
    double error_r = 0.0;
    int max_iterations = 0;
};

/// One MMS run: L-infinity errors of phi at T and of r at t_{N-1/2}
/// against N(phi_exact(t_{N-1/2})).
inline ConvergenceLevel mms_level(const Model& model, const TemporalMesh& mesh, double sigma, const SolverConfig& cfg,
                                  SourceSampling sampling = SourceSampling::Midpoint) {
    const PeriodicGrid& grid = model.grid();
    ModelState s = initial_state(model, mms_exact(0.0, grid, sigma));
    const SourceFn source = make_mms_source(model, sigma, sampling);
    ConvergenceLevel lv;
    lv.steps = static_cast<long>(mesh.steps());
    for (std::size_t n = 1; n <= mesh.steps(); ++n) {
        const StepReport rep = advance(s, mesh, model, cfg, source);
        lv.max_iterations = std::max(lv.max_iterations, rep.solve.iterations);
    }
    lv.error_phi = norm_linf(s.phi - mms_exact(mesh.horizon(), grid, sigma));
    if (mesh.steps() >= 1) {
        const double t_half = mesh.midpoint(mesh.steps());
        lv.error_r = norm_linf(s.r_half - eval_aux(model.aux(), mms_exact(t_half, grid, sigma)));
    }
    return lv;
}

struct ConvergenceTable {
    std::vector<ConvergenceLevel> levels;
    std::vector<double> order_phi, order_r;  // empty with fewer than two levels
};

inline ConvergenceTable convergence_table(const Model& model, const std::vector<TemporalMesh>& meshes, double sigma,
                                          const SolverConfig& cfg, SourceSampling sampling = SourceSampling::Midpoint) {
    ConvergenceTable t;
    std::vector<double> ns, ep, er;
    for (const auto& m : meshes) {
        t.levels.push_back(mms_level(model, m, sigma, cfg, sampling));
        ns.push_back(static_cast<double>(m.steps()));
        ep.push_back(t.levels.back().error_phi);
        er.push_back(t.levels.back().error_r);
    }
    if (t.levels.size() >= 2) {
        t.order_phi = observed_order(ep, ns);
        t.order_r = observed_order(er, ns);
    }
    return t;
}

// ---------------------------------------------------------------------------
// Kernel verification

struct KernelReport {
    double nu = 0.0;
    double oracle_deviation = 0.0;  // max relative, or max absolute vs {1/tau, 0, ...} at nu = 0
    double dgs_worst = 0.0;         // max relative DGS residual
    double functional_min = std::numeric_limits<double>::infinity();  // min of A and R (admissible meshes only)
    bool admissible = false;
    bool pass = false;
};

/// Tolerances: oracle 1e-10 relative, DGS 1e-12 relative, A, R >= -1e-14.
inline KernelReport verify_kernels(const TemporalMesh& mesh, const std::vector<KernelRow>& rows, double nu, std::uint64_t seed) {
    KernelReport rep;
    rep.nu = nu;
    for (const auto& row : rows) {
        const std::size_t n = row.step;
        for (std::size_t j = 0; j < row.size(); ++j) {
            double dev;
            if (nu == 0.0) {
                const double ref = j == 0 ? 1.0 / mesh.step(n) : 0.0;
                dev = j == 0 ? std::abs(row.weights[j] - ref) / ref : std::abs(row.weights[j]);
            } else {
                const double ref = oracle::kernel_entry(mesh, n, j, nu);
                dev = std::abs(row.weights[j] - ref) / std::abs(ref);
            }
            if (!(dev <= rep.oracle_deviation)) rep.oracle_deviation = dev;
        }
    }

    rep.admissible = check_mesh(mesh, nu).pass();
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> dist;
    for (int trial = 0; trial < 20 && mesh.steps() >= 2; ++trial) {
        DifferenceHistory<double> h;
        for (std::size_t k = 0; k < mesh.steps(); ++k) h.push(dist(gen));
        for (std::size_t n = 2; n <= mesh.steps(); ++n) {
            const DgsBalance b = dgs_residual(h, mesh, n, nu);
            rep.dgs_worst = std::max(rep.dgs_worst, b.relative());
            if (rep.admissible) rep.functional_min = std::min({rep.functional_min, b.a_cur, b.r_cur});
        }
    }
    rep.pass = rep.oracle_deviation <= 1e-10 && rep.dgs_worst <= 1e-12 && rep.functional_min >= -1e-14;
    return rep;
}

// ---------------------------------------------------------------------------
// Artifacts and manifest

inline std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return hex.str();
}

/// Collects written files and extra facts; writes manifest.json.
class RunManifest {
public:
    RunManifest(std::filesystem::path dir, std::string command, const ExperimentConfig& cfg) : dir_(std::move(dir)) {
        doc_["command"] = std::move(command);
        doc_["config"] = cfg.echo;
        doc_["artifacts"] = nlohmann::json::array();
    }

    std::filesystem::path path(const std::string& name) const { return dir_ / name; }
    void add_artifact(const std::string& name) { names_.push_back(name); }
    nlohmann::json& extra() { return doc_["details"]; }

    void finish(int exit_code, const std::string& status) {
        for (const auto& n : names_) {
            const auto p = dir_ / n;
            if (!std::filesystem::exists(p)) continue;
            doc_["artifacts"].push_back({{"file", n}, {"sha256", sha256_file(p)}, {"bytes", std::filesystem::file_size(p)}});
        }
        doc_["exit_code"] = exit_code;
        doc_["status"] = status;
        std::ofstream out(dir_ / "manifest.json");
        out << doc_.dump(2) << '\n';
    }

private:
    std::filesystem::path dir_;
    nlohmann::json doc_;
    std::vector<std::string> names_;
};

inline std::string format_time(double t) {
    std::ostringstream os;
    os << t;
    return os.str();
}

inline std::filesystem::path prepare_out_dir(const ExperimentConfig& c) {
    std::filesystem::path dir(c.out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + c.out_dir + "': " + ec.message());
    return dir;
}

// ---------------------------------------------------------------------------
// Subcommands. Each returns an exit code; ConfigError propagates.

inline int cmd_converge(const ExperimentConfig& c, std::ostream& log = std::cout) {
    require_model(c);
    if (c.mesh == "adaptive") throw ConfigError("converge needs a uniform or graded mesh");
    for (long n : c.levels)
        if (n < 1) throw ConfigError("converge needs N >= 1");
    if (!(c.horizon > 0.0)) throw ConfigError("converge needs T > 0");
    const auto dir = prepare_out_dir(c);
    RunManifest manifest(dir, "converge", c);

    const Model model(c.model_params(), c.grid());
    std::vector<TemporalMesh> meshes;
    for (long n : c.levels) meshes.push_back(c.fixed_mesh(n));

    ConvergenceTable table;
    int code = kSuccess;
    std::string status = "ok";
    try {
        table = convergence_table(model, meshes, c.sigma, c.solver());
    } catch (const SolverFailure& e) {
        code = kSolverFailure;
        status = std::string("solver failure: ") + e.what();
    }

    {
        std::ofstream csv(manifest.path("convergence.csv"));
        csv.precision(17);
        csv << "N,err_phi,order_phi,err_r,order_r\n";
        for (std::size_t i = 0; i < table.levels.size(); ++i) {
            const auto& lv = table.levels[i];
            csv << lv.steps << ',' << lv.error_phi << ',';
            if (i > 0 && !table.order_phi.empty()) csv << table.order_phi[i - 1];
            csv << ',' << lv.error_r << ',';
            if (i > 0 && !table.order_r.empty()) csv << table.order_r[i - 1];
            csv << '\n';
        }
        manifest.add_artifact("convergence.csv");
    }
    {
        std::ofstream m(manifest.path("mesh.csv"));
        write_mesh_csv(m, meshes.back());
        manifest.add_artifact("mesh.csv");
    }

    log << to_string(c.model) << "  alpha=" << c.alpha << "  sigma=" << c.sigma << "  gamma=" << c.gamma << "  T=" << c.horizon
        << "  grid=" << c.nx << "x" << c.ny << '\n';
    log << std::setw(6) << "N" << std::setw(14) << "Error(phi)" << std::setw(8) << "Order" << std::setw(14) << "Error(r)"
        << std::setw(8) << "Order" << '\n';
    for (std::size_t i = 0; i < table.levels.size(); ++i) {
        const auto& lv = table.levels[i];
        log << std::setw(6) << lv.steps << std::setw(14) << std::scientific << std::setprecision(3) << lv.error_phi
            << std::setw(8) << std::fixed << std::setprecision(2);
        if (i > 0 && !table.order_phi.empty()) log << table.order_phi[i - 1]; else log << "-";
        log << std::setw(14) << std::scientific << std::setprecision(3) << lv.error_r << std::setw(8) << std::fixed
            << std::setprecision(2);
        if (i > 0 && !table.order_r.empty()) log << table.order_r[i - 1]; else log << "-";
        log << '\n';
    }
    log << std::defaultfloat << std::setprecision(6);
    log << "r error: L-infinity at t_{N-1/2} against the auxiliary of the exact solution\n";
    if (code != kSuccess) log << status << '\n';

    manifest.extra()["r_error_norm"] = "L-infinity at the last half step";
    manifest.finish(code, status);
    return code;
}

inline int cmd_evolve(const ExperimentConfig& c, std::ostream& log = std::cout) {
    require_model(c);
    // T = 0 gives the initial state only, whatever N says.
    if (c.mesh != "adaptive" && c.horizon > 0.0 && (c.levels.size() != 1 || c.levels[0] < 1)) {
        throw ConfigError("evolve on a fixed mesh takes a single N >= 1");
    }
    const auto dir = prepare_out_dir(c);
    RunManifest manifest(dir, "evolve", c);
    const Model model(c.model_params(), c.grid());
    const ScalarField phi0 = initial_condition(c);

    std::ofstream diag(manifest.path("diagnostics.csv"));
    write_diagnostics_header(diag);
    manifest.add_artifact("diagnostics.csv");

    std::vector<double> pending = c.snapshot_times;
    nlohmann::json snaps = nlohmann::json::array();
    auto snapshot = [&](double requested, const ModelState& s) {
        const std::string name = "snapshot_" + format_time(requested) + ".fpf1";
        std::ofstream f(manifest.path(name), std::ios::binary);
        write_fpf1(f, s.phi);
        manifest.add_artifact(name);
        snaps.push_back({{"file", name}, {"requested", requested}, {"time", s.time}, {"step", s.n}});
    };
    // Requests are served at the first node at or after them; t = 0 and the
    // final time are always written.
    StepObserver observe = [&](const ModelState& s, const DiagnosticsRecord& d) {
        write_diagnostics_row(diag, d);
        diag.flush();
        if (s.n == 0) {
            snapshot(0.0, s);
            while (!pending.empty() && pending.front() == 0.0) pending.erase(pending.begin());
        }
        while (!pending.empty() && pending.front() <= s.time) {
            snapshot(pending.front(), s);
            pending.erase(pending.begin());
        }
    };

    int code = kSuccess;
    std::string status = "ok";
    RunResult result;
    try {
        if (c.horizon == 0.0) {
            result = run_fixed(model, phi0, TemporalMesh(), c.solver(), {}, observe);
        } else if (c.mesh == "adaptive") {
            result = run_adaptive(model, phi0, c.horizon, c.adaptive(), c.solver(), observe);
        } else {
            result = run_fixed(model, phi0, c.fixed_mesh(c.levels[0]), c.solver(), {}, observe);
        }
        if (!result.state.phi.all_finite()) {
            code = kSolverFailure;
            status = "non-finite solution";
        } else if (result.state.n > 0) {
            snapshot(c.horizon, result.state);
        }
    } catch (const SolverFailure& e) {
        code = kSolverFailure;
        status = std::string("solver failure: ") + e.what();
    }
    diag.close();

    if (!result.nodes.empty()) {
        std::ofstream m(manifest.path("mesh.csv"));
        write_mesh_csv(m, TemporalMesh(result.nodes));
        manifest.add_artifact("mesh.csv");
    }
    manifest.extra()["snapshots"] = snaps;
    manifest.extra()["initial_condition"] = c.model == ModelKind::SwiftHohenberg ? "sh_pattern" : "uniform_random(-0.2,0.2)";
    if (!result.records.empty()) {
        const auto& last = result.records.back();
        manifest.extra()["steps"] = last.n;
        manifest.extra()["final_time"] = last.t;
        log << to_string(c.model) << ": " << last.n << " steps to t=" << last.t << ", E=" << last.energy
            << ", E_mod=" << last.energy_mod << ", mass drift=" << last.mass_drift << '\n';
    }
    if (code != kSuccess) log << status << '\n';
    manifest.finish(code, status);
    return code;
}

/// `tamper` (test hook) may modify the rows before they are dumped and checked.
inline int cmd_kernels(const ExperimentConfig& c, std::ostream& log = std::cout,
                       const std::function<void(std::vector<KernelRow>&)>& tamper = {}) {
    if (c.mesh == "adaptive") throw ConfigError("kernels needs a uniform or graded mesh");
    if (c.levels.size() != 1 || c.levels[0] < 1) throw ConfigError("kernels takes a single N >= 1");
    if (!(c.horizon > 0.0)) throw ConfigError("kernels needs T > 0");
    const auto dir = prepare_out_dir(c);
    RunManifest manifest(dir, "kernels", c);
    const TemporalMesh mesh = c.fixed_mesh(c.levels[0]);
    const double nu = 1.0 - c.alpha;

    std::vector<KernelRow> rows;
    for (std::size_t n = 1; n <= mesh.steps(); ++n) rows.push_back(kernel_row(mesh, n, nu));
    if (tamper) tamper(rows);
    {
        std::ofstream k(manifest.path("kernels.csv"));
        write_kernels_csv(k, rows);
        manifest.add_artifact("kernels.csv");
        std::ofstream m(manifest.path("mesh.csv"));
        write_mesh_csv(m, mesh);
        manifest.add_artifact("mesh.csv");
    }
    const KernelReport rep = verify_kernels(mesh, rows, nu, c.seed);
    log << "order nu=" << nu << "  steps=" << mesh.steps() << "  mesh admissible: " << (rep.admissible ? "yes" : "no") << '\n';
    log << "  oracle deviation  " << rep.oracle_deviation << (nu == 0.0 ? " (vs {1/tau, 0, ...})" : " (relative)") << '\n';
    log << "  DGS residual      " << rep.dgs_worst << '\n';
    if (rep.admissible) log << "  min A, R          " << rep.functional_min << '\n';
    log << (rep.pass ? "PASS" : "FAIL") << '\n';

    manifest.extra()["oracle_deviation"] = rep.oracle_deviation;
    manifest.extra()["dgs_residual"] = rep.dgs_worst;
    manifest.extra()["admissible"] = rep.admissible;
    manifest.extra()["functional_min"] = rep.functional_min;
    const int code = rep.pass ? kSuccess : kVerificationFailure;
    manifest.finish(code, rep.pass ? "ok" : "verification failed");
    return code;
}

}  // namespace tfpf
