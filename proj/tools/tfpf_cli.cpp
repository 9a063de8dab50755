#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tfpf/experiment.hpp"

namespace {

struct Invocation {
    std::string config_file;
    std::string out_dir;
    std::vector<std::string> sets;
    std::map<std::string, std::string> per_key;
    bool corrupt = false;
};

void add_common(CLI::App* sub, Invocation& inv) {
    sub->add_option("--config", inv.config_file, "flat key = value config file");
    sub->add_option("--out-dir", inv.out_dir, "output directory (overrides out_dir)");
    sub->add_option("--set", inv.sets, "override as key=value (repeatable)");
    for (const auto& [key, def] : tfpf::config_schema()) {
        if (key == "out_dir") continue;
        sub->add_option("--" + key, inv.per_key[key], "override config key '" + key + "'")->default_str(def);
    }
}

tfpf::ExperimentConfig resolve(const Invocation& inv) {
    std::map<std::string, std::string> file;
    if (!inv.config_file.empty()) file = tfpf::read_config_file(inv.config_file);
    std::map<std::string, std::string> over;
    for (const auto& [k, v] : inv.per_key)
        if (!v.empty()) over[k] = v;
    for (const auto& kv : inv.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw tfpf::ConfigError("--set expects key=value, got '" + kv + "'");
        const std::string key = kv.substr(0, eq);
        if (!tfpf::is_config_key(key)) throw tfpf::ConfigError("unknown key '" + key + "'");
        over[key] = kv.substr(eq + 1);
    }
    if (!inv.out_dir.empty()) over["out_dir"] = inv.out_dir;
    return tfpf::make_config(file, over);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Time-fractional phase-field solver (L1+ Crank-Nicolson, linear relaxation)"};
    app.require_subcommand(1);

    Invocation converge, evolve, kernels;
    auto* c = app.add_subcommand("converge", "manufactured-solution convergence table");
    add_common(c, converge);
    auto* e = app.add_subcommand("evolve", "run a simulation with diagnostics and snapshots");
    add_common(e, evolve);
    auto* k = app.add_subcommand("kernels", "dump kernel rows and check them against the quadrature oracle");
    add_common(k, kernels);
    k->add_flag("--corrupt-weight", kernels.corrupt)->group("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::CallForAllHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::ParseError& ex) {
        app.exit(ex);
        return tfpf::kConfigError;
    }

    try {
        if (c->parsed()) return tfpf::cmd_converge(resolve(converge));
        if (e->parsed()) return tfpf::cmd_evolve(resolve(evolve));
        if (k->parsed()) {
            std::function<void(std::vector<tfpf::KernelRow>&)> tamper;
            if (kernels.corrupt) {
                tamper = [](std::vector<tfpf::KernelRow>& rows) {
                    auto& row = rows.back();
                    row.weights[row.size() / 2] *= 1.0 + 1e-6;
                };
            }
            return tfpf::cmd_kernels(resolve(kernels), std::cout, tamper);
        }
    } catch (const tfpf::ConfigError& ex) {
        std::cerr << "config error: " << ex.what() << '\n';
        return tfpf::kConfigError;
    } catch (const tfpf::SolverFailure& ex) {
        std::cerr << "solver failure: " << ex.what() << '\n';
        return tfpf::kSolverFailure;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return tfpf::kSolverFailure;
    }
    return tfpf::kConfigError;
}
