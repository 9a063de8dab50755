#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "json.hpp"
#include "tfpf/experiment.hpp"

using namespace tfpf;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("tfpf_test_" + name);
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

nlohmann::json manifest(const fs::path& dir) { return nlohmann::json::parse(slurp(dir / "manifest.json")); }

}  // namespace

TEST(Config, ParseText) {
    const auto m = parse_config_text("# header\nmodel = tfch  # trailing\n\n alpha=0.7\n");
    ASSERT_EQ(m.size(), 2u);
    EXPECT_EQ(m.at("model"), "tfch");
    EXPECT_EQ(m.at("alpha"), "0.7");
    EXPECT_THROW(parse_config_text("bogus = 1\n"), ConfigError);
    EXPECT_THROW(parse_config_text("alpha 0.7\n"), ConfigError);
}

TEST(Config, Defaults) {
    const auto c = make_config({}, {});
    EXPECT_EQ(c.model, ModelKind::AllenCahnVC);
    EXPECT_DOUBLE_EQ(c.gamma, 2.0 / 0.6);
    EXPECT_EQ(c.levels, (std::vector<long>{8, 16, 32, 64}));
    EXPECT_DOUBLE_EQ(c.lx, 2.0 * std::numbers::pi);
    EXPECT_FALSE(c.epsilon.has_value());
    EXPECT_EQ(c.echo.at("alpha"), "0.4");
}

TEST(Config, OverridePrecedenceAndParsing) {
    const auto c = make_config({{"alpha", "0.3"}, {"sigma", "0.5"}, {"grid", "32x16"}, {"Lx", "4pi"}, {"Ly", "3"}},
                               {{"alpha", "0.9"}, {"gamma", "auto"}, {"epsilon", "0.5"}, {"N", "4, 8"}});
    EXPECT_DOUBLE_EQ(c.alpha, 0.9);
    EXPECT_DOUBLE_EQ(c.gamma, 4.0);
    EXPECT_EQ(c.nx, 32);
    EXPECT_EQ(c.ny, 16);
    EXPECT_DOUBLE_EQ(c.lx, 4.0 * std::numbers::pi);
    EXPECT_DOUBLE_EQ(c.ly, 3.0);
    EXPECT_EQ(*c.epsilon, 0.5);
    EXPECT_EQ(c.levels, (std::vector<long>{4, 8}));
    EXPECT_EQ(c.echo.at("alpha"), "0.9");
}

TEST(Config, Errors) {
    EXPECT_THROW(make_config({{"nope", "1"}}, {}), ConfigError);
    EXPECT_THROW(make_config({}, {{"nope", "1"}}), ConfigError);
    EXPECT_THROW(make_config({}, {{"alpha", "abc"}}), ConfigError);
    EXPECT_THROW(make_config({}, {{"alpha", "1.5"}, {"epsilon", "0.2"}}), ConfigError);
    EXPECT_THROW(make_config({}, {{"model", "heat"}}), ConfigError);
    EXPECT_THROW(make_config({}, {{"gamma", "0.5"}}), ConfigError);
    EXPECT_THROW(make_config({}, {{"mesh", "random"}}), ConfigError);
    EXPECT_THROW(make_config({}, {{"snapshot_times", "2"}}), ConfigError);
    EXPECT_THROW(make_config({}, {{"N", ""}}), ConfigError);
    // epsilon has no default for AC and CH
    EXPECT_THROW(require_model(make_config({}, {{"model", "tfch"}})), ConfigError);
    EXPECT_NO_THROW(require_model(make_config({}, {{"model", "tfsh"}})));
}

TEST(InitialData, RandomIsDeterministicAndBounded) {
    const PeriodicGrid g(1.0, 1.0, 16, 16);
    const auto a = random_initial(g, 5), b = random_initial(g, 5), c = random_initial(g, 6);
    EXPECT_EQ(norm_linf(a - b), 0.0);
    EXPECT_GT(norm_linf(a - c), 0.0);
    EXPECT_LT(norm_linf(a), 0.2);
}

TEST(Sha256, KnownDigest) {
    const auto dir = scratch("sha");
    fs::create_directories(dir);
    {
        std::ofstream f(dir / "abc.txt", std::ios::binary);
        f << "abc";
    }
    EXPECT_EQ(sha256_file(dir / "abc.txt"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Commands, EvolveZeroHorizon) {
    const auto dir = scratch("evolve0");
    const auto c = make_config({}, {{"T", "0"}, {"epsilon", "0.25"}, {"grid", "16"}, {"out_dir", dir.string()}});
    std::ostringstream log;
    EXPECT_EQ(cmd_evolve(c, log), kSuccess);
    const std::string diag = slurp(dir / "diagnostics.csv");
    EXPECT_EQ(std::count(diag.begin(), diag.end(), '\n'), 2);
    EXPECT_TRUE(fs::exists(dir / "snapshot_0.fpf1"));
    EXPECT_EQ(fs::file_size(dir / "snapshot_0.fpf1"), 12u + 256u * 8u);
    const auto m = manifest(dir);
    EXPECT_EQ(m["exit_code"], 0);
    EXPECT_EQ(m["config"]["epsilon"], "0.25");
    EXPECT_EQ(m["command"], "evolve");
}

TEST(Commands, EvolveIsBitwiseReproducible) {
    const auto d1 = scratch("rep1"), d2 = scratch("rep2");
    std::map<std::string, std::string> over{{"model", "tfch"}, {"epsilon", "0.5"}, {"grid", "16"}, {"T", "0.5"},
                                            {"N", "10"},       {"mesh", "uniform"}, {"snapshot_times", "0.25"}};
    over["out_dir"] = d1.string();
    std::ostringstream log;
    ASSERT_EQ(cmd_evolve(make_config({}, over), log), kSuccess);
    over["out_dir"] = d2.string();
    ASSERT_EQ(cmd_evolve(make_config({}, over), log), kSuccess);
    for (const char* name : {"diagnostics.csv", "mesh.csv", "snapshot_0.fpf1", "snapshot_0.25.fpf1", "snapshot_0.5.fpf1"}) {
        ASSERT_TRUE(fs::exists(d1 / name)) << name;
        EXPECT_EQ(slurp(d1 / name), slurp(d2 / name)) << name;
    }
    const auto m = manifest(d1);
    bool found = false;
    for (const auto& a : m["artifacts"]) {
        EXPECT_EQ(a["sha256"], sha256_file(d1 / a["file"].get<std::string>()));
        found = found || a["file"] == "snapshot_0.25.fpf1";
    }
    EXPECT_TRUE(found);
    EXPECT_EQ(m["details"]["steps"], 10);
}

TEST(Commands, EvolveAdaptive) {
    const auto dir = scratch("adaptive");
    const auto c = make_config({}, {{"epsilon", "0.25"}, {"grid", "16"}, {"T", "0.2"}, {"mesh", "adaptive"}, {"out_dir", dir.string()}});
    std::ostringstream log;
    ASSERT_EQ(cmd_evolve(c, log), kSuccess);
    std::ifstream mesh(dir / "mesh.csv");
    std::string line, last;
    while (std::getline(mesh, line)) last = line;
    const auto c1 = last.find(','), c2 = last.find(',', c1 + 1);
    EXPECT_EQ(std::stod(last.substr(c1 + 1, c2 - c1 - 1)), 0.2) << last;
}

TEST(Commands, EvolveRejectsLevelList) {
    const auto c = make_config({}, {{"epsilon", "0.25"}, {"out_dir", scratch("lv").string()}});
    std::ostringstream log;
    EXPECT_THROW(cmd_evolve(c, log), ConfigError);
}

TEST(Commands, KernelsPassAndTamper) {
    std::ostringstream log;
    auto dir = scratch("kernels");
    auto c = make_config({}, {{"N", "24"}, {"alpha", "0.6"}, {"out_dir", dir.string()}});
    EXPECT_EQ(cmd_kernels(c, log), kSuccess);
    EXPECT_TRUE(fs::exists(dir / "kernels.csv"));
    EXPECT_TRUE(fs::exists(dir / "mesh.csv"));
    EXPECT_EQ(manifest(dir)["exit_code"], 0);

    dir = scratch("tamper");
    c = make_config({}, {{"N", "24"}, {"alpha", "0.6"}, {"out_dir", dir.string()}});
    auto tamper = [](std::vector<KernelRow>& rows) { rows.back().weights[3] *= 1.0 + 1e-6; };
    EXPECT_EQ(cmd_kernels(c, log, tamper), kVerificationFailure);
    EXPECT_EQ(manifest(dir)["exit_code"], 4);

    dir = scratch("nu0");
    c = make_config({}, {{"N", "6"}, {"alpha", "1"}, {"out_dir", dir.string()}});
    EXPECT_EQ(cmd_kernels(c, log), kSuccess);
}

TEST(Commands, ConvergeSingleLevel) {
    const auto dir = scratch("conv1");
    const auto c = make_config({}, {{"N", "4"}, {"epsilon", "0.25"}, {"grid", "16"}, {"out_dir", dir.string()}});
    std::ostringstream log;
    ASSERT_EQ(cmd_converge(c, log), kSuccess);
    const std::string csv = slurp(dir / "convergence.csv");
    std::istringstream is(csv);
    std::string header, row;
    std::getline(is, header);
    std::getline(is, row);
    EXPECT_EQ(header, "N,err_phi,order_phi,err_r,order_r");
    EXPECT_EQ(row.substr(0, 2), "4,");
    EXPECT_NE(row.find(",,"), std::string::npos);
    EXPECT_TRUE(row.back() == ',');
}

TEST(Commands, ConvergeOrdersOnShortTable) {
    const auto dir = scratch("conv2");
    const auto c = make_config({}, {{"N", "8,16,32"}, {"epsilon", "0.25"}, {"grid", "32"}, {"out_dir", dir.string()}});
    std::ostringstream log;
    ASSERT_EQ(cmd_converge(c, log), kSuccess);
    std::istringstream is(slurp(dir / "convergence.csv"));
    std::string line;
    std::getline(is, line);
    int rows = 0;
    while (std::getline(is, line)) ++rows;
    EXPECT_EQ(rows, 3);
    EXPECT_NE(log.str().find("Error(phi)"), std::string::npos);
}
