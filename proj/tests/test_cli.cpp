#include "rsstab/config.hpp"
#include "rsstab/error.hpp"
#include "rsstab/experiments.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

using namespace rsstab;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("rsstab_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json lemma2_config() {
    return json::parse(R"({
        "schema_version": 1,
        "experiment": "lemma2-check",
        "q": [[-1.0, 1.0], [2.0, -2.0]],
        "q_tilde": [[-1.2, 1.2], [2.0, -2.0]],
        "n_paths": 4000,
        "seed": 17
    })");
}

json tanh_sweep_config() {
    return json::parse(R"({
        "schema_version": 1,
        "experiment": "theorem1-sweep",
        "q": [[-1.0, 1.0], [2.0, -2.0]],
        "perturbation": {"scales": [0.0, 0.2]},
        "model": {"name": "bounded-tanh", "params": {"mu": [0.5, -0.5], "alpha": [-1.0, -0.5], "s": [1.0, 0.6]}},
        "T": 1.0,
        "dt": 0.02,
        "times": [0.5, 1.0],
        "n_paths": 2000,
        "seed": 4
    })");
}

std::string config_error_key(const json& j) {
    try {
        (void)parse_config(j);
    } catch (const ConfigInvalid& e) {
        return e.path();
    }
    return "";
}

std::string config_error_message(const json& j) {
    try {
        (void)parse_config(j);
    } catch (const ConfigInvalid& e) {
        return e.what();
    }
    return "";
}

std::size_t column(const ExperimentResult& r, const std::string& name) {
    for (std::size_t k = 0; k < r.columns.size(); ++k)
        if (r.columns[k] == name) return k;
    ADD_FAILURE() << "no column " << name;
    return 0;
}

}  // namespace

TEST(Config, MissingNPathsDefaultsAndIsReported) {
    auto j = lemma2_config();
    j.erase("n_paths");
    const auto parsed = parse_config(j);
    EXPECT_EQ(parsed.config.n_paths, 100000u);
    EXPECT_NE(std::find(parsed.defaults_applied.begin(), parsed.defaults_applied.end(), "n_paths"),
              parsed.defaults_applied.end());
    EXPECT_EQ(parsed.resolved["n_paths"], 100000);
    // Explicit keys are not listed as defaults.
    EXPECT_EQ(std::find(parsed.defaults_applied.begin(), parsed.defaults_applied.end(), "seed"),
              parsed.defaults_applied.end());
}

TEST(Config, NegativeDtRejected) {
    auto j = tanh_sweep_config();
    j["dt"] = -0.01;
    EXPECT_EQ(config_error_key(j), "dt");
    j["dt"] = 5.0;
    EXPECT_EQ(config_error_key(j), "dt");
}

TEST(Config, UnknownModelSuggestsNames) {
    auto j = tanh_sweep_config();
    j["model"]["name"] = "bounded-tanhh";
    EXPECT_EQ(config_error_key(j), "model.name");
    const auto msg = config_error_message(j);
    EXPECT_NE(msg.find("did you mean bounded-tanh"), std::string::npos) << msg;
}

TEST(Config, UnknownKeysAndKinds) {
    auto j = tanh_sweep_config();
    j["n_path"] = 10;
    EXPECT_EQ(config_error_key(j), "n_path");
    EXPECT_NE(config_error_message(j).find("n_paths"), std::string::npos);
    auto k = tanh_sweep_config();
    k["experiment"] = "theorem1-swep";
    EXPECT_NE(config_error_message(k).find("theorem1-sweep"), std::string::npos);
    auto p = tanh_sweep_config();
    p["model"]["params"]["sigma"] = 1.0;
    EXPECT_EQ(config_error_key(p), "model.params.sigma");
}

TEST(Config, SchemaVersionRequired) {
    auto j = lemma2_config();
    j["schema_version"] = 2;
    EXPECT_EQ(config_error_key(j), "schema_version");
    j.erase("schema_version");
    EXPECT_EQ(config_error_key(j), "schema_version");
}

TEST(Config, BadMatricesAndStates) {
    auto j = lemma2_config();
    j["q"] = json::parse("[[-1.0, 2.0], [1.0, -1.0]]");
    EXPECT_EQ(config_error_key(j), "q");
    auto k = lemma2_config();
    k["i0"] = 5;
    EXPECT_EQ(config_error_key(k), "i0");
    auto t = tanh_sweep_config();
    t["perturbation"]["direction"] = json::parse("[[1.0, -1.0], [0.0, 0.0]]");
    t["perturbation"]["scales"] = json::parse("[5.0]");  // drives q_01 negative
    EXPECT_EQ(config_error_key(t), "perturbation.scales");
    auto b = tanh_sweep_config();
    b["model"] = json::parse(R"({"name": "switching-ou", "params": {"a": 1.0, "s": 0.5}})");
    b["bounded"] = true;
    EXPECT_EQ(config_error_key(b), "bounded");
    auto r = json::parse(R"({"schema_version": 1, "experiment": "theorem2-reduction",
        "q": [[-1, 1, 0], [1, -2, 1], [0, 1, -1]], "i0": 0,
        "model": {"name": "bounded-tanh", "params": {"mu": 0, "alpha": -1, "s": 1}}})");
    EXPECT_EQ(config_error_key(r), "i0");
}

TEST(Config, MatrixFilesResolveAgainstConfigDirectory) {
    const auto dir = scratch("files");
    std::ofstream(dir / "q.csv") << "-1.0,1.0\n2.0,-2.0\n";
    std::ofstream(dir / "qt.json") << "[[-1.2, 1.2], [2.0, -2.0]]";
    auto j = lemma2_config();
    j["q"] = {{"file", "q.csv"}};
    j["q_tilde"] = {{"file", "qt.json"}};
    std::ofstream(dir / "config.json") << j.dump();
    const auto parsed = load_config(dir / "config.json");
    EXPECT_EQ(parsed.config.q.n_states(), 2u);
    EXPECT_NEAR(parsed.config.deltas.at(0), 0.4, 1e-15);
    EXPECT_EQ(parsed.resolved["q"][1][0], 2.0);
    j["q"] = {{"file", "missing.csv"}};
    std::ofstream(dir / "bad.json") << j.dump();
    try {
        (void)load_config(dir / "bad.json");
        FAIL();
    } catch (const ConfigInvalid& e) {
        EXPECT_EQ(e.path(), "q");
    }
    EXPECT_THROW((void)load_config(dir / "nope.json"), ConfigInvalid);
}

TEST(Config, DottedOverride) {
    auto j = tanh_sweep_config();
    set_config_value(j, "model.params.s", "[0.5, 0.5]");
    set_config_value(j, "dt", "0.05");
    set_config_value(j, "output.results", "table.csv");
    EXPECT_EQ(j["model"]["params"]["s"][1], 0.5);
    EXPECT_EQ(j["dt"], 0.05);
    EXPECT_EQ(parse_config(j).config.results_file, "table.csv");
    EXPECT_THROW(set_config_value(j, "dt.x", "1"), ConfigInvalid);
}

TEST(Runner, Lemma2CheckColumnsAndVerdict) {
    const auto parsed = parse_config(lemma2_config());
    const auto r = run_experiment(parsed.config, 2);
    for (const char* name : {"t", "empirical_integral", "exact_ode_integral", "bound"}) (void)column(r, name);
    EXPECT_EQ(r.rows.size(), 3u);  // default times 0.5, 1, 2
    EXPECT_EQ(r.verdict, "bound holds");
    EXPECT_TRUE(r.passed);
    for (const auto& row : r.rows) EXPECT_LT(row[column(r, "quadrature_error")], 1e-6);
}

TEST(Runner, ZeroPerturbationGivesZeroColumns) {
    auto j = tanh_sweep_config();
    j["perturbation"]["scales"] = json::array({0.0});
    const auto r = run_experiment(parse_config(j).config, 2);
    ASSERT_EQ(r.rows.size(), 2u);
    for (const auto& row : r.rows)
        for (const char* name : {"delta", "w2_coupled_upper", "w2_coupled_upper_se", "w2_exact_1d", "wbl_lower",
                                 "bound"})
            EXPECT_EQ(row[column(r, name)], 0.0) << name;
    EXPECT_TRUE(r.passed);
}

TEST(Runner, SameSeedSameBytesAnyThreadCount) {
    const auto parsed = parse_config(tanh_sweep_config());
    const auto a = scratch("det_a"), b = scratch("det_b");
    write_outputs(parsed, run_experiment(parsed.config, 1), a);
    write_outputs(parsed, run_experiment(parsed.config, 3), b);
    EXPECT_EQ(slurp(a / "results.csv"), slurp(b / "results.csv"));
    EXPECT_EQ(slurp(a / "manifest.json"), slurp(b / "manifest.json"));
    auto other = tanh_sweep_config();
    other["seed"] = 5;
    const auto c = scratch("det_c");
    const auto parsed_c = parse_config(other);
    write_outputs(parsed_c, run_experiment(parsed_c.config, 1), c);
    EXPECT_NE(slurp(a / "results.csv"), slurp(c / "results.csv"));
}

TEST(Runner, ManifestRecordsDefaultsSeedsAndConstants) {
    const auto parsed = parse_config(tanh_sweep_config());
    const auto r = run_experiment(parsed.config, 2);
    const auto m = make_manifest(parsed, r);
    EXPECT_EQ(m["schema_version"], 1);
    EXPECT_EQ(m["seeds"]["master"], 4u);
    EXPECT_TRUE(m["seeds"].contains("chain-clock"));
    EXPECT_EQ(m["derived"]["N"], 1u);
    EXPECT_TRUE(m["derived"].contains("M"));
    const auto& certs = m["derived"]["certificates"];
    ASSERT_EQ(certs.size(), 4u);
    EXPECT_TRUE(certs[0].contains("eta_p"));
    EXPECT_TRUE(certs[0].contains("C2"));
    EXPECT_EQ(m["inputs"]["p_grid"].size(), 4u);
    const auto dump = m.dump();
    EXPECT_EQ(dump.find("thread"), std::string::npos);
    EXPECT_EQ(dump.find("time\""), std::string::npos);
    bool listed = false;
    for (const auto& d : m["defaults_applied"]) listed = listed || d == "p_grid";
    EXPECT_TRUE(listed);
}

TEST(Runner, ReductionMatchesEmbeddedTheoremOne) {
    const auto j = json::parse(R"({
        "schema_version": 1, "experiment": "theorem2-reduction",
        "q": [[-2.0, 1.0, 1.0], [0.3, -1.3, 1.0], [0.2, 2.0, -2.2]],
        "b_scales": [0.0, 1.0],
        "model": {"name": "bounded-tanh", "params": {"mu": [0.5, -0.5, 0.0], "alpha": -0.8, "s": 1.0}},
        "times": [1.0], "dt": 0.02, "n_paths": 2000, "seed": 2})");
    const auto r = run_experiment(parse_config(j).config, 2);
    ASSERT_EQ(r.rows.size(), 2u);
    EXPECT_EQ(r.rows[0][column(r, "bound")], 0.0);
    EXPECT_EQ(r.rows[0][column(r, "w2_coupled_upper")], 0.0);
    EXPECT_GT(r.rows[1][column(r, "bound")], 0.0);
    EXPECT_LE(r.rows[1][column(r, "formula_gap")], 1e-13);
    EXPECT_TRUE(r.passed);
}

TEST(Runner, FeynmanKacFromModelKappa) {
    const auto j = json::parse(R"({
        "schema_version": 1, "experiment": "feynman-kac-check",
        "q": [[-1.0, 1.0], [2.0, -2.0]],
        "model": {"name": "switching-ou", "params": {"a": [1.0, 0.2], "s": 0.5}},
        "n_paths": 20000, "seed": 8})");
    const auto parsed = parse_config(j);
    EXPECT_NEAR(parsed.config.kappa(0), -2.0, 1e-15);
    EXPECT_NEAR(parsed.config.kappa(1), -0.4, 1e-15);
    const auto r = run_experiment(parsed.config, 2);
    EXPECT_EQ(r.verdict, "sandwich holds");
}

TEST(Runner, ModuleErrorsCarryContext) {
    const auto j = json::parse(R"({
        "schema_version": 1, "experiment": "girsanov-sweep",
        "q": [[-1.0, 1.0], [1.0, -1.0]],
        "perturbation": {"scales": [0.2, 0.1]},
        "model": {"name": "singular-log", "params": {"beta": [1.0, 1.0], "k_max": 50}},
        "n_paths": 10, "seed": 1})");
    try {
        (void)run_experiment(parse_config(j).config, 1);
        FAIL();
    } catch (const Error& e) {
        const auto text = describe_error(e);
        EXPECT_NE(text.find("girsanov-sweep"), std::string::npos) << text;
        bool novikov = false;
        try {
            std::rethrow_if_nested(e);
        } catch (const NovikovFailed&) {
            novikov = true;
        } catch (...) {
        }
        EXPECT_TRUE(novikov) << text;
    }
}

#ifdef RSSTAB_CLI_PATH
namespace {

int run_tool(const std::string& args) {
    const std::string cmd = std::string(RSSTAB_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Tool, RunSweepReportAndExitCodes) {
    const auto dir = scratch("tool");
    std::ofstream(dir / "lemma2.json") << lemma2_config().dump(2);
    auto bad = lemma2_config();
    bad["n_paths"] = -3;
    std::ofstream(dir / "bad.json") << bad.dump();

    EXPECT_EQ(run_tool("validate --config " + (dir / "lemma2.json").string()), 0);
    EXPECT_EQ(run_tool("validate --config " + (dir / "bad.json").string()), 2);
    EXPECT_EQ(run_tool("run --config " + (dir / "missing.json").string()), 2);
    EXPECT_EQ(run_tool("frobnicate"), 2);

    const auto out1 = dir / "run1", out2 = dir / "run2";
    EXPECT_EQ(run_tool("run --config " + (dir / "lemma2.json").string() + " --seed 99 --threads 1 --out " +
                       out1.string()),
              0);
    EXPECT_EQ(run_tool("run --config " + (dir / "lemma2.json").string() + " --seed 99 --threads 2 --out " +
                       out2.string()),
              0);
    EXPECT_EQ(slurp(out1 / "results.csv"), slurp(out2 / "results.csv"));
    EXPECT_NE(slurp(out1 / "manifest.json").find("\"master\": 99"), std::string::npos);
    EXPECT_EQ(run_tool("report --out " + out1.string()), 0);

    const auto sweep = dir / "sweep";
    EXPECT_EQ(run_tool("sweep --config " + (dir / "lemma2.json").string() + " --param seed --values 1,2 --out " +
                       sweep.string()),
              0);
    EXPECT_TRUE(fs::exists(sweep / "seed=1" / "results.csv"));
    EXPECT_TRUE(fs::exists(sweep / "seed=2" / "manifest.json"));
    const auto summary = slurp(sweep / "summary.csv");
    EXPECT_EQ(summary.rfind("param,value,passed,verdict,directory\n", 0), 0u);
    EXPECT_NE(summary.find("seed,\"2\",1,bound holds,seed=2"), std::string::npos) << summary;
    EXPECT_EQ(run_tool("sweep --config " + (dir / "lemma2.json").string() + " --param dt --values 1 --out " +
                       sweep.string()),
              2);
}
#endif
