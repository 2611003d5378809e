// Batch runner: validate | run | sweep | report.
//
// Exit status: 0 all checks passed, 1 an experiment verdict failed,
// 2 invalid configuration or arguments, 3 any other error.

#include "rsstab/config.hpp"
#include "rsstab/error.hpp"
#include "rsstab/experiments.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace rsstab;

namespace {

struct RunOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    unsigned threads = 0;
    std::string out = "rsstab-out";
};

ParsedConfig load(const RunOptions& o, const std::vector<std::pair<std::string, std::string>>& overrides = {}) {
    auto j = read_config_json(o.config);
    if (o.seed) j["seed"] = *o.seed;
    for (const auto& [k, v] : overrides) set_config_value(j, k, v);
    return parse_config(j, fs::path(o.config).parent_path());
}

void print_summary(std::ostream& os, const ExperimentResult& r, const fs::path& dir) {
    os << r.verdict << " (" << r.rows.size() << " rows) -> " << dir.string() << '\n';
    for (const auto& [name, ok] : r.checks.items()) os << "  " << (ok.get<bool>() ? "ok    " : "FAILED") << ' ' << name << '\n';
}

int cmd_validate(const RunOptions& o) {
    const auto parsed = load(o);
    nlohmann::ordered_json report;
    report["valid"] = true;
    report["experiment"] = to_string(parsed.config.kind);
    report["defaults_applied"] = parsed.defaults_applied;
    report["resolved"] = parsed.resolved;
    std::cout << report.dump(2) << '\n';
    return 0;
}

int cmd_run(const RunOptions& o) {
    const auto parsed = load(o);
    const auto result = run_experiment(parsed.config, o.threads);
    write_outputs(parsed, result, o.out);
    print_summary(std::cout, result, o.out);
    return result.passed ? 0 : 1;
}

std::string directory_name(const std::string& param, const std::string& value) {
    std::string s = param + "=" + value;
    for (char& ch : s)
        if (ch == '/' || ch == '\\' || ch == ' ' || ch == '[' || ch == ']' || ch == '"' || ch == ',') ch = '_';
    return s;
}

int cmd_sweep(const RunOptions& o, const std::string& param, const std::vector<std::string>& values) {
    // Validate every point before running any of them.
    std::vector<ParsedConfig> configs;
    for (const auto& v : values) configs.push_back(load(o, {{param, v}}));
    fs::create_directories(o.out);
    std::ostringstream summary;
    summary << "param,value,passed,verdict,directory\n";
    bool all = true;
    for (std::size_t k = 0; k < values.size(); ++k) {
        const fs::path dir = fs::path(o.out) / directory_name(param, values[k]);
        const auto result = run_experiment(configs[k].config, o.threads);
        write_outputs(configs[k], result, dir);
        print_summary(std::cout, result, dir);
        all = all && result.passed;
        summary << param << ",\"" << values[k] << "\"," << (result.passed ? 1 : 0) << ',' << result.verdict << ','
                << dir.filename().string() << '\n';
    }
    std::ofstream(fs::path(o.out) / "summary.csv", std::ios::binary) << summary.str();
    return all ? 0 : 1;
}

int cmd_report(const std::string& dir) {
    const fs::path d(dir);
    if (fs::exists(d / "summary.csv") && !fs::exists(d / "manifest.json")) {
        std::ifstream in(d / "summary.csv");
        std::cout << in.rdbuf();
        return 0;
    }
    std::ifstream in(d / "manifest.json");
    if (!in) throw ConfigInvalid((d / "manifest.json").string(), "no manifest found");
    nlohmann::ordered_json m;
    in >> m;
    std::cout << "experiment: " << m.at("experiment").get<std::string>() << '\n'
              << "verdict:    " << m.at("verdict").get<std::string>() << '\n'
              << "seed:       " << m.at("seeds").at("master").dump() << '\n';
    for (const auto& [name, ok] : m.at("checks").items())
        std::cout << "  " << (ok.get<bool>() ? "ok    " : "FAILED") << ' ' << name << '\n';
    std::cout << "derived:\n";
    for (const auto& [k, v] : m.at("derived").items()) {
        const std::string text = v.dump();
        std::cout << "  " << k << ": " << (text.size() > 120 ? text.substr(0, 117) + "..." : text) << '\n';
    }
    const auto results = d / m.at("outputs").at("results").get<std::string>();
    std::ifstream csv(results);
    if (csv) {
        std::cout << "results (" << results.string() << "):\n";
        std::string line;
        while (std::getline(csv, line)) std::cout << "  " << line << '\n';
    }
    return m.at("passed").get<bool>() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Perturbation experiments for regime-switching diffusions"};
    app.require_subcommand(1);

    RunOptions o;
    std::string param;
    std::vector<std::string> values;
    std::string report_dir = "rsstab-out";

    auto add_common = [&](CLI::App* sub, bool runs) {
        sub->add_option("--config", o.config, "Experiment config (JSON)")->required();
        if (!runs) return;
        sub->add_option("--seed", o.seed, "Master seed, overrides the config");
        sub->add_option("--threads", o.threads, "Worker threads (0 = hardware)");
        sub->add_option("--out", o.out, "Output directory")->capture_default_str();
    };
    auto* validate = app.add_subcommand("validate", "Check a config and list the defaults it relies on");
    add_common(validate, false);
    auto* run = app.add_subcommand("run", "Run one experiment");
    add_common(run, true);
    auto* sweep = app.add_subcommand("sweep", "Run one experiment per value of a config key");
    add_common(sweep, true);
    sweep->add_option("--param", param, "Dotted config key, e.g. dt or model.params.beta")->required();
    sweep->add_option("--values", values, "Comma-separated values")->required()->delimiter(',');
    auto* report = app.add_subcommand("report", "Summarize a finished run");
    report->add_option("--out", report_dir, "Output directory of a run or sweep")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*validate) return cmd_validate(o);
        if (*run) return cmd_run(o);
        if (*sweep) return cmd_sweep(o, param, values);
        if (*report) return cmd_report(report_dir);
    } catch (const ConfigInvalid& e) {
        std::cerr << "config invalid: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << describe_error(e) << '\n';
        return 3;
    }
    return 2;
}
