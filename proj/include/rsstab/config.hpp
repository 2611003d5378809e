#pragma once

// Experiment configuration: a JSON document with a versioned schema. Every
// setting left out is filled from a default and the key is recorded, so a
// manifest can list exactly what the run assumed.

#include "rsstab/models.hpp"
#include "rsstab/ratematrix.hpp"

#include "json.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace rsstab {

inline constexpr int kSchemaVersion = 1;

enum class ExperimentKind { Theorem1Sweep, Theorem2Reduction, Lemma2Check, GirsanovSweep, FeynmanKacCheck };

const char* to_string(ExperimentKind kind) noexcept;
const std::vector<std::string>& experiment_kind_names();

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::Theorem1Sweep;
    RateMatrix q = RateMatrix::zero(1);
    // Perturbed generators and their l1 distances to q, in config order.
    std::vector<RateMatrix> q_tildes;
    std::vector<double> deltas;
    std::string model_name;  // empty when the experiment needs no model
    ModelParams model_params;
    std::vector<double> x0;
    State i0 = 0;
    double horizon = 1.0;
    double dt = 0.01;
    std::size_t n_paths = 100000;
    std::uint64_t seed = 0;
    std::vector<double> times;
    std::vector<double> p_grid;
    std::vector<double> eps_grid;
    bool bounded = false;
    std::size_t c2_grid_points = 2001;
    // theorem2-reduction
    int m = 0;
    std::optional<RateMatrix> q_hat;
    std::vector<double> b_scales;
    // girsanov-sweep
    double eta = 2.5;
    std::size_t sandwich_paths = 10000;
    // feynman-kac-check
    Eigen::VectorXd kappa;
    double p = 2.0;

    std::string results_file = "results.csv";
    std::string manifest_file = "manifest.json";

    SwitchingCoefficients model() const;
};

struct ParsedConfig {
    ExperimentConfig config;
    nlohmann::ordered_json resolved;            // every setting, defaults included
    std::vector<std::string> defaults_applied;  // dotted keys filled from defaults
};

// Throws ConfigInvalid(key, message); file references are resolved against
// base_dir.
ParsedConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ParsedConfig load_config(const std::filesystem::path& path);
// The raw document; throws ConfigInvalid for unreadable files or bad JSON.
nlohmann::json read_config_json(const std::filesystem::path& path);

// Sets a dotted key ("model.params.beta") to `value`, read as JSON when it
// parses and as a string otherwise.
void set_config_value(nlohmann::json& j, const std::string& dotted_key, const std::string& value);

}  // namespace rsstab
