#pragma once

// Batch experiments behind the command-line runner. Each run maps a parsed
// configuration to a numeric table plus named checks; the same master seed
// gives the same table whatever the thread count.

#include "rsstab/config.hpp"
#include "rsstab/parallel.hpp"
#include "rsstab/ratematrix.hpp"

#include "json.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace rsstab {

inline constexpr const char* kToolVersion = "0.1.0";

struct ExperimentResult {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;  // booleans as 0/1
    nlohmann::ordered_json derived;         // η_p, C2, M, N and friends
    nlohmann::ordered_json checks;          // named pass/fail flags
    bool passed = false;
    std::string verdict;
};

// Module errors are rethrown nested inside an Error naming the experiment
// and the failing sweep point.
ExperimentResult run_experiment(const ExperimentConfig& config, unsigned threads = 0);

void write_results_csv(std::ostream& os, const ExperimentResult& result);
nlohmann::ordered_json make_manifest(const ParsedConfig& parsed, const ExperimentResult& result);
// Creates `dir` and writes the results table and the manifest into it.
void write_outputs(const ParsedConfig& parsed, const ExperimentResult& result, const std::filesystem::path& dir);

// "outer: inner: innermost" for nested exceptions.
std::string describe_error(const std::exception& e);

struct Lemma2Row {
    double t = 0.0;
    MeanEstimate empirical;       // Monte Carlo of ∫_0^t 1{Λ_s != Λ̃_s} ds
    double exact = 0.0;           // adaptive quadrature of the joint-chain ODE
    double closed_form = 0.0;     // augmented matrix exponential
    double bound = 0.0;           // N² t² ‖Q - Q̃‖_ℓ1, N = n_states - 1
};

std::vector<Lemma2Row> lemma2_check(const RateMatrix& q, const RateMatrix& q_tilde, State i0,
                                    std::span<const double> times, std::size_t n_paths, std::uint64_t seed,
                                    unsigned threads = 0);

// Monte Carlo of E_{i0} exp(p ∫_0^t κ(Λ_s) ds) at each time.
std::vector<MeanEstimate> feynman_kac_monte_carlo(const RateMatrix& q, const Eigen::VectorXd& kappa, double p,
                                                  State i0, std::span<const double> times,
                                                  std::size_t n_paths, std::uint64_t seed,
                                                  unsigned threads = 0);

}  // namespace rsstab
