#pragma once

// Named benchmark coefficient families with declared constants.
//
//   switching-ou   b = -a_i x,                σ = s_i + v_i x
//   bounded-tanh   b = mu_i + alpha_i tanh x,  σ = s_i           (bounded)
//   lipschitz      b = -x + beta_i + gamma sin x, σ = 1
//   singular-log   b = beta_i √S(x) - x,       σ = 1
//
// All are one-dimensional. Per-state parameters are vectors of length
// n_states, or of length one to use the same value in every state; scalar
// parameters are vectors of length one.

#include "rsstab/sde.hpp"

#include <map>
#include <string>
#include <vector>

namespace rsstab {

using ModelParams = std::map<std::string, std::vector<double>>;

SwitchingCoefficients switching_ou(std::vector<double> a, std::vector<double> s,
                                   std::vector<double> v = {});
SwitchingCoefficients bounded_tanh(std::vector<double> mu, std::vector<double> alpha,
                                   std::vector<double> s);
SwitchingCoefficients lipschitz_drift(std::vector<double> beta, double gamma);

const std::vector<std::string>& model_names();

std::size_t edit_distance(const std::string& a, const std::string& b);
// Stable order by edit distance to `name`, closest first.
std::vector<std::string> rank_by_edit_distance(const std::string& name,
                                               const std::vector<std::string>& candidates);

// Registered names closest to `name` by edit distance, best first.
std::vector<std::string> suggest_model_names(const std::string& name);

// Throws InvalidArgument for unknown names (message lists suggestions),
// missing or mis-sized parameters, or unknown parameter keys.
SwitchingCoefficients make_model(const std::string& name, std::size_t n_states,
                                 const ModelParams& params);

// Parameter keys and defaults for a registered model; keys absent from the
// map are required.
const ModelParams& model_defaults(const std::string& name);
const std::vector<std::string>& model_keys(const std::string& name);

}  // namespace rsstab
