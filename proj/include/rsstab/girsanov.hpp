#pragma once

// Change of measure for irregular drifts. A reference diffusion
//   dY = Z0(Y) dt + σ(Y) dW,  Z0 = -σσ*∇V,
// is reweighted by w = exp(M_T - ½⟨M⟩_T) with
//   M_T = ∫ ⟨σ⁻¹(Y) Z(Y, Λ), dW⟩,  Z = b - Z0,
// so that E[w f(Y_T)] = E f(X_T) for dX = b(X, Λ) dt + σ(X) dW.

#include "rsstab/ratematrix.hpp"
#include "rsstab/sde.hpp"
#include "rsstab/skorokhod.hpp"
#include "rsstab/stats.hpp"

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace rsstab {

struct ReferenceModel {
    std::string name;
    std::size_t dim = 1;
    std::function<double(std::span<const double>)> potential;
    std::function<void(std::span<const double>, std::span<double>)> grad_potential;
    // d×d row-major.
    std::function<void(std::span<const double>, std::span<double>)> sigma;
    // Declared Lipschitz constant of Z0.
    double k0 = 0.0;

    // Z0(x) = -Σ_ij a_ij(x) ∂_j V(x) e_i, a = σσ*.
    void z0(std::span<const double> x, std::span<double> out) const;
};

// V(x) = |x|²/2 + (d/2) log 2π, σ = I: Z0(x) = -x, μ0 = N(0, I).
ReferenceModel ou_reference(std::size_t dim = 1);

struct ReferenceCheck {
    double normalization = 0.0;  // ∫ e^{-V}; NaN when d > 1
    double worst_lipschitz_ratio = 0.0;  // max |Z0(x)-Z0(y)| / (K0 |x-y|)
    bool ok = false;
};

// Lipschitz spot check on sampled pairs plus (d = 1) quadrature of e^{-V}
// against 1 within 1e-6.
ReferenceCheck check_reference(const ReferenceModel& m, std::size_t samples, std::uint64_t seed);

struct ReferencePath {
    std::size_t dim = 1;
    double dt = 0.0;
    std::vector<double> y;           // (n+1)·d
    std::vector<double> increments;  // n·d
    std::size_t steps() const noexcept { return increments.size() / dim; }
    std::span<const double> y_at(std::size_t k) const { return {y.data() + k * dim, dim}; }
};

// Euler path of the reference process on a uniform grid. Throws
// NonFiniteState.
ReferencePath simulate_reference(const ReferenceModel& m, std::span<const double> x0, double horizon,
                                 double dt, std::uint64_t seed, std::uint64_t path = 0);

struct WeightedSample {
    std::vector<double> y_terminal;
    double weight = 1.0;
    double martingale = 0.0;          // M_T
    double quadratic_variation = 0.0; // ⟨M⟩_T
};

// Weight of one reference path against the drift in `model`, with the
// regime read at the left end of each step from component `component`
// (0 = Λ, 1 = Λ̃) of `chains`. Throws SingularSigma.
WeightedSample rn_weight(const ReferenceModel& m, const SwitchingCoefficients& model,
                         const CoupledChainPath& chains, int component, const ReferencePath& y);

struct WeightedSet {
    std::size_t dim = 1;
    std::vector<double> y_terminal;  // n·d
    std::vector<double> weight;
    std::vector<double> martingale;
    std::vector<double> quadratic_variation;
};

struct GirsanovOptions {
    State i0 = 0;
    double dt = 1e-3;
    std::size_t n_paths = 100000;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    double clock_rate = 0.0;  // 0 = required for the pair(s) involved
};

// Reference endpoints and weights for chains drawn from q.
WeightedSet weighted_samples(const ReferenceModel& m, const SwitchingCoefficients& model,
                             const RateMatrix& q, std::span<const double> x0, double horizon,
                             const GirsanovOptions& options);

// Plain Euler endpoints of dX = b(X, Λ) dt + σ(X) dW from streams disjoint
// from weighted_samples (same seed).
std::vector<double> direct_samples(const ReferenceModel& m, const SwitchingCoefficients& model,
                                   const RateMatrix& q, std::span<const double> x0, double horizon,
                                   const GirsanovOptions& options);

struct WblEstimate {
    double delta = 0.0;  // l1_distance(q, q_tilde)
    double value = 0.0;  // mean |w - w̃|
    double std_error = 0.0;
    std::size_t n_paths = 0;
};

// E|w - w̃| with w, w̃ from the coupled chains on one Y path.
WblEstimate wbl_upper_estimate(const ReferenceModel& m, const SwitchingCoefficients& model,
                               const RateMatrix& q, const RateMatrix& q_tilde,
                               std::span<const double> x0, double horizon,
                               const GirsanovOptions& options);

// Same estimate for several perturbations with common random numbers: one
// Y path, one clock (rate = max required over the sweep) and so one Λ per
// path index. paired_diff_se[k] is the standard error of the per-path
// difference between entries k+1 and k.
struct WblSweep {
    std::vector<WblEstimate> estimates;
    std::vector<double> paired_diff_se;
    double clock_rate = 0.0;
};

WblSweep wbl_upper_sweep(const ReferenceModel& m, const SwitchingCoefficients& model,
                         const RateMatrix& q, std::span<const RateMatrix> q_tildes,
                         std::span<const double> x0, double horizon, const GirsanovOptions& options);

struct NovikovOptions {
    double rel_tol = 1e-8;
    double initial_half_width = 8.0;
    double max_half_width = 1e4;
    double overflow = 1e300;
    // Annuli r0·[10^{-j-1}, 10^{-j}] around each singular point, j = 0..levels-1,
    // with r0 = min(0.1, gap/4); a geometric tail covers the rest.
    int annulus_levels = 5;
    // Divergence when successive annulus contributions shrink by less than
    // this factor.
    double divergence_ratio = 0.9;
};

struct NovikovReport {
    double eta = 0.0;
    double horizon = 0.0;
    std::size_t dim = 1;
    double required_eta = 0.0;        // 2Td
    std::vector<double> values;       // μ0(e^{η|σ⁻¹Z(·,i)|²}), +inf when divergent
    std::vector<bool> divergent;
    bool eta_ok = false;              // η > 2Td
    bool passed() const noexcept;
};

// d = 1 quadrature on expanding truncations [-L, L] split at the model's
// singular points. Throws IntegralDiverged when the tails do not settle
// before max_half_width or the value overflows.
NovikovReport novikov_check(const ReferenceModel& m, const SwitchingCoefficients& model, double eta,
                            double horizon, const NovikovOptions& options = {});

// Σ_{k=1}^{k_max} log(1 + 1/(x-k)²) with near terms summed exactly and far
// blocks by Euler–Maclaurin. Each exact term is capped at log(1 + 1e12).
class SingularSeries {
public:
    explicit SingularSeries(std::size_t k_max,
                            std::shared_ptr<std::atomic<std::uint64_t>> counter = nullptr);
    double operator()(double x) const;
    std::size_t k_max() const noexcept { return k_max_; }
    std::uint64_t clamp_events() const noexcept { return clamps_->load(std::memory_order_relaxed); }
    // Σ_{k>k_max} log(1 + 1/(x-k)²) <= 1/(k_max - x) for x < k_max.
    double tail_bound(double x) const;

    inline static const double kTermCap = std::log1p(1e12);

private:
    std::size_t k_max_;
    std::shared_ptr<std::atomic<std::uint64_t>> clamps_;
};

// b(x, i) = β_i √S(x) - x with S the singular series, σ = 1.
SwitchingCoefficients singular_drift(std::vector<double> beta, std::size_t k_max = 10000);

struct DecayRow {
    double delta = 0.0;
    double estimate = 0.0;
    double std_error = 0.0;
};

struct DecayExperiment {
    NovikovReport novikov;
    std::vector<DecayRow> rows;          // sorted by delta, descending
    std::vector<double> paired_diff_se;
    bool monotone = false;               // nonincreasing within 2 paired SE
    PowerLawFit fit;                     // estimate ≈ C δ^s
    double envelope_constant = 0.0;      // max_k estimate_k / δ_k^s
    double clock_rate = 0.0;
    std::uint64_t clamp_events = 0;
};

// Sweep of E|w - w̃| over perturbations of q. Throws NovikovFailed when the
// integrability check fails.
DecayExperiment theorem3_decay_experiment(const ReferenceModel& m, const SwitchingCoefficients& model,
                                          const RateMatrix& q, std::span<const RateMatrix> q_tildes,
                                          std::span<const double> x0, double horizon, double eta,
                                          const GirsanovOptions& options,
                                          const NovikovOptions& novikov = {});

}  // namespace rsstab
