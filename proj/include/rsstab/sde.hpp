#pragma once

// Euler–Maruyama for the coupled pair
//   dX = b(X, Λ) dt + σ(X, Λ) dW,   dX̃ = b(X̃, Λ̃) dt + σ(X̃, Λ̃) dW,
// with (Λ, Λ̃) from the shared-clock coupling and one Brownian path.

#include "rsstab/ratematrix.hpp"
#include "rsstab/skorokhod.hpp"

#include <atomic>
#include <cstdint>
#include <memory>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rsstab {

// out = b(x, i), length d.
using DriftFn = std::function<void(std::span<const double> x, State i, std::span<double> out)>;
// out = σ(x, i), d×d row-major.
using DiffusionFn = std::function<void(std::span<const double> x, State i, std::span<double> out)>;
// out[i·d + k] = b_k(x, i) for every state i; lets a model share work
// across states.
using DriftAllFn = std::function<void(std::span<const double> x, std::span<double> out)>;

// Declared, not inferred.
struct CoefficientMetadata {
    // One-sided Lipschitz constants: κ_i with 2⟨x-y, b(x,i)-b(y,i)⟩ + 2‖σ(x,i)-σ(y,i)‖²_HS <= κ_i |x-y|².
    // Empty when not declared.
    std::vector<double> kappa;
    // Linear growth: |b(x,i)|² <= K(1+|x|²) and ‖σ(x,i)‖²_HS <= K(1+|x|²).
    std::optional<double> K;
    // |b|² <= K and ‖σ‖²_HS <= K everywhere.
    bool bounded = false;
    // When false the coefficients ignore the regime and Euler steps are
    // not split at chain jumps.
    bool regime_dependent = true;
    // Points where the drift is singular (d = 1 only).
    std::vector<double> singular_points;
    // Incremented by models that cap singular terms.
    std::shared_ptr<std::atomic<std::uint64_t>> clamp_counter;
};

class SwitchingCoefficients {
public:
    SwitchingCoefficients(std::string name, std::size_t dim, std::size_t n_states, DriftFn drift,
                          DiffusionFn diffusion, CoefficientMetadata metadata);

    const std::string& name() const noexcept { return name_; }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t n_states() const noexcept { return n_states_; }
    const CoefficientMetadata& metadata() const noexcept { return meta_; }

    void drift(std::span<const double> x, State i, std::span<double> out) const { drift_(x, i, out); }
    void diffusion(std::span<const double> x, State i, std::span<double> out) const {
        diffusion_(x, i, out);
    }
    // b(x, i) for all states at once, out of length n_states·d.
    void drift_all(std::span<const double> x, std::span<double> out) const;
    void set_drift_all(DriftAllFn fn) { drift_all_ = std::move(fn); }

    bool has_h1() const noexcept { return meta_.kappa.size() == n_states_; }
    bool has_h2() const noexcept { return meta_.K.has_value(); }
    // Throw MissingMetadata when undeclared.
    Eigen::VectorXd kappa() const;
    double K() const;

private:
    std::string name_;
    std::size_t dim_;
    std::size_t n_states_;
    DriftFn drift_;
    DiffusionFn diffusion_;
    DriftAllFn drift_all_;
    CoefficientMetadata meta_;
};

// Randomized check of the declared one-sided Lipschitz, growth and boundedness inequalities
// on sampled points (x ~ N(0, radius² I)).
struct SpotCheckReport {
    std::size_t samples = 0;
    std::size_t h1_violations = 0;
    std::size_t h2_violations = 0;
    std::size_t bound_violations = 0;
    // Largest (lhs/|x-y|² - κ_i) seen; positive values are violations.
    double worst_h1_excess = -std::numeric_limits<double>::infinity();
    // Largest lhs/rhs of the growth and boundedness inequalities.
    double worst_h2_ratio = 0.0;
    double worst_bound_ratio = 0.0;
    bool ok() const noexcept { return h1_violations + h2_violations + bound_violations == 0; }
};

SpotCheckReport spot_check(const SwitchingCoefficients& c, std::size_t samples, std::uint64_t seed,
                           double radius = 5.0);

// Brownian motion on a uniform fine grid, plus values at extra times
// (chain jump epochs) filled in by Brownian bridges. Any coarser grid whose
// step is a multiple of the fine step reads the same path.
class BrownianPath {
public:
    // Increments come from the Brownian stream `key`, bridge points from
    // `bridge_key`; both indexed by `path`. Epochs must be sorted and lie
    // in [0, horizon].
    BrownianPath(std::size_t dim, double horizon, std::size_t fine_steps, std::uint64_t key,
                 std::uint64_t bridge_key, std::uint64_t path, std::span<const double> epochs = {});

    std::size_t dim() const noexcept { return dim_; }
    std::size_t fine_steps() const noexcept { return fine_steps_; }
    double fine_dt() const noexcept { return fine_dt_; }
    double horizon() const noexcept { return horizon_; }
    std::span<const double> at_index(std::size_t k) const {
        return {w_.data() + k * dim_, dim_};
    }
    std::span<const double> epochs() const noexcept { return epochs_; }
    std::span<const double> at_epoch(std::size_t e) const {
        return {epoch_w_.data() + e * dim_, dim_};
    }
    // Fine step [t_j, t_{j+1}] holding epoch e.
    std::size_t epoch_step(std::size_t e) const { return epoch_step_[e]; }

private:
    std::size_t dim_;
    double horizon_;
    std::size_t fine_steps_;
    double fine_dt_;
    std::vector<double> w_;
    std::vector<double> epochs_;
    std::vector<double> epoch_w_;
    std::vector<std::size_t> epoch_step_;
};

struct TrajectoryPair {
    std::size_t dim = 1;
    double dt = 0.0;
    std::vector<double> times;         // uniform grid k·dt, k = 0..n
    std::vector<double> x;             // (n+1)·d, row k = X at times[k]
    std::vector<double> x_tilde;
    std::vector<double> increments;    // n·d, W(t_{k+1}) - W(t_k)
    CoupledChainPath chains;

    std::size_t steps() const noexcept { return times.empty() ? 0 : times.size() - 1; }
    std::span<const double> x_at(std::size_t k) const { return {x.data() + k * dim, dim}; }
    std::span<const double> x_tilde_at(std::size_t k) const {
        return {x_tilde.data() + k * dim, dim};
    }
};

// Number of uniform steps used for horizon T and requested step dt: the
// step is shrunk to T/n so that the grid ends exactly at T.
std::size_t grid_steps(double horizon, double dt);

// Euler pair on the uniform grid of [0, T], steps split at jump epochs of
// either chain when the coefficients are regime dependent. Throws
// NonFiniteState, HorizonExceeded, DimensionMismatch.
TrajectoryPair simulate_pair(const SwitchingCoefficients& c, const CoupledChainPath& chains,
                             std::span<const double> x0, double horizon, double dt,
                             std::uint64_t seed, std::uint64_t path = 0);

// Endpoint sampling for Monte Carlo: X and X̃ at the requested grid times
// for n_paths independent coupled paths.
struct PairSampleOptions {
    State i0 = 0;
    double dt = 0.01;
    std::vector<double> times;  // observation times, rounded to the grid
    std::size_t n_paths = 100000;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    double clock_rate = 0.0;  // 0 = required rate for (q, q_tilde)
    double max_failure_rate = 1e-3;
};

struct PairSamples {
    std::size_t dim = 1;
    std::vector<double> times;
    // x[j] holds the successful paths' X at times[j], path-major (n_ok·d).
    std::vector<std::vector<double>> x;
    std::vector<std::vector<double>> x_tilde;
    std::size_t n_paths = 0;
    std::size_t failures = 0;
    double clock_rate = 0.0;
};

// Throws NonFiniteState when more than max_failure_rate of paths overflow.
PairSamples sample_pairs(const SwitchingCoefficients& c, const RateMatrix& q,
                         const RateMatrix& q_tilde, std::span<const double> x0,
                         const PairSampleOptions& options);

// Second-moment envelope (|x0|² + 2Kt) e^{(2K+1)t} under the growth condition.
double second_moment_bound(double x0_norm_sq, double K, double t);

struct MomentGuardReport {
    double t = 0.0;
    double bound = 0.0;
    double mean = 0.0;
    double std_error = 0.0;
    bool flagged = false;  // mean > bound + 3·std_error
};

// `samples` holds n points of dimension `dim`, path-major.
MomentGuardReport second_moment_guard(const SwitchingCoefficients& c, std::span<const double> x0,
                                      double t, std::span<const double> samples);

struct StrongErrorPoint {
    double dt = 0.0;
    double rms = 0.0;
    double std_error = 0.0;
};

struct StrongErrorCurve {
    double reference_dt = 0.0;
    std::vector<StrongErrorPoint> points;
    double slope = 0.0;  // NaN when fewer than two points
};

// RMS of |X_T^{dt} - X_T^{ref}| for each dt but the last, which is the
// reference. All levels read one Brownian path on the reference grid.
// Each dt must be an integer multiple of the reference step.
StrongErrorCurve strong_error_curve(const SwitchingCoefficients& c, const RateMatrix& q, State i0,
                                    std::span<const double> x0, double horizon,
                                    std::span<const double> dts, std::size_t n_paths,
                                    std::uint64_t seed, unsigned threads = 0);

}  // namespace rsstab
