#pragma once

// Coupling of two Markov chains through one marked Poisson clock.
//
// Each generator is laid out as disjoint half-open intervals on the mark
// axis: row i occupies [Σ_{k<i} q_k, Σ_{k<=i} q_k), split among targets in
// ascending order. A clock event with mark z moves a chain in state i to
// the target whose interval contains z, or leaves it in place. Both chains
// read the same events, so they stay together until a mark falls where
// their layouts disagree.

#include "rsstab/quadrature.hpp"
#include "rsstab/ratematrix.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace rsstab {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    bool empty() const noexcept { return !(hi > lo); }
    double length() const noexcept { return empty() ? 0.0 : hi - lo; }
    bool contains(double z) const noexcept { return z >= lo && z < hi; }
};

class IntervalPartition {
public:
    static IntervalPartition build(const RateMatrix& q);

    std::size_t n_states() const noexcept { return n_; }
    // Γ_ij; empty for i == j or q_ij == 0.
    const Interval& interval(State i, State j) const {
        return intervals_[static_cast<std::size_t>(i) * n_ + static_cast<std::size_t>(j)];
    }
    double row_offset(State i) const { return offsets_[static_cast<std::size_t>(i)]; }
    double row_end(State i) const { return offsets_[static_cast<std::size_t>(i) + 1]; }
    double total_measure() const noexcept { return offsets_.back(); }

    // h: the target ℓ with z ∈ Γ_iℓ, or i when no interval of row i holds z.
    State mark_target(State i, double z) const noexcept;

private:
    std::size_t n_ = 0;
    std::vector<Interval> intervals_;
    std::vector<double> offsets_;
};

// n(n-1)·H with n = number of states and H = max_i max(q_i, q̃_i).
double required_clock_rate(const RateMatrix& q, const RateMatrix& q_tilde);

struct ClockEvent {
    double time;
    double mark;
};

// Event k of path `path` is drawn from counter k of the chain-clock stream:
// an exponential(rate) gap and a uniform mark on [0, rate).
class ClockStream {
public:
    ClockStream(double rate, std::uint64_t key, std::uint64_t path);
    ClockEvent next() noexcept;
    double rate() const noexcept { return rate_; }

private:
    double rate_;
    std::uint64_t key_;
    std::uint64_t path_;
    std::uint64_t index_ = 0;
    double time_ = 0.0;
};

struct PoissonClock {
    double rate = 0.0;
    double horizon = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t path = 0;
    std::vector<ClockEvent> events;  // times strictly increasing, all <= horizon
};

PoissonClock simulate_clock(double rate, double horizon, std::uint64_t seed,
                            std::uint64_t path = 0);

// Piecewise-constant pair (Λ, Λ̃), right-continuous. states[k] holds on
// [times[k], times[k+1]); times[0] = 0. Only epochs where at least one
// component moves are stored.
struct CoupledChainPath {
    std::vector<double> times;
    std::vector<std::array<State, 2>> states;
    State initial_state = 0;
    double horizon = 0.0;

    std::array<State, 2> at(double t) const;
    State lambda(double t) const { return at(t)[0]; }
    State lambda_tilde(double t) const { return at(t)[1]; }
    // Jump epochs in (0, horizon].
    std::span<const double> epochs() const {
        return std::span<const double>(times).subspan(times.empty() ? 0 : 1);
    }
};

// Precomputed layouts for repeated path simulation.
class ChainCoupler {
public:
    // rate = 0 selects required_clock_rate(q, q_tilde). Throws
    // ClockRateTooSmall, DimensionMismatch.
    ChainCoupler(const RateMatrix& q, const RateMatrix& q_tilde, double rate = 0.0);

    const IntervalPartition& partition() const noexcept { return gamma_; }
    const IntervalPartition& partition_tilde() const noexcept { return gamma_tilde_; }
    double clock_rate() const noexcept { return rate_; }
    std::size_t n_states() const noexcept { return gamma_.n_states(); }

    // Drives both chains with the events of `clock`.
    CoupledChainPath simulate(State i0, const PoissonClock& clock) const;
    // Same, drawing events from the chain-clock stream (key, path).
    CoupledChainPath simulate(State i0, double horizon, std::uint64_t key, std::uint64_t path) const;

private:
    template <class NextEvent>
    CoupledChainPath run(State i0, double horizon, NextEvent&& next) const;

    IntervalPartition gamma_;
    IntervalPartition gamma_tilde_;
    double required_ = 0.0;
    double rate_ = 0.0;
};

CoupledChainPath simulate_coupled(const RateMatrix& q, const RateMatrix& q_tilde, State i0,
                                  const PoissonClock& clock);

// Lebesgue measure of {s <= t : Λ_s != Λ̃_s}. Throws HorizonExceeded.
double mismatch_occupation(const CoupledChainPath& path, double t);

// Generator of (Λ, Λ̃) on S×S, pair (i, j) at index i·n + j.
RateMatrix coupling_generator(const RateMatrix& q, const RateMatrix& q_tilde);

// P(Λ_t != Λ̃_t) from the joint generator, started at (i0, i0).
double mismatch_probability_exact(const RateMatrix& joint, State i0, double t);

// ∫_0^t P(Λ_s != Λ̃_s) ds by adaptive Simpson.
QuadratureResult mismatch_integral_exact(const RateMatrix& joint, State i0, double t,
                                         const QuadratureOptions& options = {1e-10, 1e-12, 48});

// Same integral through the augmented-matrix exponential (independent route).
double mismatch_integral_closed_form(const RateMatrix& joint, State i0, double t);

// CSV with columns path_id,time,lambda,lambda_tilde (one row per epoch).
void write_paths_csv(std::ostream& os, std::span<const CoupledChainPath> paths);

}  // namespace rsstab
