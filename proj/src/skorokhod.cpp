#include "rsstab/skorokhod.hpp"

#include "rsstab/error.hpp"
#include "rsstab/linalg.hpp"
#include "rsstab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

namespace rsstab {

IntervalPartition IntervalPartition::build(const RateMatrix& q) {
    IntervalPartition p;
    p.n_ = q.n_states();
    p.intervals_.assign(p.n_ * p.n_, Interval{});
    p.offsets_.assign(p.n_ + 1, 0.0);
    double cursor = 0.0;
    for (std::size_t i = 0; i < p.n_; ++i) {
        p.offsets_[i] = cursor;
        for (std::size_t j = 0; j < p.n_; ++j) {
            if (j == i) continue;
            const double rate = q(i, j);
            if (rate > 0.0) p.intervals_[i * p.n_ + j] = Interval{cursor, cursor + rate};
            cursor += rate;
        }
        // Pin the row end to the accumulated lengths so rows tile exactly.
        p.offsets_[i + 1] = cursor;
    }
    return p;
}

State IntervalPartition::mark_target(State i, double z) const noexcept {
    const auto row = static_cast<std::size_t>(i);
    if (z < offsets_[row] || z >= offsets_[row + 1]) return i;
    for (std::size_t j = 0; j < n_; ++j)
        if (intervals_[row * n_ + j].contains(z)) return static_cast<State>(j);
    return i;
}

double required_clock_rate(const RateMatrix& q, const RateMatrix& q_tilde) {
    if (q.n_states() != q_tilde.n_states())
        throw DimensionMismatch(q.n_states(), q_tilde.n_states(), "required_clock_rate");
    const double n = static_cast<double>(q.n_states());
    const double h = std::max(q.max_exit_rate(), q_tilde.max_exit_rate());
    return n * (n - 1.0) * h;
}

ClockStream::ClockStream(double rate, std::uint64_t key, std::uint64_t path)
    : rate_(rate), key_(key), path_(path) {
    if (!(rate > 0.0)) throw InvalidArgument("clock rate must be positive");
}

ClockEvent ClockStream::next() noexcept {
    const auto b = CounterRng(key_, path_).bits(index_++);
    time_ += -std::log(to_open_unit(b[0])) / rate_;
    return ClockEvent{time_, to_unit(b[1]) * rate_};
}

PoissonClock simulate_clock(double rate, double horizon, std::uint64_t seed, std::uint64_t path) {
    if (!(horizon > 0.0)) throw InvalidArgument("simulate_clock: horizon must be positive");
    PoissonClock clock;
    clock.rate = rate;
    clock.horizon = horizon;
    clock.seed = seed;
    clock.path = path;
    ClockStream stream(rate, derive_key(seed, stream::kChainClock), path);
    for (ClockEvent e = stream.next(); e.time <= horizon; e = stream.next()) clock.events.push_back(e);
    return clock;
}

std::array<State, 2> CoupledChainPath::at(double t) const {
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const auto k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - times.begin() - 1, 0));
    return states[k];
}

ChainCoupler::ChainCoupler(const RateMatrix& q, const RateMatrix& q_tilde, double rate)
    : gamma_(IntervalPartition::build(q)), gamma_tilde_(IntervalPartition::build(q_tilde)) {
    required_ = required_clock_rate(q, q_tilde);
    if (rate == 0.0) rate = required_;
    if (rate < required_ * (1.0 - 1e-12)) throw ClockRateTooSmall(rate, required_);
    // All-absorbing pair: any positive rate works and no event moves a chain.
    rate_ = rate > 0.0 ? rate : 1.0;
}

template <class NextEvent>
CoupledChainPath ChainCoupler::run(State i0, double horizon, NextEvent&& next) const {
    if (i0 < 0 || static_cast<std::size_t>(i0) >= n_states())
        throw InvalidArgument("initial state out of range");
    CoupledChainPath path;
    path.initial_state = i0;
    path.horizon = horizon;
    path.times.push_back(0.0);
    path.states.push_back({i0, i0});
    State a = i0;
    State b = i0;
    ClockEvent e{};
    while (next(e)) {
        const State na = gamma_.mark_target(a, e.mark);
        const State nb = gamma_tilde_.mark_target(b, e.mark);
        if (na == a && nb == b) continue;
        a = na;
        b = nb;
        path.times.push_back(e.time);
        path.states.push_back({a, b});
    }
    return path;
}

CoupledChainPath ChainCoupler::simulate(State i0, const PoissonClock& clock) const {
    if (clock.rate < required_ * (1.0 - 1e-12)) throw ClockRateTooSmall(clock.rate, required_);
    std::size_t k = 0;
    return run(i0, clock.horizon, [&](ClockEvent& e) {
        if (k >= clock.events.size()) return false;
        e = clock.events[k++];
        return true;
    });
}

CoupledChainPath ChainCoupler::simulate(State i0, double horizon, std::uint64_t key,
                                        std::uint64_t path) const {
    if (!(horizon > 0.0)) throw InvalidArgument("simulate: horizon must be positive");
    ClockStream stream(rate_, key, path);
    return run(i0, horizon, [&](ClockEvent& e) {
        e = stream.next();
        return e.time <= horizon;
    });
}

CoupledChainPath simulate_coupled(const RateMatrix& q, const RateMatrix& q_tilde, State i0,
                                  const PoissonClock& clock) {
    const double required = required_clock_rate(q, q_tilde);
    if (clock.rate < required * (1.0 - 1e-12)) throw ClockRateTooSmall(clock.rate, required);
    const ChainCoupler coupler(q, q_tilde, clock.rate);
    return coupler.simulate(i0, clock);
}

double mismatch_occupation(const CoupledChainPath& path, double t) {
    if (t > path.horizon * (1.0 + 1e-12))
        throw HorizonExceeded("mismatch_occupation: t beyond path horizon");
    double total = 0.0;
    for (std::size_t k = 0; k < path.times.size(); ++k) {
        const double start = path.times[k];
        if (start >= t) break;
        const double end = (k + 1 < path.times.size()) ? std::min(path.times[k + 1], t) : t;
        if (path.states[k][0] != path.states[k][1]) total += end - start;
    }
    return total;
}

namespace {

double overlap(const Interval& a, const Interval& b) {
    if (a.empty() || b.empty()) return 0.0;
    return std::max(0.0, std::min(a.hi, b.hi) - std::max(a.lo, b.lo));
}

}  // namespace

RateMatrix coupling_generator(const RateMatrix& q, const RateMatrix& q_tilde) {
    if (q.n_states() != q_tilde.n_states())
        throw DimensionMismatch(q.n_states(), q_tilde.n_states(), "coupling_generator");
    const auto g = IntervalPartition::build(q);
    const auto gt = IntervalPartition::build(q_tilde);
    const auto n = static_cast<State>(q.n_states());
    const Eigen::Index nn = static_cast<Eigen::Index>(n) * n;
    Eigen::MatrixXd joint = Eigen::MatrixXd::Zero(nn, nn);
    for (State i = 0; i < n; ++i) {
        for (State j = 0; j < n; ++j) {
            const Eigen::Index from = static_cast<Eigen::Index>(i) * n + j;
            double out = 0.0;
            for (State k = 0; k < n; ++k) {
                for (State l = 0; l < n; ++l) {
                    if (k == i && l == j) continue;
                    double rate = 0.0;
                    if (k != i && l != j) {
                        rate = overlap(g.interval(i, k), gt.interval(j, l));
                    } else if (k == i) {
                        // Λ stays (mark outside row i of Γ), Λ̃ moves to l.
                        rate = gt.interval(j, l).length();
                        for (State kk = 0; kk < n; ++kk)
                            if (kk != i) rate -= overlap(g.interval(i, kk), gt.interval(j, l));
                    } else {
                        rate = g.interval(i, k).length();
                        for (State ll = 0; ll < n; ++ll)
                            if (ll != j) rate -= overlap(g.interval(i, k), gt.interval(j, ll));
                    }
                    rate = std::max(rate, 0.0);
                    joint(from, static_cast<Eigen::Index>(k) * n + l) = rate;
                    out += rate;
                }
            }
            joint(from, from) = -out;
        }
    }
    return RateMatrix::validate(joint);
}

namespace {

State base_size(const RateMatrix& joint) {
    const auto n = static_cast<State>(std::lround(std::sqrt(static_cast<double>(joint.n_states()))));
    if (static_cast<std::size_t>(n) * static_cast<std::size_t>(n) != joint.n_states())
        throw InvalidArgument("joint generator size is not a perfect square");
    return n;
}

double mismatch_mass(const Eigen::VectorXd& row, State n) {
    double s = 0.0;
    for (State i = 0; i < n; ++i)
        for (State j = 0; j < n; ++j)
            if (i != j) s += row(static_cast<Eigen::Index>(i) * n + j);
    return s;
}

}  // namespace

double mismatch_probability_exact(const RateMatrix& joint, State i0, double t) {
    const State n = base_size(joint);
    if (i0 < 0 || i0 >= n) throw InvalidArgument("initial state out of range");
    const Eigen::MatrixXd e = transition_matrix(joint, t);
    return mismatch_mass(e.row(static_cast<Eigen::Index>(i0) * n + i0).transpose(), n);
}

QuadratureResult mismatch_integral_exact(const RateMatrix& joint, State i0, double t,
                                         const QuadratureOptions& options) {
    if (!(t >= 0.0)) throw InvalidArgument("mismatch_integral_exact: t must be nonnegative");
    return adaptive_simpson([&](double s) { return mismatch_probability_exact(joint, i0, s); }, 0.0,
                            t, options);
}

double mismatch_integral_closed_form(const RateMatrix& joint, State i0, double t) {
    const State n = base_size(joint);
    const Eigen::MatrixXd integral = linalg::expm_integral(joint.entries(), t);
    return mismatch_mass(integral.row(static_cast<Eigen::Index>(i0) * n + i0).transpose(), n);
}

void write_paths_csv(std::ostream& os, std::span<const CoupledChainPath> paths) {
    os << "path_id,time,lambda,lambda_tilde\n";
    os << std::setprecision(17);
    for (std::size_t p = 0; p < paths.size(); ++p) {
        const auto& path = paths[p];
        for (std::size_t k = 0; k < path.times.size(); ++k)
            os << p << ',' << path.times[k] << ',' << path.states[k][0] << ','
               << path.states[k][1] << '\n';
    }
}

}  // namespace rsstab
