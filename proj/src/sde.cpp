#include "rsstab/sde.hpp"

#include "rsstab/error.hpp"
#include "rsstab/parallel.hpp"
#include "rsstab/rng.hpp"
#include "rsstab/stats.hpp"

#include <algorithm>
#include <cmath>

namespace rsstab {

SwitchingCoefficients::SwitchingCoefficients(std::string name, std::size_t dim, std::size_t n_states,
                                             DriftFn drift, DiffusionFn diffusion,
                                             CoefficientMetadata metadata)
    : name_(std::move(name)), dim_(dim), n_states_(n_states), drift_(std::move(drift)),
      diffusion_(std::move(diffusion)), meta_(std::move(metadata)) {
    if (dim_ == 0 || n_states_ == 0)
        throw InvalidArgument("coefficients need positive dimension and state count");
    if (!meta_.kappa.empty() && meta_.kappa.size() != n_states_)
        throw DimensionMismatch(n_states_, meta_.kappa.size(), "metadata kappa");
    if (meta_.bounded && !meta_.K) throw MissingMetadata("bounded coefficients need K");
}

void SwitchingCoefficients::drift_all(std::span<const double> x, std::span<double> out) const {
    if (drift_all_) {
        drift_all_(x, out);
        return;
    }
    for (std::size_t i = 0; i < n_states_; ++i)
        drift_(x, static_cast<State>(i), out.subspan(i * dim_, dim_));
}

Eigen::VectorXd SwitchingCoefficients::kappa() const {
    if (!has_h1()) throw MissingMetadata(name_ + ": one-sided Lipschitz constants not declared");
    return Eigen::Map<const Eigen::VectorXd>(meta_.kappa.data(),
                                             static_cast<Eigen::Index>(meta_.kappa.size()));
}

double SwitchingCoefficients::K() const {
    if (!meta_.K) throw MissingMetadata(name_ + ": growth constant K not declared");
    return *meta_.K;
}

SpotCheckReport spot_check(const SwitchingCoefficients& c, std::size_t samples, std::uint64_t seed,
                           double radius) {
    const std::size_t d = c.dim();
    const auto& meta = c.metadata();
    RandomStream rng(derive_key(seed, stream::kSpotCheck), 0);
    std::vector<double> x(d), y(d), bx(d), by(d), sx(d * d), sy(d * d);
    SpotCheckReport r;
    r.samples = samples;
    constexpr double kSlack = 1e-9;
    for (std::size_t s = 0; s < samples; ++s) {
        for (std::size_t k = 0; k < d; ++k) {
            x[k] = radius * rng.normal();
            y[k] = radius * rng.normal();
        }
        double dist2 = 0.0, x2 = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            dist2 += (x[k] - y[k]) * (x[k] - y[k]);
            x2 += x[k] * x[k];
        }
        for (std::size_t i = 0; i < c.n_states(); ++i) {
            const auto st = static_cast<State>(i);
            c.drift(x, st, bx);
            c.diffusion(x, st, sx);
            double b2 = 0.0, s2 = 0.0;
            for (double v : bx) b2 += v * v;
            for (double v : sx) s2 += v * v;
            if (c.has_h1() && dist2 > 0.0) {
                c.drift(y, st, by);
                c.diffusion(y, st, sy);
                double lhs = 0.0;
                for (std::size_t k = 0; k < d; ++k) lhs += 2.0 * (x[k] - y[k]) * (bx[k] - by[k]);
                for (std::size_t k = 0; k < d * d; ++k) lhs += 2.0 * (sx[k] - sy[k]) * (sx[k] - sy[k]);
                const double excess = lhs / dist2 - meta.kappa[i];
                r.worst_h1_excess = std::max(r.worst_h1_excess, excess);
                if (excess > kSlack * (1.0 + std::abs(meta.kappa[i]))) ++r.h1_violations;
            }
            if (meta.K) {
                const double rhs = *meta.K * (1.0 + x2);
                const double ratio = std::max(b2, s2) / rhs;
                r.worst_h2_ratio = std::max(r.worst_h2_ratio, ratio);
                if (ratio > 1.0 + kSlack) ++r.h2_violations;
                if (meta.bounded) {
                    const double bratio = std::max(b2, s2) / *meta.K;
                    r.worst_bound_ratio = std::max(r.worst_bound_ratio, bratio);
                    if (bratio > 1.0 + kSlack) ++r.bound_violations;
                }
            }
        }
    }
    return r;
}

BrownianPath::BrownianPath(std::size_t dim, double horizon, std::size_t fine_steps,
                           std::uint64_t key, std::uint64_t bridge_key, std::uint64_t path,
                           std::span<const double> epochs)
    : dim_(dim), horizon_(horizon), fine_steps_(fine_steps),
      fine_dt_(horizon / static_cast<double>(fine_steps)), w_((fine_steps + 1) * dim, 0.0),
      epochs_(epochs.begin(), epochs.end()), epoch_w_(epochs.size() * dim),
      epoch_step_(epochs.size()) {
    if (fine_steps == 0 || !(horizon > 0.0)) throw InvalidArgument("BrownianPath: empty grid");
    const CounterRng rng(key, path);
    const double sd = std::sqrt(fine_dt_);
    std::array<double, 2> pair{};
    for (std::size_t m = 0; m < fine_steps * dim; ++m) {
        if (m % 2 == 0) pair = rng.normal_pair(m / 2);
        w_[m + dim] = w_[m] + sd * pair[m % 2];
    }
    if (epochs_.empty()) return;
    const CounterRng bridge(bridge_key, path);
    std::size_t prev_step = fine_steps;  // sentinel: no earlier epoch in this step
    double left_t = 0.0;
    for (std::size_t e = 0; e < epochs_.size(); ++e) {
        const double t = epochs_[e];
        if (t < 0.0 || t > horizon * (1.0 + 1e-12))
            throw HorizonExceeded("BrownianPath: epoch outside [0, horizon]");
        if (e > 0 && t < epochs_[e - 1]) throw InvalidArgument("BrownianPath: epochs not sorted");
        auto j = static_cast<std::size_t>(std::floor(t / fine_dt_));
        j = std::min(j, fine_steps - 1);
        epoch_step_[e] = j;
        const double tj = static_cast<double>(j) * fine_dt_;
        const double tr = (j + 1 == fine_steps) ? horizon : static_cast<double>(j + 1) * fine_dt_;
        const double* left = w_.data() + j * dim;
        if (j == prev_step) {
            left = epoch_w_.data() + (e - 1) * dim;
        } else {
            left_t = tj;
        }
        const double* right = w_.data() + (j + 1) * dim;
        const double span = tr - left_t;
        const double s = std::clamp(t, left_t, tr);
        const double frac = span > 0.0 ? (s - left_t) / span : 0.0;
        const double var = span > 0.0 ? (s - left_t) * (tr - s) / span : 0.0;
        const double sd_b = std::sqrt(std::max(var, 0.0));
        for (std::size_t k = 0; k < dim; ++k) {
            const std::uint64_t m = e * dim + k;
            const double z = bridge.normal_pair(m / 2)[m % 2];
            epoch_w_[e * dim + k] = left[k] + frac * (right[k] - left[k]) + sd_b * z;
        }
        prev_step = j;
        left_t = s;
    }
}

std::size_t grid_steps(double horizon, double dt) {
    if (!(dt > 0.0)) throw InvalidArgument("step size must be positive");
    if (!(horizon > 0.0)) throw InvalidArgument("horizon must be positive");
    const double ratio = horizon / dt;
    const auto n = static_cast<std::size_t>(std::ceil(ratio - 1e-9 * std::max(1.0, ratio)));
    return std::max<std::size_t>(n, 1);
}

namespace {

struct Scratch {
    explicit Scratch(std::size_t d) : b(d), sig(d * d), dw(d) {}
    std::vector<double> b;
    std::vector<double> sig;
    std::vector<double> dw;
};

inline void euler_step(const SwitchingCoefficients& c, std::span<double> x, State i, double h,
                       std::span<const double> dw, Scratch& s) {
    const std::size_t d = x.size();
    c.drift(x, i, s.b);
    c.diffusion(x, i, s.sig);
    if (d == 1) {
        x[0] += s.b[0] * h + s.sig[0] * dw[0];
        return;
    }
    for (std::size_t r = 0; r < d; ++r) {
        double noise = 0.0;
        for (std::size_t k = 0; k < d; ++k) noise += s.sig[r * d + k] * dw[k];
        x[r] += s.b[r] * h + noise;
    }
}

bool all_finite(std::span<const double> x) {
    for (double v : x)
        if (!std::isfinite(v)) return false;
    return true;
}

// One Euler pass over the grid of `stride` fine steps, substeps ending at
// the Brownian path's epochs. observe(k, x, x_tilde) runs at every coarse
// grid point.
template <class Observe>
void run_euler(const SwitchingCoefficients& c, const CoupledChainPath& chains, const BrownianPath& w,
               std::size_t stride, bool with_tilde, std::span<const double> x0, Observe&& observe) {
    const std::size_t d = c.dim();
    const std::size_t n_coarse = w.fine_steps() / stride;
    std::vector<double> x(x0.begin(), x0.end());
    std::vector<double> xt(x0.begin(), x0.end());
    Scratch scratch(d);
    const auto epochs = w.epochs();
    std::size_t e = 0;
    std::size_t cp = 0;
    observe(std::size_t{0}, std::span<const double>(x), std::span<const double>(xt));

    auto substep = [&](std::size_t k, double ta, double tb, std::span<const double> wa,
                       std::span<const double> wb) {
        const double h = tb - ta;
        if (!(h > 0.0)) return;
        while (cp + 1 < chains.times.size() && chains.times[cp + 1] <= ta) ++cp;
        for (std::size_t r = 0; r < d; ++r) scratch.dw[r] = wb[r] - wa[r];
        euler_step(c, x, chains.states[cp][0], h, scratch.dw, scratch);
        if (!all_finite(x)) throw NonFiniteState(k, ta, "X");
        if (with_tilde) {
            euler_step(c, xt, chains.states[cp][1], h, scratch.dw, scratch);
            if (!all_finite(xt)) throw NonFiniteState(k, ta, "X_tilde");
        }
    };

    const double fdt = w.fine_dt();
    for (std::size_t k = 0; k < n_coarse; ++k) {
        const std::size_t a_idx = k * stride;
        const std::size_t b_idx = (k + 1) * stride;
        double ta = static_cast<double>(a_idx) * fdt;
        const double tb = (k + 1 == n_coarse) ? w.horizon() : static_cast<double>(b_idx) * fdt;
        auto wa = w.at_index(a_idx);
        while (e < epochs.size() && w.epoch_step(e) < b_idx) {
            const double te = std::clamp(epochs[e], ta, tb);
            substep(k, ta, te, wa, w.at_epoch(e));
            ta = te;
            wa = w.at_epoch(e);
            ++e;
        }
        substep(k, ta, tb, wa, w.at_index(b_idx));
        observe(k + 1, std::span<const double>(x), std::span<const double>(xt));
    }
}

std::vector<double> epochs_within(const CoupledChainPath& chains, double horizon) {
    std::vector<double> out;
    for (double t : chains.epochs())
        if (t <= horizon) out.push_back(t);
    return out;
}

void check_chain_horizon(const CoupledChainPath& chains, double horizon) {
    if (chains.horizon < horizon * (1.0 - 1e-12))
        throw HorizonExceeded("chain path ends before the simulation horizon");
}

}  // namespace

TrajectoryPair simulate_pair(const SwitchingCoefficients& c, const CoupledChainPath& chains,
                             std::span<const double> x0, double horizon, double dt,
                             std::uint64_t seed, std::uint64_t path) {
    if (x0.size() != c.dim()) throw DimensionMismatch(c.dim(), x0.size(), "simulate_pair: x0");
    check_chain_horizon(chains, horizon);
    const std::size_t n = grid_steps(horizon, dt);
    const std::size_t d = c.dim();
    const auto epochs = c.metadata().regime_dependent ? epochs_within(chains, horizon)
                                                      : std::vector<double>{};
    const BrownianPath w(d, horizon, n, derive_key(seed, stream::kBrownian),
                         derive_key(seed, stream::kBridge), path, epochs);
    TrajectoryPair out;
    out.dim = d;
    out.dt = horizon / static_cast<double>(n);
    out.chains = chains;
    out.times.resize(n + 1);
    out.x.resize((n + 1) * d);
    out.x_tilde.resize((n + 1) * d);
    out.increments.resize(n * d);
    for (std::size_t k = 0; k <= n; ++k)
        out.times[k] = (k == n) ? horizon : static_cast<double>(k) * out.dt;
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t r = 0; r < d; ++r)
            out.increments[k * d + r] = w.at_index(k + 1)[r] - w.at_index(k)[r];
    run_euler(c, chains, w, 1, true, x0,
              [&](std::size_t k, std::span<const double> x, std::span<const double> xt) {
                  std::copy(x.begin(), x.end(), out.x.begin() + static_cast<std::ptrdiff_t>(k * d));
                  std::copy(xt.begin(), xt.end(),
                            out.x_tilde.begin() + static_cast<std::ptrdiff_t>(k * d));
              });
    return out;
}

PairSamples sample_pairs(const SwitchingCoefficients& c, const RateMatrix& q,
                         const RateMatrix& q_tilde, std::span<const double> x0,
                         const PairSampleOptions& options) {
    if (x0.size() != c.dim()) throw DimensionMismatch(c.dim(), x0.size(), "sample_pairs: x0");
    if (q.n_states() != c.n_states())
        throw DimensionMismatch(c.n_states(), q.n_states(), "sample_pairs: generator vs coefficients");
    if (options.times.empty()) throw InvalidArgument("sample_pairs: no observation times");
    if (options.n_paths == 0) throw InvalidArgument("sample_pairs: n_paths must be positive");
    const double horizon = *std::max_element(options.times.begin(), options.times.end());
    const std::size_t n = grid_steps(horizon, options.dt);
    const double dt = horizon / static_cast<double>(n);
    const std::size_t d = c.dim();
    const std::size_t n_obs = options.times.size();

    // Observation time -> grid index.
    std::vector<std::size_t> obs_index(n_obs);
    std::vector<std::size_t> slot_of(n + 1, n_obs);
    for (std::size_t j = 0; j < n_obs; ++j) {
        const double t = options.times[j];
        if (!(t > 0.0)) throw InvalidArgument("sample_pairs: observation times must be positive");
        const auto k = static_cast<std::size_t>(std::llround(t / dt));
        if (std::abs(static_cast<double>(k) * dt - t) > 1e-9 * std::max(1.0, t))
            throw InvalidArgument("sample_pairs: observation time " + std::to_string(t) +
                                  " is not on the grid of step " + std::to_string(dt));
        obs_index[j] = k;
    }

    const ChainCoupler coupler(q, q_tilde, options.clock_rate);
    const auto chain_key = derive_key(options.seed, stream::kChainClock);
    const auto w_key = derive_key(options.seed, stream::kBrownian);
    const auto bridge_key = derive_key(options.seed, stream::kBridge);
    const bool split = c.metadata().regime_dependent;

    // Per path: n_obs·2·d values.
    const std::size_t stride = n_obs * 2 * d;
    std::vector<double> values(options.n_paths * stride);
    std::vector<char> ok(options.n_paths, 1);
    parallel_for(options.n_paths, options.threads, [&](std::size_t p) {
        const auto chains = coupler.simulate(options.i0, horizon, chain_key, p);
        const auto epochs = split ? epochs_within(chains, horizon) : std::vector<double>{};
        const BrownianPath w(d, horizon, n, w_key, bridge_key, p, epochs);
        double* out = values.data() + p * stride;
        try {
            run_euler(c, chains, w, 1, true, x0,
                      [&](std::size_t k, std::span<const double> x, std::span<const double> xt) {
                          for (std::size_t j = 0; j < n_obs; ++j) {
                              if (obs_index[j] != k) continue;
                              std::copy(x.begin(), x.end(), out + (2 * j) * d);
                              std::copy(xt.begin(), xt.end(), out + (2 * j + 1) * d);
                          }
                      });
        } catch (const NonFiniteState&) {
            ok[p] = 0;
        }
    });

    PairSamples s;
    s.dim = d;
    s.times = options.times;
    s.n_paths = options.n_paths;
    s.clock_rate = coupler.clock_rate();
    s.failures = static_cast<std::size_t>(std::count(ok.begin(), ok.end(), 0));
    if (static_cast<double>(s.failures) > options.max_failure_rate * static_cast<double>(options.n_paths))
        throw NonFiniteState(0, 0.0,
                             std::to_string(s.failures) + " of " + std::to_string(options.n_paths) +
                                 " paths overflowed, above the allowed failure rate");
    s.x.assign(n_obs, {});
    s.x_tilde.assign(n_obs, {});
    const std::size_t n_ok = options.n_paths - s.failures;
    for (std::size_t j = 0; j < n_obs; ++j) {
        s.x[j].reserve(n_ok * d);
        s.x_tilde[j].reserve(n_ok * d);
    }
    for (std::size_t p = 0; p < options.n_paths; ++p) {
        if (!ok[p]) continue;
        const double* in = values.data() + p * stride;
        for (std::size_t j = 0; j < n_obs; ++j) {
            s.x[j].insert(s.x[j].end(), in + 2 * j * d, in + (2 * j + 1) * d);
            s.x_tilde[j].insert(s.x_tilde[j].end(), in + (2 * j + 1) * d, in + (2 * j + 2) * d);
        }
    }
    return s;
}

double second_moment_bound(double x0_norm_sq, double K, double t) {
    return (x0_norm_sq + 2.0 * K * t) * std::exp((2.0 * K + 1.0) * t);
}

MomentGuardReport second_moment_guard(const SwitchingCoefficients& c, std::span<const double> x0,
                                      double t, std::span<const double> samples) {
    const std::size_t d = c.dim();
    if (x0.size() != d) throw DimensionMismatch(d, x0.size(), "second_moment_guard: x0");
    if (samples.empty() || samples.size() % d != 0)
        throw InvalidArgument("second_moment_guard: samples must hold whole points");
    double x0sq = 0.0;
    for (double v : x0) x0sq += v * v;
    const std::size_t n = samples.size() / d;
    std::vector<double> sq(n);
    for (std::size_t p = 0; p < n; ++p) {
        double s = 0.0;
        for (std::size_t k = 0; k < d; ++k) s += samples[p * d + k] * samples[p * d + k];
        sq[p] = s;
    }
    const auto m = estimate_mean(sq);
    MomentGuardReport r;
    r.t = t;
    r.bound = second_moment_bound(x0sq, c.K(), t);
    r.mean = m.mean;
    r.std_error = m.std_error;
    r.flagged = m.mean > r.bound + 3.0 * m.std_error;
    return r;
}

StrongErrorCurve strong_error_curve(const SwitchingCoefficients& c, const RateMatrix& q, State i0,
                                    std::span<const double> x0, double horizon,
                                    std::span<const double> dts, std::size_t n_paths,
                                    std::uint64_t seed, unsigned threads) {
    StrongErrorCurve curve;
    curve.slope = std::numeric_limits<double>::quiet_NaN();
    if (dts.empty()) throw InvalidArgument("strong_error_curve: no step sizes");
    if (x0.size() != c.dim()) throw DimensionMismatch(c.dim(), x0.size(), "strong_error_curve: x0");
    for (std::size_t k = 1; k < dts.size(); ++k)
        if (!(dts[k] < dts[k - 1])) throw InvalidArgument("strong_error_curve: dts must descend");
    const double ref = dts.back();
    curve.reference_dt = ref;
    if (dts.size() == 1) return curve;
    if (n_paths == 0) throw InvalidArgument("strong_error_curve: n_paths must be positive");

    const double ratio = horizon / ref;
    const auto n_fine = static_cast<std::size_t>(std::llround(ratio));
    if (n_fine == 0 || std::abs(static_cast<double>(n_fine) - ratio) > 1e-9 * ratio)
        throw InvalidArgument("strong_error_curve: horizon is not a multiple of the reference step");
    const std::size_t levels = dts.size() - 1;
    std::vector<std::size_t> strides(levels);
    for (std::size_t l = 0; l < levels; ++l) {
        const double r = dts[l] / ref;
        const auto m = static_cast<std::size_t>(std::llround(r));
        if (m == 0 || std::abs(static_cast<double>(m) - r) > 1e-9 * r || n_fine % m != 0)
            throw InvalidArgument("strong_error_curve: each dt must be a multiple of the reference");
        strides[l] = m;
    }

    const ChainCoupler coupler(q, q);
    const auto chain_key = derive_key(seed, stream::kChainClock);
    const auto w_key = derive_key(seed, stream::kBrownian);
    const auto bridge_key = derive_key(seed, stream::kBridge);
    const bool split = c.metadata().regime_dependent;
    const std::size_t d = c.dim();

    std::vector<double> sq_err(n_paths * levels);
    parallel_for(n_paths, threads, [&](std::size_t p) {
        const auto chains = coupler.simulate(i0, horizon, chain_key, p);
        const auto epochs = split ? epochs_within(chains, horizon) : std::vector<double>{};
        const BrownianPath w(d, horizon, n_fine, w_key, bridge_key, p, epochs);
        auto terminal = [&](std::size_t stride) {
            std::vector<double> end(d);
            const std::size_t last = n_fine / stride;
            run_euler(c, chains, w, stride, false, x0,
                      [&](std::size_t k, std::span<const double> x, std::span<const double>) {
                          if (k == last) std::copy(x.begin(), x.end(), end.begin());
                      });
            return end;
        };
        const auto reference = terminal(1);
        for (std::size_t l = 0; l < levels; ++l) {
            const auto coarse = terminal(strides[l]);
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) s += (coarse[k] - reference[k]) * (coarse[k] - reference[k]);
            sq_err[p * levels + l] = s;
        }
    });

    std::vector<double> column(n_paths);
    std::vector<double> xs, ys;
    for (std::size_t l = 0; l < levels; ++l) {
        for (std::size_t p = 0; p < n_paths; ++p) column[p] = sq_err[p * levels + l];
        const auto m = estimate_mean(column);
        StrongErrorPoint pt;
        pt.dt = dts[l];
        pt.rms = std::sqrt(m.mean);
        pt.std_error = pt.rms > 0.0 ? m.std_error / (2.0 * pt.rms) : 0.0;
        curve.points.push_back(pt);
        xs.push_back(pt.dt);
        ys.push_back(pt.rms);
    }
    if (curve.points.size() >= 2) curve.slope = fit_power_law(xs, ys).exponent;
    return curve;
}

}  // namespace rsstab
