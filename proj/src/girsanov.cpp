#include "rsstab/girsanov.hpp"

#include "rsstab/error.hpp"
#include "rsstab/parallel.hpp"
#include "rsstab/quadrature.hpp"
#include "rsstab/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>

namespace rsstab {

void ReferenceModel::z0(std::span<const double> x, std::span<double> out) const {
    const std::size_t d = dim;
    if (d == 1) {
        double s = 0.0, g = 0.0;
        sigma(x, std::span<double>(&s, 1));
        grad_potential(x, std::span<double>(&g, 1));
        out[0] = -s * s * g;
        return;
    }
    std::vector<double> s(d * d), g(d);
    sigma(x, s);
    grad_potential(x, g);
    for (std::size_t i = 0; i < d; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            double a_ij = 0.0;
            for (std::size_t k = 0; k < d; ++k) a_ij += s[i * d + k] * s[j * d + k];
            acc += a_ij * g[j];
        }
        out[i] = -acc;
    }
}

ReferenceModel ou_reference(std::size_t dim) {
    ReferenceModel m;
    m.name = "ou";
    m.dim = dim;
    const double log_norm = 0.5 * static_cast<double>(dim) * std::log(2.0 * std::numbers::pi);
    m.potential = [log_norm](std::span<const double> x) {
        double s = 0.0;
        for (double v : x) s += v * v;
        return 0.5 * s + log_norm;
    };
    m.grad_potential = [](std::span<const double> x, std::span<double> out) {
        std::copy(x.begin(), x.end(), out.begin());
    };
    m.sigma = [dim](std::span<const double>, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        for (std::size_t i = 0; i < dim; ++i) out[i * dim + i] = 1.0;
    };
    m.k0 = 1.0;
    return m;
}

ReferenceCheck check_reference(const ReferenceModel& m, std::size_t samples, std::uint64_t seed) {
    ReferenceCheck r;
    const std::size_t d = m.dim;
    RandomStream rng(derive_key(seed, stream::kSpotCheck), 1);
    std::vector<double> x(d), y(d), zx(d), zy(d);
    for (std::size_t s = 0; s < samples; ++s) {
        for (std::size_t k = 0; k < d; ++k) {
            x[k] = 4.0 * rng.normal();
            y[k] = 4.0 * rng.normal();
        }
        m.z0(x, zx);
        m.z0(y, zy);
        double num = 0.0, den = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            num += (zx[k] - zy[k]) * (zx[k] - zy[k]);
            den += (x[k] - y[k]) * (x[k] - y[k]);
        }
        if (den > 0.0 && m.k0 > 0.0)
            r.worst_lipschitz_ratio =
                std::max(r.worst_lipschitz_ratio, std::sqrt(num) / (m.k0 * std::sqrt(den)));
    }
    bool norm_ok = true;
    if (d == 1) {
        auto density = [&](double v) { return std::exp(-m.potential(std::span<const double>(&v, 1))); };
        double total = 0.0;
        for (double half = 8.0;; half *= 2.0) {
            const double next =
                adaptive_simpson(density, -half, half, {1e-12, 1e-300, 60}).value;
            const bool settled = std::abs(next - total) <= 1e-12 * std::max(1.0, next);
            total = next;
            if (settled || half > 1e4) break;
        }
        r.normalization = total;
        norm_ok = std::abs(total - 1.0) <= 1e-6;
    } else {
        r.normalization = std::numeric_limits<double>::quiet_NaN();
    }
    r.ok = norm_ok && r.worst_lipschitz_ratio <= 1.0 + 1e-9;
    return r;
}

namespace {

struct Keys {
    std::uint64_t chain;
    std::uint64_t brownian;
    std::uint64_t bridge;
};

Keys keys_for(std::uint64_t seed) {
    return {derive_key(seed, stream::kChainClock), derive_key(seed, stream::kBrownian),
            derive_key(seed, stream::kBridge)};
}

// Y on the uniform grid of w; y has (n+1)·d entries.
void reference_euler(const ReferenceModel& m, std::span<const double> x0, const BrownianPath& w,
                     std::vector<double>& y) {
    const std::size_t d = m.dim;
    const std::size_t n = w.fine_steps();
    const double dt = w.fine_dt();
    y.resize((n + 1) * d);
    std::copy(x0.begin(), x0.end(), y.begin());
    std::vector<double> z(d), s(d * d);
    for (std::size_t k = 0; k < n; ++k) {
        std::span<const double> yk(y.data() + k * d, d);
        m.z0(yk, z);
        m.sigma(yk, s);
        const auto wa = w.at_index(k);
        const auto wb = w.at_index(k + 1);
        for (std::size_t r = 0; r < d; ++r) {
            double noise = 0.0;
            for (std::size_t c = 0; c < d; ++c) noise += s[r * d + c] * (wb[c] - wa[c]);
            const double v = yk[r] + z[r] * dt + noise;
            if (!std::isfinite(v)) throw NonFiniteState(k, static_cast<double>(k) * dt, "Y");
            y[(k + 1) * d + r] = v;
        }
    }
}

// u[(k·S + i)·d + r] = (σ⁻¹(Y_k) Z(Y_k, i))_r for every step and state.
void integrands(const ReferenceModel& m, const SwitchingCoefficients& model,
                std::span<const double> y, std::size_t n, std::vector<double>& u) {
    const std::size_t d = m.dim;
    const std::size_t ns = model.n_states();
    u.resize(n * ns * d);
    std::vector<double> b(ns * d), z0(d), s(d * d);
    Eigen::MatrixXd sig(d, d);
    Eigen::VectorXd rhs(d);
    for (std::size_t k = 0; k < n; ++k) {
        std::span<const double> yk(y.data() + k * d, d);
        model.drift_all(yk, b);
        m.z0(yk, z0);
        m.sigma(yk, s);
        double* out = u.data() + k * ns * d;
        if (d == 1) {
            if (s[0] == 0.0 || !std::isfinite(s[0]))
                throw SingularSigma("sigma vanishes at y=" + std::to_string(yk[0]));
            const double inv = 1.0 / s[0];
            for (std::size_t i = 0; i < ns; ++i) out[i] = (b[i] - z0[0]) * inv;
            continue;
        }
        for (std::size_t r = 0; r < d; ++r)
            for (std::size_t c = 0; c < d; ++c)
                sig(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = s[r * d + c];
        const Eigen::FullPivLU<Eigen::MatrixXd> lu(sig);
        if (!lu.isInvertible()) throw SingularSigma("sigma is singular at a visited point");
        for (std::size_t i = 0; i < ns; ++i) {
            for (std::size_t r = 0; r < d; ++r)
                rhs(static_cast<Eigen::Index>(r)) = b[i * d + r] - z0[r];
            const Eigen::VectorXd sol = lu.solve(rhs);
            for (std::size_t r = 0; r < d; ++r) out[i * d + r] = sol(static_cast<Eigen::Index>(r));
        }
    }
}

struct Accumulated {
    double martingale = 0.0;
    double qv = 0.0;
};

// Regime at the left end t_k of every step, read from one chain component.
Accumulated accumulate(std::span<const double> u, const CoupledChainPath& chains, int component,
                       const BrownianPath& w, std::size_t ns) {
    const std::size_t d = w.dim();
    const std::size_t n = w.fine_steps();
    const double dt = w.fine_dt();
    Accumulated acc;
    std::size_t cp = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double tk = static_cast<double>(k) * dt;
        while (cp + 1 < chains.times.size() && chains.times[cp + 1] <= tk) ++cp;
        const auto i = static_cast<std::size_t>(chains.states[cp][static_cast<std::size_t>(component)]);
        const double* uk = u.data() + (k * ns + i) * d;
        const auto wa = w.at_index(k);
        const auto wb = w.at_index(k + 1);
        for (std::size_t r = 0; r < d; ++r) {
            acc.martingale += uk[r] * (wb[r] - wa[r]);
            acc.qv += uk[r] * uk[r] * dt;
        }
    }
    return acc;
}

void check_inputs(const ReferenceModel& m, const SwitchingCoefficients& model, const RateMatrix& q,
                  std::span<const double> x0) {
    if (model.dim() != m.dim) throw DimensionMismatch(m.dim, model.dim(), "drift vs reference model");
    if (x0.size() != m.dim) throw DimensionMismatch(m.dim, x0.size(), "x0");
    if (q.n_states() != model.n_states())
        throw DimensionMismatch(model.n_states(), q.n_states(), "generator vs drift");
}

}  // namespace

ReferencePath simulate_reference(const ReferenceModel& m, std::span<const double> x0, double horizon,
                                 double dt, std::uint64_t seed, std::uint64_t path) {
    if (x0.size() != m.dim) throw DimensionMismatch(m.dim, x0.size(), "simulate_reference: x0");
    const std::size_t n = grid_steps(horizon, dt);
    const auto keys = keys_for(seed);
    const BrownianPath w(m.dim, horizon, n, keys.brownian, keys.bridge, path);
    ReferencePath out;
    out.dim = m.dim;
    out.dt = w.fine_dt();
    reference_euler(m, x0, w, out.y);
    out.increments.resize(n * m.dim);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t r = 0; r < m.dim; ++r)
            out.increments[k * m.dim + r] = w.at_index(k + 1)[r] - w.at_index(k)[r];
    return out;
}

WeightedSample rn_weight(const ReferenceModel& m, const SwitchingCoefficients& model,
                         const CoupledChainPath& chains, int component, const ReferencePath& y) {
    if (component != 0 && component != 1) throw InvalidArgument("rn_weight: component must be 0 or 1");
    if (model.dim() != m.dim) throw DimensionMismatch(m.dim, model.dim(), "rn_weight: drift");
    const std::size_t d = m.dim;
    const std::size_t n = y.steps();
    const std::size_t ns = model.n_states();
    std::vector<double> u;
    integrands(m, model, y.y, n, u);
    WeightedSample s;
    std::size_t cp = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double tk = static_cast<double>(k) * y.dt;
        while (cp + 1 < chains.times.size() && chains.times[cp + 1] <= tk) ++cp;
        const auto i = static_cast<std::size_t>(chains.states[cp][static_cast<std::size_t>(component)]);
        for (std::size_t r = 0; r < d; ++r) {
            const double v = u[(k * ns + i) * d + r];
            s.martingale += v * y.increments[k * d + r];
            s.quadratic_variation += v * v * y.dt;
        }
    }
    s.weight = std::exp(s.martingale - 0.5 * s.quadratic_variation);
    const auto end = y.y_at(n);
    s.y_terminal.assign(end.begin(), end.end());
    return s;
}

WeightedSet weighted_samples(const ReferenceModel& m, const SwitchingCoefficients& model,
                             const RateMatrix& q, std::span<const double> x0, double horizon,
                             const GirsanovOptions& options) {
    check_inputs(m, model, q, x0);
    const std::size_t n = grid_steps(horizon, options.dt);
    const std::size_t d = m.dim;
    const std::size_t ns = model.n_states();
    const auto keys = keys_for(options.seed);
    const ChainCoupler coupler(q, q, options.clock_rate);
    WeightedSet out;
    out.dim = d;
    out.y_terminal.resize(options.n_paths * d);
    out.weight.resize(options.n_paths);
    out.martingale.resize(options.n_paths);
    out.quadratic_variation.resize(options.n_paths);
    parallel_for(options.n_paths, options.threads, [&](std::size_t p) {
        const BrownianPath w(d, horizon, n, keys.brownian, keys.bridge, p);
        std::vector<double> y, u;
        reference_euler(m, x0, w, y);
        integrands(m, model, y, n, u);
        const auto chains = coupler.simulate(options.i0, horizon, keys.chain, p);
        const auto acc = accumulate(u, chains, 0, w, ns);
        std::copy(y.begin() + static_cast<std::ptrdiff_t>(n * d), y.end(),
                  out.y_terminal.begin() + static_cast<std::ptrdiff_t>(p * d));
        out.martingale[p] = acc.martingale;
        out.quadratic_variation[p] = acc.qv;
        out.weight[p] = std::exp(acc.martingale - 0.5 * acc.qv);
    });
    return out;
}

std::vector<double> direct_samples(const ReferenceModel& m, const SwitchingCoefficients& model,
                                   const RateMatrix& q, std::span<const double> x0, double horizon,
                                   const GirsanovOptions& options) {
    check_inputs(m, model, q, x0);
    const std::size_t n = grid_steps(horizon, options.dt);
    const std::size_t d = m.dim;
    const auto keys = keys_for(derive_key(options.seed, stream::kDirect));
    const ChainCoupler coupler(q, q, options.clock_rate);
    std::vector<double> out(options.n_paths * d);
    parallel_for(options.n_paths, options.threads, [&](std::size_t p) {
        const BrownianPath w(d, horizon, n, keys.brownian, keys.bridge, p);
        const auto chains = coupler.simulate(options.i0, horizon, keys.chain, p);
        const double dt = w.fine_dt();
        std::vector<double> x(x0.begin(), x0.end()), b(d), s(d * d), next(d);
        std::size_t cp = 0;
        for (std::size_t k = 0; k < n; ++k) {
            const double tk = static_cast<double>(k) * dt;
            while (cp + 1 < chains.times.size() && chains.times[cp + 1] <= tk) ++cp;
            model.drift(x, chains.states[cp][0], b);
            m.sigma(x, s);
            const auto wa = w.at_index(k);
            const auto wb = w.at_index(k + 1);
            for (std::size_t r = 0; r < d; ++r) {
                double noise = 0.0;
                for (std::size_t c = 0; c < d; ++c) noise += s[r * d + c] * (wb[c] - wa[c]);
                next[r] = x[r] + b[r] * dt + noise;
                if (!std::isfinite(next[r])) throw NonFiniteState(k, tk, "X");
            }
            x.swap(next);
        }
        std::copy(x.begin(), x.end(), out.begin() + static_cast<std::ptrdiff_t>(p * d));
    });
    return out;
}

WblSweep wbl_upper_sweep(const ReferenceModel& m, const SwitchingCoefficients& model,
                         const RateMatrix& q, std::span<const RateMatrix> q_tildes,
                         std::span<const double> x0, double horizon, const GirsanovOptions& options) {
    check_inputs(m, model, q, x0);
    if (q_tildes.empty()) throw InvalidArgument("wbl_upper_sweep: no perturbations");
    double rate = 0.0;
    for (const auto& qt : q_tildes) rate = std::max(rate, required_clock_rate(q, qt));
    if (options.clock_rate > 0.0) {
        if (options.clock_rate < rate * (1.0 - 1e-12)) throw ClockRateTooSmall(options.clock_rate, rate);
        rate = options.clock_rate;
    }
    std::vector<ChainCoupler> couplers;
    couplers.reserve(q_tildes.size());
    for (const auto& qt : q_tildes) couplers.emplace_back(q, qt, rate);

    const std::size_t n = grid_steps(horizon, options.dt);
    const std::size_t d = m.dim;
    const std::size_t ns = model.n_states();
    const std::size_t levels = q_tildes.size();
    const auto keys = keys_for(options.seed);
    std::vector<double> gaps(options.n_paths * levels);
    parallel_for(options.n_paths, options.threads, [&](std::size_t p) {
        const BrownianPath w(d, horizon, n, keys.brownian, keys.bridge, p);
        std::vector<double> y, u;
        reference_euler(m, x0, w, y);
        integrands(m, model, y, n, u);
        double weight = 0.0;
        for (std::size_t l = 0; l < levels; ++l) {
            const auto chains = couplers[l].simulate(options.i0, horizon, keys.chain, p);
            if (l == 0) {
                const auto a = accumulate(u, chains, 0, w, ns);
                weight = std::exp(a.martingale - 0.5 * a.qv);
            }
            const auto b = accumulate(u, chains, 1, w, ns);
            gaps[p * levels + l] = std::abs(weight - std::exp(b.martingale - 0.5 * b.qv));
        }
    });

    WblSweep sweep;
    sweep.clock_rate = rate;
    std::vector<double> column(options.n_paths), diff(options.n_paths);
    for (std::size_t l = 0; l < levels; ++l) {
        for (std::size_t p = 0; p < options.n_paths; ++p) column[p] = gaps[p * levels + l];
        const auto est = estimate_mean(column);
        sweep.estimates.push_back({l1_distance(q, q_tildes[l]), est.mean, est.std_error, est.n});
        if (l + 1 < levels) {
            for (std::size_t p = 0; p < options.n_paths; ++p)
                diff[p] = gaps[p * levels + l + 1] - gaps[p * levels + l];
            sweep.paired_diff_se.push_back(estimate_mean(diff).std_error);
        }
    }
    return sweep;
}

WblEstimate wbl_upper_estimate(const ReferenceModel& m, const SwitchingCoefficients& model,
                               const RateMatrix& q, const RateMatrix& q_tilde,
                               std::span<const double> x0, double horizon,
                               const GirsanovOptions& options) {
    const RateMatrix one[] = {q_tilde};
    return wbl_upper_sweep(m, model, q, one, x0, horizon, options).estimates.front();
}

bool NovikovReport::passed() const noexcept {
    if (!eta_ok) return false;
    return std::none_of(divergent.begin(), divergent.end(), [](bool b) { return b; });
}

namespace {

// Integral of g over [-half, half] with the neighbourhoods of the singular
// points handled by annuli. Sets `divergent` when an annulus sequence does
// not decay.
double integrate_with_poles(const std::function<double(double)>& g, double half,
                            const std::vector<double>& poles, const NovikovOptions& o,
                            bool& divergent) {
    std::vector<double> inside;
    for (double p : poles)
        if (p > -half && p < half) inside.push_back(p);
    std::sort(inside.begin(), inside.end());
    double r0 = 0.1;
    for (std::size_t k = 1; k < inside.size(); ++k) r0 = std::min(r0, 0.25 * (inside[k] - inside[k - 1]));
    const QuadratureOptions qo{o.rel_tol, 1e-300, 60};
    double total = 0.0;
    double left = -half;
    for (double p : inside) {
        if (p - r0 > left) total += adaptive_simpson(g, left, p - r0, qo).value;
        std::vector<double> annulus(static_cast<std::size_t>(o.annulus_levels));
        for (int j = 0; j < o.annulus_levels; ++j) {
            const double outer = r0 * std::pow(10.0, -j);
            const double inner = outer / 10.0;
            annulus[static_cast<std::size_t>(j)] = adaptive_simpson(g, p - outer, p - inner, qo).value +
                                                   adaptive_simpson(g, p + inner, p + outer, qo).value;
            total += annulus[static_cast<std::size_t>(j)];
        }
        const double last = annulus.back();
        const double prev = annulus[annulus.size() - 2];
        const double ratio = prev > 0.0 ? last / prev : 0.0;
        if (ratio >= o.divergence_ratio) divergent = true;
        else total += last * ratio / (1.0 - ratio);
        left = p + r0;
    }
    if (half > left) total += adaptive_simpson(g, left, half, qo).value;
    return total;
}

}  // namespace

NovikovReport novikov_check(const ReferenceModel& m, const SwitchingCoefficients& model, double eta,
                            double horizon, const NovikovOptions& options) {
    if (m.dim != 1 || model.dim() != 1)
        throw InvalidArgument("novikov_check: quadrature is implemented for d = 1 only");
    if (!(eta > 0.0)) throw InvalidArgument("novikov_check: eta must be positive");
    NovikovReport r;
    r.eta = eta;
    r.horizon = horizon;
    r.dim = 1;
    r.required_eta = 2.0 * horizon * 1.0;
    r.eta_ok = eta > r.required_eta;
    const std::size_t ns = model.n_states();
    r.values.assign(ns, 0.0);
    r.divergent.assign(ns, false);
    const auto& poles = model.metadata().singular_points;
    for (std::size_t i = 0; i < ns; ++i) {
        auto g = [&](double x) {
            const std::span<const double> xs(&x, 1);
            double b = 0.0, z0 = 0.0, s = 0.0;
            model.drift(xs, static_cast<State>(i), std::span<double>(&b, 1));
            m.z0(xs, std::span<double>(&z0, 1));
            m.sigma(xs, std::span<double>(&s, 1));
            if (s == 0.0) throw SingularSigma("novikov_check: sigma vanishes");
            const double u = (b - z0) / s;
            return std::exp(eta * u * u - m.potential(xs));
        };
        auto nudge = [&](double half) {
            for (int guard = 0; guard < 100; ++guard) {
                bool clear = true;
                for (double p : poles)
                    if (std::abs(std::abs(p) - half) < 0.2) clear = false;
                if (clear) break;
                half += 0.37;
            }
            return half;
        };
        bool divergent = false;
        try {
            double half = nudge(options.initial_half_width);
            double value = integrate_with_poles(g, half, poles, options, divergent);
            for (;;) {
                if (divergent) break;
                if (!(value < options.overflow))
                    throw IntegralDiverged("novikov_check: value overflows for state " + std::to_string(i));
                const double wider = nudge(2.0 * half);
                if (wider > options.max_half_width)
                    throw IntegralDiverged("novikov_check: tails did not settle for state " +
                                           std::to_string(i));
                const double next = integrate_with_poles(g, wider, poles, options, divergent);
                const bool settled = std::abs(next - value) <= options.rel_tol * std::abs(next);
                value = next;
                half = wider;
                if (settled) break;
            }
            r.values[i] = value;
        } catch (const QuadratureNonConvergence&) {
            // exp overflow inside the domain
            divergent = true;
        }
        if (divergent) {
            r.divergent[i] = true;
            r.values[i] = std::numeric_limits<double>::infinity();
        }
    }
    return r;
}

SingularSeries::SingularSeries(std::size_t k_max, std::shared_ptr<std::atomic<std::uint64_t>> counter)
    : k_max_(k_max),
      clamps_(counter ? std::move(counter) : std::make_shared<std::atomic<std::uint64_t>>(0)) {
    if (k_max == 0) throw InvalidArgument("singular series needs k_max >= 1");
}

namespace {

constexpr double kExactRadius = 16.0;

inline double f(double y) { return std::log1p(1.0 / (y * y)); }

// f = log(y + i) + log(y - i) - 2 log y, so
// f^(n)(y) = (-1)^{n-1} (n-1)! · 2 [Re (y + i)^{-n} - y^{-n}].
double derivative(int n, double y) {
    const std::complex<double> z = std::pow(std::complex<double>(y, 1.0), -n);
    double fact = 1.0;
    for (int k = 2; k < n; ++k) fact *= k;
    const double sign = (n % 2 == 1) ? 1.0 : -1.0;
    return sign * fact * 2.0 * (z.real() - std::pow(y, -n));
}

// Σ_{y = y1, y1+1, ..., y2} f(y) for y1 >= kExactRadius, by Euler–Maclaurin
// through the B8 term.
double block(double y1, double y2) {
    // ∫ f = [y f(y) + 2 atan y], with the atan difference taken in one piece.
    double s = y2 * f(y2) - y1 * f(y1) + 2.0 * std::atan((y2 - y1) / (1.0 + y1 * y2));
    s += 0.5 * (f(y1) + f(y2));
    constexpr double kWeights[] = {1.0 / 12.0, -1.0 / 720.0, 1.0 / 30240.0, -1.0 / 1209600.0};
    for (int k = 0; k < 4; ++k) {
        const int n = 2 * k + 1;
        s += kWeights[k] * (derivative(n, y2) - derivative(n, y1));
    }
    return s;
}

}  // namespace

double SingularSeries::operator()(double x) const {
    const auto kmax = static_cast<double>(k_max_);
    const double lo = std::max(1.0, std::ceil(x - kExactRadius));
    const double hi = std::min(kmax, std::floor(x + kExactRadius));
    if (lo > hi) {
        // Every term is far: one block.
        if (x < 1.0) return block(1.0 - x, kmax - x);
        return block(x - kmax, x - 1.0);
    }
    double s = 0.0;
    std::uint64_t clamped = 0;
    for (double k = lo; k <= hi; k += 1.0) {
        const double y = x - k;
        double term = (y == 0.0) ? SingularSeries::kTermCap : f(y);
        if (term > SingularSeries::kTermCap) {
            term = SingularSeries::kTermCap;
            ++clamped;
        } else if (y == 0.0) {
            ++clamped;
        }
        s += term;
    }
    if (clamped) clamps_->fetch_add(clamped, std::memory_order_relaxed);
    if (lo > 1.0) s += block(x - (lo - 1.0), x - 1.0);
    if (hi < kmax) s += block(hi + 1.0 - x, kmax - x);
    return s;
}

double SingularSeries::tail_bound(double x) const {
    const auto kmax = static_cast<double>(k_max_);
    return x < kmax ? 1.0 / (kmax - x) : std::numeric_limits<double>::infinity();
}

SwitchingCoefficients singular_drift(std::vector<double> beta, std::size_t k_max) {
    if (beta.empty()) throw InvalidArgument("singular_drift: beta must be non-empty");
    CoefficientMetadata meta;
    meta.regime_dependent = true;
    meta.clamp_counter = std::make_shared<std::atomic<std::uint64_t>>(0);
    meta.singular_points.resize(k_max);
    std::iota(meta.singular_points.begin(), meta.singular_points.end(), 1.0);
    const SingularSeries series(k_max, meta.clamp_counter);
    const std::size_t ns = beta.size();
    auto drift = [series, beta](std::span<const double> x, State i, std::span<double> out) {
        out[0] = beta[static_cast<std::size_t>(i)] * std::sqrt(series(x[0])) - x[0];
    };
    auto diffusion = [](std::span<const double>, State, std::span<double> out) { out[0] = 1.0; };
    SwitchingCoefficients c("singular-log", 1, ns, drift, diffusion, std::move(meta));
    c.set_drift_all([series, beta](std::span<const double> x, std::span<double> out) {
        const double root = std::sqrt(series(x[0]));
        for (std::size_t i = 0; i < beta.size(); ++i) out[i] = beta[i] * root - x[0];
    });
    return c;
}

DecayExperiment theorem3_decay_experiment(const ReferenceModel& m, const SwitchingCoefficients& model,
                                          const RateMatrix& q, std::span<const RateMatrix> q_tildes,
                                          std::span<const double> x0, double horizon, double eta,
                                          const GirsanovOptions& options,
                                          const NovikovOptions& novikov) {
    DecayExperiment ex;
    ex.novikov = novikov_check(m, model, eta, horizon, novikov);
    if (!ex.novikov.passed()) {
        std::string why = ex.novikov.eta_ok ? "integrability check diverged"
                                            : "eta must exceed 2Td = " + std::to_string(ex.novikov.required_eta);
        throw NovikovFailed("theorem3_decay_experiment: " + why);
    }
    // Largest perturbation first.
    std::vector<std::size_t> order(q_tildes.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> deltas(q_tildes.size());
    for (std::size_t k = 0; k < q_tildes.size(); ++k) deltas[k] = l1_distance(q, q_tildes[k]);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return deltas[a] > deltas[b]; });
    std::vector<RateMatrix> sorted;
    for (auto k : order) sorted.push_back(q_tildes[k]);

    const auto before = model.metadata().clamp_counter ? model.metadata().clamp_counter->load() : 0;
    const auto sweep = wbl_upper_sweep(m, model, q, sorted, x0, horizon, options);
    ex.clamp_events = model.metadata().clamp_counter ? model.metadata().clamp_counter->load() - before : 0;
    ex.clock_rate = sweep.clock_rate;
    ex.paired_diff_se = sweep.paired_diff_se;
    std::vector<double> xs, ys;
    for (const auto& e : sweep.estimates) {
        ex.rows.push_back({e.delta, e.value, e.std_error});
        if (e.delta > 0.0 && e.value > 0.0) {
            xs.push_back(e.delta);
            ys.push_back(e.value);
        }
    }
    ex.monotone = true;
    for (std::size_t k = 0; k + 1 < ex.rows.size(); ++k)
        if (ex.rows[k + 1].estimate > ex.rows[k].estimate + 2.0 * ex.paired_diff_se[k]) ex.monotone = false;
    if (xs.size() >= 2) {
        ex.fit = fit_power_law(xs, ys);
        for (std::size_t k = 0; k < xs.size(); ++k)
            ex.envelope_constant = std::max(ex.envelope_constant, ys[k] / std::pow(xs[k], ex.fit.exponent));
    }
    return ex;
}

}  // namespace rsstab
