#include "rsstab/bounds.hpp"

#include "rsstab/error.hpp"
#include "rsstab/linalg.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace rsstab {

const char* to_string(BoundKind kind) noexcept {
    switch (kind) {
        case BoundKind::T1General: return "theorem1-general";
        case BoundKind::T1Bounded: return "theorem1-bounded";
        case BoundKind::T2General: return "theorem2-general";
        case BoundKind::T2Bounded: return "theorem2-bounded";
    }
    return "unknown";
}

bool is_bounded(BoundKind kind) noexcept {
    return kind == BoundKind::T1Bounded || kind == BoundKind::T2Bounded;
}

namespace {

void check_pe(double p, double eps) {
    if (!(p > 1.0) || !std::isfinite(p)) throw InvalidArgument("p must exceed 1");
    if (!(eps > 0.0) || !std::isfinite(eps)) throw InvalidArgument("eps must be positive");
}

}  // namespace

double psi(double t, double eps, double eta_p, double K, double p, double x0_norm,
           const QuadratureOptions& options) {
    if (!(t >= 0.0)) throw InvalidArgument("psi: t must be nonnegative");
    check_pe(p, eps);
    if (t == 0.0) return 0.0;
    const double lambda = eta_p - eps * p;
    const double x0sq = x0_norm * x0_norm;
    auto g = [&](double s) {
        const double inner = 1.0 + (x0sq + 2.0 * K * s) * std::exp((2.0 * K + 1.0) * s);
        return std::pow(inner, p) * std::exp(-lambda * (t - s));
    };
    return std::pow(adaptive_simpson(g, 0.0, t, options).value, 1.0 / p);
}

BoundConstants bound_constants(const SwitchingCoefficients& c) {
    return BoundConstants{c.K(), c.kappa(), c.metadata().bounded};
}

BoundReport evaluate_bound(BoundKind kind, const SandwichCertificate& cert, std::size_t N,
                           double perturbation, double K, double x0_norm, double t, double p,
                           double eps, const QuadratureOptions& options) {
    check_pe(p, eps);
    if (!(t >= 0.0)) throw InvalidArgument("bound: t must be nonnegative");
    if (!(perturbation >= 0.0)) throw InvalidArgument("bound: perturbation must be nonnegative");
    if (!(K >= 0.0)) throw InvalidArgument("bound: K must be nonnegative");
    if (t > cert.horizon * (1.0 + 1e-12))
        throw HorizonExceeded("bound: t=" + std::to_string(t) + " beyond the C2 certificate horizon " +
                              std::to_string(cert.horizon));
    BoundReport r;
    r.kind = kind;
    r.p = p;
    r.q = p / (p - 1.0);
    r.eps = eps;
    r.t = t;
    r.eta_p = cert.eta_p;
    r.c2 = cert.c2;
    r.c2_horizon = cert.horizon;
    r.K = K;
    r.N = N;
    r.x0_norm = is_bounded(kind) ? 0.0 : x0_norm;
    r.perturbation = perturbation;
    r.lambda = cert.eta_p - eps * p;

    if (is_bounded(kind)) {
        const double lam = r.lambda;
        if (t == 0.0) {
            r.time_factor = 0.0;
            r.closed_form = true;
        } else if (std::abs(lam * t) < 1e-12) {
            r.time_factor = std::pow(t, 1.0 / p);
            r.closed_form = true;
        } else if (lam > 0.0) {
            r.time_factor = std::pow(-std::expm1(-lam * t) / lam, 1.0 / p);
            r.closed_form = true;
        } else {
            const auto integral =
                adaptive_simpson([&](double s) { return std::exp(-lam * (t - s)); }, 0.0, t, options);
            r.time_factor = std::pow(integral.value, 1.0 / p);
        }
    } else {
        r.time_factor = psi(t, eps, cert.eta_p, K, p, x0_norm, options);
    }

    const auto n = static_cast<double>(N);
    const double pert = std::pow(n * n * t * t * perturbation, 1.0 / r.q);
    r.value = (4.0 / eps + 8.0) * K * std::pow(cert.c2, 1.0 / p) * pert * r.time_factor;
    return r;
}

BoundCalculator::BoundCalculator(RateMatrix q, BoundConstants constants, double t_max, BoundOptions options)
    : q_(std::move(q)), constants_(std::move(constants)), options_(options) {
    if (static_cast<std::size_t>(constants_.kappa.size()) != q_.n_states())
        throw DimensionMismatch(q_.n_states(), static_cast<std::size_t>(constants_.kappa.size()),
                                "bounds: kappa");
    if (!(t_max > 0.0)) throw InvalidArgument("bounds: t_max must be positive");
    horizon_ = t_max;
    if (q_.n_states() > 1 && q_.irreducible()) {
        const double tau = spectral_gap(q_);
        if (tau > 0.0) horizon_ = std::max(horizon_, options_.horizon_mixing_times / tau);
    }
}

const SandwichCertificate& BoundCalculator::certificate(double p) const {
    auto it = certs_.find(p);
    if (it == certs_.end())
        it = certs_.emplace(p, c2_estimate(tilt(q_, constants_.kappa, p), horizon_, options_.c2_grid_points))
                 .first;
    return it->second;
}

BoundReport BoundCalculator::theorem1(const RateMatrix& q_tilde, double x0_norm, double t, double p,
                                      double eps, bool bounded) const {
    if (q_tilde.n_states() != q_.n_states())
        throw DimensionMismatch(q_.n_states(), q_tilde.n_states(), "theorem1: q_tilde");
    if (bounded && !constants_.bounded) throw NotBounded("theorem1: coefficients are not declared bounded");
    check_pe(p, eps);
    return evaluate_bound(bounded ? BoundKind::T1Bounded : BoundKind::T1General, certificate(p),
                          q_.n_states() - 1, l1_distance(q_, q_tilde), constants_.K, x0_norm, t, p, eps,
                          options_.quadrature);
}

double reduction_perturbation(const RateMatrix& q, const RateMatrix& q_hat, int m) {
    const auto split = block_split(q, m);
    if (static_cast<Eigen::Index>(q_hat.n_states()) != split.q1.rows())
        throw DimensionMismatch(static_cast<std::size_t>(split.q1.rows()), q_hat.n_states(),
                                "reduction: q_hat");
    return linalg::max_row_sum_norm(split.b) + linalg::max_row_sum_norm(split.q1 - q_hat.entries());
}

BoundReport BoundCalculator::theorem2(const RateMatrix& q_hat, int m, State i0, double x0_norm, double t,
                                      double p, double eps, bool bounded) const {
    const double delta = reduction_perturbation(q_, q_hat, m);
    if (i0 <= m || i0 >= static_cast<State>(q_.n_states()))
        throw InitialStateRemoved("theorem2: initial state " + std::to_string(i0) +
                                  " is not in the retained set {" + std::to_string(m + 1) + ", ..., " +
                                  std::to_string(q_.n_states() - 1) + "}");
    if (bounded && !constants_.bounded) throw NotBounded("theorem2: coefficients are not declared bounded");
    check_pe(p, eps);
    return evaluate_bound(bounded ? BoundKind::T2Bounded : BoundKind::T2General, certificate(p),
                          q_.n_states() - 1, delta, constants_.K, x0_norm, t, p, eps, options_.quadrature);
}

BoundReport theorem1_bound(const RateMatrix& q, const RateMatrix& q_tilde, const SwitchingCoefficients& c,
                           double x0_norm, double t, double p, double eps) {
    return BoundCalculator(q, bound_constants(c), std::max(t, 1e-12)).theorem1(q_tilde, x0_norm, t, p, eps, false);
}

BoundReport theorem1_bound_bounded(const RateMatrix& q, const RateMatrix& q_tilde,
                                   const SwitchingCoefficients& c, double t, double p, double eps) {
    if (!c.metadata().bounded) throw NotBounded(c.name() + ": coefficients are not declared bounded");
    return BoundCalculator(q, bound_constants(c), std::max(t, 1e-12)).theorem1(q_tilde, 0.0, t, p, eps, true);
}

BoundReport theorem2_bound(const RateMatrix& q, const RateMatrix& q_hat, int m, State i0,
                           const SwitchingCoefficients& c, double x0_norm, double t, double p, double eps,
                           bool bounded) {
    if (bounded && !c.metadata().bounded) throw NotBounded(c.name() + ": coefficients are not declared bounded");
    return BoundCalculator(q, bound_constants(c), std::max(t, 1e-12))
        .theorem2(q_hat, m, i0, x0_norm, t, p, eps, bounded);
}

OptimizedBound optimize_parameters(const std::function<BoundReport(double p, double eps)>& evaluate,
                                   std::vector<double> p_grid, std::vector<double> eps_grid) {
    if (p_grid.empty() || eps_grid.empty()) throw EmptyGrid("optimize_parameters: empty parameter grid");
    std::sort(p_grid.begin(), p_grid.end());
    std::sort(eps_grid.begin(), eps_grid.end());
    OptimizedBound out;
    const BoundReport* best = nullptr;
    for (double p : p_grid)
        for (double eps : eps_grid) out.table.push_back(evaluate(p, eps));
    for (const auto& r : out.table) {
        if (!std::isfinite(r.value)) continue;
        if (!best || r.value < best->value) best = &r;
    }
    // Every cell non-finite: fall back to the first cell.
    out.best = best ? *best : out.table.front();
    return out;
}

void to_json(std::ostream& os, const BoundReport& r, int indent) {
    nlohmann::ordered_json j;
    j["kind"] = to_string(r.kind);
    j["p"] = r.p;
    j["q"] = r.q;
    j["eps"] = r.eps;
    j["t"] = r.t;
    j["eta_p"] = r.eta_p;
    j["c2"] = r.c2;
    j["c2_horizon"] = r.c2_horizon;
    j["c2_certification"] = "grid";
    j["K"] = r.K;
    j["N"] = r.N;
    j["x0_norm"] = r.x0_norm;
    j["perturbation"] = r.perturbation;
    j["lambda"] = r.lambda;
    j["closed_form"] = r.closed_form;
    j["time_factor"] = r.time_factor;
    j["value"] = r.value;
    os << j.dump(indent);
}

std::string bound_csv_header() {
    return "kind,p,q,eps,t,eta_p,c2,c2_horizon,K,N,x0_norm,perturbation,lambda,closed_form,time_factor,value";
}

std::string bound_csv_row(const BoundReport& r) {
    char buf[512];
    std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%zu,%.17g,%.17g,%.17g,%d,%.17g,%.17g",
                  to_string(r.kind), r.p, r.q, r.eps, r.t, r.eta_p, r.c2, r.c2_horizon, r.K, r.N, r.x0_norm,
                  r.perturbation, r.lambda, r.closed_form ? 1 : 0, r.time_factor, r.value);
    return buf;
}

}  // namespace rsstab
