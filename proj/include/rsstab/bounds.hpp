#pragma once

// W2² bounds for perturbed switching, general and bounded-coefficient forms:
//
//   (4/ε + 8) K C2^{1/p} (N² t² δ)^{1/q} F,   q = p/(p-1),
//
// with δ the perturbation size, N = n_states - 1, and
//   F = Ψ(t, ε, η_p, K, p)                         general coefficients
//   F = ((1 - e^{-λt}) / λ)^{1/p},  λ = η_p - εp   bounded coefficients.
// For the reduction to a subset E the perturbation size is
// ‖B‖_ℓ1 + ‖Q1 - Q̂‖_ℓ1 and everything else is unchanged.

#include "rsstab/quadrature.hpp"
#include "rsstab/ratematrix.hpp"
#include "rsstab/sde.hpp"

#include <Eigen/Dense>

#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace rsstab {

enum class BoundKind { T1General, T1Bounded, T2General, T2Bounded };

const char* to_string(BoundKind kind) noexcept;
bool is_bounded(BoundKind kind) noexcept;

// (∫_0^t [1 + (|x0|² + 2Ks) e^{(2K+1)s}]^p e^{-(η_p - εp)(t-s)} ds)^{1/p}.
double psi(double t, double eps, double eta_p, double K, double p, double x0_norm,
           const QuadratureOptions& options = {});

struct BoundConstants {
    double K = 0.0;
    Eigen::VectorXd kappa;
    bool bounded = false;
};

// Throws MissingMetadata.
BoundConstants bound_constants(const SwitchingCoefficients& c);

struct BoundReport {
    BoundKind kind = BoundKind::T1General;
    double p = 2.0;
    double q = 2.0;
    double eps = 1.0;
    double t = 0.0;
    double eta_p = 0.0;
    double c2 = 0.0;
    double c2_horizon = 0.0;
    double K = 0.0;
    std::size_t N = 0;
    double x0_norm = 0.0;
    double perturbation = 0.0;
    double lambda = 0.0;       // η_p - εp
    bool closed_form = false;  // bounded kinds: λ > 0
    double time_factor = 0.0;  // Ψ or ((1 - e^{-λt})/λ)^{1/p}
    double value = 0.0;
};

void to_json(std::ostream& os, const BoundReport& r, int indent = 2);
std::string bound_csv_header();
std::string bound_csv_row(const BoundReport& r);

// Formula evaluation given the sandwich certificate; every bound goes
// through here. Throws HorizonExceeded when t lies beyond the certificate.
BoundReport evaluate_bound(BoundKind kind, const SandwichCertificate& cert, std::size_t N,
                           double perturbation, double K, double x0_norm, double t, double p,
                           double eps, const QuadratureOptions& options = {});

struct BoundOptions {
    std::size_t c2_grid_points = 2001;
    // Certificate horizon is max(t_max, horizon_mixing_times / τ).
    double horizon_mixing_times = 10.0;
    QuadratureOptions quadrature{};
};

// Caches one C2 certificate per p for a base generator.
class BoundCalculator {
public:
    BoundCalculator(RateMatrix q, BoundConstants constants, double t_max, BoundOptions options = {});

    const SandwichCertificate& certificate(double p) const;
    double horizon() const noexcept { return horizon_; }
    const RateMatrix& q() const noexcept { return q_; }
    const BoundConstants& constants() const noexcept { return constants_; }

    // Throws NotBounded for the bounded form without the bounded flag.
    BoundReport theorem1(const RateMatrix& q_tilde, double x0_norm, double t, double p, double eps,
                         bool bounded) const;
    // Throws BadSplitIndex, InitialStateRemoved.
    BoundReport theorem2(const RateMatrix& q_hat, int m, State i0, double x0_norm, double t, double p,
                         double eps, bool bounded) const;

private:
    RateMatrix q_;
    BoundConstants constants_;
    BoundOptions options_;
    double horizon_ = 0.0;
    mutable std::map<double, SandwichCertificate> certs_;
};

BoundReport theorem1_bound(const RateMatrix& q, const RateMatrix& q_tilde, const SwitchingCoefficients& c,
                           double x0_norm, double t, double p, double eps);
BoundReport theorem1_bound_bounded(const RateMatrix& q, const RateMatrix& q_tilde,
                                   const SwitchingCoefficients& c, double t, double p, double eps);
BoundReport theorem2_bound(const RateMatrix& q, const RateMatrix& q_hat, int m, State i0,
                           const SwitchingCoefficients& c, double x0_norm, double t, double p, double eps,
                           bool bounded);

// ‖B‖_ℓ1 + ‖Q1 - Q̂‖_ℓ1.
double reduction_perturbation(const RateMatrix& q, const RateMatrix& q_hat, int m);

inline const std::vector<double> kDefaultPGrid{1.5, 2.0, 3.0, 5.0};
inline const std::vector<double> kDefaultEpsGrid{0.1, 0.5, 1.0, 2.0};

struct OptimizedBound {
    BoundReport best;
    std::vector<BoundReport> table;  // p ascending, then ε ascending
};

// Minimum over the grid; ties go to the lexicographically smallest (p, ε).
// Throws EmptyGrid.
OptimizedBound optimize_parameters(const std::function<BoundReport(double p, double eps)>& evaluate,
                                   std::vector<double> p_grid = kDefaultPGrid,
                                   std::vector<double> eps_grid = kDefaultEpsGrid);

}  // namespace rsstab
