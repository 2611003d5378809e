#pragma once

// Rate-matrix algebra for finite continuous-time Markov chains on
// S = {0, ..., n-1}.

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace rsstab {

using State = int;

// Conservative, totally stable generator: off-diagonals >= 0, finite
// diagonal, rows summing to zero. Immutable after validation.
class RateMatrix {
public:
    // Row-sum residuals up to this are accepted as is.
    static constexpr double kRowSumTolerance = 1e-12;
    // Residuals below this are repaired by adjusting the diagonal; larger
    // ones are rejected with NonConservative.
    static constexpr double kRepairTolerance = 1e-9;

    // Throws NonConservative, NegativeRate or InvalidArgument.
    static RateMatrix validate(const Eigen::MatrixXd& raw);
    static RateMatrix validate(const std::vector<std::vector<double>>& rows);

    // n×n zero generator (every state absorbing).
    static RateMatrix zero(std::size_t n);

    std::size_t n_states() const noexcept { return static_cast<std::size_t>(q_.rows()); }
    const Eigen::MatrixXd& entries() const noexcept { return q_; }
    double operator()(std::size_t i, std::size_t j) const {
        return q_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    // q_i = -q_ii.
    double exit_rate(std::size_t i) const { return -(*this)(i, i); }
    double max_exit_rate() const;

    // Strong connectivity of the jump graph (i -> j when q_ij > 0).
    bool irreducible() const;

    bool operator==(const RateMatrix& other) const { return q_ == other.q_; }

private:
    explicit RateMatrix(Eigen::MatrixXd q) : q_(std::move(q)) {}
    Eigen::MatrixXd q_;
};

// max_i Σ_j |a_ij - b_ij|.
double l1_distance(const RateMatrix& a, const RateMatrix& b);

// q + δ·D/‖D‖_ℓ1, so that l1_distance(q, result) = δ when the direction
// is conservative. Throws NegativeRate when the step leaves the cone of
// generators, InvalidArgument for a zero direction.
RateMatrix perturb(const RateMatrix& q, const Eigen::MatrixXd& direction, double delta);

// e^{tQ}.
Eigen::MatrixXd transition_matrix(const RateMatrix& q, double t);

// πQ = 0, Σπ = 1. Throws Reducible.
Eigen::VectorXd invariant_measure(const RateMatrix& q);

// τ = -max{Re λ : λ ∈ spec(Q), λ ≠ 0}; the zero eigenvalue is the one of
// smallest modulus and must satisfy |λ| < 1e-9. Returns +inf for a single
// state. Throws Reducible.
double spectral_gap(const RateMatrix& q);

// Q_p = Q + p·diag(κ).
struct TiltedGenerator {
    RateMatrix base;
    Eigen::VectorXd kappa;
    double p;
    Eigen::MatrixXd matrix;
};

TiltedGenerator tilt(const RateMatrix& q, const Eigen::VectorXd& kappa, double p);

// η_p = -max{Re γ : γ ∈ spec(Q_p)}.
double eta(const TiltedGenerator& g);

// E_{i0} exp(p ∫_0^t κ(Λ_s) ds) = (e^{tQ_p} 1)_{i0}.
double feynman_kac(const RateMatrix& q, const Eigen::VectorXd& kappa, double p, double t, State i0);

// Grid certificate of the sandwich
//   C1 e^{-η_p t} <= E_i exp(p ∫_0^t κ) <= C2 e^{-η_p t}
// on [0, horizon]. c2 carries a 5% safety factor over the grid maximum and
// c1 the same factor under the grid minimum.
struct SandwichCertificate {
    double eta_p = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;
    double horizon = 0.0;
    std::size_t grid_points = 0;
};

inline constexpr double kSandwichSafetyFactor = 1.05;

SandwichCertificate c2_estimate(const TiltedGenerator& g, double t_max, std::size_t grid_points);

struct SpectralSummary {
    double eta_p = 0.0;
    double tau = 0.0;
    Eigen::VectorXd pi;
    double c2 = 0.0;
    double c2_grid_horizon = 0.0;
};

// η_p, C2 and (when the base is irreducible) τ and π in one place.
// For a reducible base tau is 0 and pi is empty.
SpectralSummary summarize(const TiltedGenerator& g, double t_max, std::size_t grid_points);

// Block form Q = [[Q0, A], [B, Q1]] with Q0 of size (m+1)×(m+1).
struct BlockSplit {
    Eigen::MatrixXd q0;
    Eigen::MatrixXd a;
    Eigen::MatrixXd b;
    Eigen::MatrixXd q1;
};

// Throws BadSplitIndex unless 0 <= m < n_states - 1.
BlockSplit block_split(const RateMatrix& q, int m);

// Extension of a generator on E = {m+1, ..., n-1} to S: top rows from q,
// bottom-left block zero, bottom-right block q_hat. A chain started in E
// never leaves E.
RateMatrix embed_reduced(const RateMatrix& q, const RateMatrix& q_hat, int m);

}  // namespace rsstab
