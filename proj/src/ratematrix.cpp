#include "rsstab/ratematrix.hpp"

#include "rsstab/error.hpp"
#include "rsstab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rsstab {

RateMatrix RateMatrix::validate(const Eigen::MatrixXd& raw) {
    if (raw.rows() != raw.cols())
        throw DimensionMismatch(static_cast<std::size_t>(raw.rows()),
                                static_cast<std::size_t>(raw.cols()), "rate matrix must be square");
    if (raw.rows() == 0) throw InvalidArgument("rate matrix must have at least one state");
    if (!raw.allFinite()) throw InvalidArgument("rate matrix has non-finite entries");
    const Eigen::Index n = raw.rows();
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (i != j && raw(i, j) < 0.0)
                throw NegativeRate(static_cast<std::size_t>(i), static_cast<std::size_t>(j));

    Eigen::MatrixXd q = raw;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double residual = q.row(i).sum();
        if (std::abs(residual) <= kRowSumTolerance) continue;
        if (std::abs(residual) < kRepairTolerance) {
            q(i, i) -= residual;
            continue;
        }
        throw NonConservative(static_cast<std::size_t>(i), residual);
    }
    return RateMatrix(std::move(q));
}

RateMatrix RateMatrix::validate(const std::vector<std::vector<double>>& rows) {
    const std::size_t n = rows.size();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        if (rows[i].size() != n) throw DimensionMismatch(n, rows[i].size(), "rate matrix row");
        for (std::size_t j = 0; j < n; ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    return validate(m);
}

RateMatrix RateMatrix::zero(std::size_t n) {
    if (n == 0) throw InvalidArgument("rate matrix must have at least one state");
    const auto sz = static_cast<Eigen::Index>(n);
    return RateMatrix(Eigen::MatrixXd::Zero(sz, sz));
}

double RateMatrix::max_exit_rate() const {
    return (-q_.diagonal()).maxCoeff();
}

bool RateMatrix::irreducible() const {
    const Eigen::Index n = q_.rows();
    auto reaches_all = [&](bool transpose) {
        std::vector<char> seen(static_cast<std::size_t>(n), 0);
        std::vector<Eigen::Index> stack{0};
        seen[0] = 1;
        while (!stack.empty()) {
            const Eigen::Index i = stack.back();
            stack.pop_back();
            for (Eigen::Index j = 0; j < n; ++j) {
                const double rate = transpose ? q_(j, i) : q_(i, j);
                if (j != i && rate > 0.0 && !seen[static_cast<std::size_t>(j)]) {
                    seen[static_cast<std::size_t>(j)] = 1;
                    stack.push_back(j);
                }
            }
        }
        return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
    };
    return reaches_all(false) && reaches_all(true);
}

double l1_distance(const RateMatrix& a, const RateMatrix& b) {
    if (a.n_states() != b.n_states())
        throw DimensionMismatch(a.n_states(), b.n_states(), "l1_distance");
    return linalg::max_row_sum_norm(a.entries() - b.entries());
}

RateMatrix perturb(const RateMatrix& q, const Eigen::MatrixXd& direction, double delta) {
    const auto n = static_cast<Eigen::Index>(q.n_states());
    if (direction.rows() != n || direction.cols() != n)
        throw DimensionMismatch(q.n_states(), static_cast<std::size_t>(direction.rows()),
                                "perturb: direction");
    const double norm = linalg::max_row_sum_norm(direction);
    if (!(norm > 0.0)) throw InvalidArgument("perturb: zero direction");
    return RateMatrix::validate(q.entries() + (delta / norm) * direction);
}

Eigen::MatrixXd transition_matrix(const RateMatrix& q, double t) {
    if (!(t >= 0.0)) throw InvalidArgument("transition_matrix: t must be nonnegative");
    return linalg::expm(q.entries() * t);
}

Eigen::VectorXd invariant_measure(const RateMatrix& q) {
    if (!q.irreducible()) throw Reducible("invariant_measure: generator is not irreducible");
    const Eigen::Index n = static_cast<Eigen::Index>(q.n_states());
    // Solve Qᵀπ = 0 with the last equation replaced by Σπ = 1.
    Eigen::MatrixXd a = q.entries().transpose();
    a.row(n - 1).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs(n - 1) = 1.0;
    Eigen::VectorXd pi = a.fullPivLu().solve(rhs);
    pi = pi.cwiseMax(0.0);
    return pi / pi.sum();
}

double spectral_gap(const RateMatrix& q) {
    if (!q.irreducible()) throw Reducible("spectral_gap: generator is not irreducible");
    if (q.n_states() == 1) return std::numeric_limits<double>::infinity();
    const auto ev = linalg::eigenvalues(q.entries());
    std::size_t zero = 0;
    for (std::size_t k = 1; k < ev.size(); ++k)
        if (std::abs(ev[k]) < std::abs(ev[zero])) zero = k;
    if (std::abs(ev[zero]) >= 1e-9)
        throw Reducible("spectral_gap: no eigenvalue within 1e-9 of zero (ill-conditioned)");
    double max_re = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < ev.size(); ++k)
        if (k != zero) max_re = std::max(max_re, ev[k].real());
    return -max_re;
}

TiltedGenerator tilt(const RateMatrix& q, const Eigen::VectorXd& kappa, double p) {
    if (static_cast<std::size_t>(kappa.size()) != q.n_states())
        throw DimensionMismatch(q.n_states(), static_cast<std::size_t>(kappa.size()), "tilt: kappa");
    if (!(p > 0.0)) throw InvalidArgument("tilt: p must be positive");
    Eigen::MatrixXd m = q.entries();
    m.diagonal() += p * kappa;
    return TiltedGenerator{q, kappa, p, std::move(m)};
}

double eta(const TiltedGenerator& g) {
    const auto ev = linalg::eigenvalues(g.matrix);
    double max_re = -std::numeric_limits<double>::infinity();
    for (const auto& l : ev) max_re = std::max(max_re, l.real());
    return -max_re;
}

double feynman_kac(const RateMatrix& q, const Eigen::VectorXd& kappa, double p, double t,
                   State i0) {
    if (!(t >= 0.0)) throw InvalidArgument("feynman_kac: t must be nonnegative");
    if (i0 < 0 || static_cast<std::size_t>(i0) >= q.n_states())
        throw InvalidArgument("feynman_kac: initial state out of range");
    const TiltedGenerator g = tilt(q, kappa, p);
    const Eigen::MatrixXd e = linalg::expm(g.matrix * t);
    return e.row(i0).sum();
}

SandwichCertificate c2_estimate(const TiltedGenerator& g, double t_max, std::size_t grid_points) {
    if (!(t_max > 0.0)) throw InvalidArgument("c2_estimate: t_max must be positive");
    if (grid_points < 2) throw InvalidArgument("c2_estimate: need at least two grid points");
    SandwichCertificate cert;
    cert.eta_p = eta(g);
    cert.horizon = t_max;
    cert.grid_points = grid_points;
    const Eigen::Index n = g.matrix.rows();
    // e^{η t} e^{t Q_p} = e^{t (Q_p + η I)}: keeps the ratio finite for large t.
    const Eigen::MatrixXd shifted = g.matrix + cert.eta_p * Eigen::MatrixXd::Identity(n, n);
    double hi = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < grid_points; ++k) {
        const double t = t_max * static_cast<double>(k) / static_cast<double>(grid_points - 1);
        const Eigen::VectorXd ratio = linalg::expm(shifted * t).rowwise().sum();
        hi = std::max(hi, ratio.maxCoeff());
        lo = std::min(lo, ratio.minCoeff());
    }
    cert.c2 = kSandwichSafetyFactor * hi;
    cert.c1 = lo / kSandwichSafetyFactor;
    return cert;
}

SpectralSummary summarize(const TiltedGenerator& g, double t_max, std::size_t grid_points) {
    SpectralSummary s;
    const SandwichCertificate cert = c2_estimate(g, t_max, grid_points);
    s.eta_p = cert.eta_p;
    s.c2 = cert.c2;
    s.c2_grid_horizon = cert.horizon;
    if (g.base.irreducible()) {
        s.tau = spectral_gap(g.base);
        s.pi = invariant_measure(g.base);
    }
    return s;
}

BlockSplit block_split(const RateMatrix& q, int m) {
    const int n = static_cast<int>(q.n_states());
    if (m < 0 || m >= n - 1)
        throw BadSplitIndex("block_split: need 0 <= m < N (m=" + std::to_string(m) +
                            ", N=" + std::to_string(n - 1) + ")");
    const Eigen::Index k = m + 1;
    const Eigen::Index r = n - k;
    const auto& e = q.entries();
    return BlockSplit{e.topLeftCorner(k, k), e.topRightCorner(k, r), e.bottomLeftCorner(r, k),
                      e.bottomRightCorner(r, r)};
}

RateMatrix embed_reduced(const RateMatrix& q, const RateMatrix& q_hat, int m) {
    const int n = static_cast<int>(q.n_states());
    if (m < 0 || m >= n - 1)
        throw BadSplitIndex("embed_reduced: need 0 <= m < N (m=" + std::to_string(m) + ")");
    const auto k = static_cast<Eigen::Index>(m + 1);
    const auto r = static_cast<Eigen::Index>(n) - k;
    if (static_cast<Eigen::Index>(q_hat.n_states()) != r)
        throw DimensionMismatch(static_cast<std::size_t>(r), q_hat.n_states(),
                                "embed_reduced: q_hat");
    Eigen::MatrixXd e = q.entries();
    e.bottomLeftCorner(r, k).setZero();
    e.bottomRightCorner(r, r) = q_hat.entries();
    // Both inputs are valid generators, so the result is conservative.
    return RateMatrix::validate(e);
}

}  // namespace rsstab
