#pragma once

// Shared helpers for the test suites. Randomness here comes from
// std::mt19937_64 so oracles never share a generator with the library.

#include "rsstab/models.hpp"
#include "rsstab/ratematrix.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <vector>

namespace rsstab::testing {

// Two-state bounded benchmark: b = mu_i + alpha_i tanh x, σ = s_i, κ = 0, K = 2.25.
inline SwitchingCoefficients bounded_tanh_benchmark() {
    return bounded_tanh({0.5, -0.5}, {-1.0, -0.5}, {1.0, 0.6});
}

// Irreducible generator with off-diagonal rates in [lo, hi].
inline RateMatrix random_generator(std::mt19937_64& gen, int n, double lo = 0.2, double hi = 2.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j)
            if (i != j) q(i, j) = u(gen);
        q(i, i) = -q.row(i).sum();
    }
    return RateMatrix::validate(q);
}

// Adds `delta` to q(i, j) and removes it from the diagonal. The l1 distance
// to the input is 2|delta|.
inline RateMatrix bump(const RateMatrix& q, int i, int j, double delta) {
    Eigen::MatrixXd e = q.entries();
    e(i, j) += delta;
    e(i, i) -= delta;
    return RateMatrix::validate(e);
}

// Gillespie simulation of a CTMC up to time t; calls visit(state, dwell)
// for every sojourn inside [0, t]. Returns the state at t.
template <class Visit>
int gillespie(const RateMatrix& q, int i0, double t, std::mt19937_64& gen, Visit&& visit) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int state = i0;
    double now = 0.0;
    const int n = static_cast<int>(q.n_states());
    for (;;) {
        const double rate = q.exit_rate(static_cast<std::size_t>(state));
        const double dwell = rate > 0.0 ? -std::log1p(-u(gen)) / rate : INFINITY;
        if (now + dwell >= t) {
            visit(state, t - now);
            return state;
        }
        visit(state, dwell);
        now += dwell;
        double pick = u(gen) * rate;
        int next = state;
        for (int j = 0; j < n; ++j) {
            if (j == state) continue;
            next = j;
            pick -= q(static_cast<std::size_t>(state), static_cast<std::size_t>(j));
            if (pick < 0.0) break;
        }
        state = next;
    }
}

struct Moments {
    double mean = 0.0;
    double se = 0.0;
};

inline Moments moments(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    const double m = s / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    const double var = ss / static_cast<double>(v.size() - 1);
    return {m, std::sqrt(var / static_cast<double>(v.size()))};
}

}  // namespace rsstab::testing
