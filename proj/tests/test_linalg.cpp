#include "rsstab/linalg.hpp"

#include <gtest/gtest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <random>

using namespace rsstab;

namespace {

// Truncated Taylor series with the tail bounded by the next term times a
// geometric factor; only used for ‖A‖ small enough that 60 terms suffice.
Eigen::MatrixXd taylor_expm(const Eigen::MatrixXd& a, int terms = 60) {
    Eigen::MatrixXd sum = Eigen::MatrixXd::Identity(a.rows(), a.cols());
    Eigen::MatrixXd term = sum;
    for (int k = 1; k <= terms; ++k) {
        term = term * a / k;
        sum += term;
    }
    return sum;
}

Eigen::MatrixXd random_matrix(std::mt19937_64& gen, int n, double scale) {
    std::normal_distribution<double> z(0.0, scale);
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = z(gen);
    return m;
}

}  // namespace

TEST(Expm, ZeroIsIdentity) {
    EXPECT_TRUE(linalg::expm(Eigen::MatrixXd::Zero(3, 3)).isApprox(Eigen::MatrixXd::Identity(3, 3)));
}

TEST(Expm, MatchesTaylorOracle) {
    std::mt19937_64 gen(1);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + trial % 5;
        const Eigen::MatrixXd a = random_matrix(gen, n, 0.8);
        const Eigen::MatrixXd ref = taylor_expm(a);
        EXPECT_LT((linalg::expm(a) - ref).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, ref.norm()));
    }
}

TEST(Expm, LargeNormUsesScaling) {
    std::mt19937_64 gen(2);
    const Eigen::MatrixXd a = random_matrix(gen, 4, 5.0);
    // Oracle: Taylor of a/2^10, squared ten times.
    Eigen::MatrixXd ref = taylor_expm(a / 1024.0);
    for (int k = 0; k < 10; ++k) ref = ref * ref;
    const Eigen::MatrixXd got = linalg::expm(a);
    EXPECT_LT((got - ref).norm() / ref.norm(), 1e-10);
}

TEST(ExpmIntegral, MatchesQuadratureOfTaylor) {
    Eigen::MatrixXd a(2, 2);
    a << -1, 1, 2, -2;
    const double t = 0.9;
    // Closed form for a generator with eigenvalues 0, -3:
    // ∫ e^{sA} ds = t·Π + (1 - e^{-3t})/3 · (I - Π), Π = 1π.
    Eigen::MatrixXd pi(2, 2);
    pi << 2.0 / 3, 1.0 / 3, 2.0 / 3, 1.0 / 3;
    const Eigen::MatrixXd ref =
        t * pi + (1 - std::exp(-3 * t)) / 3 * (Eigen::MatrixXd::Identity(2, 2) - pi);
    EXPECT_LT((linalg::expm_integral(a, t) - ref).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Eigenvalues, AgreeWithEigenSolver) {
    std::mt19937_64 gen(3);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 1 + trial % 7;
        const Eigen::MatrixXd a = random_matrix(gen, n, 1.0);
        auto got = linalg::eigenvalues(a);
        Eigen::EigenSolver<Eigen::MatrixXd> es(a);
        std::vector<std::complex<double>> ref(es.eigenvalues().data(),
                                              es.eigenvalues().data() + n);
        auto key = [](const std::complex<double>& z) { return std::pair(z.real(), z.imag()); };
        auto cmp = [&](const auto& x, const auto& y) { return key(x) < key(y); };
        std::sort(got.begin(), got.end(), cmp);
        std::sort(ref.begin(), ref.end(), cmp);
        ASSERT_EQ(got.size(), ref.size());
        for (int k = 0; k < n; ++k) EXPECT_LT(std::abs(got[k] - ref[k]), 1e-9) << "trial " << trial;
    }
}

TEST(Eigenvalues, CirculantGenerator) {
    Eigen::MatrixXd q(3, 3);
    q << -1, 1, 0, 0, -1, 1, 1, 0, -1;
    auto ev = linalg::eigenvalues(q);
    std::sort(ev.begin(), ev.end(), [](auto a, auto b) { return a.real() > b.real(); });
    EXPECT_NEAR(std::abs(ev[0]), 0.0, 1e-12);
    EXPECT_NEAR(ev[1].real(), -1.5, 1e-12);
    EXPECT_NEAR(std::abs(ev[1].imag()), std::sqrt(3.0) / 2, 1e-12);
}

TEST(Hessenberg, PreservesSpectrumAndShape) {
    std::mt19937_64 gen(4);
    Eigen::MatrixXd a = random_matrix(gen, 6, 1.0);
    Eigen::MatrixXd h = a;
    linalg::to_hessenberg(h);
    for (int i = 2; i < 6; ++i)
        for (int j = 0; j < i - 1; ++j) EXPECT_EQ(h(i, j), 0.0);
    EXPECT_NEAR(h.trace(), a.trace(), 1e-12);
    EXPECT_NEAR(h.determinant(), a.determinant(), 1e-10);
}

TEST(MaxRowSumNorm, BruteForce) {
    Eigen::MatrixXd a(2, 3);
    a << 1, -2, 3, -4, 0.5, 0;
    EXPECT_DOUBLE_EQ(linalg::max_row_sum_norm(a), 6.0);
}
