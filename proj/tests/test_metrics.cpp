#include "rsstab/error.hpp"
#include "rsstab/io.hpp"
#include "rsstab/metrics.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>
#include <vector>

using namespace rsstab;

namespace {

std::vector<double> normals(std::size_t n, double mean, unsigned seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd(mean, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = nd(gen);
    return v;
}

}  // namespace

TEST(CoupledUpper, IdenticalPairsGiveZero) {
    const auto x = normals(100, 0.0, 1);
    const auto e = w2_coupled_upper(x, x);
    EXPECT_EQ(e.value, 0.0);
    EXPECT_EQ(e.std_error, 0.0);
    EXPECT_TRUE(e.squared);
    EXPECT_EQ(e.kind, DistanceKind::CoupledUpper);
}

TEST(CoupledUpper, UnitGapPairs) {
    const std::vector<double> x(50, 0.0), y(50, 1.0);
    const auto e = w2_coupled_upper(x, y);
    EXPECT_DOUBLE_EQ(e.value, 1.0);
    EXPECT_EQ(e.std_error, 0.0);
    EXPECT_EQ(e.n_samples, 50u);
}

TEST(CoupledUpper, MultivariatePoints) {
    // Points (0,0),(1,2) against (1,0),(1,0): squared gaps 1 and 4.
    const std::vector<double> x{0, 0, 1, 2}, y{1, 0, 1, 0};
    const auto e = w2_coupled_upper(x, y, 2);
    EXPECT_DOUBLE_EQ(e.value, 2.5);
    EXPECT_EQ(e.n_samples, 2u);
    // Leave-one-out jackknife of a mean: estimates 4 and 1, SE² = (1/2)·(2·1.5²).
    EXPECT_NEAR(e.std_error, 1.5, 1e-12);
}

TEST(CoupledUpper, Errors) {
    const std::vector<double> empty, one{1.0}, three{1, 2, 3};
    EXPECT_THROW(w2_coupled_upper(empty, empty), EmptySample);
    EXPECT_THROW(w2_coupled_upper(one, three), DimensionMismatch);
    EXPECT_THROW(w2_coupled_upper(three, three, 2), InvalidArgument);
}

TEST(CoupledUpper, DominatesQuantileCoupling) {
    std::mt19937_64 gen(7);
    std::normal_distribution<double> nd;
    std::vector<double> x(5000), y(5000);
    for (std::size_t k = 0; k < x.size(); ++k) {
        x[k] = nd(gen);
        y[k] = 0.6 * x[k] + 0.8 * nd(gen) + 0.3;
    }
    const double upper = w2_coupled_upper(x, y).value;
    const double exact = w2_exact_1d(x, y).value;
    EXPECT_LE(exact * exact, upper + 1e-12);
}

TEST(Exact1d, EqualMultisetsGiveZero) {
    std::vector<double> a{3, 1, 2, 2, 5};
    std::vector<double> b{2, 5, 1, 3, 2};
    EXPECT_EQ(w2_exact_1d(a, b).value, 0.0);
}

TEST(Exact1d, PointMasses) {
    const std::vector<double> a{0, 0}, b{1, 1};
    EXPECT_DOUBLE_EQ(w2_exact_1d(a, b).value, 1.0);
}

TEST(Exact1d, UnequalCounts) {
    // δ_0 against (δ_0 + δ_1)/2: half the mass moves by 1.
    const std::vector<double> a{0}, b{1, 0};
    EXPECT_DOUBLE_EQ(w2_exact_1d(a, b).value, std::sqrt(0.5));
    // Uniform thirds against halves: brute-force the quantile integral.
    const std::vector<double> c{0, 1, 2}, d{0, 3};
    double cost = 0.0;
    const int m = 600000;
    for (int k = 0; k < m; ++k) {
        const double u = (k + 0.5) / m;
        const double qc = c[static_cast<std::size_t>(u * 3)];
        const double qd = d[static_cast<std::size_t>(u * 2)];
        cost += (qc - qd) * (qc - qd) / m;
    }
    EXPECT_NEAR(w2_exact_1d(c, d).value, std::sqrt(cost), 1e-9);
}

TEST(Exact1d, GaussianTranslation) {
    const double m = 0.7;
    const auto a = normals(100000, 0.0, 11);
    const auto b = normals(100000, m, 12);
    const auto e = w2_exact_1d(a, b);
    EXPECT_NEAR(e.value, m, 0.02 * m);
    EXPECT_GT(e.std_error, 0.0);
    EXPECT_LT(e.std_error, 0.02);
}

TEST(Exact1d, PermutationInvariant) {
    auto a = normals(997, 0.0, 3);
    auto b = normals(1003, 0.5, 4);
    const auto e1 = w2_exact_1d(a, b);
    std::mt19937_64 gen(5);
    std::shuffle(a.begin(), a.end(), gen);
    std::shuffle(b.begin(), b.end(), gen);
    const auto e2 = w2_exact_1d(a, b);
    EXPECT_EQ(e1.value, e2.value);
    EXPECT_EQ(e1.std_error, e2.std_error);
}

TEST(Exact1d, EmptySampleThrows) {
    const std::vector<double> empty, one{1.0};
    EXPECT_THROW(w2_exact_1d(empty, one), EmptySample);
    EXPECT_THROW(w2_exact_1d(one, empty), EmptySample);
}

TEST(Dictionary, SizeAndDistinctEntries) {
    const auto& dict = builtin_dictionary();
    ASSERT_EQ(dict.size(), 32u);
    std::set<std::string> names;
    for (const auto& f : dict) names.insert(f.name());
    EXPECT_EQ(names.size(), 32u);
}

TEST(Dictionary, NormConstraintHoldsNumerically) {
    // Independent check of ‖φ‖_Lip + ‖φ‖_∞ on a fine grid.
    for (const auto& f : builtin_dictionary()) {
        EXPECT_NEAR(f.lipschitz() + f.sup(), 1.0, 1e-15) << f.name();
        double sup = 0.0, lip = 0.0;
        const double h = 1e-3;
        double prev = f(-40.0);
        for (double x = -40.0 + h; x <= 40.0; x += h) {
            const double v = f(x);
            sup = std::max(sup, std::abs(v));
            lip = std::max(lip, std::abs(v - prev) / h);
            prev = v;
        }
        EXPECT_LE(sup + lip, 1.0 + 1e-9) << f.name();
        EXPECT_GT(sup + lip, 0.99) << f.name();
    }
}

TEST(Dictionary, PointMassesWithHalfRamp) {
    const std::vector<double> a{0.0, 0.0}, b{1.0, 1.0};
    const TestFunction ramp = ramp_test(1.0, 0.0, -1.0);
    EXPECT_DOUBLE_EQ(ramp.amplitude, 0.5);
    EXPECT_DOUBLE_EQ(ramp(0.5), -0.25);
    const std::vector<TestFunction> one{ramp};
    const auto e = wbl_dictionary_lower(a, b, one);
    EXPECT_DOUBLE_EQ(e.value, 0.5);
    EXPECT_EQ(e.std_error, 0.0);
    EXPECT_GE(wbl_dictionary_lower(a, b).value, 0.5);
}

TEST(Dictionary, EqualSamplesGiveZero) {
    const auto a = normals(1000, 0.0, 21);
    const auto e = wbl_dictionary_lower(a, a);
    EXPECT_EQ(e.value, 0.0);
    EXPECT_EQ(e.kind, DistanceKind::BlDictionaryLower);
}

TEST(Dictionary, BelowW1ForTranslatedGaussians) {
    // W_bL ≤ W1 = |m| for N(0,1) against N(m,1).
    const double m = 0.4;
    const auto a = normals(50000, 0.0, 31);
    const auto b = normals(50000, m, 32);
    const auto e = wbl_dictionary_lower(a, b);
    EXPECT_GT(e.value, 0.0);
    EXPECT_LE(e.value, m + 3.0 * e.std_error);
    EXPECT_FALSE(e.witness.empty());
}

TEST(Dictionary, PermutationInvariant) {
    auto a = normals(500, 0.0, 41);
    auto b = normals(500, 0.3, 42);
    const auto e1 = wbl_dictionary_lower(a, b);
    std::mt19937_64 gen(6);
    std::shuffle(a.begin(), a.end(), gen);
    std::shuffle(b.begin(), b.end(), gen);
    const auto e2 = wbl_dictionary_lower(a, b);
    EXPECT_NEAR(e1.value, e2.value, 1e-14);
    EXPECT_EQ(e1.witness, e2.witness);
}

TEST(Dictionary, Errors) {
    const std::vector<double> a{1.0}, empty;
    const std::vector<TestFunction> none;
    EXPECT_THROW(wbl_dictionary_lower(a, a, none), EmptyDictionary);
    EXPECT_THROW(wbl_dictionary_lower(empty, a), EmptySample);
    EXPECT_THROW(ramp_test(0.0, 0.0), InvalidArgument);
}

TEST(Exact1d, JackknifeErrorMatchesReplicationSpread) {
    std::vector<double> est;
    double se = 0.0;
    const int reps = 100;
    for (int r = 0; r < reps; ++r) {
        const auto a = normals(2000, 0.0, 1000 + 2 * r);
        const auto b = normals(2000, 0.3, 1001 + 2 * r);
        const auto e = w2_exact_1d(a, b);
        est.push_back(e.value);
        se += e.std_error / reps;
    }
    double m = 0.0;
    for (double v : est) m += v / reps;
    double var = 0.0;
    for (double v : est) var += (v - m) * (v - m) / (reps - 1);
    EXPECT_GT(se, 0.6 * std::sqrt(var));
    EXPECT_LT(se, 1.6 * std::sqrt(var));
}

TEST(SamplesCsv, RoundTripIsExact) {
    const auto a = normals(257, 0.0, 51);
    std::stringstream ss;
    write_samples_csv(ss, a);
    EXPECT_EQ(ss.str().substr(0, 2), "x\n");
    const auto back = read_samples_csv(ss);
    ASSERT_EQ(back.size(), a.size());
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(back[k], a[k]);
}

TEST(SamplesCsv, FirstColumnAndHeaderHandling) {
    std::stringstream ss("value,weight\n1.5,2\n\n-3,4\n");
    EXPECT_EQ(read_samples_csv(ss), (std::vector<double>{1.5, -3.0}));
    std::stringstream bad("1\nabc\n");
    EXPECT_THROW(read_samples_csv(bad), InvalidArgument);
}

TEST(SamplesCsv, MatrixParsing) {
    std::stringstream ss("# generator\n-1, 1\n2,-2\n");
    const auto rows = parse_csv_matrix(ss);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[1][0], 2.0);
    std::stringstream bad("-1,x\n");
    EXPECT_THROW(parse_csv_matrix(bad), InvalidArgument);
}
