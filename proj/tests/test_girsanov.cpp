#include "rsstab/error.hpp"
#include "rsstab/girsanov.hpp"
#include "rsstab/models.hpp"
#include "rsstab/rng.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace rsstab {
namespace {

RateMatrix two_state(double a, double b) {
    return RateMatrix::validate(std::vector<std::vector<double>>{{-a, a}, {b, -b}});
}

double brute_series(double x, std::size_t k_max) {
    long double s = 0.0L;
    for (std::size_t k = 1; k <= k_max; ++k) {
        const long double y = static_cast<long double>(x) - static_cast<long double>(k);
        s += std::log1p(1.0L / (y * y));
    }
    return static_cast<double>(s);
}

TEST(Reference, OuReferenceChecksOut) {
    const auto m = ou_reference();
    const auto r = check_reference(m, 500, 1);
    EXPECT_TRUE(r.ok);
    EXPECT_NEAR(r.normalization, 1.0, 1e-9);
    EXPECT_LE(r.worst_lipschitz_ratio, 1.0 + 1e-12);
    const double x[] = {1.7};
    double z[1];
    m.z0(x, z);
    EXPECT_DOUBLE_EQ(z[0], -1.7);
}

TEST(Reference, UnderstatedLipschitzConstantFails) {
    auto m = ou_reference();
    m.k0 = 0.5;
    EXPECT_FALSE(check_reference(m, 100, 1).ok);
}

TEST(Reference, UnnormalizedPotentialFails) {
    auto m = ou_reference();
    m.potential = [](std::span<const double> x) { return 0.5 * x[0] * x[0]; };
    const auto r = check_reference(m, 100, 1);
    EXPECT_FALSE(r.ok);
    EXPECT_NEAR(r.normalization, std::sqrt(2.0 * M_PI), 1e-8);
}

TEST(Reference, MultivariateZ0UsesDiffusionMatrix) {
    ReferenceModel m = ou_reference(2);
    m.sigma = [](std::span<const double>, std::span<double> s) {
        s[0] = 1.0; s[1] = 0.5;
        s[2] = 0.0; s[3] = 2.0;
    };
    const double x[] = {1.0, -1.0};
    double z[2];
    m.z0(x, z);
    // a = σσᵀ = [[1.25, 1], [1, 4]], Z0 = -a x.
    EXPECT_NEAR(z[0], -0.25, 1e-15);
    EXPECT_NEAR(z[1], 3.0, 1e-15);
}

TEST(Reference, OuVarianceMatchesDiscreteRecursion) {
    // Euler for dY = -Y dt + dW from 0: Var Y_n = (1 - φ^{2n}) / (2 - dt), φ = 1 - dt.
    const auto m = ou_reference();
    const double x0[] = {0.0};
    const double dt = 0.01, T = 5.0;
    std::vector<double> sq;
    for (std::uint64_t p = 0; p < 20000; ++p) {
        const auto path = simulate_reference(m, x0, T, dt, 17, p);
        const double y = path.y.back();
        sq.push_back(y * y);
    }
    const auto s = testing::moments(sq);
    const double exact = (1.0 - std::pow(1.0 - dt, 2.0 * 500)) / (2.0 - dt);
    EXPECT_NEAR(s.mean, exact, 3.0 * s.se);
    EXPECT_NEAR(exact, 0.5, 0.01);
}

TEST(Weights, ReferenceDriftGivesUnitWeight) {
    const auto m = ou_reference();
    const auto model = lipschitz_drift({0.0, 0.0}, 0.0);
    const auto q = two_state(1.0, 2.0);
    GirsanovOptions opt;
    opt.dt = 0.01;
    opt.n_paths = 50;
    const double x0[] = {0.4};
    const auto set = weighted_samples(m, model, q, x0, 1.0, opt);
    for (double w : set.weight) EXPECT_EQ(w, 1.0);
    for (double v : set.quadratic_variation) EXPECT_EQ(v, 0.0);
}

TEST(Weights, SinglePathMatchesBatch) {
    const auto m = ou_reference();
    const auto model = lipschitz_drift({0.8, -0.4}, 0.5);
    const auto q = two_state(1.0, 2.0);
    GirsanovOptions opt;
    opt.dt = 0.01;
    opt.n_paths = 8;
    opt.seed = 5;
    const double x0[] = {0.3};
    const auto set = weighted_samples(m, model, q, x0, 1.0, opt);
    const ChainCoupler coupler(q, q);
    for (std::uint64_t p = 0; p < opt.n_paths; ++p) {
        const auto y = simulate_reference(m, x0, 1.0, opt.dt, opt.seed, p);
        const auto chains = coupler.simulate(0, 1.0, derive_key(opt.seed, stream::kChainClock), p);
        const auto w = rn_weight(m, model, chains, 0, y);
        EXPECT_NEAR(w.weight, set.weight[p], 1e-12 * set.weight[p]);
        EXPECT_GT(w.weight, 0.0);
        EXPECT_GE(w.quadratic_variation, 0.0);
        EXPECT_EQ(w.y_terminal[0], set.y_terminal[p]);
    }
}

TEST(Weights, SingularSigmaIsReported) {
    auto m = ou_reference();
    m.sigma = [](std::span<const double>, std::span<double> s) { s[0] = 0.0; };
    const auto model = lipschitz_drift({0.5}, 0.0);
    const auto q = RateMatrix::zero(1);
    GirsanovOptions opt;
    opt.dt = 0.1;
    opt.n_paths = 2;
    const double x0[] = {0.0};
    EXPECT_THROW(weighted_samples(m, model, q, x0, 1.0, opt), SingularSigma);
}

struct WeightedVsDirect : ::testing::Test {
    ReferenceModel m = ou_reference();
    SwitchingCoefficients model = lipschitz_drift({0.8, -0.4}, 0.5);
    RateMatrix q = two_state(1.0, 2.0);
    GirsanovOptions opt;
    WeightedSet set;
    std::vector<double> direct;
    void SetUp() override {
        opt.dt = 0.01;
        opt.n_paths = 20000;
        opt.seed = 99;
        const double x0[] = {0.3};
        set = weighted_samples(m, model, q, x0, 1.0, opt);
        direct = direct_samples(m, model, q, x0, 1.0, opt);
    }
};

TEST_F(WeightedVsDirect, WeightsHaveUnitMean) {
    const auto s = testing::moments(set.weight);
    EXPECT_NEAR(s.mean, 1.0, 3.0 * s.se);
}

TEST_F(WeightedVsDirect, ExpectationsAgree) {
    const std::vector<std::function<double(double)>> fs = {
        [](double x) { return std::tanh(x); },
        [](double x) { return 0.5 * std::sin(x); },
        [](double x) { return std::clamp(x, 0.0, 1.0) / 2.0; },
        [](double x) { return std::exp(-x * x); },
    };
    for (std::size_t k = 0; k < fs.size(); ++k) {
        std::vector<double> wf, df;
        for (std::size_t p = 0; p < opt.n_paths; ++p) {
            wf.push_back(set.weight[p] * fs[k](set.y_terminal[p]));
            df.push_back(fs[k](direct[p]));
        }
        const auto a = testing::moments(wf), b = testing::moments(df);
        EXPECT_NEAR(a.mean, b.mean, 3.0 * std::hypot(a.se, b.se)) << "f" << k;
    }
}

TEST(WblUpper, ZeroForIdenticalGenerators) {
    const auto m = ou_reference();
    const auto model = lipschitz_drift({0.8, -0.4}, 0.5);
    const auto q = two_state(1.0, 2.0);
    GirsanovOptions opt;
    opt.dt = 0.01;
    opt.n_paths = 200;
    const double x0[] = {0.0};
    const auto e = wbl_upper_estimate(m, model, q, q, x0, 1.0, opt);
    EXPECT_EQ(e.value, 0.0);
    EXPECT_EQ(e.std_error, 0.0);
}

TEST(WblUpper, ZeroWhenDriftIgnoresRegime) {
    const auto m = ou_reference();
    const auto model = lipschitz_drift({0.3, 0.3}, 0.5);
    const auto q = two_state(1.0, 2.0);
    GirsanovOptions opt;
    opt.dt = 0.01;
    opt.n_paths = 200;
    const double x0[] = {0.0};
    const auto e = wbl_upper_estimate(m, model, q, testing::bump(q, 0, 1, 0.5), x0, 1.0, opt);
    EXPECT_EQ(e.value, 0.0);
}

TEST(WblUpper, SweepSharesClockAndPaths) {
    const auto m = ou_reference();
    const auto model = lipschitz_drift({0.8, -0.4}, 0.0);
    const auto q = two_state(1.0, 2.0);
    const std::vector<RateMatrix> qs = {testing::bump(q, 0, 1, 0.2), testing::bump(q, 0, 1, 0.1)};
    GirsanovOptions opt;
    opt.dt = 0.01;
    opt.n_paths = 3000;
    opt.seed = 8;
    const double x0[] = {0.0};
    const auto sweep = wbl_upper_sweep(m, model, q, qs, x0, 1.0, opt);
    ASSERT_EQ(sweep.estimates.size(), 2u);
    EXPECT_DOUBLE_EQ(sweep.clock_rate, required_clock_rate(q, qs[0]));
    EXPECT_NEAR(sweep.estimates[0].delta, 0.4, 1e-12);
    EXPECT_GT(sweep.estimates[0].value, sweep.estimates[1].value);
    ASSERT_EQ(sweep.paired_diff_se.size(), 1u);
    // Common random numbers: the paired difference is tighter than either estimate.
    EXPECT_LT(sweep.paired_diff_se[0], sweep.estimates[0].std_error);
}

TEST(WblUpper, TooSlowClockIsRejected) {
    const auto m = ou_reference();
    const auto model = lipschitz_drift({0.8, -0.4}, 0.0);
    const auto q = two_state(1.0, 2.0);
    GirsanovOptions opt;
    opt.clock_rate = 1.0;
    opt.n_paths = 1;
    const double x0[] = {0.0};
    EXPECT_THROW(wbl_upper_estimate(m, model, q, q, x0, 1.0, opt), ClockRateTooSmall);
}

TEST(Novikov, ReferenceDriftGivesOne) {
    const auto r = novikov_check(ou_reference(), lipschitz_drift({0.0, 0.0}, 0.0), 2.5, 1.0);
    ASSERT_EQ(r.values.size(), 2u);
    for (double v : r.values) EXPECT_NEAR(v, 1.0, 1e-8);
    EXPECT_TRUE(r.passed());
    EXPECT_DOUBLE_EQ(r.required_eta, 2.0);
}

TEST(Novikov, ConstantShiftClosedForm) {
    // u = β_i, so μ0(e^{η u²}) = e^{η β_i²}.
    const std::vector<double> beta{0.3, -0.7};
    const double eta = 2.5;
    const auto r = novikov_check(ou_reference(), lipschitz_drift(beta, 0.0), eta, 1.0);
    for (std::size_t i = 0; i < 2; ++i)
        EXPECT_NEAR(r.values[i], std::exp(eta * beta[i] * beta[i]), 1e-7 * r.values[i]);
}

TEST(Novikov, EtaBelowThresholdFails) {
    const auto r = novikov_check(ou_reference(), lipschitz_drift({0.1}, 0.0), 1.5, 1.0);
    EXPECT_FALSE(r.eta_ok);
    EXPECT_FALSE(r.passed());
}

TEST(Novikov, OverflowingIntegrandIsDivergent) {
    // b = 2x: u = 3x and e^{9ηx²} beats e^{-x²/2}.
    const SwitchingCoefficients model(
        "steep", 1, 1, [](auto x, State, auto out) { out[0] = 2.0 * x[0]; },
        [](auto, State, auto out) { out[0] = 1.0; }, {});
    const auto r = novikov_check(ou_reference(), model, 2.5, 1.0);
    EXPECT_TRUE(r.divergent[0]);
    EXPECT_FALSE(r.passed());
}

TEST(Novikov, UnsettledTailsThrow) {
    // η u² = x²/2 exactly, so the integrand is flat and the truncations grow forever.
    const double c = std::sqrt(0.5 / 2.5);
    const SwitchingCoefficients model(
        "flat", 1, 1, [c](auto x, State, auto out) { out[0] = (c - 1.0) * x[0]; },
        [](auto, State, auto out) { out[0] = 1.0; }, {});
    EXPECT_THROW(novikov_check(ou_reference(), model, 2.5, 1.0), IntegralDiverged);
}

TEST(Novikov, SingularDriftFiniteForSmallBeta) {
    const auto r = novikov_check(ou_reference(), singular_drift({0.2, 0.4}), 2.5, 1.0);
    EXPECT_TRUE(r.passed());
    for (double v : r.values) {
        EXPECT_TRUE(std::isfinite(v));
        EXPECT_GT(v, 1.0);
    }
    EXPECT_GT(r.values[1], r.values[0]);
}

TEST(Novikov, SingularDriftDivergesForLargeBeta) {
    // Near a pole e^{η β² S} ~ |x - k|^{-2ηβ²}, not integrable once 2ηβ² >= 1.
    const auto r = novikov_check(ou_reference(), singular_drift({0.2, 1.0}), 2.5, 1.0);
    EXPECT_FALSE(r.divergent[0]);
    EXPECT_TRUE(r.divergent[1]);
    EXPECT_TRUE(std::isinf(r.values[1]));
    EXPECT_FALSE(r.passed());
}

TEST(Novikov, OnlyOneDimensional) {
    const SwitchingCoefficients model(
        "flat2", 2, 1, [](auto, State, auto out) { out[0] = out[1] = 0.0; },
        [](auto, State, auto out) { out[0] = out[3] = 1.0; out[1] = out[2] = 0.0; }, {});
    EXPECT_THROW(novikov_check(ou_reference(2), model, 5.0, 1.0), InvalidArgument);
}

TEST(Series, MatchesBruteForce) {
    const SingularSeries s(10000);
    for (double x : {-1e5, -10.0, -0.3, 0.5, 3.3, 17.9, 50.5, 5000.25, 9990.2, 9999.9, 10020.0, 3e4})
        EXPECT_NEAR(s(x), brute_series(x, 10000), 1e-11 * brute_series(x, 10000)) << "x=" << x;
}

TEST(Series, SmallTruncation) {
    const SingularSeries s(40);
    for (double x : {-30.0, 0.2, 20.5, 39.7, 70.0})
        EXPECT_NEAR(s(x), brute_series(x, 40), 1e-11 * brute_series(x, 40)) << "x=" << x;
}

TEST(Series, FarLeftIsNearlyInverseSquares) {
    // log1p(u) ∈ [u - u²/2, u].
    const SingularSeries s(10000);
    double upper = 0.0, lower = 0.0;
    for (int k = 1; k <= 10000; ++k) {
        const double u = 1.0 / ((k + 10.0) * (k + 10.0));
        upper += u;
        lower += u - 0.5 * u * u;
    }
    EXPECT_LE(s(-10.0), upper);
    EXPECT_GE(s(-10.0), lower);
}

TEST(Series, PoleIsCappedAndCounted) {
    const SingularSeries s(100);
    EXPECT_EQ(s.clamp_events(), 0u);
    const double at = s(3.0);
    EXPECT_EQ(s.clamp_events(), 1u);
    double rest = 0.0;
    for (int k = 1; k <= 100; ++k)
        if (k != 3) rest += std::log1p(1.0 / ((3.0 - k) * (3.0 - k)));
    EXPECT_NEAR(at, SingularSeries::kTermCap + rest, 1e-12 * at);
    (void)s(3.0 + 1e-9);
    EXPECT_EQ(s.clamp_events(), 2u);
    EXPECT_TRUE(std::isfinite(s(3.0 + 1e-300)));
}

TEST(Series, TailBound) {
    const SingularSeries s(100);
    for (double x : {-5.0, 10.0, 50.0}) {
        double tail = 0.0;
        for (int k = 101; k <= 1000000; ++k) tail += std::log1p(1.0 / ((x - k) * (x - k)));
        EXPECT_LE(tail, s.tail_bound(x));
    }
    EXPECT_TRUE(std::isinf(s.tail_bound(150.0)));
}

TEST(SingularDrift, ShapeAndMultiplicativeDependence) {
    const auto c = singular_drift({0.0, 0.3, 0.9}, 1000);
    const SingularSeries s(1000);
    for (double x : {-10.0, 0.5, 2.25}) {
        const double xs[] = {x};
        double b[3];
        c.drift_all(xs, b);
        EXPECT_DOUBLE_EQ(b[0], -x);
        EXPECT_NEAR(b[1] - b[0], 0.3 * std::sqrt(s(x)), 1e-12);
        EXPECT_NEAR((b[2] - b[0]) / (b[1] - b[0]), 3.0, 1e-12);
        double one = 0.0;
        c.drift(xs, 2, std::span<double>(&one, 1));
        EXPECT_EQ(one, b[2]);
    }
    EXPECT_EQ(singular_drift({0.5}).metadata().singular_points.front(), 1.0);
    EXPECT_THROW(singular_drift({0.5}, 0), InvalidArgument);
}

TEST(DecayExperiment, TableAndFit) {
    const auto q = two_state(1.0, 2.0);
    std::vector<RateMatrix> qs;
    for (double d : {0.05, 0.4, 0.1, 0.2}) qs.push_back(testing::bump(q, 0, 1, d / 2.0));
    qs.push_back(q);
    GirsanovOptions opt;
    opt.dt = 0.01;
    opt.n_paths = 2000;
    opt.seed = 3;
    const double x0[] = {0.0};
    const auto ex = theorem3_decay_experiment(ou_reference(), singular_drift({0.2, 0.4}), q, qs, x0, 1.0,
                                              2.5, opt);
    ASSERT_EQ(ex.rows.size(), 5u);
    EXPECT_NEAR(ex.rows[0].delta, 0.4, 1e-12);
    EXPECT_EQ(ex.rows[4].delta, 0.0);
    EXPECT_EQ(ex.rows[4].estimate, 0.0);
    EXPECT_EQ(ex.paired_diff_se.size(), 4u);
    EXPECT_EQ(ex.fit.points, 4u);
    EXPECT_GT(ex.fit.exponent, 0.0);
    for (const auto& r : ex.rows)
        if (r.delta > 0.0)
            EXPECT_LE(r.estimate, ex.envelope_constant * std::pow(r.delta, ex.fit.exponent) * (1 + 1e-12));
}

TEST(DecayExperiment, RefusesWithoutIntegrability) {
    const auto q = two_state(1.0, 2.0);
    const std::vector<RateMatrix> qs{testing::bump(q, 0, 1, 0.1)};
    GirsanovOptions opt;
    opt.n_paths = 10;
    const double x0[] = {0.0};
    EXPECT_THROW(theorem3_decay_experiment(ou_reference(), singular_drift({0.2, 0.4}), q, qs, x0, 1.0, 1.5,
                                           opt),
                 NovikovFailed);
    EXPECT_THROW(theorem3_decay_experiment(ou_reference(), singular_drift({0.2, 1.0}), q, qs, x0, 1.0, 2.5,
                                           opt),
                 NovikovFailed);
}

}  // namespace
}  // namespace rsstab
