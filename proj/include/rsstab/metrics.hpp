#pragma once

// Empirical distances between two sample clouds:
//   coupled upper   E|X - X̃|² from one coupled run, an upper estimate of W2²
//   exact 1-D       W2 between the two empirical measures (quantile coupling)
//   dictionary      max over a fixed family of test functions with
//                   ‖φ‖_Lip + ‖φ‖_∞ <= 1, a lower estimate of W_bL

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace rsstab {

enum class DistanceKind { CoupledUpper, Exact1d, BlDictionaryLower };

const char* to_string(DistanceKind kind) noexcept;

struct DistanceEstimate {
    DistanceKind kind = DistanceKind::CoupledUpper;
    double value = 0.0;
    double std_error = 0.0;
    std::size_t n_samples = 0;
    bool squared = false;  // value is a squared distance
    std::string witness;   // dictionary entry attaining the maximum
};

// Mean of |x_k - x̃_k|² over paired points of dimension `dim` (path-major).
// The leave-one-out jackknife SE of a mean is s/√n, which is what is
// reported. Throws EmptySample, DimensionMismatch.
DistanceEstimate w2_coupled_upper(std::span<const double> x, std::span<const double> x_tilde,
                                  std::size_t dim = 1);

// Exact W2 between the empirical measures of a and b; sample counts may
// differ. SE from a 20-group delete-a-group jackknife; the group of a point
// is a hash of its value, so the SE does not depend on sample order.
// Throws EmptySample.
DistanceEstimate w2_exact_1d(std::span<const double> a, std::span<const double> b);

enum class TestShape { Tanh, Ramp, Sine };

struct TestFunction {
    TestShape shape = TestShape::Tanh;
    double sign = 1.0;
    double center = 0.0;
    double scale = 1.0;      // slope s, width w or frequency ω
    double amplitude = 1.0;  // chosen so that lipschitz() + sup() = 1

    double operator()(double x) const noexcept;
    double lipschitz() const noexcept;
    double sup() const noexcept;
    std::string name() const;
};

TestFunction tanh_test(double slope, double center, double sign = 1.0);
TestFunction ramp_test(double width, double center, double sign = 1.0);
TestFunction sine_test(double omega, double center, double sign = 1.0);

// 16 shapes in both signs: tanh (s ∈ {0.5, 2}, c ∈ {-1, 0, 1}), ramps
// (w ∈ {1, 2}, c ∈ {-1, 0, 1}) and sines (ω ∈ {0.5, 1}, c ∈ {0, 1}).
const std::vector<TestFunction>& builtin_dictionary();

// max(0, max_φ mean φ(a) - mean φ(b)); the SE is that of the maximizing
// entry, sqrt(se_a² + se_b²). Throws EmptyDictionary, EmptySample.
DistanceEstimate wbl_dictionary_lower(std::span<const double> a, std::span<const double> b,
                                      std::span<const TestFunction> dictionary = builtin_dictionary());

}  // namespace rsstab
