#include "rsstab/metrics.hpp"

#include "rsstab/error.hpp"
#include "rsstab/parallel.hpp"
#include "rsstab/rng.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>

namespace rsstab {

const char* to_string(DistanceKind kind) noexcept {
    switch (kind) {
        case DistanceKind::CoupledUpper: return "coupled-upper";
        case DistanceKind::Exact1d: return "exact-1d";
        case DistanceKind::BlDictionaryLower: return "bl-dictionary-lower";
    }
    return "unknown";
}

DistanceEstimate w2_coupled_upper(std::span<const double> x, std::span<const double> x_tilde,
                                  std::size_t dim) {
    if (dim == 0) throw InvalidArgument("w2_coupled_upper: dim must be positive");
    if (x.size() != x_tilde.size()) throw DimensionMismatch(x.size(), x_tilde.size(), "w2_coupled_upper");
    if (x.size() % dim != 0) throw InvalidArgument("w2_coupled_upper: samples must hold whole points");
    if (x.empty()) throw EmptySample("w2_coupled_upper: no samples");
    const std::size_t n = x.size() / dim;
    std::vector<double> sq(n);
    for (std::size_t p = 0; p < n; ++p) {
        double s = 0.0;
        for (std::size_t k = 0; k < dim; ++k) {
            const double d = x[p * dim + k] - x_tilde[p * dim + k];
            s += d * d;
        }
        sq[p] = s;
    }
    const auto m = estimate_mean(sq);
    DistanceEstimate e;
    e.kind = DistanceKind::CoupledUpper;
    e.value = m.mean;
    e.std_error = m.std_error;
    e.n_samples = n;
    e.squared = true;
    return e;
}

namespace {

// ∫_0^1 (F_a^{-1}(u) - F_b^{-1}(u))² du for sorted samples.
double quantile_cost(const std::vector<double>& a, const std::vector<double>& b) {
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double u = 0.0;
    double total = 0.0;
    while (i < a.size() && j < b.size()) {
        const double ua = static_cast<double>(i + 1) / na;
        const double ub = static_cast<double>(j + 1) / nb;
        const double next = std::min(ua, ub);
        const double d = a[i] - b[j];
        total += (next - u) * d * d;
        u = next;
        if (ua <= next) ++i;
        if (ub <= next) ++j;
    }
    return total;
}

constexpr std::size_t kJackknifeGroups = 20;

// Pseudo-random group from the value's bits: order-free, unlike grouping by
// position, and unlike grouping by rank it removes a genuine subsample.
std::size_t group_of(double v) noexcept {
    return static_cast<std::size_t>(splitmix64(std::bit_cast<std::uint64_t>(v)) % kJackknifeGroups);
}

}  // namespace

DistanceEstimate w2_exact_1d(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw EmptySample("w2_exact_1d: no samples");
    std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    DistanceEstimate e;
    e.kind = DistanceKind::Exact1d;
    e.value = std::sqrt(quantile_cost(sa, sb));
    e.n_samples = std::min(sa.size(), sb.size());
    if (sa.size() >= kJackknifeGroups && sb.size() >= kJackknifeGroups) {
        std::vector<double> theta(kJackknifeGroups);
        std::vector<double> ra, rb;
        for (std::size_t g = 0; g < kJackknifeGroups; ++g) {
            ra.clear();
            rb.clear();
            for (double v : sa)
                if (group_of(v) != g) ra.push_back(v);
            for (double v : sb)
                if (group_of(v) != g) rb.push_back(v);
            theta[g] = std::sqrt(quantile_cost(ra, rb));
        }
        double mean = 0.0;
        for (double v : theta) mean += v;
        mean /= static_cast<double>(kJackknifeGroups);
        double ss = 0.0;
        for (double v : theta) ss += (v - mean) * (v - mean);
        const double g = static_cast<double>(kJackknifeGroups);
        e.std_error = std::sqrt((g - 1.0) / g * ss);
    }
    return e;
}

double TestFunction::operator()(double x) const noexcept {
    const double y = x - center;
    double v = 0.0;
    switch (shape) {
        case TestShape::Tanh: v = std::tanh(scale * y); break;
        case TestShape::Ramp: v = std::clamp(y / scale, 0.0, 1.0); break;
        case TestShape::Sine: v = std::sin(scale * y); break;
    }
    return sign * amplitude * v;
}

double TestFunction::lipschitz() const noexcept {
    return shape == TestShape::Ramp ? amplitude / scale : amplitude * scale;
}

double TestFunction::sup() const noexcept { return amplitude; }

std::string TestFunction::name() const {
    const char* base = shape == TestShape::Tanh ? "tanh" : shape == TestShape::Ramp ? "ramp" : "sine";
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s%s(scale=%g,center=%g)", sign < 0 ? "-" : "", base, scale, center);
    return buf;
}

namespace {

TestFunction make(TestShape shape, double scale, double center, double sign) {
    if (!(scale > 0.0)) throw InvalidArgument("test function scale must be positive");
    TestFunction f;
    f.shape = shape;
    f.scale = scale;
    f.center = center;
    f.sign = sign < 0.0 ? -1.0 : 1.0;
    f.amplitude = shape == TestShape::Ramp ? scale / (1.0 + scale) : 1.0 / (1.0 + scale);
    return f;
}

}  // namespace

TestFunction tanh_test(double slope, double center, double sign) {
    return make(TestShape::Tanh, slope, center, sign);
}
TestFunction ramp_test(double width, double center, double sign) {
    return make(TestShape::Ramp, width, center, sign);
}
TestFunction sine_test(double omega, double center, double sign) {
    return make(TestShape::Sine, omega, center, sign);
}

const std::vector<TestFunction>& builtin_dictionary() {
    static const std::vector<TestFunction> dict = [] {
        std::vector<TestFunction> base;
        for (double s : {0.5, 2.0})
            for (double c : {-1.0, 0.0, 1.0}) base.push_back(tanh_test(s, c));
        for (double w : {1.0, 2.0})
            for (double c : {-1.0, 0.0, 1.0}) base.push_back(ramp_test(w, c));
        for (double om : {0.5, 1.0})
            for (double c : {0.0, 1.0}) base.push_back(sine_test(om, c));
        std::vector<TestFunction> out;
        for (double sign : {1.0, -1.0})
            for (auto f : base) {
                f.sign = sign;
                out.push_back(f);
            }
        return out;
    }();
    return dict;
}

DistanceEstimate wbl_dictionary_lower(std::span<const double> a, std::span<const double> b,
                                      std::span<const TestFunction> dictionary) {
    if (dictionary.empty()) throw EmptyDictionary("wbl_dictionary_lower: empty dictionary");
    if (a.empty() || b.empty()) throw EmptySample("wbl_dictionary_lower: no samples");
    DistanceEstimate e;
    e.kind = DistanceKind::BlDictionaryLower;
    e.n_samples = std::min(a.size(), b.size());
    double best = -INFINITY;
    std::vector<double> fa(a.size()), fb(b.size());
    for (const auto& f : dictionary) {
        for (std::size_t k = 0; k < a.size(); ++k) fa[k] = f(a[k]);
        for (std::size_t k = 0; k < b.size(); ++k) fb[k] = f(b[k]);
        const auto ma = estimate_mean(fa);
        const auto mb = estimate_mean(fb);
        const double diff = ma.mean - mb.mean;
        if (diff > best) {
            best = diff;
            e.std_error = std::hypot(ma.std_error, mb.std_error);
            e.witness = f.name();
        }
    }
    e.value = std::max(0.0, best);
    return e;
}

}  // namespace rsstab
