#include "rsstab/models.hpp"

#include "rsstab/error.hpp"
#include "rsstab/girsanov.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace rsstab {

namespace {

void check_sizes(std::size_t n, std::initializer_list<const std::vector<double>*> params,
                 const char* model) {
    for (const auto* p : params)
        if (p->size() != n)
            throw DimensionMismatch(n, p->size(), std::string(model) + ": per-state parameter");
}

void check_finite(std::initializer_list<const std::vector<double>*> params, const char* model) {
    for (const auto* p : params)
        for (double v : *p)
            if (!std::isfinite(v)) throw InvalidArgument(std::string(model) + ": non-finite parameter");
}


}  // namespace

SwitchingCoefficients switching_ou(std::vector<double> a, std::vector<double> s, std::vector<double> v) {
    const std::size_t n = a.size();
    if (n == 0) throw InvalidArgument("switching-ou: no states");
    if (v.empty()) v.assign(n, 0.0);
    check_sizes(n, {&s, &v}, "switching-ou");
    check_finite({&a, &s, &v}, "switching-ou");
    CoefficientMetadata meta;
    double k = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        meta.kappa.push_back(-2.0 * a[i] + 2.0 * v[i] * v[i]);
        // (s + v x)² <= (s² + v²)(1 + x²)
        k = std::max({k, a[i] * a[i], s[i] * s[i] + v[i] * v[i]});
    }
    meta.K = k;
    auto drift = [a](std::span<const double> x, State i, std::span<double> out) {
        out[0] = -a[static_cast<std::size_t>(i)] * x[0];
    };
    auto diffusion = [s, v](std::span<const double> x, State i, std::span<double> out) {
        const auto k = static_cast<std::size_t>(i);
        out[0] = s[k] + v[k] * x[0];
    };
    return SwitchingCoefficients("switching-ou", 1, n, drift, diffusion, std::move(meta));
}

SwitchingCoefficients bounded_tanh(std::vector<double> mu, std::vector<double> alpha,
                                   std::vector<double> s) {
    const std::size_t n = mu.size();
    if (n == 0) throw InvalidArgument("bounded-tanh: no states");
    check_sizes(n, {&alpha, &s}, "bounded-tanh");
    check_finite({&mu, &alpha, &s}, "bounded-tanh");
    CoefficientMetadata meta;
    double k = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        // tanh is 1-Lipschitz and increasing.
        meta.kappa.push_back(2.0 * std::max(alpha[i], 0.0));
        const double b = std::abs(mu[i]) + std::abs(alpha[i]);
        k = std::max({k, b * b, s[i] * s[i]});
    }
    meta.K = k;
    meta.bounded = true;
    auto drift = [mu, alpha](std::span<const double> x, State i, std::span<double> out) {
        const auto k = static_cast<std::size_t>(i);
        out[0] = mu[k] + alpha[k] * std::tanh(x[0]);
    };
    auto diffusion = [s](std::span<const double>, State i, std::span<double> out) {
        out[0] = s[static_cast<std::size_t>(i)];
    };
    SwitchingCoefficients c("bounded-tanh", 1, n, drift, diffusion, std::move(meta));
    c.set_drift_all([mu, alpha](std::span<const double> x, std::span<double> out) {
        const double th = std::tanh(x[0]);
        for (std::size_t i = 0; i < mu.size(); ++i) out[i] = mu[i] + alpha[i] * th;
    });
    return c;
}

SwitchingCoefficients lipschitz_drift(std::vector<double> beta, double gamma) {
    const std::size_t n = beta.size();
    if (n == 0) throw InvalidArgument("lipschitz: no states");
    check_finite({&beta}, "lipschitz");
    if (!std::isfinite(gamma)) throw InvalidArgument("lipschitz: non-finite gamma");
    CoefficientMetadata meta;
    double k = 2.0;
    for (double b : beta) {
        meta.kappa.push_back(-2.0 + 2.0 * std::abs(gamma));
        // |b| <= |x| + |beta| + |gamma|, so |b|² <= 2x² + 2(|beta| + |gamma|)².
        const double c = std::abs(b) + std::abs(gamma);
        k = std::max(k, 2.0 * c * c);
    }
    meta.K = k;
    auto drift = [beta, gamma](std::span<const double> x, State i, std::span<double> out) {
        out[0] = -x[0] + beta[static_cast<std::size_t>(i)] + gamma * std::sin(x[0]);
    };
    auto diffusion = [](std::span<const double>, State, std::span<double> out) { out[0] = 1.0; };
    SwitchingCoefficients c("lipschitz", 1, n, drift, diffusion, std::move(meta));
    c.set_drift_all([beta, gamma](std::span<const double> x, std::span<double> out) {
        const double base = -x[0] + gamma * std::sin(x[0]);
        for (std::size_t i = 0; i < beta.size(); ++i) out[i] = base + beta[i];
    });
    return c;
}

namespace {

struct Entry {
    std::vector<std::string> keys;
    std::set<std::string> per_state;
    ModelParams defaults;
};

const std::map<std::string, Entry>& registry() {
    static const std::map<std::string, Entry> r = {
        {"switching-ou", {{"a", "s", "v"}, {"a", "s", "v"}, {{"v", {0.0}}}}},
        {"bounded-tanh", {{"mu", "alpha", "s"}, {"mu", "alpha", "s"}, {}}},
        {"lipschitz", {{"beta", "gamma"}, {"beta"}, {{"gamma", {0.5}}}}},
        {"singular-log", {{"beta", "k_max"}, {"beta"}, {{"k_max", {10000.0}}}}},
    };
    return r;
}

const Entry& entry(const std::string& name) {
    const auto it = registry().find(name);
    if (it != registry().end()) return it->second;
    std::string msg = "unknown model '" + name + "'";
    const auto s = suggest_model_names(name);
    if (!s.empty()) {
        msg += "; did you mean";
        for (std::size_t k = 0; k < s.size(); ++k) msg += (k ? ", " : " ") + s[k];
        msg += "?";
    }
    throw InvalidArgument(msg);
}

}  // namespace

const std::vector<std::string>& model_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (const auto& [k, e] : registry()) v.push_back(k);
        return v;
    }();
    return names;
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] != b[j - 1])});
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

std::vector<std::string> rank_by_edit_distance(const std::string& name,
                                               const std::vector<std::string>& candidates) {
    std::vector<std::pair<std::size_t, std::string>> ranked;
    for (const auto& n : candidates) ranked.emplace_back(edit_distance(name, n), n);
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& x, const auto& y) { return x.first < y.first; });
    std::vector<std::string> out;
    for (const auto& [d, n] : ranked) out.push_back(n);
    return out;
}

std::vector<std::string> suggest_model_names(const std::string& name) {
    return rank_by_edit_distance(name, model_names());
}

const ModelParams& model_defaults(const std::string& name) { return entry(name).defaults; }

const std::vector<std::string>& model_keys(const std::string& name) { return entry(name).keys; }

SwitchingCoefficients make_model(const std::string& name, std::size_t n_states, const ModelParams& params) {
    const Entry& e = entry(name);
    if (n_states == 0) throw InvalidArgument(name + ": n_states must be positive");
    for (const auto& [k, v] : params)
        if (std::find(e.keys.begin(), e.keys.end(), k) == e.keys.end())
            throw InvalidArgument(name + ": unknown parameter '" + k + "'");
    auto get = [&](const std::string& key) {
        auto it = params.find(key);
        std::vector<double> v;
        if (it != params.end()) v = it->second;
        else if (auto d = e.defaults.find(key); d != e.defaults.end()) v = d->second;
        else throw InvalidArgument(name + ": missing parameter '" + key + "'");
        if (e.per_state.count(key)) {
            if (v.size() == 1) v.assign(n_states, v[0]);
            if (v.size() != n_states)
                throw InvalidArgument(name + ": parameter '" + key + "' needs " + std::to_string(n_states) +
                                      " values, got " + std::to_string(v.size()));
        } else if (v.size() != 1) {
            throw InvalidArgument(name + ": parameter '" + key + "' is a scalar");
        }
        return v;
    };
    if (name == "switching-ou") return switching_ou(get("a"), get("s"), get("v"));
    if (name == "bounded-tanh") return bounded_tanh(get("mu"), get("alpha"), get("s"));
    if (name == "lipschitz") return lipschitz_drift(get("beta"), get("gamma")[0]);
    const double k_max = get("k_max")[0];
    if (!(k_max >= 1.0) || k_max != std::floor(k_max))
        throw InvalidArgument(name + ": k_max must be a positive integer");
    return singular_drift(get("beta"), static_cast<std::size_t>(k_max));
}

}  // namespace rsstab
