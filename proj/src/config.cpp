#include "rsstab/config.hpp"

#include "rsstab/bounds.hpp"
#include "rsstab/error.hpp"
#include "rsstab/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace rsstab {

const char* to_string(ExperimentKind kind) noexcept {
    switch (kind) {
        case ExperimentKind::Theorem1Sweep: return "theorem1-sweep";
        case ExperimentKind::Theorem2Reduction: return "theorem2-reduction";
        case ExperimentKind::Lemma2Check: return "lemma2-check";
        case ExperimentKind::GirsanovSweep: return "girsanov-sweep";
        case ExperimentKind::FeynmanKacCheck: return "feynman-kac-check";
    }
    return "unknown";
}

const std::vector<std::string>& experiment_kind_names() {
    static const std::vector<std::string> names{"theorem1-sweep", "theorem2-reduction", "lemma2-check",
                                                "girsanov-sweep", "feynman-kac-check"};
    return names;
}

SwitchingCoefficients ExperimentConfig::model() const {
    return make_model(model_name, q.n_states(), model_params);
}

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& key, const std::string& message) { throw ConfigInvalid(key, message); }

std::string suggestion(const std::string& name, const std::vector<std::string>& candidates) {
    const auto ranked = rank_by_edit_distance(name, candidates);
    std::string s;
    for (std::size_t k = 0; k < std::min<std::size_t>(3, ranked.size()); ++k) s += (k ? ", " : "") + ranked[k];
    return s;
}

void reject_unknown(const json& obj, const std::string& prefix, const std::vector<std::string>& allowed) {
    for (const auto& [k, v] : obj.items())
        if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
            fail(prefix + k, "unknown key; did you mean " + suggestion(k, allowed) + "?");
}

double number(const json& v, const std::string& key) {
    if (!v.is_number()) fail(key, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(key, "must be finite");
    return d;
}

std::vector<double> numbers(const json& v, const std::string& key) {
    if (v.is_number()) return {number(v, key)};
    if (!v.is_array()) fail(key, "expected a number or an array of numbers");
    std::vector<double> out;
    for (std::size_t k = 0; k < v.size(); ++k) out.push_back(number(v[k], key + "[" + std::to_string(k) + "]"));
    return out;
}

std::uint64_t count(const json& v, const std::string& key, std::uint64_t min) {
    if (!v.is_number_integer()) fail(key, "expected an integer");
    if (v.is_number_unsigned()) {
        const auto u = v.get<std::uint64_t>();
        if (u < min) fail(key, "must be at least " + std::to_string(min));
        return u;
    }
    const auto s = v.get<std::int64_t>();
    if (s < static_cast<std::int64_t>(min)) fail(key, "must be at least " + std::to_string(min));
    return static_cast<std::uint64_t>(s);
}

std::vector<std::vector<double>> rows_of(const Eigen::MatrixXd& m) {
    std::vector<std::vector<double>> r(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(i)].push_back(m(i, j));
    return r;
}

Eigen::MatrixXd dense(const json& v, const std::string& key) {
    if (!v.is_array() || v.empty()) fail(key, "expected a non-empty array of rows");
    const auto n = static_cast<Eigen::Index>(v.size());
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::string rk = key + "[" + std::to_string(i) + "]";
        const auto row = numbers(v[static_cast<std::size_t>(i)], rk);
        if (static_cast<Eigen::Index>(row.size()) != n) fail(rk, "matrix must be square");
        for (Eigen::Index j = 0; j < n; ++j) m(i, j) = row[static_cast<std::size_t>(j)];
    }
    return m;
}

class Reader {
public:
    Reader(const json& root, ojson& out, std::vector<std::string>& defaults, std::filesystem::path base)
        : root_(root), out_(out), defaults_(defaults), base_(std::move(base)) {}

    bool has(const std::string& key) const { return root_.contains(key); }

    // The value at `key`, or `fallback` recorded as a default.
    json get(const std::string& key, const json& fallback) {
        if (root_.contains(key)) return root_.at(key);
        defaults_.push_back(key);
        return fallback;
    }

    const json& require(const std::string& key) const {
        if (!root_.contains(key)) fail(key, "required key missing");
        return root_.at(key);
    }

    RateMatrix matrix(const std::string& key) {
        const json& v = require(key);
        try {
            RateMatrix q = RateMatrix::zero(1);
            if (v.is_object()) {
                reject_unknown(v, key + ".", {"file"});
                if (!v.contains("file") || !v["file"].is_string()) fail(key + ".file", "expected a file name");
                const std::filesystem::path file = v["file"].get<std::string>();
                q = read_rate_matrix(file.is_absolute() ? file : base_ / file);
            } else {
                q = RateMatrix::validate(dense(v, key));
            }
            out_[key] = rows_of(q.entries());
            return q;
        } catch (const ConfigInvalid&) {
            throw;
        } catch (const Error& e) {
            fail(key, e.what());
        }
    }

    ojson& out() { return out_; }
    std::vector<std::string>& defaults() { return defaults_; }

private:
    const json& root_;
    ojson& out_;
    std::vector<std::string>& defaults_;
    std::filesystem::path base_;
};

std::vector<std::string> allowed_keys(ExperimentKind kind) {
    std::vector<std::string> keys{"schema_version", "experiment", "description", "q", "seed", "n_paths", "output"};
    auto add = [&](std::initializer_list<const char*> more) { keys.insert(keys.end(), more.begin(), more.end()); };
    switch (kind) {
        case ExperimentKind::Theorem1Sweep:
            add({"q_tilde", "perturbation", "model", "x0", "i0", "T", "dt", "times", "p_grid", "eps_grid",
                 "bounded", "c2_grid_points"});
            break;
        case ExperimentKind::Theorem2Reduction:
            add({"model", "x0", "i0", "T", "dt", "times", "p_grid", "eps_grid", "bounded", "c2_grid_points",
                 "m", "q_hat", "b_scales"});
            break;
        case ExperimentKind::Lemma2Check: add({"q_tilde", "perturbation", "i0", "times"}); break;
        case ExperimentKind::GirsanovSweep:
            add({"perturbation", "model", "x0", "i0", "T", "dt", "eta", "sandwich_paths"});
            break;
        case ExperimentKind::FeynmanKacCheck: add({"model", "kappa", "p", "i0", "times", "c2_grid_points"}); break;
    }
    return keys;
}

ExperimentKind parse_kind(const json& v) {
    if (!v.is_string()) fail("experiment", "expected a string");
    const auto s = v.get<std::string>();
    const auto& names = experiment_kind_names();
    const auto it = std::find(names.begin(), names.end(), s);
    if (it == names.end())
        fail("experiment", "unknown experiment '" + s + "'; did you mean " + suggestion(s, names) + "?");
    return static_cast<ExperimentKind>(it - names.begin());
}

void parse_model(Reader& r, ExperimentConfig& c, bool required) {
    if (!r.has("model")) {
        if (required) fail("model", "required key missing");
        return;
    }
    const json& m = r.require("model");
    if (!m.is_object()) fail("model", "expected an object with name and params");
    reject_unknown(m, "model.", {"name", "params"});
    if (!m.contains("name") || !m["name"].is_string()) fail("model.name", "expected a model name");
    c.model_name = m["name"].get<std::string>();
    const auto& names = model_names();
    if (std::find(names.begin(), names.end(), c.model_name) == names.end())
        fail("model.name", "unknown model '" + c.model_name + "'; did you mean " +
                               suggestion(c.model_name, names) + "?");
    const json params = m.contains("params") ? m["params"] : json::object();
    if (!params.is_object()) fail("model.params", "expected an object");
    reject_unknown(params, "model.params.", model_keys(c.model_name));
    for (const auto& [k, v] : params.items()) c.model_params[k] = numbers(v, "model.params." + k);
    for (const auto& [k, v] : model_defaults(c.model_name))
        if (!c.model_params.count(k)) {
            c.model_params[k] = v;
            r.defaults().push_back("model.params." + k);
        }
    try {
        (void)c.model();
    } catch (const Error& e) {
        fail("model.params", e.what());
    }
    ojson out;
    out["name"] = c.model_name;
    out["params"] = ojson::object();
    for (const auto& k : model_keys(c.model_name))
        if (c.model_params.count(k)) out["params"][k] = c.model_params[k];
    r.out()["model"] = out;
}

std::vector<double> positive_list(Reader& r, const std::string& key, const json& fallback, bool allow_zero) {
    auto v = numbers(r.get(key, fallback), key);
    if (v.empty()) fail(key, "must not be empty");
    for (double x : v)
        if (allow_zero ? x < 0.0 : !(x > 0.0)) fail(key, allow_zero ? "values must be nonnegative" : "values must be positive");
    r.out()[key] = v;
    return v;
}

// Perturbed generators: q_tilde, or direction × scales.
void parse_perturbation(Reader& r, ExperimentConfig& c, bool allow_explicit) {
    const std::size_t n = c.q.n_states();
    if (allow_explicit && r.has("q_tilde")) {
        if (r.has("perturbation")) fail("q_tilde", "give either q_tilde or perturbation, not both");
        const RateMatrix qt = r.matrix("q_tilde");
        if (qt.n_states() != n) fail("q_tilde", "size differs from q");
        c.q_tildes = {qt};
        c.deltas = {l1_distance(c.q, qt)};
        return;
    }
    const json p = r.get("perturbation", json::object());
    if (!p.is_object()) fail("perturbation", "expected an object");
    reject_unknown(p, "perturbation.", {"direction", "scales"});
    Eigen::MatrixXd d;
    if (p.contains("direction")) {
        d = dense(p["direction"], "perturbation.direction");
        if (static_cast<std::size_t>(d.rows()) != n) fail("perturbation.direction", "size differs from q");
    } else {
        if (n < 2) fail("perturbation.direction", "default direction needs at least two states");
        d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        d(0, 1) = 1.0;
        d(0, 0) = -1.0;
        r.defaults().push_back("perturbation.direction");
    }
    std::vector<double> scales{0.05, 0.1, 0.2, 0.4};
    if (p.contains("scales"))
        scales = numbers(p["scales"], "perturbation.scales");
    else
        r.defaults().push_back("perturbation.scales");
    if (scales.empty()) fail("perturbation.scales", "must not be empty");
    c.q_tildes.clear();
    c.deltas.clear();
    for (double s : scales) {
        if (!(s >= 0.0)) fail("perturbation.scales", "values must be nonnegative");
        try {
            c.q_tildes.push_back(s == 0.0 ? c.q : perturb(c.q, d, s));
        } catch (const Error& e) {
            fail("perturbation.scales", "scale " + format_double(s) + ": " + e.what());
        }
        c.deltas.push_back(l1_distance(c.q, c.q_tildes.back()));
    }
    ojson out;
    out["direction"] = rows_of(d);
    out["scales"] = scales;
    r.out()["perturbation"] = out;
}

void parse_state(Reader& r, ExperimentConfig& c, State fallback, State lo) {
    const auto v = count(r.get("i0", fallback), "i0", 0);
    if (v >= c.q.n_states() || static_cast<State>(v) < lo)
        fail("i0", "initial state out of range [" + std::to_string(lo) + ", " + std::to_string(c.q.n_states() - 1) + "]");
    c.i0 = static_cast<State>(v);
    r.out()["i0"] = c.i0;
}

void parse_sde(Reader& r, ExperimentConfig& c, bool with_times) {
    c.horizon = number(r.get("T", 1.0), "T");
    if (!(c.horizon > 0.0)) fail("T", "must be positive");
    r.out()["T"] = c.horizon;
    c.dt = number(r.get("dt", 0.01), "dt");
    if (!(c.dt > 0.0)) fail("dt", "must be positive");
    if (c.dt > c.horizon) fail("dt", "must not exceed T");
    r.out()["dt"] = c.dt;
    c.x0 = numbers(r.get("x0", json::array({0.0})), "x0");
    if (c.x0.size() != 1) fail("x0", "registered models are one-dimensional");
    r.out()["x0"] = c.x0;
    if (with_times) {
        c.times = positive_list(r, "times", json::array({c.horizon}), false);
        for (double t : c.times)
            if (t > c.horizon * (1.0 + 1e-12)) fail("times", "observation time beyond T");
    }
}

void parse_bound_grid(Reader& r, ExperimentConfig& c, const SwitchingCoefficients& model) {
    c.p_grid = numbers(r.get("p_grid", json(kDefaultPGrid)), "p_grid");
    for (double p : c.p_grid)
        if (!(p > 1.0)) fail("p_grid", "values must exceed 1");
    if (c.p_grid.empty()) fail("p_grid", "must not be empty");
    r.out()["p_grid"] = c.p_grid;
    c.eps_grid = positive_list(r, "eps_grid", json(kDefaultEpsGrid), false);
    const json b = r.get("bounded", model.metadata().bounded);
    if (!b.is_boolean()) fail("bounded", "expected true or false");
    c.bounded = b.get<bool>();
    if (c.bounded && !model.metadata().bounded) fail("bounded", "model '" + c.model_name + "' is not bounded");
    r.out()["bounded"] = c.bounded;
    if (!model.has_h1() || !model.has_h2()) fail("model", "model lacks declared kappa or K");
    c.c2_grid_points = count(r.get("c2_grid_points", 2001), "c2_grid_points", 2);
    r.out()["c2_grid_points"] = c.c2_grid_points;
}

}  // namespace

ParsedConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) fail("$", "config must be a JSON object");
    ParsedConfig out;
    ExperimentConfig& c = out.config;
    ojson& res = out.resolved;
    Reader r(j, res, out.defaults_applied, base_dir);

    const json& version = r.require("schema_version");
    if (!version.is_number_integer() || version.get<std::int64_t>() != kSchemaVersion)
        fail("schema_version", "unsupported schema version " + version.dump() + " (expected " +
                                   std::to_string(kSchemaVersion) + ")");
    res["schema_version"] = kSchemaVersion;
    c.kind = parse_kind(r.require("experiment"));
    res["experiment"] = to_string(c.kind);
    reject_unknown(j, "", allowed_keys(c.kind));
    if (j.contains("description")) {
        if (!j["description"].is_string()) fail("description", "expected a string");
        res["description"] = j["description"];
    }

    c.q = r.matrix("q");
    const std::size_t n = c.q.n_states();
    c.seed = count(r.get("seed", 0), "seed", 0);
    res["seed"] = c.seed;
    c.n_paths = count(r.get("n_paths", 100000), "n_paths", 1);
    res["n_paths"] = c.n_paths;

    switch (c.kind) {
        case ExperimentKind::Theorem1Sweep: {
            if (n < 2) fail("q", "needs at least two states");
            parse_perturbation(r, c, true);
            parse_model(r, c, true);
            parse_state(r, c, 0, 0);
            parse_sde(r, c, true);
            parse_bound_grid(r, c, c.model());
            break;
        }
        case ExperimentKind::Theorem2Reduction: {
            if (n < 2) fail("q", "needs at least two states");
            c.m = static_cast<int>(count(r.get("m", 0), "m", 0));
            if (c.m >= static_cast<int>(n) - 1) fail("m", "split index must be below n_states - 1");
            res["m"] = c.m;
            const auto ne = static_cast<Eigen::Index>(n) - c.m - 1;
            if (r.has("q_hat")) {
                c.q_hat = r.matrix("q_hat");
                if (static_cast<Eigen::Index>(c.q_hat->n_states()) != ne)
                    fail("q_hat", "must have n_states - m - 1 = " + std::to_string(ne) + " states");
            } else {
                // Retained block with the exits to removed states dropped.
                Eigen::MatrixXd q1 = block_split(c.q, c.m).q1;
                for (Eigen::Index i = 0; i < ne; ++i) {
                    q1(i, i) = 0.0;
                    q1(i, i) = -q1.row(i).sum();
                }
                c.q_hat = RateMatrix::validate(q1);
                r.defaults().push_back("q_hat");
                res["q_hat"] = rows_of(q1);
            }
            c.b_scales = positive_list(r, "b_scales", json::array({1.0}), true);
            parse_model(r, c, true);
            parse_state(r, c, static_cast<State>(n) - 1, c.m + 1);
            parse_sde(r, c, true);
            parse_bound_grid(r, c, c.model());
            break;
        }
        case ExperimentKind::Lemma2Check: {
            if (n < 2) fail("q", "needs at least two states");
            parse_perturbation(r, c, true);
            parse_state(r, c, 0, 0);
            c.times = positive_list(r, "times", json::array({0.5, 1.0, 2.0}), false);
            break;
        }
        case ExperimentKind::GirsanovSweep: {
            if (n < 2) fail("q", "needs at least two states");
            parse_perturbation(r, c, false);
            if (c.q_tildes.size() < 2) fail("perturbation.scales", "a decay fit needs at least two scales");
            parse_model(r, c, true);
            parse_state(r, c, 0, 0);
            c.horizon = number(r.get("T", 1.0), "T");
            if (!(c.horizon > 0.0)) fail("T", "must be positive");
            res["T"] = c.horizon;
            c.dt = number(r.get("dt", 2e-3), "dt");
            if (!(c.dt > 0.0)) fail("dt", "must be positive");
            if (c.dt > c.horizon) fail("dt", "must not exceed T");
            res["dt"] = c.dt;
            c.x0 = numbers(r.get("x0", json::array({0.0})), "x0");
            if (c.x0.size() != 1) fail("x0", "registered models are one-dimensional");
            res["x0"] = c.x0;
            c.eta = number(r.get("eta", 2.5), "eta");
            if (!(c.eta > 0.0)) fail("eta", "must be positive");
            res["eta"] = c.eta;
            c.sandwich_paths = count(r.get("sandwich_paths", 10000), "sandwich_paths", 1);
            res["sandwich_paths"] = c.sandwich_paths;
            break;
        }
        case ExperimentKind::FeynmanKacCheck: {
            parse_model(r, c, false);
            if (r.has("kappa")) {
                const auto k = numbers(r.require("kappa"), "kappa");
                if (k.size() != n) fail("kappa", "needs one value per state");
                c.kappa = Eigen::Map<const Eigen::VectorXd>(k.data(), static_cast<Eigen::Index>(k.size()));
            } else {
                if (c.model_name.empty()) fail("kappa", "give kappa or a model that declares it");
                const auto model = c.model();
                if (!model.has_h1()) fail("model", "model '" + c.model_name + "' declares no kappa");
                c.kappa = model.kappa();
                r.defaults().push_back("kappa");
            }
            res["kappa"] = std::vector<double>(c.kappa.data(), c.kappa.data() + c.kappa.size());
            c.p = number(r.get("p", 2.0), "p");
            if (!(c.p > 0.0)) fail("p", "must be positive");
            res["p"] = c.p;
            parse_state(r, c, 0, 0);
            c.times = positive_list(r, "times", json::array({0.5, 1.0, 2.0}), false);
            c.c2_grid_points = count(r.get("c2_grid_points", 2001), "c2_grid_points", 2);
            res["c2_grid_points"] = c.c2_grid_points;
            break;
        }
    }

    const json o = r.get("output", json::object());
    if (!o.is_object()) fail("output", "expected an object");
    reject_unknown(o, "output.", {"results", "manifest"});
    auto file_name = [&](const char* key, std::string& dst) {
        if (o.contains(key)) {
            if (!o[key].is_string() || o[key].get<std::string>().empty())
                fail(std::string("output.") + key, "expected a file name");
            dst = o[key].get<std::string>();
        }
    };
    file_name("results", c.results_file);
    file_name("manifest", c.manifest_file);
    if (c.results_file == c.manifest_file) fail("output", "results and manifest must differ");
    res["output"] = {{"results", c.results_file}, {"manifest", c.manifest_file}};
    return out;
}

nlohmann::json read_config_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigInvalid(path.string(), "cannot open config file");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigInvalid(path.string(), std::string("not valid JSON: ") + e.what());
    }
    return j;
}

ParsedConfig load_config(const std::filesystem::path& path) {
    return parse_config(read_config_json(path), path.parent_path());
}

void set_config_value(nlohmann::json& j, const std::string& dotted_key, const std::string& value) {
    if (dotted_key.empty()) throw ConfigInvalid("$", "empty parameter name");
    json parsed;
    try {
        parsed = json::parse(value);
    } catch (const json::exception&) {
        parsed = value;
    }
    json* node = &j;
    std::size_t start = 0;
    for (;;) {
        const auto dot = dotted_key.find('.', start);
        const std::string part = dotted_key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigInvalid(dotted_key, "malformed parameter name");
        if (!node->is_object()) throw ConfigInvalid(dotted_key, "parent is not an object");
        if (dot == std::string::npos) {
            (*node)[part] = parsed;
            return;
        }
        node = &(*node)[part];
        if (node->is_null()) *node = json::object();
        start = dot + 1;
    }
}

}  // namespace rsstab
