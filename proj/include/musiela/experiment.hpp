#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "musiela/curve.hpp"
#include "musiela/diagnostics.hpp"
#include "musiela/hash.hpp"
#include "musiela/inequalities.hpp"
#include "musiela/random.hpp"
#include "musiela/solver.hpp"
#include "musiela/volatility.hpp"

namespace musiela {

// ---------------------------------------------------------------------------
// Experiment configuration and orchestration.
//
// A JSON document selects one experiment kind, a volatility model, a grid,
// and an initial curve; parsing fills documented defaults, rejects unknown
// keys with a field-path message, and resolves everything eagerly so a spec
// that parses is a spec that runs. Exit-code contract: 0 pass, 1 verdict
// failure, 2 configuration error, 3 artifact I/O failure.
// ---------------------------------------------------------------------------

/// Configuration rejection; carries the field path in the message. Exit 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Artifact read/write failure. Exit 3.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class ExperimentKind {
    simulate,
    positivity,
    condition_c,
    martingale,
    ladder,
    yosida_sweep,
    inequalities,
};

inline const char* kind_name(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::simulate: return "simulate";
        case ExperimentKind::positivity: return "positivity";
        case ExperimentKind::condition_c: return "condition-c";
        case ExperimentKind::martingale: return "martingale";
        case ExperimentKind::ladder: return "ladder";
        case ExperimentKind::yosida_sweep: return "yosida-sweep";
        case ExperimentKind::inequalities: return "inequalities";
    }
    return "?";
}

struct ExperimentSpec {
    std::string name;
    ExperimentKind kind = ExperimentKind::simulate;
    SimConfig config;
    std::optional<Curve> initial;
    std::filesystem::path output_dir;

    // Kind-specific knobs.
    double martingale_maturity = 0.0;
    std::vector<double> martingale_checkpoints;
    double martingale_bias_coeff = 0.0;
    std::size_t suite_trials = 10000;
    std::vector<double> yosida_lambdas;
    std::size_t ladder_samples = 12;

    /// Squared growing-weight mass of factors dropped by an explicit
    /// truncation (model.k below the array length).
    double discarded_factor_mass = 0.0;

    nlohmann::json echo;      // resolved config, defaults filled
    std::string config_hash;  // git-style blob hash of the echo
};

namespace detail {

inline std::string join_path(const std::string& base, const std::string& key) {
    return base.empty() ? key : base + "." + key;
}

/// Object walker: typed getters record which keys they consumed, finish()
/// rejects the rest by path so typos fail loudly instead of silently using
/// a default.
class Fields {
   public:
    Fields(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object())
            throw ConfigError((path_.empty() ? std::string("config") : path_) + ": must be a JSON object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    const nlohmann::json* take(const std::string& key) {
        seen_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    std::string req_string(const std::string& key) {
        const auto* v = take(key);
        if (!v || !v->is_string() || v->get<std::string>().empty())
            throw ConfigError(join_path(path_, key) + ": required nonempty string");
        return v->get<std::string>();
    }

    std::string opt_string(const std::string& key, std::string dflt) {
        const auto* v = take(key);
        if (!v) return dflt;
        if (!v->is_string()) throw ConfigError(join_path(path_, key) + ": must be a string");
        return v->get<std::string>();
    }

    double number(const std::string& key, double dflt) {
        const auto* v = take(key);
        if (!v) return dflt;
        if (!v->is_number()) throw ConfigError(join_path(path_, key) + ": must be a number");
        return v->get<double>();
    }

    double positive(const std::string& key, double dflt) {
        const double x = number(key, dflt);
        if (!(x > 0.0) || !std::isfinite(x))
            throw ConfigError(join_path(path_, key) + ": must be a positive finite number");
        return x;
    }

    std::uint64_t uinteger(const std::string& key, std::uint64_t dflt) {
        const auto* v = take(key);
        if (!v) return dflt;
        if (!v->is_number_integer() && !v->is_number_unsigned())
            throw ConfigError(join_path(path_, key) + ": must be a nonnegative integer");
        if (v->is_number_integer() && v->get<std::int64_t>() < 0)
            throw ConfigError(join_path(path_, key) + ": must be a nonnegative integer");
        return v->get<std::uint64_t>();
    }

    bool boolean(const std::string& key, bool dflt) {
        const auto* v = take(key);
        if (!v) return dflt;
        if (!v->is_boolean()) throw ConfigError(join_path(path_, key) + ": must be true or false");
        return v->get<bool>();
    }

    std::vector<double> number_array(const std::string& key) {
        const auto* v = take(key);
        if (!v || !v->is_array() || v->empty())
            throw ConfigError(join_path(path_, key) + ": required nonempty array of numbers");
        std::vector<double> out;
        out.reserve(v->size());
        for (std::size_t i = 0; i < v->size(); ++i) {
            const auto& e = (*v)[i];
            if (!e.is_number())
                throw ConfigError(join_path(path_, key) + "[" + std::to_string(i) +
                                  "]: must be a number");
            out.push_back(e.get<double>());
        }
        return out;
    }

    void forbid(const std::string& key, const std::string& why) {
        if (j_.contains(key)) throw ConfigError(join_path(path_, key) + ": " + why);
        seen_.insert(key);
    }

    void finish() const {
        for (const auto& item : j_.items())
            if (!seen_.count(item.key()))
                throw ConfigError(join_path(path_, item.key()) + ": unknown key");
    }

    const nlohmann::json& raw() const { return j_; }
    const std::string& path() const { return path_; }

   private:
    const nlohmann::json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline ExperimentKind parse_kind(const std::string& s) {
    if (s == "simulate") return ExperimentKind::simulate;
    if (s == "positivity") return ExperimentKind::positivity;
    if (s == "condition-c") return ExperimentKind::condition_c;
    if (s == "martingale") return ExperimentKind::martingale;
    if (s == "ladder") return ExperimentKind::ladder;
    if (s == "yosida-sweep") return ExperimentKind::yosida_sweep;
    if (s == "inequalities") return ExperimentKind::inequalities;
    throw ConfigError("kind: '" + s +
                      "' is not one of simulate, positivity, condition-c, martingale, ladder, "
                      "yosida-sweep, inequalities");
}

/// Model block: {"type": "none"} or an exponential family given either by the
/// generator rule {k, c0, lam0, lam_step} or by explicit arrays {c, lam} with
/// an optional truncation index k. Optional ladder decorations.
inline std::shared_ptr<const VolatilityModel> make_model(const nlohmann::json& jm, double alpha,
                                                         double& discarded_mass,
                                                         nlohmann::json& echo) {
    Fields f(jm, "model");
    const std::string type = f.opt_string("type", "exp_tanh");
    echo["type"] = type;

    if (type == "none") {
        f.forbid("k", "meaningless without a model family");
        f.forbid("c0", "meaningless without a model family");
        f.forbid("lam0", "meaningless without a model family");
        f.forbid("lam_step", "meaningless without a model family");
        f.forbid("c", "meaningless without a model family");
        f.forbid("lam", "meaningless without a model family");
        f.forbid("maturity_cutoff", "cannot ladder the empty model");
        f.forbid("state_clamp", "cannot ladder the empty model");
        f.finish();
        return nullptr;
    }
    if (type != "exp_tanh" && type != "additive")
        throw ConfigError("model.type: '" + type + "' is not one of none, exp_tanh, additive");

    const bool generator = f.has("c0") || f.has("lam0") || f.has("lam_step");
    const bool explicit_arrays = f.has("c") || f.has("lam");
    if (generator && explicit_arrays)
        throw ConfigError("model: give either the generator rule {k, c0, lam0, lam_step} or "
                          "explicit arrays {c, lam}, not both");

    FactorParams params;
    if (generator) {
        const auto k = f.uinteger("k", 0);
        if (k < 1) throw ConfigError("model.k: generator rule needs k >= 1");
        const double c0 = f.positive("c0", 0.0);
        const double lam0 = f.number("lam0", 0.0);
        const double lam_step = f.number("lam_step", 0.0);
        params = FactorParams::generated(static_cast<std::size_t>(k), c0, lam0, lam_step);
    } else if (explicit_arrays) {
        params.c = f.number_array("c");
        params.lam = f.number_array("lam");
        if (params.c.size() != params.lam.size())
            throw ConfigError("model.lam: must have the same length as model.c");
        const auto k = f.uinteger("k", params.c.size());
        if (k < 1 || k > params.c.size())
            throw ConfigError("model.k: truncation index must lie in 1.." +
                              std::to_string(params.c.size()));
        // Factors beyond the truncation are dropped here; their growing-weight
        // mass is recorded so reports can quote what the truncation discarded.
        for (std::size_t j = k; j < params.c.size(); ++j) {
            const double denom = 2.0 * params.lam[j] - alpha;
            if (!(denom > 0.0))
                throw ConfigError("model.lam[" + std::to_string(j) +
                                  "]: decay rate must exceed alpha/2");
            discarded_mass += params.c[j] * params.c[j] * params.lam[j] * params.lam[j] / denom;
        }
        params.c.resize(k);
        params.lam.resize(k);
    } else {
        throw ConfigError("model: needs factor parameters (generator rule or explicit arrays)");
    }

    std::shared_ptr<const VolatilityModel> base;
    try {
        base = type == "additive" ? builtin_additive(params, alpha)
                                  : builtin_exp_saturating(params, alpha);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("model: ") + e.what());
    }
    echo["c"] = params.c;
    echo["lam"] = params.lam;

    std::optional<unsigned> cutoff, clamp;
    if (const auto* v = f.take("maturity_cutoff")) {
        if (!v->is_number_unsigned() || v->get<std::uint64_t>() < 1)
            throw ConfigError("model.maturity_cutoff: must be an integer >= 1");
        cutoff = static_cast<unsigned>(v->get<std::uint64_t>());
        echo["maturity_cutoff"] = *cutoff;
    }
    if (const auto* v = f.take("state_clamp")) {
        if (!v->is_number_unsigned() || v->get<std::uint64_t>() < 1)
            throw ConfigError("model.state_clamp: must be an integer >= 1");
        clamp = static_cast<unsigned>(v->get<std::uint64_t>());
        echo["state_clamp"] = *clamp;
    }
    f.finish();
    if (cutoff || clamp) return std::make_shared<LadderedModel>(std::move(base), cutoff, clamp);
    return base;
}

/// Reads the curve CSV layout write_csv emits: "x,value" header, one row per
/// node, trailing "inf,<tail>" row. Nodes must match the configured grid.
inline Curve read_curve_csv(const std::string& file, const std::shared_ptr<const Grid>& grid,
                            const std::string& path) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw ConfigError(path + ": cannot open '" + file + "'");
    std::string line;
    if (!std::getline(is, line) || line != "x,value")
        throw ConfigError(path + ": '" + file + "' is not a curve CSV (expected 'x,value' header)");

    std::vector<double> values;
    values.reserve(grid->n_points);
    std::optional<double> tail;
    std::size_t row = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw ConfigError(path + ": '" + file + "' row " + std::to_string(row + 2) +
                              ": expected 'x,value'");
        const std::string xs = line.substr(0, comma);
        double val = 0.0;
        try {
            val = std::stod(line.substr(comma + 1));
        } catch (const std::exception&) {
            throw ConfigError(path + ": '" + file + "' row " + std::to_string(row + 2) +
                              ": bad number");
        }
        if (xs == "inf") {
            tail = val;
            break;
        }
        if (row >= grid->n_points)
            throw ConfigError(path + ": '" + file + "' has more rows than the grid has nodes");
        double x = 0.0;
        try {
            x = std::stod(xs);
        } catch (const std::exception&) {
            throw ConfigError(path + ": '" + file + "' row " + std::to_string(row + 2) +
                              ": bad abscissa");
        }
        if (std::abs(x - grid->nodes[row]) > 1e-9 * std::max(1.0, std::abs(x)))
            throw ConfigError(path + ": '" + file + "' row " + std::to_string(row + 2) +
                              ": node " + xs + " is off the configured grid");
        values.push_back(val);
        ++row;
    }
    if (values.size() != grid->n_points || !tail)
        throw ConfigError(path + ": '" + file + "' must cover every grid node and end with an "
                          "'inf,<tail>' row");
    return Curve(grid, std::move(values), *tail);
}

inline Curve make_initial(const nlohmann::json* ju, const std::shared_ptr<const Grid>& grid,
                          nlohmann::json& echo) {
    if (!ju) {
        echo = {{"type", "exp_affine"}, {"level", 0.02}, {"amplitude", 0.01}, {"rate", 1.0}};
        return Curve::sample(grid, [](double x) { return 0.02 + 0.01 * std::exp(-x); }, 0.02);
    }
    Fields f(*ju, "u0");
    const std::string type = f.opt_string("type", "exp_affine");
    echo["type"] = type;
    if (type == "constant") {
        const double level = f.number("level", 0.0);
        f.finish();
        echo["level"] = level;
        return Curve::constant(grid, level);
    }
    if (type == "exp_affine") {
        const double level = f.number("level", 0.02);
        const double amplitude = f.number("amplitude", 0.01);
        const double rate = f.positive("rate", 1.0);
        f.finish();
        echo["level"] = level;
        echo["amplitude"] = amplitude;
        echo["rate"] = rate;
        return Curve::sample(
            grid, [&](double x) { return level + amplitude * std::exp(-rate * x); }, level);
    }
    if (type == "csv") {
        const std::string file = f.req_string("path");
        f.finish();
        Curve c = read_curve_csv(file, grid, "u0.path");
        echo["path"] = file;
        // The hash must cover the actual data, not just the file name.
        std::ostringstream blob;
        write_csv(c, blob);
        echo["content_sha1"] = hash::sha1_hex(blob.str());
        return c;
    }
    throw ConfigError("u0.type: '" + type + "' is not one of exp_affine, constant, csv");
}

inline std::string git_blob_sha1(const std::string& content) {
    std::string framed = "blob " + std::to_string(content.size());
    framed.push_back('\0');
    framed += content;
    return hash::sha1_hex(framed);
}

}  // namespace detail

/// Parses and fully resolves an experiment document. Throws ConfigError with
/// a field-path message on any schema violation.
inline ExperimentSpec parse_config(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config: not well-formed JSON: ") + e.what());
    }

    detail::Fields f(j, "");
    ExperimentSpec spec;
    spec.name = f.req_string("name");
    if (spec.name.find_first_not_of(
            "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-") != std::string::npos)
        throw ConfigError("name: use letters, digits, '_' or '-' only");
    spec.kind = detail::parse_kind(f.req_string("kind"));

    SimConfig& cfg = spec.config;
    cfg.alpha = f.number("alpha", 1.0);
    if (!(cfg.alpha > 0.0) || !std::isfinite(cfg.alpha))
        throw ConfigError("alpha: must be a positive finite number");
    const double x_max = f.positive("x_max", 20.0);
    const double dx = f.positive("dx", 0.05);
    if (x_max / dx > 4e6) throw ConfigError("dx: grid would exceed four million nodes");
    cfg.grid = Grid::make_with_spacing(x_max, dx);
    cfg.dt = f.positive("dt", cfg.grid->dx);
    if (std::abs(cfg.dt - cfg.grid->dx) > 1e-12 * cfg.grid->dx)
        throw ConfigError("dt: must equal dx (transport is an exact lattice shift)");
    cfg.t_end = f.number("t_end", 1.0);
    if (!(cfg.t_end >= 0.0) || !std::isfinite(cfg.t_end))
        throw ConfigError("t_end: must be a nonnegative finite number");
    {
        const double ratio = cfg.t_end / cfg.dt;
        if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio))
            throw ConfigError("t_end: must be a multiple of dt");
    }
    cfg.paths = static_cast<std::size_t>(f.uinteger("paths", 500));
    if (cfg.paths < 1) throw ConfigError("paths: need at least one path");
    cfg.seed = f.uinteger("seed", 42);
    cfg.zero_drift = f.boolean("zero_drift", false);
    cfg.zero_noise = f.boolean("zero_noise", false);
    cfg.blowup_threshold = f.positive("blowup_threshold", 1e6);
    cfg.snapshot_stride = static_cast<std::size_t>(f.uinteger("snapshot_stride", 0));
    cfg.positivity_tol_scale = f.positive("positivity_tol_scale", 1e-8);

    if (spec.kind == ExperimentKind::yosida_sweep) {
        f.forbid("yosida_lambda", "yosida-sweep takes the list key 'yosida_lambdas'");
    } else if (const auto* v = f.take("yosida_lambda")) {
        if (!v->is_number() || !(v->get<double>() > 0.0))
            throw ConfigError("yosida_lambda: must be a positive number");
        cfg.yosida_lambda = v->get<double>();
        if (*cfg.yosida_lambda < cfg.dt)
            throw ConfigError("yosida_lambda: below dt the explicit Euler step leaves the "
                              "stable region");
    }

    nlohmann::json model_echo = nlohmann::json::object();
    if (const auto* jm = f.take("model")) {
        cfg.model = detail::make_model(*jm, cfg.alpha, spec.discarded_factor_mass, model_echo);
    } else {
        model_echo["type"] = "none";
    }
    if (spec.kind == ExperimentKind::ladder && !cfg.model)
        throw ConfigError("model: kind 'ladder' needs a volatility model");

    nlohmann::json u0_echo = nlohmann::json::object();
    spec.initial = detail::make_initial(f.take("u0"), cfg.grid, u0_echo);

    // Kind-specific keys; present-but-foreign keys are rejected outright.
    if (spec.kind == ExperimentKind::martingale) {
        const auto* jm = f.take("martingale");
        if (!jm) throw ConfigError("martingale: required for kind 'martingale'");
        detail::Fields mf(*jm, "martingale");
        spec.martingale_maturity = mf.positive("maturity", 0.0);
        if (spec.martingale_maturity > x_max)
            throw ConfigError("martingale.maturity: beyond the grid horizon x_max");
        spec.martingale_checkpoints = mf.number_array("checkpoints");
        for (std::size_t i = 0; i < spec.martingale_checkpoints.size(); ++i)
            if (!(spec.martingale_checkpoints[i] > 0.0))
                throw ConfigError("martingale.checkpoints[" + std::to_string(i) +
                                  "]: must be positive");
        spec.martingale_bias_coeff = mf.number("bias_coeff", 0.0);
        if (spec.martingale_bias_coeff < 0.0)
            throw ConfigError("martingale.bias_coeff: must be nonnegative");
        mf.finish();
    } else {
        f.forbid("martingale", "only used when kind is 'martingale'");
    }

    if (spec.kind == ExperimentKind::inequalities) {
        spec.suite_trials = static_cast<std::size_t>(f.uinteger("trials", 10000));
        if (spec.suite_trials < 1) throw ConfigError("trials: need at least one trial");
    } else {
        f.forbid("trials", "only used when kind is 'inequalities'");
    }

    if (spec.kind == ExperimentKind::yosida_sweep) {
        if (f.has("yosida_lambdas")) {
            spec.yosida_lambdas = f.number_array("yosida_lambdas");
            for (std::size_t i = 0; i < spec.yosida_lambdas.size(); ++i)
                if (!(spec.yosida_lambdas[i] >= cfg.dt))
                    throw ConfigError("yosida_lambdas[" + std::to_string(i) +
                                      "]: each lambda must be >= dt");
        } else {
            spec.yosida_lambdas = {0.4, 0.2, 0.1, 0.05};
            for (double l : spec.yosida_lambdas)
                if (l < cfg.dt)
                    throw ConfigError("yosida_lambdas: default ladder reaches below dt; give an "
                                      "explicit list");
        }
    } else {
        f.forbid("yosida_lambdas", "only used when kind is 'yosida-sweep'");
    }

    if (spec.kind == ExperimentKind::ladder) {
        spec.ladder_samples = static_cast<std::size_t>(f.uinteger("ladder_samples", 12));
        if (spec.ladder_samples < 2) throw ConfigError("ladder_samples: need at least 2");
    } else {
        f.forbid("ladder_samples", "only used when kind is 'ladder'");
    }

    spec.output_dir = f.opt_string("output_dir", "out/" + spec.name);
    f.finish();

    // Canonical echo: everything that influences the numbers, defaults filled,
    // keys sorted by nlohmann's object ordering. The hash is over this dump.
    nlohmann::json& e = spec.echo;
    e["name"] = spec.name;
    e["kind"] = kind_name(spec.kind);
    e["alpha"] = cfg.alpha;
    e["x_max"] = x_max;
    e["dx"] = cfg.grid->dx;
    e["dt"] = cfg.dt;
    e["t_end"] = cfg.t_end;
    e["paths"] = cfg.paths;
    e["seed"] = cfg.seed;
    e["zero_drift"] = cfg.zero_drift;
    e["zero_noise"] = cfg.zero_noise;
    e["blowup_threshold"] = cfg.blowup_threshold;
    e["snapshot_stride"] = cfg.snapshot_stride;
    e["positivity_tol_scale"] = cfg.positivity_tol_scale;
    e["yosida_lambda"] =
        cfg.yosida_lambda ? nlohmann::json(*cfg.yosida_lambda) : nlohmann::json(nullptr);
    e["model"] = model_echo;
    e["u0"] = u0_echo;
    if (spec.kind == ExperimentKind::martingale)
        e["martingale"] = {{"maturity", spec.martingale_maturity},
                           {"checkpoints", spec.martingale_checkpoints},
                           {"bias_coeff", spec.martingale_bias_coeff}};
    if (spec.kind == ExperimentKind::inequalities) e["trials"] = spec.suite_trials;
    if (spec.kind == ExperimentKind::yosida_sweep) e["yosida_lambdas"] = spec.yosida_lambdas;
    if (spec.kind == ExperimentKind::ladder) e["ladder_samples"] = spec.ladder_samples;
    if (spec.discarded_factor_mass > 0.0)
        e["discarded_factor_mass"] = spec.discarded_factor_mass;
    spec.config_hash = detail::git_blob_sha1(e.dump());
    return spec;
}

inline ExperimentSpec load_config(const std::string& file) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw ConfigError("config: cannot open '" + file + "'");
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str());
}

// ---------------------------------------------------------------------------
// Yosida sweep: paired-seed gap between the splitting scheme and the explicit
// Euler scheme with the bounded resolvent approximation of the generator.
// ---------------------------------------------------------------------------

struct YosidaSweepReport {
    struct Row {
        double lambda = 0.0;
        double sup_gap = 0.0;
    };
    std::vector<Row> rows;
    double threshold = 0.0;  // 10 x smallest lambda
    std::size_t excluded_paths = 0;
    bool monotone = true;

    bool pass() const {
        return monotone && !rows.empty() && rows.back().sup_gap <= threshold;
    }
    std::string verdict() const { return pass() ? "converging" : "not_converging"; }
};

inline YosidaSweepReport yosida_sweep(const SimConfig& cfg, const Curve& u0,
                                      const std::vector<double>& lambdas) {
    if (lambdas.empty()) throw std::invalid_argument("yosida_sweep: empty lambda list");
    SimConfig c = cfg;
    if (c.snapshot_stride == 0) c.snapshot_stride = 1;  // the sup runs over every step
    c.yosida_lambda.reset();
    const PathSet base = simulate(c, u0);

    YosidaSweepReport rep;
    rep.threshold = 10.0 * *std::min_element(lambdas.begin(), lambdas.end());
    double prev = std::numeric_limits<double>::infinity();
    for (const double lambda : lambdas) {
        SimConfig cl = c;
        cl.yosida_lambda = lambda;
        const PathSet approx = simulate_yosida(cl, u0);
        const double gap = detail::pathset_sup_gap(base, approx, rep.excluded_paths);
        rep.monotone = rep.monotone && gap <= prev * (1.0 + 1e-9);
        rep.rows.push_back({lambda, gap});
        prev = gap;
    }
    return rep;
}

inline nlohmann::json report_json(const YosidaSweepReport& r) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.rows) rows.push_back({{"lambda", row.lambda}, {"sup_gap", row.sup_gap}});
    return {{"report_type", "yosida_sweep"},
            {"verdict", r.verdict()},
            {"metrics",
             {{"rows", std::move(rows)},
              {"threshold", r.threshold},
              {"monotone", r.monotone},
              {"excluded_paths", r.excluded_paths}}}};
}

inline std::string report_text(const YosidaSweepReport& r) {
    std::ostringstream os;
    os << "yosida sweep: " << r.verdict() << "\n";
    for (const auto& row : r.rows)
        os << "  lambda " << row.lambda << "  sup gap " << detail::fmt(row.sup_gap) << "\n";
    os << "  threshold " << detail::fmt(r.threshold) << (r.monotone ? ", monotone" : ", NOT monotone")
       << "\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// Execution.
// ---------------------------------------------------------------------------

struct RunOutcome {
    std::string verdict;
    int exit_code = 1;
    nlohmann::json report;    // report.json content (config hash embedded)
    std::string text;         // human-readable summary
    std::string diag;         // diag.csv content
    std::optional<PathSet> paths;  // set when the kind simulated trajectories
};

namespace detail {

inline std::string csv_line(std::initializer_list<std::string> cells) {
    std::string out;
    for (const auto& c : cells) {
        if (!out.empty()) out += ',';
        out += c;
    }
    out += '\n';
    return out;
}

inline std::string suite_diag(const InequalitySuiteReport& r) {
    std::string out = "check,trials,worst_slack,worst_continuum_slack,pass\n";
    for (const auto& c : r.checks)
        out += csv_line({c.name, std::to_string(c.trials), format_double(c.worst_slack),
                         format_double(c.worst_continuum_slack), c.pass() ? "1" : "0"});
    return out;
}

inline std::string condition_c_diag(const ConditionCReport& r) {
    std::string out = "eps,max_ratio,max_diffusion\n";
    for (const auto& row : r.scale_sweep)
        out += csv_line({format_double(row.eps), format_double(row.max_ratio),
                         format_double(row.max_diffusion)});
    return out;
}

inline std::string ladder_diag(const LadderReport& fam, const SolutionLadderReport& sol) {
    std::string out = "family,rung,sigma_gap,beta_gap,lipschitz_ratio\n";
    for (const auto& r : fam.maturity)
        out += csv_line({"maturity", std::to_string(r.index), format_double(r.sigma_gap),
                         format_double(r.beta_gap), format_double(r.lipschitz_ratio)});
    for (const auto& r : fam.state)
        out += csv_line({"state", std::to_string(r.index), format_double(r.sigma_gap),
                         format_double(r.beta_gap), format_double(r.lipschitz_ratio)});
    for (const auto& [idx, gap] : sol.maturity_gaps)
        out += csv_line({"solution_maturity", std::to_string(idx), format_double(gap), "0", "0"});
    for (const auto& [idx, gap] : sol.state_gaps)
        out += csv_line({"solution_state", std::to_string(idx), format_double(gap), "0", "0"});
    return out;
}

inline std::string yosida_diag(const YosidaSweepReport& r) {
    std::string out = "lambda,sup_gap\n";
    for (const auto& row : r.rows)
        out += csv_line({format_double(row.lambda), format_double(row.sup_gap)});
    return out;
}

/// Fixed sample states for the static ladder: random smooth curves pulled
/// into the clamp's identity core so state rungs measure pure clamp effect.
inline std::vector<Curve> ladder_sample_curves(const std::shared_ptr<const Grid>& grid,
                                               std::uint64_t seed, std::size_t count) {
    rng::Stream s(seed);
    std::vector<Curve> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Curve c = rng::random_smooth_curve(grid, s, 1.2);
        if (c.max_abs() > 0.9) c = (0.9 / c.max_abs()) * c;
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace detail

/// Runs the experiment in memory. Throws ConfigError (or std::invalid_argument
/// from the numeric layer) for configuration-class failures; never touches the
/// filesystem.
inline RunOutcome run_experiment(const ExperimentSpec& spec) {
    const SimConfig& cfg = spec.config;
    const Curve& u0 = *spec.initial;
    RunOutcome out;

    auto finish = [&](nlohmann::json j, std::string text, bool pass) {
        j["name"] = spec.name;
        j["config_hash"] = spec.config_hash;
        out.verdict = j.at("verdict").get<std::string>();
        out.report = std::move(j);
        out.text = std::move(text);
        out.exit_code = pass ? 0 : 1;
    };

    switch (spec.kind) {
        case ExperimentKind::simulate: {
            PathSet ps =
                cfg.yosida_lambda ? simulate_yosida(cfg, u0) : simulate(cfg, u0);
            std::size_t blown = 0;
            for (const auto& p : ps.paths) blown += p.blown_up() ? 1 : 0;
            nlohmann::json j = {{"report_type", "simulate"},
                                {"verdict", blown == 0 ? "completed" : "blowup"},
                                {"metrics",
                                 {{"scheme", ps.scheme},
                                  {"global_min", ps.global_min()},
                                  {"samples_below", ps.samples_below()},
                                  {"total_samples", ps.total_samples()},
                                  {"negative_threshold", ps.negative_threshold},
                                  {"blown_up_paths", blown},
                                  {"n_steps", ps.n_steps}}}};
            std::ostringstream txt;
            txt << "simulate (" << ps.scheme << "): " << (blown == 0 ? "completed" : "BLOWUP")
                << ", " << cfg.paths << " paths, global min " << detail::fmt(ps.global_min())
                << "\n";
            out.diag = diag_csv(ps);
            out.paths = std::move(ps);
            finish(std::move(j), txt.str(), blown == 0);
            break;
        }
        case ExperimentKind::positivity: {
            PathSet ps = simulate(cfg, u0);
            const PositivityReport rep = positivity_report(ps, ps.negative_threshold);
            out.diag = diag_csv(ps);
            out.paths = std::move(ps);
            finish(report_json(rep), report_text(rep), rep.pass());
            break;
        }
        case ExperimentKind::condition_c: {
            const ConditionCReport rep =
                condition_c_probe(cfg.model.get(), cfg.alpha, cfg.grid, 1000, cfg.seed);
            out.diag = detail::condition_c_diag(rep);
            finish(report_json(rep), report_text(rep), rep.verdict == "bounded");
            break;
        }
        case ExperimentKind::martingale: {
            SimConfig mc = cfg;
            if (mc.snapshot_stride == 0) {
                // Smallest stride that hits every checkpoint exactly.
                std::size_t g = 0;
                for (const double t : spec.martingale_checkpoints)
                    g = std::gcd(g, static_cast<std::size_t>(std::llround(t / mc.dt)));
                mc.snapshot_stride = g > 0 ? g : 1;
            }
            PathSet ps = simulate(mc, u0);
            const MartingaleReport rep =
                martingale_test(ps, mc, spec.martingale_maturity, spec.martingale_checkpoints,
                                spec.martingale_bias_coeff);
            out.diag = diag_csv(ps);
            out.paths = std::move(ps);
            finish(report_json(rep), report_text(rep), rep.all_within());
            break;
        }
        case ExperimentKind::ladder: {
            const auto samples =
                detail::ladder_sample_curves(cfg.grid, cfg.seed, spec.ladder_samples);
            const LadderReport fam = ladder_convergence(cfg.model, cfg.alpha, samples);
            const SolutionLadderReport sol = solution_ladder_convergence(cfg, u0);
            const bool pass = fam.verdict() == "converging" && sol.verdict() == "converging";
            nlohmann::json j = {{"report_type", "ladder"},
                                {"verdict", pass ? "converging" : "not_converging"},
                                {"metrics",
                                 {{"family", report_json(fam)}, {"solution", report_json(sol)}}}};
            out.diag = detail::ladder_diag(fam, sol);
            finish(std::move(j), report_text(fam) + report_text(sol), pass);
            break;
        }
        case ExperimentKind::yosida_sweep: {
            const YosidaSweepReport rep = yosida_sweep(cfg, u0, spec.yosida_lambdas);
            out.diag = detail::yosida_diag(rep);
            finish(report_json(rep), report_text(rep), rep.pass());
            break;
        }
        case ExperimentKind::inequalities: {
            const InequalitySuiteReport rep =
                inequality_suite(cfg.alpha, cfg.seed, cfg.grid, spec.suite_trials);
            out.diag = detail::suite_diag(rep);
            finish(report_json(rep), report_text(rep), rep.all_pass());
            break;
        }
    }
    return out;
}

/// Writes diag.csv, meta.json, report.json (and curves/ snapshots when the
/// run kept any) under dir. Everything written is a pure function of the
/// config, so reruns are byte-identical.
inline void write_artifacts(const ExperimentSpec& spec, const RunOutcome& out,
                            const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());

    auto write_file = [&](const char* name, const std::string& content) {
        std::ofstream os(dir / name, std::ios::binary);
        if (!os) throw IoError("cannot write '" + (dir / name).string() + "'");
        os << content;
        if (!os) throw IoError("short write to '" + (dir / name).string() + "'");
    };

    write_file("diag.csv", out.diag);

    nlohmann::json meta;
    meta["name"] = spec.name;
    meta["kind"] = kind_name(spec.kind);
    meta["config"] = spec.echo;
    meta["config_hash"] = spec.config_hash;
    meta["diag_sha1"] = hash::sha1_hex(out.diag);
    if (spec.discarded_factor_mass > 0.0)
        meta["discarded_factor_mass"] = spec.discarded_factor_mass;
    write_file("meta.json", meta.dump(2) + "\n");
    write_file("report.json", out.report.dump(2) + "\n");

    if (out.paths) {
        bool any = false;
        for (const auto& p : out.paths->paths) any = any || !p.snapshots.empty();
        if (any) {
            fs::create_directories(dir / "curves", ec);
            if (ec) throw IoError("cannot create '" + (dir / "curves").string() + "'");
            for (std::size_t p = 0; p < out.paths->paths.size(); ++p)
                for (const auto& [j, curve] : out.paths->paths[p].snapshots)
                    write_csv(curve, (dir / "curves" /
                                      ("p" + std::to_string(p) + "_t" + std::to_string(j) + ".csv"))
                                         .string());
        }
    }
}

/// Full exit-code contract in one call: 0 pass, 1 verdict failure, 2 config
/// error, 3 I/O error. Messages go to err, the report summary to outs.
inline int execute(const ExperimentSpec& spec, std::ostream& outs, std::ostream& err) {
    try {
        const RunOutcome out = run_experiment(spec);
        write_artifacts(spec, out, spec.output_dir);
        outs << out.text;
        outs << "verdict: " << out.verdict << "\nartifacts: " << spec.output_dir.string() << "\n";
        return out.exit_code;
    } catch (const IoError& e) {
        err << "io error: " << e.what() << "\n";
        return 3;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        err << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace musiela
