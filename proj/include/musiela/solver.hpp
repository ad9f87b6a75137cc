#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "musiela/curve.hpp"
#include "musiela/hash.hpp"
#include "musiela/hjm_drift.hpp"
#include "musiela/random.hpp"
#include "musiela/shift_semigroup.hpp"
#include "musiela/volatility.hpp"
#include "musiela/weighted_spaces.hpp"

namespace musiela {

struct SimConfig {
    double alpha = 1.0;
    std::shared_ptr<const Grid> grid;
    double dt = 0.05;
    double t_end = 1.0;
    std::size_t paths = 1;
    std::uint64_t seed = 42;
    std::shared_ptr<const VolatilityModel> model;  // null: pure transport, no drift, no noise
    bool zero_drift = false;                       // falsification runs switch the drift off
    bool zero_noise = false;                       // deterministic integration of the same scheme
    std::optional<double> yosida_lambda;
    double blowup_threshold = 1e6;
    std::size_t snapshot_stride = 0;  // 0: keep no intermediate curves
    /// Scale of the negative-sample threshold: a node counts as negative when
    /// it drops below -positivity_tol_scale * (1 + sup|u0|).
    double positivity_tol_scale = 1e-8;

    std::size_t n_steps() const { return static_cast<std::size_t>(std::round(t_end / dt)); }

    void validate() const {
        if (!grid) throw std::invalid_argument("SimConfig: null grid");
        if (std::abs(dt - grid->dx) > 1e-12 * grid->dx)
            throw std::invalid_argument("SimConfig: dt must equal the grid spacing");
        if (paths < 1) throw std::invalid_argument("SimConfig: need at least one path");
        if (!(t_end >= 0.0)) throw std::invalid_argument("SimConfig: t_end must be nonnegative");
        const double ratio = t_end / dt;
        if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio))
            throw std::invalid_argument("SimConfig: t_end must be a multiple of dt");
        if (!(blowup_threshold > 0.0))
            throw std::invalid_argument("SimConfig: blowup_threshold must be positive");
    }
};

struct StepDiag {
    std::size_t step = 0;
    double min_value = 0.0;  // over nodes and the tail level
    std::size_t min_node = 0;
    double neg_norm = 0.0;  // decaying-weight norm of the negative part
    double short_rate = 0.0;
    std::size_t n_below = 0;  // nodes under the negative-sample threshold
};

struct PathResult {
    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

    std::vector<StepDiag> diag;  // states 0 .. last finite step
    std::vector<std::pair<std::size_t, Curve>> snapshots;
    std::size_t blowup_step = npos;  // first step whose state left the admissible set
    Curve final_curve;               // last finite state

    bool blown_up() const { return blowup_step != npos; }
};

struct PathSet {
    std::vector<PathResult> paths;
    std::size_t n_steps = 0;
    std::size_t nodes_per_step = 0;
    double negative_threshold = 0.0;  // resolved absolute threshold used for n_below
    std::string scheme;               // "splitting" or "yosida_euler"

    double global_min() const {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& p : paths)
            for (const auto& d : p.diag) m = std::min(m, d.min_value);
        return m;
    }

    std::size_t samples_below() const {
        std::size_t c = 0;
        for (const auto& p : paths)
            for (const auto& d : p.diag) c += d.n_below;
        return c;
    }

    std::size_t total_samples() const {
        std::size_t c = 0;
        for (const auto& p : paths) c += p.diag.size() * nodes_per_step;
        return c;
    }
};

namespace detail {

inline unsigned thread_count_from_env() {
    const char* s = std::getenv("MUSIELA_THREADS");
    if (!s) return 1;
    const long v = std::strtol(s, nullptr, 10);
    if (v < 1) return 1;
    return static_cast<unsigned>(std::min(v, 256L));
}

inline StepDiag make_diag(const Curve& u, std::size_t step, double alpha, double neg_thr) {
    StepDiag d;
    d.step = step;
    d.min_value = u.min_value(&d.min_node);
    d.neg_norm = norm_L2_weighted(negative_part(u), Weight::decaying(alpha));
    d.short_rate = u[0];
    for (std::size_t i = 0; i < u.size(); ++i)
        if (u[i] < -neg_thr) ++d.n_below;
    return d;
}

/// sqrt(dt)-scaled noise superposition sum_k sigma_k(x_i, u_i) xi_k per node,
/// ascending k with compensated accumulation.
inline std::vector<double> noise_superposition(const VolatilityModel& mod, const Curve& u,
                                               const std::vector<double>& xi) {
    const std::size_t n = u.size();
    std::vector<double> acc(n, 0.0), comp(n, 0.0);
    for (std::size_t k = 0; k < mod.factors(); ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            const double term = mod.eval(k, u.grid().nodes[i], u[i]) * xi[k];
            const double y = term - comp[i];
            const double t = acc[i] + y;
            comp[i] = (t - acc[i]) - y;
            acc[i] = t;
        }
    }
    return acc;
}

}  // namespace detail

/// One splitting step: react with drift and noise, then transport exactly one
/// lattice cell. Node update is pinned as (u_i + dt*beta_i) + sqrt(dt)*S_i
/// with S the compensated noise superposition, so runs are bit-reproducible.
inline Curve step(const Curve& u, const VolatilityModel* mod, const SimConfig& cfg,
                  const std::vector<double>& xi) {
    Curve v = u;
    if (mod) {
        if (!cfg.zero_drift) {
            const Curve b = detail::beta_curve(*mod, u);
            for (std::size_t i = 0; i < v.size(); ++i) v[i] = u[i] + cfg.dt * b[i];
        }
        if (!cfg.zero_noise) {
            const std::vector<double> s = detail::noise_superposition(*mod, u, xi);
            const double sq = std::sqrt(cfg.dt);
            for (std::size_t i = 0; i < v.size(); ++i) v[i] = v[i] + sq * s[i];
        }
    }
    return shift(v, cfg.dt);  // tail level rides along unchanged
}

/// One explicit Euler step of the regularized strong form: the bounded
/// operator A_lambda replaces the semigroup, nothing shifts.
inline Curve step_yosida(const Curve& u, const VolatilityModel* mod, const SimConfig& cfg,
                         const std::vector<double>& xi, double lambda) {
    const Curve av = yosida_apply(u, lambda);
    Curve v = u;
    if (mod && !cfg.zero_drift) {
        const Curve b = detail::beta_curve(*mod, u);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = u[i] + cfg.dt * (b[i] - av[i]);
    } else {
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = u[i] - cfg.dt * av[i];
    }
    if (mod && !cfg.zero_noise) {
        const std::vector<double> s = detail::noise_superposition(*mod, u, xi);
        const double sq = std::sqrt(cfg.dt);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = v[i] + sq * s[i];
    }
    return v;
}

namespace detail {

template <typename StepFn>
PathSet run_paths(const SimConfig& cfg, const Curve& u0, const char* scheme, StepFn&& one_step) {
    cfg.validate();
    if (u0.grid_ptr() != cfg.grid && !same_layout(u0.grid(), *cfg.grid))
        throw std::invalid_argument("simulate: initial curve lives on a different grid");
    if (!u0.all_finite()) throw std::invalid_argument("simulate: non-finite initial curve");

    const std::size_t n = cfg.n_steps();
    const std::size_t K = cfg.model ? cfg.model->factors() : 0;
    const rng::NoiseField noise(cfg.seed);

    PathSet out;
    out.n_steps = n;
    out.nodes_per_step = cfg.grid->n_points;
    out.negative_threshold = cfg.positivity_tol_scale * (1.0 + u0.max_abs());
    out.scheme = scheme;
    out.paths.resize(cfg.paths);

    auto run_one = [&](std::size_t p) {
        PathResult& res = out.paths[p];
        Curve u = u0;
        res.diag.push_back(make_diag(u, 0, cfg.alpha, out.negative_threshold));
        if (cfg.snapshot_stride > 0) res.snapshots.emplace_back(0, u);
        std::vector<double> xi(K, 0.0);
        for (std::size_t j = 1; j <= n; ++j) {
            if (!cfg.zero_noise)
                for (std::size_t k = 0; k < K; ++k) xi[k] = noise.gaussian(p, j - 1, k);
            Curve next = one_step(u, xi);
            if (!next.all_finite() || next.max_abs() >= cfg.blowup_threshold) {
                res.blowup_step = j;  // lifetime exhausted; state at j is discarded
                break;
            }
            u = std::move(next);
            res.diag.push_back(make_diag(u, j, cfg.alpha, out.negative_threshold));
            if (cfg.snapshot_stride > 0 && (j % cfg.snapshot_stride == 0 || j == n))
                res.snapshots.emplace_back(j, u);
        }
        res.final_curve = std::move(u);
    };

    const unsigned T = thread_count_from_env();
    if (T <= 1 || cfg.paths < 2) {
        for (std::size_t p = 0; p < cfg.paths; ++p) run_one(p);
    } else {
        std::vector<std::thread> workers;
        workers.reserve(T);
        for (unsigned t = 0; t < T; ++t)
            workers.emplace_back([&, t] {
                for (std::size_t p = t; p < cfg.paths; p += T) run_one(p);
            });
        for (auto& w : workers) w.join();
    }
    return out;
}

}  // namespace detail

inline PathSet simulate(const SimConfig& cfg, const Curve& u0) {
    const VolatilityModel* mod = cfg.model.get();
    return detail::run_paths(cfg, u0, "splitting",
                             [&](const Curve& u, const std::vector<double>& xi) {
                                 return step(u, mod, cfg, xi);
                             });
}

inline PathSet simulate_yosida(const SimConfig& cfg, const Curve& u0) {
    if (!cfg.yosida_lambda) throw std::invalid_argument("simulate_yosida: yosida_lambda not set");
    const double lambda = *cfg.yosida_lambda;
    if (!(lambda > 0.0)) throw std::invalid_argument("simulate_yosida: lambda must be positive");
    // dt/lambda <= 1 keeps the Euler step a convex combination of the identity
    // and the resolvent, hence sup-stable; smaller lambda needs a finer grid
    if (lambda < cfg.dt)
        throw std::invalid_argument("simulate_yosida: lambda below dt leaves the stable region");
    const VolatilityModel* mod = cfg.model.get();
    return detail::run_paths(cfg, u0, "yosida_euler",
                             [&](const Curve& u, const std::vector<double>& xi) {
                                 return step_yosida(u, mod, cfg, xi, lambda);
                             });
}

// ---------------------------------------------------------------------------
// Persistence.
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::json model_echo(const VolatilityModel* mod) {
    if (!mod) return nullptr;
    if (const auto* lad = dynamic_cast<const LadderedModel*>(mod)) {
        nlohmann::json j;
        j["ladder"] = {{"maturity", lad->maturity_index() ? nlohmann::json(*lad->maturity_index())
                                                          : nlohmann::json(nullptr)},
                       {"state", lad->state_index() ? nlohmann::json(*lad->state_index())
                                                    : nlohmann::json(nullptr)}};
        j["base"] = model_echo(&lad->base());
        return j;
    }
    if (const auto* fam = dynamic_cast<const ExpFamilyModel*>(mod)) {
        nlohmann::json j;
        j["family"] = dynamic_cast<const AdditiveModel*>(mod) ? "additive" : "exp_tanh";
        j["K"] = fam->factors();
        std::vector<double> c, lam;
        for (std::size_t k = 0; k < fam->factors(); ++k) {
            c.push_back(fam->size(k));
            lam.push_back(fam->rate(k));
        }
        j["c"] = c;
        j["lam"] = lam;
        return j;
    }
    return {{"family", "custom"}, {"K", mod->factors()}};
}

}  // namespace detail

/// Serializes diagnostics rows in path-major order; layout is pinned so reruns
/// of the same config are byte-identical.
inline std::string diag_csv(const PathSet& set) {
    std::string out = "step,path,min,neg_norm,short_rate\n";
    for (std::size_t p = 0; p < set.paths.size(); ++p)
        for (const StepDiag& d : set.paths[p].diag) {
            out += std::to_string(d.step);
            out += ',';
            out += std::to_string(p);
            out += ',';
            out += detail::format_double(d.min_value);
            out += ',';
            out += detail::format_double(d.neg_norm);
            out += ',';
            out += detail::format_double(d.short_rate);
            out += '\n';
        }
    return out;
}

/// Writes diag.csv, meta.json, and (when snapshots exist) curves/p<i>_t<j>.csv
/// under dir. meta.json carries the config echo and the content hash of
/// diag.csv; nothing time-dependent is written, so reruns compare bytewise.
inline void persist(const PathSet& set, const SimConfig& cfg, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    const std::string csv = diag_csv(set);
    {
        std::ofstream os(dir + "/diag.csv", std::ios::binary);
        if (!os) throw std::runtime_error("persist: cannot write diag.csv");
        os << csv;
    }

    nlohmann::json meta;
    meta["alpha"] = cfg.alpha;
    meta["grid"] = {{"x_max", cfg.grid->x_max}, {"n_points", cfg.grid->n_points}, {"dx", cfg.grid->dx}};
    meta["dt"] = cfg.dt;
    meta["t_end"] = cfg.t_end;
    meta["paths"] = cfg.paths;
    meta["seed"] = cfg.seed;
    meta["zero_drift"] = cfg.zero_drift;
    meta["zero_noise"] = cfg.zero_noise;
    meta["yosida_lambda"] =
        cfg.yosida_lambda ? nlohmann::json(*cfg.yosida_lambda) : nlohmann::json(nullptr);
    meta["blowup_threshold"] = cfg.blowup_threshold;
    meta["snapshot_stride"] = cfg.snapshot_stride;
    meta["positivity_tol_scale"] = cfg.positivity_tol_scale;
    meta["negative_threshold"] = set.negative_threshold;
    meta["model"] = detail::model_echo(cfg.model.get());
    meta["scheme"] = set.scheme;
    meta["diag_sha1"] = hash::sha1_hex(csv);
    {
        std::ofstream os(dir + "/meta.json", std::ios::binary);
        if (!os) throw std::runtime_error("persist: cannot write meta.json");
        os << meta.dump(2) << '\n';
    }

    bool any = false;
    for (const auto& p : set.paths) any = any || !p.snapshots.empty();
    if (any) {
        fs::create_directories(dir + "/curves");
        for (std::size_t p = 0; p < set.paths.size(); ++p)
            for (const auto& [j, curve] : set.paths[p].snapshots)
                write_csv(curve,
                          dir + "/curves/p" + std::to_string(p) + "_t" + std::to_string(j) + ".csv");
    }
}

}  // namespace musiela
