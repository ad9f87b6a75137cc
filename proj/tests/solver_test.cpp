#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "musiela/hash.hpp"
#include "musiela/solver.hpp"

using namespace musiela;

namespace {

std::shared_ptr<const Grid> default_grid() { return Grid::make_with_spacing(20.0, 0.05); }

SimConfig base_config(std::shared_ptr<const Grid> g) {
    SimConfig cfg;
    cfg.grid = std::move(g);
    cfg.dt = cfg.grid->dx;
    return cfg;
}

Curve acceptance_state(const std::shared_ptr<const Grid>& g) {
    return Curve::sample(g, [](double x) { return 0.02 + 0.01 * std::exp(-x); }, 0.02);
}

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    EXPECT_TRUE(bool(is)) << path;
    return std::string(std::istreambuf_iterator<char>(is), {});
}

}  // namespace

TEST(Sha1, KnownVectors) {
    EXPECT_EQ(hash::sha1_hex("abc"), "a9993e364706816aba3e25717850c26c9cd0d89d");
    EXPECT_EQ(hash::sha1_hex(""), "da39a3ee5e6b4b0d3255bfef95601890afd80709");
    EXPECT_EQ(hash::sha1_hex("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq"),
              "84983e441c3bd26ebaae4aa1f95129e5e54670f1");
    // incremental feeding matches one-shot
    hash::Sha1 h;
    const std::string s(1000, 'a');
    for (int i = 0; i < 1000; ++i) h.update(s.data(), s.size());
    EXPECT_EQ(h.hex_digest(), "34aa973cd4c4daa4f61eeb2bdbad27316534016f");  // 1e6 times 'a'
}

TEST(SimConfig, RejectsBadSetups) {
    auto g = default_grid();
    SimConfig cfg = base_config(g);
    cfg.t_end = 1.0;
    EXPECT_NO_THROW(cfg.validate());
    SimConfig bad = cfg;
    bad.dt = 0.04;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.t_end = 0.512;  // not a multiple of dt
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.paths = 0;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.blowup_threshold = 0.0;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.grid = nullptr;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Step, ZeroStateIsEquilibriumForSaturatingFamily) {
    auto g = default_grid();
    SimConfig cfg = base_config(g);
    cfg.model = builtin_exp_saturating(FactorParams::generated(5, 0.05, 1.0, 0.5), 1.0);
    const Curve zero = Curve::constant(g, 0.0);
    const std::vector<double> xi = {1.3, -0.4, 2.2, 0.0, -3.1};  // noise cannot act at zero state
    const Curve u1 = step(zero, cfg.model.get(), cfg, xi);
    for (std::size_t i = 0; i < u1.size(); ++i) ASSERT_EQ(u1[i], 0.0);
    EXPECT_EQ(u1.value_at_infinity(), 0.0);
}

TEST(Step, SingleDeterministicStepReproducesClosedFormDrift) {
    auto g = default_grid();
    SimConfig cfg = base_config(g);
    const double sbar = 0.02, lam = 1.0;
    FactorParams p;
    p.c = {sbar};
    p.lam = {lam};
    cfg.model = builtin_additive(p, 1.0);
    cfg.zero_noise = true;
    const Curve zero = Curve::constant(g, 0.0);
    const Curve u1 = step(zero, cfg.model.get(), cfg, {});
    const double tol = cfg.dt * 5.0 * g->dx * g->dx * sbar * sbar / lam;
    for (std::size_t i = 0; i + 1 < u1.size(); ++i) {
        const double x = g->nodes[i] + g->dx;  // the step transports by one cell
        const double exact = cfg.dt * sbar * sbar * std::exp(-lam * x) * (1.0 - std::exp(-lam * x)) / lam;
        ASSERT_NEAR(u1[i], exact, tol) << "node " << i;
    }
}

TEST(Simulate, PureTransportWithoutModel) {
    auto g = default_grid();
    SimConfig cfg = base_config(g);
    cfg.t_end = 2.0;
    cfg.paths = 1;
    cfg.snapshot_stride = 13;
    const Curve u0 = acceptance_state(g);
    const PathSet set = simulate(cfg, u0);
    ASSERT_EQ(set.paths.size(), 1u);
    const PathResult& pr = set.paths[0];
    EXPECT_FALSE(pr.blown_up());
    ASSERT_EQ(pr.diag.size(), cfg.n_steps() + 1);
    for (const auto& [j, curve] : pr.snapshots) {
        const Curve want = shift(u0, double(j) * cfg.dt);
        for (std::size_t i = 0; i < curve.size(); ++i) ASSERT_EQ(curve[i], want[i]);
    }
    // snapshots cover step 0, multiples of the stride, and the final step
    ASSERT_GE(pr.snapshots.size(), 2u);
    EXPECT_EQ(pr.snapshots.front().first, 0u);
    EXPECT_EQ(pr.snapshots.back().first, cfg.n_steps());
    const Curve want_final = shift(u0, cfg.t_end);
    for (std::size_t i = 0; i < want_final.size(); ++i) ASSERT_EQ(pr.final_curve[i], want_final[i]);
}

TEST(Simulate, DeterministicRunMatchesMaturitySpaceAccumulation) {
    // state-independent two-factor family, zero noise: the scheme unrolls to
    //   u_n(x) = u0(x + n dt) + dt * sum_{m=1..n} beta(x + m dt)
    // with beta known in closed form, so an independent oracle needs no
    // library calls at all.
    auto g = default_grid();
    SimConfig cfg = base_config(g);
    cfg.t_end = 2.0;
    cfg.zero_noise = true;
    FactorParams p;
    p.c = {0.02, 0.01};
    p.lam = {1.0, 2.0};
    cfg.model = builtin_additive(p, 1.0);
    const Curve u0 = acceptance_state(g);
    const PathSet set = simulate(cfg, u0);
    const Curve& got = set.paths[0].final_curve;

    const std::size_t n = cfg.n_steps();
    auto beta_exact = [&](double y) {
        double b = 0.0;
        for (std::size_t k = 0; k < p.c.size(); ++k)
            b += p.c[k] * p.c[k] * std::exp(-p.lam[k] * y) * (1.0 - std::exp(-p.lam[k] * y)) /
                 p.lam[k];
        return b;
    };
    auto u0_ext = [&](std::size_t idx) { return idx < u0.size() ? u0[idx] : u0.value_at_infinity(); };
    double beta_scale = 0.0;
    for (std::size_t k = 0; k < p.c.size(); ++k) beta_scale += p.c[k] * p.c[k] / p.lam[k];
    const double tol = cfg.t_end * 5.0 * g->dx * g->dx * beta_scale + 1e-12;
    for (std::size_t i = 0; i < got.size(); ++i) {
        double want = u0_ext(i + n);
        for (std::size_t m = 1; m <= n; ++m) want += cfg.dt * beta_exact(g->nodes[i] + double(m) * g->dx);
        ASSERT_NEAR(got[i], want, tol) << "node " << i;
    }
}

TEST(Simulate, SameSeedBitwiseReproducibleAcrossThreadCounts) {
    auto g = default_grid();
    SimConfig cfg = base_config(g);
    cfg.t_end = 0.5;
    cfg.paths = 3;
    cfg.seed = 777;
    cfg.model = builtin_exp_saturating(FactorParams::generated(5, 0.05, 1.0, 0.5), 1.0);
    const Curve u0 = acceptance_state(g);
    const PathSet a = simulate(cfg, u0);
    const PathSet b = simulate(cfg, u0);
    ASSERT_EQ(diag_csv(a), diag_csv(b));
    for (std::size_t p = 0; p < 3; ++p)
        for (std::size_t i = 0; i < a.paths[p].final_curve.size(); ++i)
            ASSERT_EQ(a.paths[p].final_curve[i], b.paths[p].final_curve[i]);

    setenv("MUSIELA_THREADS", "3", 1);
    const PathSet c = simulate(cfg, u0);
    unsetenv("MUSIELA_THREADS");
    ASSERT_EQ(diag_csv(a), diag_csv(c));

    SimConfig other = cfg;
    other.seed = 778;
    EXPECT_NE(diag_csv(a), diag_csv(simulate(other, u0)));
}

TEST(Simulate, NoiseDrawsArePinnedToPathStepFactor) {
    // one step, reconstructed outside the solver with the documented update
    // order: v_i = (u_i + dt*beta_i) + sqrt(dt)*S_i, then one-cell transport
    auto g = default_grid();
    SimConfig cfg = base_config(g);
    cfg.t_end = cfg.dt;
    cfg.paths = 2;
    cfg.seed = 91;
    cfg.model = builtin_exp_saturating(FactorParams::generated(3, 0.05, 1.0, 0.5), 1.0);
    const Curve u0 = acceptance_state(g);
    const PathSet set = simulate(cfg, u0);

    const rng::NoiseField noise(cfg.seed);
    for (std::size_t p = 0; p < cfg.paths; ++p) {
        const Curve b = drift(*cfg.model, u0, cfg.alpha).beta;
        std::vector<double> acc(u0.size(), 0.0), comp(u0.size(), 0.0);
        for (std::size_t k = 0; k < 3; ++k) {
            const double xi = noise.gaussian(p, 0, k);
            for (std::size_t i = 0; i < u0.size(); ++i) {
                const double term = cfg.model->eval(k, g->nodes[i], u0[i]) * xi;
                const double y = term - comp[i];
                const double t = acc[i] + y;
                comp[i] = (t - acc[i]) - y;
                acc[i] = t;
            }
        }
        const double sq = std::sqrt(cfg.dt);
        std::vector<double> v(u0.size());
        for (std::size_t i = 0; i < u0.size(); ++i) v[i] = (u0[i] + cfg.dt * b[i]) + sq * acc[i];
        for (std::size_t i = 0; i < u0.size(); ++i) {
            const double want = (i + 1 < u0.size()) ? v[i + 1] : u0.value_at_infinity();
            ASSERT_EQ(set.paths[p].final_curve[i], want) << "path " << p << " node " << i;
        }
    }
}

TEST(Simulate, BlowupTruncatesThePath) {
    auto g = default_grid();
    SimConfig cfg = base_config(g);
    cfg.alpha = 0.1;
    cfg.t_end = 1.0;
    cfg.zero_noise = true;
    cfg.blowup_threshold = 0.03;
    FactorParams p;
    p.c = {0.5};
    p.lam = {0.1};
    cfg.model = builtin_additive(p, cfg.alpha);
    const PathSet set = simulate(cfg, Curve::constant(g, 0.0));
    const PathResult& pr = set.paths[0];
    ASSERT_TRUE(pr.blown_up());
    EXPECT_LT(pr.blowup_step, cfg.n_steps());
    EXPECT_EQ(pr.diag.size(), pr.blowup_step);  // states 0 .. blowup_step - 1 survive
    EXPECT_TRUE(pr.final_curve.all_finite());
    EXPECT_LT(pr.final_curve.max_abs(), cfg.blowup_threshold);
}

TEST(Simulate, MeanSquareNormStaysUnderLinearGrowthEnvelope) {
    auto g = default_grid();
    SimConfig cfg = base_config(g);
    cfg.t_end = 1.5;
    cfg.paths = 60;
    cfg.seed = 2024;
    cfg.snapshot_stride = 10;
    cfg.model = builtin_exp_saturating(FactorParams::generated(5, 0.05, 1.0, 0.5), 1.0);
    const Curve u0 = acceptance_state(g);
    const PathSet set = simulate(cfg, u0);

    // explicit envelope constant from the family's closed forms:
    // D^2 bounds the squared diffusion mass, B the drift norm
    double D2 = 0.0, S2 = 0.0;
    for (std::size_t k = 1; k <= 5; ++k) {
        const double c = 0.05 / double(k), lam = 1.0 + 0.5 * double(k);
        D2 += c * c / (2.0 * lam + cfg.alpha);
        S2 += c * c / (2.0 * lam - cfg.alpha);
    }
    const double B = std::sqrt(S2) * std::sqrt(D2) / std::sqrt(cfg.alpha);
    const double C = cfg.alpha + 1.0 + B * B + D2 + 1.0;

    const Weight w = Weight::decaying(cfg.alpha);
    const double u0n = norm_L2_weighted(u0, w);
    for (std::size_t snap = 0; snap < set.paths[0].snapshots.size(); ++snap) {
        const std::size_t j = set.paths[0].snapshots[snap].first;
        double mean_sq = 0.0;
        for (const auto& pr : set.paths) {
            const double nn = norm_L2_weighted(pr.snapshots[snap].second, w);
            mean_sq += nn * nn;
        }
        mean_sq /= double(set.paths.size());
        const double t = double(j) * cfg.dt;
        ASSERT_LE(mean_sq, (1.0 + u0n * u0n) * std::exp(C * t)) << "t=" << t;
    }
}

TEST(SimulateYosida, ConstantStateIsAFixedPoint) {
    auto g = default_grid();
    SimConfig cfg = base_config(g);
    cfg.t_end = 1.0;
    cfg.yosida_lambda = 0.2;
    const PathSet set = simulate_yosida(cfg, Curve::constant(g, 0.37));
    const Curve& u = set.paths[0].final_curve;
    for (std::size_t i = 0; i < u.size(); ++i) ASSERT_NEAR(u[i], 0.37, 1e-10);
    EXPECT_EQ(u.value_at_infinity(), 0.37);
}

TEST(SimulateYosida, ConvergesToTransportAsLambdaShrinks) {
    auto g = default_grid();
    SimConfig cfg = base_config(g);
    cfg.t_end = 1.0;
    const Curve u0 = acceptance_state(g);
    const Curve want = shift(u0, cfg.t_end);
    double prev = std::numeric_limits<double>::infinity();
    for (double lambda : {0.4, 0.2, 0.1, 0.05}) {
        cfg.yosida_lambda = lambda;
        const Curve got = simulate_yosida(cfg, u0).paths[0].final_curve;
        double err = 0.0;
        for (std::size_t i = 0; i < got.size(); ++i) err = std::max(err, std::abs(got[i] - want[i]));
        EXPECT_LT(err, prev + 1e-12) << "lambda " << lambda;
        prev = err;
    }
    EXPECT_LT(prev, 1e-2);

    cfg.yosida_lambda = 0.01;  // below dt: outside the stable region
    EXPECT_THROW(simulate_yosida(cfg, u0), std::invalid_argument);
    cfg.yosida_lambda.reset();
    EXPECT_THROW(simulate_yosida(cfg, u0), std::invalid_argument);
}

TEST(SimulateYosida, ConsumesTheSameDrawsAsTheSplittingScheme) {
    auto g = default_grid();
    SimConfig cfg = base_config(g);
    cfg.t_end = cfg.dt;
    cfg.seed = 5150;
    cfg.yosida_lambda = 0.25;
    cfg.model = builtin_exp_saturating(FactorParams::generated(3, 0.05, 1.0, 0.5), 1.0);
    const Curve u0 = acceptance_state(g);
    const PathSet set = simulate_yosida(cfg, u0);

    const rng::NoiseField noise(cfg.seed);
    const Curve b = drift(*cfg.model, u0, cfg.alpha).beta;
    const Curve av = yosida_apply(u0, *cfg.yosida_lambda);
    std::vector<double> acc(u0.size(), 0.0), comp(u0.size(), 0.0);
    for (std::size_t k = 0; k < 3; ++k) {
        const double xi = noise.gaussian(0, 0, k);  // identical indexing to simulate
        for (std::size_t i = 0; i < u0.size(); ++i) {
            const double term = cfg.model->eval(k, g->nodes[i], u0[i]) * xi;
            const double y = term - comp[i];
            const double t = acc[i] + y;
            comp[i] = (t - acc[i]) - y;
            acc[i] = t;
        }
    }
    const double sq = std::sqrt(cfg.dt);
    for (std::size_t i = 0; i < u0.size(); ++i) {
        const double want = (u0[i] + cfg.dt * (b[i] - av[i])) + sq * acc[i];
        ASSERT_EQ(set.paths[0].final_curve[i], want) << "node " << i;
    }
}

TEST(Persist, ArtifactsAreBytewiseReproducible) {
    namespace fs = std::filesystem;
    auto g = default_grid();
    SimConfig cfg = base_config(g);
    cfg.t_end = 0.5;
    cfg.paths = 2;
    cfg.seed = 3;
    cfg.snapshot_stride = 5;
    cfg.model = builtin_exp_saturating(FactorParams::generated(3, 0.05, 1.0, 0.5), 1.0);
    const Curve u0 = acceptance_state(g);

    const fs::path dir1 = fs::temp_directory_path() / "musiela_persist_a";
    const fs::path dir2 = fs::temp_directory_path() / "musiela_persist_b";
    fs::remove_all(dir1);
    fs::remove_all(dir2);
    persist(simulate(cfg, u0), cfg, dir1.string());
    persist(simulate(cfg, u0), cfg, dir2.string());

    const std::string csv1 = slurp((dir1 / "diag.csv").string());
    EXPECT_EQ(csv1, slurp((dir2 / "diag.csv").string()));
    const std::string meta1 = slurp((dir1 / "meta.json").string());
    EXPECT_EQ(meta1, slurp((dir2 / "meta.json").string()));

    // meta parses, echoes the config, and content-addresses the diagnostics
    const auto meta = nlohmann::json::parse(meta1);
    EXPECT_EQ(meta["paths"], 2);
    EXPECT_EQ(meta["seed"], 3);
    EXPECT_EQ(meta["scheme"], "splitting");
    EXPECT_EQ(meta["model"]["family"], "exp_tanh");
    EXPECT_EQ(meta["model"]["K"], 3);
    EXPECT_EQ(meta["diag_sha1"], hash::sha1_hex(csv1));

    // snapshots land as curve files and read back exactly
    EXPECT_TRUE(fs::exists(dir1 / "curves" / "p0_t0.csv"));
    EXPECT_TRUE(fs::exists(dir1 / "curves" / "p1_t10.csv"));
    const Curve back = read_csv_file((dir1 / "curves" / "p1_t10.csv").string());
    const PathSet again = simulate(cfg, u0);
    const Curve& orig = again.paths[1].snapshots.back().second;
    for (std::size_t i = 0; i < orig.size(); ++i) ASSERT_EQ(back[i], orig[i]);

    // row count: header + paths * (steps + 1)
    std::size_t rows = 0;
    for (char ch : csv1) rows += (ch == '\n');
    EXPECT_EQ(rows, 1u + 2u * (cfg.n_steps() + 1u));

    fs::remove_all(dir1);
    fs::remove_all(dir2);
}
