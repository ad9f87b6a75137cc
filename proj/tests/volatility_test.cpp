#include <gtest/gtest.h>

#include <cmath>
#include <optional>

#include "musiela/quadrature.hpp"
#include "musiela/random.hpp"
#include "musiela/volatility.hpp"

using namespace musiela;

namespace {

double fd_x(const VolatilityModel& mod, std::size_t k, double x, double r, double h = 1e-5) {
    return (mod.eval(k, x + h, r) - mod.eval(k, x - h, r)) / (2.0 * h);
}
double fd_r(const VolatilityModel& mod, std::size_t k, double x, double r, double h = 1e-5) {
    return (mod.eval(k, x, r + h) - mod.eval(k, x, r - h)) / (2.0 * h);
}

/// Probes the declared derivative dominations on randomized points.
void probe_domination_contract(const VolatilityModel& mod, std::uint64_t seed) {
    rng::Stream s(seed);
    for (int trial = 0; trial < 4000; ++trial) {
        const std::size_t k = s.pick(mod.factors());
        const double x = s.uniform(0.0, 25.0);
        const double r = s.uniform(-6.0, 6.0);
        const double r2 = s.uniform(-6.0, 6.0);
        const double tol = 1e-12;

        ASSERT_LE(std::abs(mod.eval(k, x, r)), mod.psi_tail(k, x) * mod.eta(k, r) + tol);
        ASSERT_LE(std::abs(mod.d1(k, x, r)), mod.psi(k, x) * mod.eta(k, r) + tol);
        ASSERT_LE(std::abs(mod.d2(k, x, r)), mod.eta(k, r) + tol);
        ASSERT_LE(std::abs(mod.d1(k, x, r) - mod.d1(k, x, r2)),
                  mod.psi(k, x) * (mod.eta(k, r) + mod.eta(k, r2)) * std::abs(r - r2) + tol);
        ASSERT_LE(std::abs(mod.d2(k, x, r) - mod.d2(k, x, r2)),
                  (mod.eta(k, r) + mod.eta(k, r2)) * std::abs(r - r2) + tol);
    }
}

}  // namespace

TEST(MaturityCutoff, RampShapeAndSlope) {
    for (unsigned n : {1u, 3u, 16u}) {
        const double dn = n;
        EXPECT_EQ(maturity_cutoff(n, 0.0), 1.0);
        EXPECT_EQ(maturity_cutoff(n, dn), 1.0);
        EXPECT_EQ(maturity_cutoff(n, dn + 1.0), 0.0);
        EXPECT_EQ(maturity_cutoff(n, dn + 7.3), 0.0);
        EXPECT_NEAR(maturity_cutoff(n, dn + 0.5), 0.5, 1e-15);
        double prev = 1.0;
        for (double x = dn; x <= dn + 1.0; x += 1.0 / 128.0) {
            const double v = maturity_cutoff(n, x);
            ASSERT_GE(v, 0.0);
            ASSERT_LE(v, prev + 1e-15);
            ASSERT_LE(std::abs(maturity_cutoff_d(n, x)), 0.5 * M_PI + 1e-15);
            prev = v;
        }
        // slope consistency away from the joins; divide by the representable
        // step, not the nominal one, to keep the quotient honest near x ~ n
        for (double x : {dn + 0.13, dn + 0.5, dn + 0.83}) {
            const double xp = x + 1e-6, xm = x - 1e-6;
            const double fd = (maturity_cutoff(n, xp) - maturity_cutoff(n, xm)) / (xp - xm);
            EXPECT_NEAR(maturity_cutoff_d(n, x), fd, 1e-9);
        }
    }
    EXPECT_THROW(maturity_cutoff(0, 1.0), std::invalid_argument);
}

TEST(StateClamp, OddIdentityThenSaturates) {
    for (unsigned m : {1u, 2u, 8u}) {
        const double dm = m;
        for (double r = -dm; r <= dm; r += 0.25) EXPECT_EQ(state_clamp(m, r), r);
        EXPECT_EQ(state_clamp(m, dm + 1.0), dm + 0.5);
        EXPECT_EQ(state_clamp(m, dm + 40.0), dm + 0.5);
        EXPECT_EQ(state_clamp(m, -(dm + 40.0)), -(dm + 0.5));
        rng::Stream s(300 + m);
        for (int trial = 0; trial < 2000; ++trial) {
            const double r = s.uniform(-dm - 5.0, dm + 5.0);
            const double r2 = s.uniform(-dm - 5.0, dm + 5.0);
            const double v = state_clamp(m, r);
            ASSERT_EQ(state_clamp(m, -r), -v);  // odd by construction
            ASSERT_LE(std::abs(v), std::min(std::abs(r), dm + 1.0) + 1e-15);
            ASSERT_LE(std::abs(v - state_clamp(m, r2)), std::abs(r - r2) + 1e-15);
            const double d = state_clamp_d(m, r);
            ASSERT_GE(d, 0.0);
            ASSERT_LE(d, 1.0);
        }
        for (double r : {dm + 0.21, dm + 0.68, -(dm + 0.43)}) {
            const double rp = r + 1e-6, rm = r - 1e-6;
            const double fd = (state_clamp(m, rp) - state_clamp(m, rm)) / (rp - rm);
            EXPECT_NEAR(state_clamp_d(m, r), fd, 1e-9);
            const double fdd = (state_clamp_d(m, rp) - state_clamp_d(m, rm)) / (rp - rm);
            EXPECT_LE(std::abs(fdd), 2.0);  // curvature cap used by the clamp estimates
        }
    }
}

TEST(ExpSaturating, ZeroStateGivesZeroAndDerivativesMatchFd) {
    auto mod = ExpSaturatingModel(FactorParams::generated(5, 0.05, 1.0, 0.5), 1.0);
    rng::Stream s(41);
    for (std::size_t k = 0; k < mod.factors(); ++k) {
        EXPECT_EQ(mod.eval(k, 0.0, 0.0), 0.0);
        EXPECT_EQ(mod.eval(k, 7.3, 0.0), 0.0);
    }
    for (int trial = 0; trial < 2000; ++trial) {
        const std::size_t k = s.pick(5);
        const double x = s.uniform(0.1, 20.0);
        const double r = s.uniform(-4.0, 4.0);
        ASSERT_NEAR(mod.d1(k, x, r), fd_x(mod, k, x, r), 1e-8 * (1.0 + std::abs(mod.d1(k, x, r))));
        ASSERT_NEAR(mod.d2(k, x, r), fd_r(mod, k, x, r), 1e-8 * (1.0 + std::abs(mod.d2(k, x, r))));
        // scaled-state bound: the component is controlled by |r| near zero
        ASSERT_LE(std::abs(mod.eval(k, x, r)),
                  std::abs(r) * mod.eta(k, r) / mod.size(k) * mod.psi_tail(k, x) * mod.size(k) + 1e-12);
    }
}

TEST(ExpSaturating, DominationContract) {
    probe_domination_contract(ExpSaturatingModel(FactorParams::generated(5, 0.05, 1.0, 0.5), 1.0), 7001);
    // tightness: the maturity bound saturates for large |r|
    auto mod = ExpSaturatingModel(FactorParams::generated(3, 0.4, 1.0, 0.25), 1.0);
    const double ratio = std::abs(mod.d1(1, 2.0, 25.0)) / (mod.psi(1, 2.0) * mod.eta(1, 25.0));
    EXPECT_GT(ratio, 1.0 - 1e-12);
}

TEST(Additive, StateIndependentWithNonzeroZeroState) {
    auto mod = AdditiveModel(FactorParams::generated(4, 0.02, 1.0, 0.0), 1.0);
    EXPECT_GT(mod.eval(0, 0.0, 0.0), 0.0);
    EXPECT_EQ(mod.eval(1, 3.0, -2.0), mod.eval(1, 3.0, 5.0));
    EXPECT_EQ(mod.d2(2, 1.0, 0.3), 0.0);
    probe_domination_contract(mod, 7002);
}

TEST(FactorParams, RejectsBadConfigurations) {
    EXPECT_THROW(ExpSaturatingModel(FactorParams::generated(3, 0.05, 0.4, 0.0), 1.0),
                 std::invalid_argument);  // 2 lam = 0.8 <= alpha
    FactorParams mismatched;
    mismatched.c = {0.1, 0.2};
    mismatched.lam = {1.0};
    EXPECT_THROW(ExpSaturatingModel(mismatched, 1.0), std::invalid_argument);
    FactorParams negative;
    negative.c = {-0.1};
    negative.lam = {1.0};
    EXPECT_THROW(ExpSaturatingModel(negative, 1.0), std::invalid_argument);
    auto ok = ExpSaturatingModel(FactorParams::generated(2, 0.05, 1.0, 0.5), 1.0);
    EXPECT_THROW(ok.psi_l2_alpha(0, 3.0), std::invalid_argument);  // 2 lam = 3 not > alpha
}

TEST(ExpFamily, AnalyticNormsMatchQuadratureAndFrozenValues) {
    auto mod = ExpSaturatingModel(FactorParams::generated(5, 0.05, 1.0, 0.5), 1.0);
    const double alpha = 1.0;
    for (std::size_t k = 0; k < mod.factors(); ++k) {
        const double direct = std::sqrt(quad::simpson(
            [&](double x) {
                const double p = mod.psi(k, x);
                return p * p * std::exp(alpha * x);
            },
            0.0, 60.0, 1 << 15));
        ASSERT_NEAR(mod.psi_l2_alpha(k, alpha), direct, 1e-11);
    }
    EXPECT_NEAR(eta_tilde(mod, 0.7), 0.060489898146531688, 1e-15);
    EXPECT_NEAR(psi_l2_norm(mod, alpha), 2.8040149785619905, 1e-13);
    EXPECT_EQ(mod.truncation_tail(alpha), std::numeric_limits<double>::infinity());

    FactorParams listed;
    listed.c = {0.1, 0.05};
    listed.lam = {1.0, 2.0};
    EXPECT_EQ(ExpSaturatingModel(listed, 1.0).truncation_tail(alpha), 0.0);
}

TEST(Laddered, IdentityRegionAndSupport) {
    auto base = builtin_exp_saturating(FactorParams::generated(3, 0.3, 1.0, 0.5), 1.0);
    LadderedModel both(base, 4u, 2u);
    rng::Stream s(88);
    for (int trial = 0; trial < 2000; ++trial) {
        const std::size_t k = s.pick(3);
        const double x_in = s.uniform(0.0, 4.0);
        const double r_in = s.uniform(-2.0, 2.0);
        ASSERT_EQ(both.eval(k, x_in, r_in), base->eval(k, x_in, r_in));
        ASSERT_EQ(both.d1(k, x_in, r_in), base->d1(k, x_in, r_in));
        ASSERT_EQ(both.d2(k, x_in, r_in), base->d2(k, x_in, r_in));
        const double x_out = s.uniform(5.0, 30.0);
        ASSERT_EQ(both.eval(k, x_out, s.uniform(-9.0, 9.0)), 0.0);
    }
    EXPECT_THROW(LadderedModel(nullptr, 1u, std::nullopt), std::invalid_argument);
    EXPECT_THROW(LadderedModel(base, 0u, std::nullopt), std::invalid_argument);
}

TEST(Laddered, ChainRuleMatchesFdOnRamps) {
    auto base = builtin_exp_saturating(FactorParams::generated(3, 0.3, 1.0, 0.5), 1.0);
    LadderedModel both(base, 4u, 2u);
    rng::Stream s(89);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t k = s.pick(3);
        // keep clear of the C^1 joins so central differences see smooth pieces
        const double x = 4.0 + s.uniform(0.05, 0.95);
        const double r = (s.u01() < 0.5 ? 1.0 : -1.0) * (2.0 + s.uniform(0.05, 0.95));
        ASSERT_NEAR(both.d1(k, x, r), fd_x(both, k, x, r), 1e-7);
        ASSERT_NEAR(both.d2(k, x, r), fd_r(both, k, x, r), 1e-7);
    }
}

TEST(Laddered, DeclaredDominationHoldsForEveryLadderCombination) {
    auto base = builtin_exp_saturating(FactorParams::generated(4, 0.2, 1.0, 0.5), 1.0);
    probe_domination_contract(LadderedModel(base, 3u, std::nullopt), 7003);
    probe_domination_contract(LadderedModel(base, std::nullopt, 2u), 7004);
    probe_domination_contract(LadderedModel(base, 2u, 1u), 7005);
}

TEST(Laddered, CutTailDominatesComponent) {
    // |sigma_k(x,r) chi_n(x)| <= chi_n(x) (int_x^inf psi_k) eta_k(r), sharp in |r|.
    auto base = builtin_exp_saturating(FactorParams::generated(4, 0.2, 1.0, 0.5), 1.0);
    for (unsigned n : {1u, 2u, 5u}) {
        LadderedModel lad(base, n, std::nullopt);
        rng::Stream s(900 + n);
        for (int trial = 0; trial < 2000; ++trial) {
            const std::size_t k = s.pick(4);
            const double x = s.uniform(0.0, n + 2.0);
            const double r = s.uniform(-8.0, 8.0);
            const double bound = maturity_cutoff(n, x) * base->psi_tail(k, x) * base->eta(k, r);
            ASSERT_LE(std::abs(lad.eval(k, x, r)), bound + 1e-12);
        }
    }
}

TEST(Laddered, TailAndNormQuadraturesAgreeWithClosedForms) {
    FactorParams one;
    one.c = {1.0};
    one.lam = {1.0};
    auto base = builtin_exp_saturating(one, 1.0);
    LadderedModel lad(base, 2u, std::nullopt);

    // int_0^inf of the declared dominating psi plus ramp term, lam = 1, n = 2
    EXPECT_NEAR(lad.psi_tail(0, 0.0), 1.0840455783263116, 1e-9);
    EXPECT_EQ(lad.psi_tail(0, 3.0), base->psi_tail(0, 3.0));

    const double alpha = 1.0;
    double direct2 = 0.0;  // piecewise so no kink sits inside a panel run
    for (auto [a, b] : {std::pair{0.0, 2.0}, std::pair{2.0, 3.0}}) {
        direct2 += quad::simpson(
            [&](double x) {
                const double p = lad.psi(0, x);
                return p * p * std::exp(alpha * x);
            },
            a, b, 8192);
    }
    const double tail2 = quad::simpson(
        [&](double x) {
            const double p = base->psi(0, x);
            return p * p * std::exp(alpha * x);
        },
        3.0, 60.0, 8192);
    EXPECT_NEAR(lad.psi_l2_alpha(0, alpha), std::sqrt(direct2 + tail2), 1e-10);
}

TEST(LadderNorms, MatchFrozenSingleFactorValues) {
    FactorParams one;
    one.c = {1.0};
    one.lam = {1.0};
    auto base = builtin_exp_saturating(one, 1.0);
    const auto t1 = psi_ladder_norms(*base, 1, 1.0);
    EXPECT_NEAR(t1.ramp * t1.ramp, 0.27980237853048903, 1e-12);
    EXPECT_NEAR(t1.cut * t1.cut, 0.74319052349460517, 1e-12);
    const auto t2 = psi_ladder_norms(*base, 2, 1.0);
    EXPECT_NEAR(t2.ramp * t2.ramp, 0.10293354265223668, 1e-12);
    EXPECT_NEAR(t2.cut * t2.cut, 0.90552507329566471, 1e-12);
}

TEST(LadderNorms, RampFamilyDecaysAndMatchesClosedFormAggregate) {
    auto mod = ExpSaturatingModel(FactorParams::generated(5, 0.05, 1.0, 0.5), 1.0);
    const double alpha = 1.0;
    // closed form: per factor (pi/2)^2 e^{g n} (e^g - 1) [1/(2g) - g/(2(g^2+4 pi^2))], g = alpha - 2 lam
    auto closed_aggregate = [&](unsigned n) {
        double s = 0.0;
        for (std::size_t k = 0; k < mod.factors(); ++k) {
            const double g = alpha - 2.0 * mod.rate(k);
            const double unit =
                (std::exp(g) - 1.0) * (1.0 / (2.0 * g) - g / (2.0 * (g * g + 4.0 * M_PI * M_PI)));
            s += 0.25 * M_PI * M_PI * std::exp(g * n) * unit;
        }
        return std::sqrt(s);
    };
    const double frozen[] = {0.29429391694183286, 0.098685203574829999, 0.012823569378368031};
    const unsigned ns[] = {1u, 2u, 4u};
    double prev = 1e300;
    for (int i = 0; i < 3; ++i) {
        const auto t = psi_ladder_norms(mod, ns[i], alpha);
        EXPECT_NEAR(t.ramp, closed_aggregate(ns[i]), 1e-10);
        EXPECT_NEAR(t.ramp, frozen[i], 1e-10);
        EXPECT_LT(t.ramp, prev);
        prev = t.ramp;
    }
}

TEST(SigmaCurve, SamplesSuperpositionWithZeroTail) {
    auto grid = Grid::make(20.0, 401);
    auto mod = ExpSaturatingModel(FactorParams::generated(3, 0.5, 1.0, 0.5), 1.0);
    rng::Stream s(555);
    const Curve v = rng::random_smooth_curve(grid, s, 1.5);
    const Curve sv = sigma_curve(mod, 1, v);
    EXPECT_EQ(sv.value_at_infinity(), 0.0);
    for (std::size_t i = 0; i < grid->n_points; i += 37)
        ASSERT_EQ(sv.values()[i], mod.eval(1, grid->nodes[i], v.values()[i]));
}
