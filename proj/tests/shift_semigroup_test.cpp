#include "musiela/shift_semigroup.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "musiela/random.hpp"

namespace {

using namespace musiela;

std::shared_ptr<const Grid> desk_grid() { return Grid::make_with_spacing(20.0, 0.05); }

TEST(Shift, MovesValuesByWholeCellsExactly) {
    auto g = desk_grid();
    rng::Stream st(5);
    const Curve v = rng::random_piecewise_curve(g, st, 1.0);
    const Curve s = shift(v, 1.0);
    const std::size_t k = 20;  // 1.0 / 0.05
    for (std::size_t i = 0; i + k < v.size(); ++i) EXPECT_EQ(s[i], v[i + k]);
    for (std::size_t i = v.size() - k; i < v.size(); ++i) EXPECT_EQ(s[i], v.value_at_infinity());
    EXPECT_EQ(s.value_at_infinity(), v.value_at_infinity());
}

TEST(Shift, SemigroupLawIsExact) {
    auto g = desk_grid();
    rng::Stream st(6);
    const Curve v = rng::random_piecewise_curve(g, st, 1.0);
    const Curve a = shift(shift(v, 0.35), 0.8);
    const Curve b = shift(v, 1.15);
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(Shift, IdentityAtZeroAndFullFlushBeyondWindow) {
    auto g = desk_grid();
    rng::Stream st(8);
    const Curve v = rng::random_piecewise_curve(g, st, 1.0);
    const Curve z = shift(v, 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(z[i], v[i]);
    const Curve far = shift(v, 25.0);  // beyond x_max: everything is tail
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(far[i], v.value_at_infinity());
}

TEST(Shift, RejectsOffLatticeTimes) {
    auto g = desk_grid();
    const Curve v = Curve::constant(g, 1.0);
    EXPECT_THROW(shift(v, 0.03), std::invalid_argument);
    EXPECT_THROW(shift(v, -0.05), std::invalid_argument);
}

// Differential check pinning the sign convention: shifting forward by one cell
// equals v + dx * v' to first order, i.e. the generator is -d/dx with a minus
// sign absorbed as A v = -v'.
TEST(Shift, OneCellShiftMatchesFirstOrderExpansion) {
    auto g = desk_grid();
    const Curve v = Curve::sample(g, [](double x) { return std::exp(-x); }, 0.0);
    const Curve s = shift(v, g->dx);
    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < v.size(); ++i) {
        const double first_order = v[i] - g->dx * std::exp(-g->nodes[i]);  // v + dx v'
        worst = std::max(worst, std::abs(s[i] - first_order));
    }
    EXPECT_LE(worst, 0.6 * g->dx * g->dx);  // remainder dx^2/2 sup|v''|
}

TEST(Shift, ContractsHNormOnSmoothCurves) {
    auto g = desk_grid();
    rng::Stream st(17);
    const double alpha = 1.0;
    for (int trial = 0; trial < 200; ++trial) {
        const Curve v = rng::random_smooth_curve(g, st, 1.0);
        const double n0 = norm_H_alpha(v, alpha);
        for (double t : {0.05, 0.25, 1.0, 4.0}) {
            EXPECT_LE(norm_H_alpha(shift(v, t), alpha), n0 + 1e-9)
                << "trial " << trial << " t " << t;
        }
    }
}

// e^{-alpha t / 2} S(t) contracts the decaying-weight norm (curves decaying to
// a zero tail level, the natural members of that space).
TEST(Shift, DampedShiftContractsDecayingWeightNorm) {
    auto g = desk_grid();
    rng::Stream st(18);
    const double alpha = 1.0;
    const Weight w = Weight::decaying(alpha);
    for (int trial = 0; trial < 200; ++trial) {
        const Curve v = rng::random_decaying_curve(g, st, 1.0);
        const double n0 = norm_L2_weighted(v, w);
        for (double t : {0.05, 0.5, 2.0}) {
            const double lhs = std::exp(-0.5 * alpha * t) * norm_L2_weighted(shift(v, t), w);
            EXPECT_LE(lhs, n0 + 1e-9) << "trial " << trial << " t " << t;
        }
    }
}

// Oracle: the resolvent of e^{-x} is e^{-x} / (1 + lambda) (flat zero tail
// contributes only e^{-20}).
TEST(Resolvent, ClosedFormExponential) {
    auto g = desk_grid();
    const Curve v = Curve::sample(g, [](double x) { return std::exp(-x); }, 0.0);
    for (double lambda : {0.05, 0.1, 0.5, 1.0}) {
        const Curve w = resolvent(v, lambda);
        double worst = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i)
            worst = std::max(worst, std::abs(w[i] - std::exp(-g->nodes[i]) / (1.0 + lambda)));
        EXPECT_LE(worst, 5.0 * g->dx * g->dx) << "lambda " << lambda;
    }
}

TEST(Resolvent, FixesConstants) {
    auto g = desk_grid();
    const Curve v = Curve::constant(g, 3.5);
    const Curve w = resolvent(v, 0.7);
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(w[i], 3.5, 1e-12);
}

TEST(Resolvent, PreservesPositivityExactly) {
    auto g = desk_grid();
    rng::Stream st(21);
    for (int trial = 0; trial < 50; ++trial) {
        Curve v = rng::random_piecewise_curve(g, st, 1.0);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::abs(v[i]);
        v.value_at_infinity() = std::abs(v.value_at_infinity());
        const Curve w = resolvent(v, 0.2);
        for (std::size_t i = 0; i < w.size(); ++i) EXPECT_GE(w[i], 0.0);
    }
}

TEST(Resolvent, ContractsSupNorm) {
    auto g = desk_grid();
    rng::Stream st(22);
    for (int trial = 0; trial < 50; ++trial) {
        const Curve v = rng::random_piecewise_curve(g, st, 2.0);
        const Curve w = resolvent(v, 0.3);
        EXPECT_LE(w.max_abs(), v.max_abs() + 1e-12);
    }
}

// Yosida approximation converges to A v = -v' at rate O(lambda) + O(dx^2).
TEST(Yosida, ConvergesToGeneratorOnSmoothCurve) {
    auto g = desk_grid();
    const Curve v = Curve::sample(g, [](double x) { return std::exp(-x); }, 0.0);
    const Curve av = Curve::sample(g, [](double x) { return std::exp(-x); }, 0.0);  // -v' = e^{-x}
    const Weight w = Weight::decaying(1.0);
    double prev = std::numeric_limits<double>::infinity();
    for (double lambda : {0.4, 0.2, 0.1, 0.05}) {
        const double err = norm_L2_weighted(yosida_apply(v, lambda) - av, w);
        // closed form: ||A_lambda v - A v|| = (lambda/(1+lambda)) ||e^{-x}|| + mesh term
        const double predicted = lambda / (1.0 + lambda) * norm_L2_weighted(av, w);
        EXPECT_NEAR(err, predicted, 0.05 * predicted + g->dx * g->dx / lambda);
        EXPECT_LT(err, prev);
        prev = err;
    }
}

TEST(Yosida, ClosedFormOnExponential) {
    auto g = desk_grid();
    const Curve v = Curve::sample(g, [](double x) { return std::exp(-x); }, 0.0);
    const double lambda = 0.25;
    const Curve y = yosida_apply(v, lambda);
    double worst = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i)
        worst = std::max(worst, std::abs(y[i] - std::exp(-g->nodes[i]) / (1.0 + lambda)));
    EXPECT_LE(worst, 5.0 * g->dx * g->dx / lambda);
}

// Quasi-monotone pairing: <A_lambda v, v^-> <= (alpha/2)/(1 - lambda alpha/2) ||v^-||^2.
// The allowance is genuine: an affine-growth negative state has a strictly
// positive pairing, so a zero bound would be wrong on this weighted space.
TEST(Yosida, NegativePairingRespectsQuasiMonotoneBound) {
    auto g = desk_grid();
    const double alpha = 1.0;
    rng::Stream st(23);
    for (double lambda : {0.4, 0.1, 0.05}) {
        const double allowance = 0.5 * alpha / (1.0 - 0.5 * lambda * alpha);
        for (int trial = 0; trial < 100; ++trial) {
            const Curve v = rng::random_smooth_curve(g, st, 1.0);
            const Curve vm = negative_part(v);
            const double bound = allowance * inner_L2_weighted(vm, vm, Weight::decaying(alpha));
            EXPECT_LE(yosida_negative_pairing(v, lambda, alpha), bound + 1e-9)
                << "lambda " << lambda << " trial " << trial;
        }
    }
    const Curve affine = Curve::sample(g, [](double x) { return -(1.0 + x); });
    EXPECT_GT(yosida_negative_pairing(affine, 0.1, alpha), 0.0);
    EXPECT_THROW(yosida_negative_pairing(affine, 2.5, alpha), std::invalid_argument);
}

}  // namespace
