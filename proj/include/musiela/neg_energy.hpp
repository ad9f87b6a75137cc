#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "musiela/curve.hpp"
#include "musiela/weighted_spaces.hpp"

namespace musiela {

/// Smooth surrogate of the half-squared negative part, x -> (1/2)|x^-|^2.
///
/// Built by integrating the clamped second derivative twice from the origin:
///   g_n''(x) = clamp(-n x, 0, 1)
///   g_n'(x)  = 0 (x >= 0),  -n x^2 / 2 on [-1/n, 0],  x + 1/(2n) below
///   g_n (x)  = 0 (x >= 0),  -n x^3 / 6 on [-1/n, 0],
///              x^2/2 + x/(2n) + 1/(6n^2) below
/// g_n is C^1 with second derivative in [0, 1], vanishes with its slope at 0,
/// and increases pointwise to the limit from below as n grows, with
///   |g_n(x) - (1/2)|x^-|^2| <= |x|/(2n) + 1/(6 n^2).
struct SmoothNegEnergy {
    unsigned n;

    explicit SmoothNegEnergy(unsigned n_) : n(n_) {
        if (n == 0) throw std::invalid_argument("SmoothNegEnergy: n must be positive");
    }

    double g(double x) const {
        if (x >= 0.0) return 0.0;
        const double dn = n;
        if (x >= -1.0 / dn) return -dn * x * x * x / 6.0;
        return 0.5 * x * x + x / (2.0 * dn) + 1.0 / (6.0 * dn * dn);
    }

    double d1(double x) const {
        if (x >= 0.0) return 0.0;
        const double dn = n;
        if (x >= -1.0 / dn) return -dn * x * x / 2.0;
        return x + 1.0 / (2.0 * dn);
    }

    double d2(double x) const { return std::clamp(-double(n) * x, 0.0, 1.0); }

    /// Pointwise gap to the limit (1/2)|x^-|^2.
    double limit_gap_bound(double x) const {
        const double dn = n;
        return std::abs(x) / (2.0 * dn) + 1.0 / (6.0 * dn * dn);
    }
};

/// Smoothed negative-part energy against the decaying weight: the grid
/// trapezoid of g_n(u(x)) e^{-alpha x}. Tail level dropped, like the norms.
inline double neg_energy(const Curve& u, const SmoothNegEnergy& e, double alpha) {
    const Grid& g = u.grid();
    double acc = 0.0, comp = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double term = g.quad_weight(i) * e.g(u[i]) * std::exp(-alpha * g.nodes[i]);
        const double y = term - comp;
        const double t = acc + y;
        comp = (t - acc) - y;
        acc = t;
    }
    return acc;
}

/// Directional-derivative pairing <g_n'(u), v> against the decaying weight.
inline double neg_energy_gradient_pairing(const Curve& u, const Curve& v, const SmoothNegEnergy& e,
                                          double alpha) {
    require_same_grid(u, v);
    Curve gu = u;
    for (std::size_t i = 0; i < u.size(); ++i) gu[i] = e.d1(u[i]);
    gu.value_at_infinity() = e.d1(u.value_at_infinity());
    return inner_L2_weighted(gu, v, Weight::decaying(alpha));
}

struct FrechetCheck {
    struct Row {
        double eps = 0.0;
        double remainder = 0.0;  // |(G(u+eps v)-G(u))/eps - <g'(u),v>|
        double bound = 0.0;      // (eps/2) ||v||^2, from the unit curvature cap
    };
    std::vector<Row> rows;
    double pairing = 0.0;
    double observed_order = 0.0;  // slope of log remainder vs log eps (reported, not asserted)

    bool within_bound(double tol = 0.0) const {
        for (const auto& r : rows)
            if (r.remainder > r.bound + tol) return false;
        return true;
    }
};

/// Difference-quotient check of the energy's derivative. The curvature cap
/// g_n'' <= 1 gives the exact remainder budget (eps/2)||v||^2 node by node,
/// so the bound holds for the grid sums with no discretization slack.
inline FrechetCheck neg_energy_derivative_check(const Curve& u, const Curve& v,
                                                const SmoothNegEnergy& e, double alpha,
                                                std::vector<double> epsilons = {1e-3, 1e-4, 1e-5}) {
    FrechetCheck out;
    out.pairing = neg_energy_gradient_pairing(u, v, e, alpha);
    const double g0 = neg_energy(u, e, alpha);
    const double v2 = [&] {
        const double nv = norm_L2_weighted(v, Weight::decaying(alpha));
        return nv * nv;
    }();
    for (double eps : epsilons) {
        Curve w = u;
        for (std::size_t i = 0; i < u.size(); ++i) w[i] = u[i] + eps * v[i];
        w.value_at_infinity() = u.value_at_infinity() + eps * v.value_at_infinity();
        FrechetCheck::Row row;
        row.eps = eps;
        row.remainder = std::abs((neg_energy(w, e, alpha) - g0) / eps - out.pairing);
        row.bound = 0.5 * eps * v2;
        out.rows.push_back(row);
    }
    if (out.rows.size() >= 2) {
        const auto& a = out.rows.front();
        const auto& b = out.rows.back();
        if (a.remainder > 0.0 && b.remainder > 0.0)
            out.observed_order = std::log(a.remainder / b.remainder) / std::log(a.eps / b.eps);
    }
    return out;
}

}  // namespace musiela
