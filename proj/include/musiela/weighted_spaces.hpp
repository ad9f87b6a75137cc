#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>

#include "musiela/curve.hpp"

namespace musiela {

/// Exponential weight e^{sign * alpha * x} on [0, x_max].
struct Weight {
    double alpha = 1.0;
    int sign = +1;  // +1 grows, -1 decays

    Weight(double a, int s) : alpha(a), sign(s) {
        if (!(alpha > 0.0)) throw std::invalid_argument("Weight: alpha must be positive");
        if (sign != 1 && sign != -1) throw std::invalid_argument("Weight: sign must be +1 or -1");
    }

    static Weight growing(double alpha) { return Weight(alpha, +1); }
    static Weight decaying(double alpha) { return Weight(alpha, -1); }

    double at(double x) const { return std::exp(sign * alpha * x); }
};

/// <f, g> with the weighted measure e^{sign*alpha*x} dx (trapezoid on the grid,
/// flat tails beyond x_max dropped).
inline double inner_L2_weighted(const Curve& f, const Curve& g, const Weight& w) {
    require_same_grid(f, g);
    const auto& grid = f.grid();
    double acc = 0.0, comp = 0.0;  // Kahan: long sums against e^{alpha*x} spread 9 decades
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double term = grid.quad_weight(i) * f[i] * g[i] * w.at(grid.nodes[i]);
        const double y = term - comp;
        const double t = acc + y;
        comp = (t - acc) - y;
        acc = t;
    }
    return acc;
}

inline double norm_L2_weighted(const Curve& v, const Weight& w) {
    return std::sqrt(inner_L2_weighted(v, v, w));
}

/// Unweighted L1 norm (trapezoid of |v| on the grid).
inline double norm_L1(const Curve& v) {
    const auto& g = v.grid();
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += g.quad_weight(i) * std::abs(v[i]);
    return s;
}

/// Norm with squared form  v(inf)^2 + integral of |v'|^2 e^{alpha x};
/// v' by central differences (one-sided at the endpoints).
inline double norm_H_alpha(const Curve& v, double alpha) {
    const auto d = central_difference(v);
    const auto& g = v.grid();
    const Weight w = Weight::growing(alpha);
    double acc = 0.0, comp = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double term = g.quad_weight(i) * d[i] * d[i] * w.at(g.nodes[i]);
        const double y = term - comp;
        const double t = acc + y;
        comp = (t - acc) - y;
        acc = t;
    }
    const double vi = v.value_at_infinity();
    return std::sqrt(vi * vi + acc);
}

/// max(-v, 0) pointwise, including the tail level.
inline Curve negative_part(const Curve& v) {
    Curve r = v;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = std::max(-v[i], 0.0);
    r.value_at_infinity() = std::max(-v.value_at_infinity(), 0.0);
    return r;
}

/// Budget for sup|v| <= |v(inf)| + (1/sqrt(alpha)) ||v'||, folded into a single
/// factor against the H norm. Every sup-to-norm step below uses this constant.
inline double embedding_delta(double alpha) { return 1.0 + 1.0 / std::sqrt(alpha); }

/// Result of checking |v(x) - v(inf)| <= ||v||_H * (1/sqrt(alpha)) * e^{-alpha x / 2}
/// at every node. worst_gap <= 0 means the bound holds everywhere.
struct SupBoundReport {
    double worst_gap = -1.0;     // max over nodes of lhs - rhs
    std::size_t worst_node = 0;
    double h_alpha_norm = 0.0;

    bool holds(double tol = 0.0) const { return worst_gap <= tol; }
};

inline SupBoundReport sup_norm_bound_check(const Curve& v, double alpha) {
    SupBoundReport rep;
    rep.h_alpha_norm = norm_H_alpha(v, alpha);
    const double c = rep.h_alpha_norm / std::sqrt(alpha);
    const auto& g = v.grid();
    rep.worst_gap = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double lhs = std::abs(v[i] - v.value_at_infinity());
        const double rhs = c * std::exp(-0.5 * alpha * g.nodes[i]);
        if (lhs - rhs > rep.worst_gap) {
            rep.worst_gap = lhs - rhs;
            rep.worst_node = i;
        }
    }
    return rep;
}

/// Discrete counterpart of integrating e^{-alpha x} over [0, inf): the grid
/// trapezoid of the decaying weight. Exceeds the closed form 1/alpha by
/// O(dx^2) and is the exact constant in discrete Cauchy-Schwarz embeddings.
inline double decaying_weight_mass(const Grid& g, double alpha) {
    double s = 0.0;
    for (std::size_t i = 0; i < g.n_points; ++i) s += g.quad_weight(i) * std::exp(-alpha * g.nodes[i]);
    return s;
}

/// Growing-weight L2 norm of the second-difference field, an estimate of
/// ||v''||. Scales the O(dx^2) allowance that pointwise tail bounds need when
/// a curve sits at the continuum extremal (norms computed by central
/// differences undershoot there).
inline double curvature_norm(const Curve& v, double alpha) {
    const auto& g = v.grid();
    const double inv_dx2 = 1.0 / (g.dx * g.dx);
    double acc = 0.0;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
        const double d2 = (v[i + 1] - 2.0 * v[i] + v[i - 1]) * inv_dx2;
        acc += g.quad_weight(i) * d2 * d2 * std::exp(alpha * g.nodes[i]);
    }
    return std::sqrt(acc);
}

}  // namespace musiela
