#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>

#include "musiela/curve.hpp"
#include "musiela/weighted_spaces.hpp"

namespace musiela {

/// Number of whole grid cells in t; throws unless t is a nonnegative lattice
/// multiple of dx (the scheme keeps transport exact by construction).
inline std::size_t lattice_steps(const Grid& g, double t) {
    if (t < 0.0) throw std::invalid_argument("shift: t must be nonnegative");
    const double ratio = t / g.dx;
    const double r = std::round(ratio);
    if (std::abs(ratio - r) > 1e-9 * std::max(1.0, ratio))
        throw std::invalid_argument("shift: t must be a lattice multiple of dx");
    return static_cast<std::size_t>(r);
}

/// Left translation (S(t)v)(x) = v(x + t) on the lattice: values move left by
/// t/dx cells and the window fills from the flat tail level on the right.
inline Curve shift(const Curve& v, double t) {
    const std::size_t k = lattice_steps(v.grid(), t);
    Curve r = v;
    const std::size_t n = v.size();
    for (std::size_t i = 0; i < n; ++i) r[i] = (i + k < n) ? v[i + k] : v.value_at_infinity();
    return r;
}

/// (I + lambda A)^{-1} v via w(x) = (1/lambda) * integral over [x, inf) of
/// e^{(x-y)/lambda} v(y) dy, with v extended flat at its tail level.
///
/// Backward recursion with the exact one-cell kernel and linear interpolation
/// of v inside each cell:
///   w_i = a v_i + b v_{i+1} + q w_{i+1},  q = e^{-dx/lambda}.
/// All three weights are nonnegative and a + b + q = 1, so the discrete
/// resolvent preserves positivity, fixes constants, and contracts sup norms.
inline Curve resolvent(const Curve& v, double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("resolvent: lambda must be positive");
    const auto& g = v.grid();
    const double theta = g.dx / lambda;
    const double q = std::exp(-theta);
    const double b = (1.0 - q) / theta - q;  // >= 0 for all theta > 0
    const double a = (1.0 - q) - b;          // >= 0: (1 - e^{-t})/t <= 1
    Curve w = v;
    const std::size_t n = v.size();
    w[n - 1] = v.value_at_infinity();  // exact value of the flat-tail integral
    for (std::size_t i = n - 1; i-- > 0;) w[i] = a * v[i] + b * v[i + 1] + q * w[i + 1];
    w.value_at_infinity() = v.value_at_infinity();
    return w;
}

/// Yosida approximation A_lambda v = (v - (I + lambda A)^{-1} v) / lambda.
/// Converges to A v = -v' as lambda -> 0 on smooth curves.
inline Curve yosida_apply(const Curve& v, double lambda) {
    const Curve r = resolvent(v, lambda);
    Curve out = v;
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - r[i]) / lambda;
    out.value_at_infinity() = 0.0;
    return out;
}

/// <A_lambda v, v^-> against the decaying weight. On this space the shift
/// generator is only quasi-monotone: the pairing is bounded by
/// (alpha/2) / (1 - lambda alpha / 2) * ||v^-||^2 (positive allowance), not
/// by zero; lambda < 2/alpha required.
inline double yosida_negative_pairing(const Curve& v, double lambda, double alpha) {
    if (!(lambda < 2.0 / alpha))
        throw std::invalid_argument("yosida_negative_pairing: need lambda < 2/alpha");
    const Curve av = yosida_apply(v, lambda);
    const Curve vm = negative_part(v);
    return inner_L2_weighted(av, vm, Weight::decaying(alpha));
}

}  // namespace musiela
