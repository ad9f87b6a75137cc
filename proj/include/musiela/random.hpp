#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "musiela/curve.hpp"

namespace musiela::rng {

// splitmix64 finalizer; full-avalanche 64-bit mix.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Inverse of the standard normal CDF. Acklam's rational approximation
/// polished with one Halley step through erfc, giving ~1e-15 accuracy.
/// Used instead of std::normal_distribution so that draws are identical
/// across standard libraries and platforms.
inline double inverse_normal_cdf(double u) {
    if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("inverse_normal_cdf: u outside (0,1)");
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double u_low = 0.02425;
    double x;
    if (u < u_low) {
        const double q = std::sqrt(-2.0 * std::log(u));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (u <= 1.0 - u_low) {
        const double q = u - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - u));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // Halley refinement: e = Phi(x) - u, Phi via erfc.
    const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - u;
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    const double w = e / pdf;
    return x - w / (1.0 + 0.5 * x * w);
}

/// Sequential deterministic stream (splitmix64 core).
class Stream {
  public:
    explicit Stream(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform on the open interval (0, 1).
    double u01() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

    double gaussian() { return inverse_normal_cdf(u01()); }

    std::uint64_t pick(std::uint64_t n) { return next_u64() % n; }

  private:
    std::uint64_t state_;
};

/// Counter-based Gaussian field: the draw for (path, step, factor) is a pure
/// function of (seed, path, step, factor). Independent of evaluation order,
/// thread schedule, and platform.
class NoiseField {
  public:
    explicit NoiseField(std::uint64_t seed) : seed_(seed) {}

    double gaussian(std::uint64_t path, std::uint64_t step, std::uint64_t factor) const {
        std::uint64_t z = mix64(seed_ ^ 0x8f1bbcdc4d3f5c7dULL);
        z = mix64(z ^ (path * 0xd6e8feb86659fd93ULL));
        z = mix64(z ^ (step * 0xa3ec647659359acdULL));
        z = mix64(z ^ (factor * 0xc2b2ae3d27d4eb4fULL));
        const double u = (static_cast<double>(z >> 11) + 0.5) * 0x1p-53;
        return inverse_normal_cdf(u);
    }

    std::uint64_t seed() const { return seed_; }

  private:
    std::uint64_t seed_;
};

/// Piecewise-linear curve through ~8-16 random knots, sampled on the grid.
/// Tail level equals the final value.
inline Curve random_piecewise_curve(const std::shared_ptr<const Grid>& grid, Stream& s, double scale) {
    const std::size_t knots = 8 + s.pick(9);
    std::vector<double> kx(knots), kv(knots);
    kx.front() = 0.0;
    kx.back() = grid->x_max;
    for (std::size_t i = 1; i + 1 < knots; ++i) kx[i] = s.uniform(0.0, grid->x_max);
    std::sort(kx.begin(), kx.end());
    for (auto& v : kv) v = s.uniform(-scale, scale);
    auto interp = [&](double x) {
        auto it = std::upper_bound(kx.begin(), kx.end(), x);
        if (it == kx.begin()) return kv.front();
        if (it == kx.end()) return kv.back();
        const auto j = static_cast<std::size_t>(it - kx.begin());
        const double w = (kx[j] - kx[j - 1]) > 0.0 ? (x - kx[j - 1]) / (kx[j] - kx[j - 1]) : 0.0;
        return (1.0 - w) * kv[j - 1] + w * kv[j];
    };
    return Curve::sample(grid, interp);
}

/// Smooth curve: level + decaying oscillatory humps, tapered so the curve
/// equals its tail level exactly on the last quarter of the window. Exact
/// flattening matters: under the growing weight e^{alpha x}, any residual
/// step between v(x_max) and the tail level would dominate every norm.
inline Curve random_smooth_curve(const std::shared_ptr<const Grid>& grid, Stream& s, double scale,
                                 double level_scale = 1.0) {
    const std::size_t terms = 3 + s.pick(4);
    struct Hump {
        double a, b, c, phi;
    };
    std::vector<Hump> hs(terms);
    for (auto& h : hs) {
        h.a = s.uniform(-scale, scale);
        h.b = s.uniform(0.5, 1.6);    // decay
        h.c = s.uniform(0.0, 2.0);    // oscillation
        h.phi = s.uniform(0.0, 2.0 * M_PI);
    }
    const double level = s.uniform(-level_scale * scale, level_scale * scale);
    const double x1 = 0.5 * grid->x_max;
    const double x2 = 0.75 * grid->x_max;
    auto taper = [x1, x2](double x) {
        if (x <= x1) return 1.0;
        if (x >= x2) return 0.0;
        return 0.5 * (1.0 + std::cos(M_PI * (x - x1) / (x2 - x1)));
    };
    return Curve::sample(
        grid,
        [&](double x) {
            double v = 0.0;
            for (const auto& h : hs) v += h.a * std::exp(-h.b * x) * std::cos(h.c * x + h.phi);
            return level + taper(x) * v;
        },
        level);
}

/// Smooth curve decaying to 0 at the tail (zero tail level).
inline Curve random_decaying_curve(const std::shared_ptr<const Grid>& grid, Stream& s, double scale) {
    return random_smooth_curve(grid, s, scale, 0.0);
}

/// Family of decaying curves with l2-summable sizes (scale / k).
inline std::vector<Curve> random_decaying_family(const std::shared_ptr<const Grid>& grid, Stream& s,
                                                 std::size_t count, double scale) {
    std::vector<Curve> f;
    f.reserve(count);
    for (std::size_t k = 1; k <= count; ++k)
        f.push_back(random_decaying_curve(grid, s, scale / static_cast<double>(k)));
    return f;
}

}  // namespace musiela::rng
