#pragma once

#include <cstddef>
#include <stdexcept>

namespace musiela::quad {

/// Composite Simpson rule with `panels` parabolic panels (2*panels+1 evals).
/// Compensated accumulation keeps the result stable at high panel counts.
template <class F>
double simpson(F&& f, double a, double b, std::size_t panels) {
    if (panels == 0) throw std::invalid_argument("simpson: need at least one panel");
    const double h = (b - a) / static_cast<double>(panels);
    double sum = 0.0, comp = 0.0;
    for (std::size_t i = 0; i < panels; ++i) {
        const double l = a + static_cast<double>(i) * h;
        const double r = (i + 1 == panels) ? b : a + static_cast<double>(i + 1) * h;
        const double term = (r - l) / 6.0 * (f(l) + 4.0 * f(0.5 * (l + r)) + f(r));
        const double y = term - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    return sum;
}

}  // namespace musiela::quad
