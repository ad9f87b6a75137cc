#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace musiela {

/// Uniform grid on [0, x_max].
///
/// Nodes are x_i = i * dx with dx = x_max / (n_points - 1). The grid is the
/// shared backbone of every curve; operations on two curves require the same
/// grid (pointer identity or identical layout).
struct Grid {
    double x_max = 0.0;
    std::size_t n_points = 0;
    double dx = 0.0;
    std::vector<double> nodes;

    static std::shared_ptr<const Grid> make(double x_max, std::size_t n_points) {
        if (!(x_max > 0.0)) throw std::invalid_argument("Grid: x_max must be positive");
        if (n_points < 3) throw std::invalid_argument("Grid: need at least 3 points");
        auto g = std::make_shared<Grid>();
        g->x_max = x_max;
        g->n_points = n_points;
        g->dx = x_max / static_cast<double>(n_points - 1);
        g->nodes.resize(n_points);
        for (std::size_t i = 0; i < n_points; ++i) g->nodes[i] = static_cast<double>(i) * g->dx;
        g->nodes.back() = x_max;
        return g;
    }

    /// Grid with spacing dx; dx must divide x_max to within rounding.
    static std::shared_ptr<const Grid> make_with_spacing(double x_max, double dx) {
        if (!(dx > 0.0)) throw std::invalid_argument("Grid: dx must be positive");
        const double ratio = x_max / dx;
        const double r = std::round(ratio);
        if (std::abs(ratio - r) > 1e-9 * std::max(1.0, ratio))
            throw std::invalid_argument("Grid: dx must divide x_max");
        return make(x_max, static_cast<std::size_t>(r) + 1);
    }

    /// Trapezoid weight of node i (dx interior, dx/2 at both ends).
    double quad_weight(std::size_t i) const {
        return (i == 0 || i + 1 == n_points) ? 0.5 * dx : dx;
    }
};

inline bool same_layout(const Grid& a, const Grid& b) {
    return a.n_points == b.n_points && a.x_max == b.x_max;
}

/// Forward curve sample: values on the grid plus the flat level the curve
/// holds beyond x_max ("value at infinity"). The tail is always treated as
/// exactly flat at that level.
class Curve {
  public:
    Curve() = default;

    Curve(std::shared_ptr<const Grid> grid, std::vector<double> values, double value_at_infinity)
        : grid_(std::move(grid)), values_(std::move(values)), v_inf_(value_at_infinity) {
        if (!grid_) throw std::invalid_argument("Curve: null grid");
        if (values_.size() != grid_->n_points)
            throw std::invalid_argument("Curve: values/grid size mismatch");
    }

    /// Samples f on the grid; value at infinity defaults to f(x_max).
    template <typename F>
    static Curve sample(std::shared_ptr<const Grid> grid, F&& f) {
        std::vector<double> v(grid->n_points);
        for (std::size_t i = 0; i < grid->n_points; ++i) v[i] = f(grid->nodes[i]);
        const double tail = v.back();
        return Curve(std::move(grid), std::move(v), tail);
    }

    template <typename F>
    static Curve sample(std::shared_ptr<const Grid> grid, F&& f, double value_at_infinity) {
        std::vector<double> v(grid->n_points);
        for (std::size_t i = 0; i < grid->n_points; ++i) v[i] = f(grid->nodes[i]);
        return Curve(std::move(grid), std::move(v), value_at_infinity);
    }

    static Curve constant(std::shared_ptr<const Grid> grid, double c) {
        return Curve(grid, std::vector<double>(grid->n_points, c), c);
    }

    const Grid& grid() const { return *grid_; }
    const std::shared_ptr<const Grid>& grid_ptr() const { return grid_; }
    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }
    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }
    double value_at_infinity() const { return v_inf_; }
    double& value_at_infinity() { return v_inf_; }

    /// Linear interpolation inside [0, x_max]; flat value beyond.
    double value_at(double x) const {
        if (x <= 0.0) return values_.front();
        if (x >= grid_->x_max) return x > grid_->x_max ? v_inf_ : values_.back();
        const double s = x / grid_->dx;
        auto i = static_cast<std::size_t>(s);
        if (i + 1 >= values_.size()) return values_.back();
        const double w = s - static_cast<double>(i);
        return (1.0 - w) * values_[i] + w * values_[i + 1];
    }

    double max_abs() const {
        double m = std::abs(v_inf_);
        for (double v : values_) m = std::max(m, std::abs(v));
        return m;
    }

    double min_value(std::size_t* argmin = nullptr) const {
        double m = values_[0];
        std::size_t arg = 0;
        for (std::size_t i = 1; i < values_.size(); ++i)
            if (values_[i] < m) { m = values_[i]; arg = i; }
        if (argmin) *argmin = arg;
        return std::min(m, v_inf_);
    }

    bool all_finite() const {
        if (!std::isfinite(v_inf_)) return false;
        return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
    }

  private:
    std::shared_ptr<const Grid> grid_;
    std::vector<double> values_;
    double v_inf_ = 0.0;
};

inline void require_same_grid(const Curve& a, const Curve& b) {
    if (a.grid_ptr() != b.grid_ptr() && !same_layout(a.grid(), b.grid()))
        throw std::invalid_argument("curves live on different grids");
}

inline Curve operator+(const Curve& a, const Curve& b) {
    require_same_grid(a, b);
    Curve r = a;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += b[i];
    r.value_at_infinity() += b.value_at_infinity();
    return r;
}

inline Curve operator-(const Curve& a, const Curve& b) {
    require_same_grid(a, b);
    Curve r = a;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
    r.value_at_infinity() -= b.value_at_infinity();
    return r;
}

inline Curve operator*(double s, const Curve& a) {
    Curve r = a;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] *= s;
    r.value_at_infinity() *= s;
    return r;
}

/// Pointwise product; the tails multiply.
inline Curve operator*(const Curve& a, const Curve& b) {
    require_same_grid(a, b);
    Curve r = a;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] *= b[i];
    r.value_at_infinity() *= b.value_at_infinity();
    return r;
}

/// Derivative by central differences, one-sided at both endpoints.
inline std::vector<double> central_difference(const Curve& v) {
    const auto& g = v.grid();
    const std::size_t n = v.size();
    std::vector<double> d(n);
    d[0] = (v[1] - v[0]) / g.dx;
    for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (v[i + 1] - v[i - 1]) / (2.0 * g.dx);
    d[n - 1] = (v[n - 1] - v[n - 2]) / g.dx;
    return d;
}

/// Trapezoid integral over [0, x_max]; the flat tail is not included.
inline double trapezoid(const Curve& v) {
    const auto& g = v.grid();
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += g.quad_weight(i) * v[i];
    return s;
}

namespace detail {

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

/// CSV layout: header "x,value", one row per node, then a trailing
/// "inf,<value_at_infinity>" row.
inline void write_csv(const Curve& v, std::ostream& os) {
    os << "x,value\n";
    for (std::size_t i = 0; i < v.size(); ++i)
        os << detail::format_double(v.grid().nodes[i]) << ',' << detail::format_double(v[i]) << '\n';
    os << "inf," << detail::format_double(v.value_at_infinity()) << '\n';
}

inline void write_csv(const Curve& v, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    write_csv(v, os);
}

inline Curve read_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("curve CSV: empty input");
    // tolerate a UTF-8 BOM and \r\n endings
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    if (line != "x,value") throw std::runtime_error("curve CSV: bad header '" + line + "'");
    std::vector<double> xs, vals;
    bool have_inf = false;
    double v_inf = 0.0;
    while (std::getline(is, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw std::runtime_error("curve CSV: malformed row '" + line + "'");
        const std::string xs_str = line.substr(0, comma);
        const double val = std::stod(line.substr(comma + 1));
        if (xs_str == "inf") {
            v_inf = val;
            have_inf = true;
            break;
        }
        xs.push_back(std::stod(xs_str));
        vals.push_back(val);
    }
    if (!have_inf) throw std::runtime_error("curve CSV: missing trailing inf row");
    if (xs.size() < 3) throw std::runtime_error("curve CSV: need at least 3 nodes");
    if (xs.front() != 0.0) throw std::runtime_error("curve CSV: grid must start at 0");
    const double dx = xs[1] - xs[0];
    for (std::size_t i = 1; i < xs.size(); ++i)
        if (std::abs(xs[i] - xs[i - 1] - dx) > 1e-9 * std::max(1.0, std::abs(dx)))
            throw std::runtime_error("curve CSV: grid not uniform");
    auto grid = Grid::make(xs.back(), xs.size());
    return Curve(std::move(grid), std::move(vals), v_inf);
}

inline Curve read_csv_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open for reading: " + path);
    return read_csv(is);
}

}  // namespace musiela
