#pragma once

// Uniform 1D grids, midpoint quadrature, grid norms, and the discrete
// Gronwall utility backing the BV a priori estimate.

#include "bvsol/errors.hpp"

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace bvsol {

/// Uniform cell-centered mesh of the interval (0, l).
class Grid1D {
public:
    Grid1D() = default;

    Grid1D(double length, int n_cells) : length_(length), n_cells_(n_cells) {
        if (!(length > 0.0)) throw invalid_parameter("Grid1D: length must be positive");
        if (n_cells < 2) throw invalid_parameter("Grid1D: need at least 2 cells");
        h_ = length_ / n_cells_;
    }

    [[nodiscard]] double length() const { return length_; }
    [[nodiscard]] int n_cells() const { return n_cells_; }
    [[nodiscard]] double spacing() const { return h_; }

    /// Center of cell i, x_i = (i + 1/2) h.
    [[nodiscard]] double center(int i) const { return (i + 0.5) * h_; }

    [[nodiscard]] std::vector<double> cell_centers() const {
        std::vector<double> x(static_cast<std::size_t>(n_cells_));
        for (int i = 0; i < n_cells_; ++i) x[static_cast<std::size_t>(i)] = center(i);
        return x;
    }

    friend bool operator==(const Grid1D& a, const Grid1D& b) {
        return a.length_ == b.length_ && a.n_cells_ == b.n_cells_;
    }

private:
    double length_ = 1.0;
    int n_cells_ = 2;
    double h_ = 0.5;
};

/// Cell values of a state u in V = L^2(0, l).
struct GridFunction {
    Grid1D grid;
    std::vector<double> values;

    GridFunction() = default;
    GridFunction(const Grid1D& g, double fill = 0.0)
        : grid(g), values(static_cast<std::size_t>(g.n_cells()), fill) {}
    GridFunction(const Grid1D& g, std::vector<double> vals) : grid(g), values(std::move(vals)) {
        if (static_cast<int>(values.size()) != g.n_cells())
            throw invalid_state("GridFunction: value count does not match grid");
    }

    [[nodiscard]] std::size_t size() const { return values.size(); }
    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }

    [[nodiscard]] bool finite() const {
        for (double v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

/// Sample a callable f(x) at cell centers.
template <class F>
[[nodiscard]] GridFunction sample(const Grid1D& g, F&& f) {
    GridFunction out(g);
    for (int i = 0; i < g.n_cells(); ++i) out.values[static_cast<std::size_t>(i)] = f(g.center(i));
    return out;
}

/// Midpoint quadrature: h * sum_i f_i. Exact for cell-aligned indicators and affine f.
[[nodiscard]] inline double integrate(const GridFunction& f) {
    double s = 0.0;
    for (double v : f.values) s += v;
    return f.grid.spacing() * s;
}

[[nodiscard]] inline double l1_norm(const GridFunction& f) {
    double s = 0.0;
    for (double v : f.values) s += std::abs(v);
    return f.grid.spacing() * s;
}

[[nodiscard]] inline double l2_norm_sq(const GridFunction& f) {
    double s = 0.0;
    for (double v : f.values) s += v * v;
    return f.grid.spacing() * s;
}

[[nodiscard]] inline double l2_norm(const GridFunction& f) { return std::sqrt(l2_norm_sq(f)); }

/// L^2 pairing <f, g> = h * sum_i f_i g_i.
[[nodiscard]] inline double dot(const GridFunction& f, const GridFunction& g) {
    double s = 0.0;
    for (std::size_t i = 0; i < f.values.size(); ++i) s += f.values[i] * g.values[i];
    return f.grid.spacing() * s;
}

[[nodiscard]] inline GridFunction operator+(const GridFunction& a, const GridFunction& b) {
    GridFunction out = a;
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += b.values[i];
    return out;
}

[[nodiscard]] inline GridFunction operator-(const GridFunction& a, const GridFunction& b) {
    GridFunction out = a;
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] -= b.values[i];
    return out;
}

[[nodiscard]] inline GridFunction operator*(double s, const GridFunction& a) {
    GridFunction out = a;
    for (double& v : out.values) v *= s;
    return out;
}

/// Certified bound for sum_n a_n under the hypothesis
/// (1+gamma)^2 a_n^2 <= a_{n-1}^2 + b_n a_n:  sum a_n <= (a_0 + sum b_n) / gamma.
[[nodiscard]] inline double gronwall_bound(double a0, double gamma, std::span<const double> b) {
    if (!(gamma > 0.0)) throw invalid_parameter("gronwall_bound: gamma must be positive");
    if (!(a0 >= 0.0)) throw invalid_parameter("gronwall_bound: a0 must be nonnegative");
    double sb = 0.0;
    for (double v : b) {
        if (!(v >= 0.0)) throw invalid_parameter("gronwall_bound: b_n must be nonnegative");
        sb += v;
    }
    return (a0 + sb) / gamma;
}

} // namespace bvsol
