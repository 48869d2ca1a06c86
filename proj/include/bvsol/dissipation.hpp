#pragma once

// The dissipation algebra: gauge Psi, viscous potential Phi = F(||.||),
// the family Psi_eps, conjugates through the K*-distance, the contact
// potential, and the scalar shrinkage kernel used by the solver.

#include "bvsol/errors.hpp"
#include "bvsol/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace bvsol {

/// Weighted L^1 gauge Psi(v) = h * sum_i (w+_i max(v_i,0) + w-_i max(-v_i,0)).
/// Symmetric when w+ == w-. The dual stability set K* is then the box
/// { xi : -w-_i <= xi_i <= w+_i }.
struct Gauge {
    std::vector<double> w_plus;
    std::vector<double> w_minus;

    static Gauge uniform(int n, double w) {
        if (!(w > 0.0)) throw invalid_parameter("Gauge: weights must be positive");
        Gauge g;
        g.w_plus.assign(static_cast<std::size_t>(n), w);
        g.w_minus.assign(static_cast<std::size_t>(n), w);
        return g;
    }

    static Gauge asymmetric(std::vector<double> wp, std::vector<double> wm) {
        Gauge g{std::move(wp), std::move(wm)};
        for (double v : g.w_plus)
            if (!(v > 0.0)) throw invalid_parameter("Gauge: weights must be positive");
        for (double v : g.w_minus)
            if (!(v > 0.0)) throw invalid_parameter("Gauge: weights must be positive");
        if (g.w_plus.size() != g.w_minus.size())
            throw invalid_parameter("Gauge: weight vectors must have equal length");
        return g;
    }

    [[nodiscard]] bool symmetric() const { return w_plus == w_minus; }

    [[nodiscard]] double psi(const GridFunction& v) const {
        double s = 0.0;
        for (std::size_t i = 0; i < v.values.size(); ++i) {
            const double x = v.values[i];
            s += x >= 0.0 ? w_plus[i] * x : -w_minus[i] * x;
        }
        return v.grid.spacing() * s;
    }

    /// Psi_wedge(w) = min(Psi(w), Psi(-w)), used by the subdifferentiability checks.
    [[nodiscard]] double psi_wedge(const GridFunction& v) const {
        double sp = 0.0, sm = 0.0;
        for (std::size_t i = 0; i < v.values.size(); ++i) {
            const double x = v.values[i];
            if (x >= 0.0) {
                sp += w_plus[i] * x;
                sm += w_minus[i] * x;
            } else {
                sp -= w_minus[i] * x;
                sm -= w_plus[i] * x;
            }
        }
        return v.grid.spacing() * std::min(sp, sm);
    }

    /// Pointwise excess of xi over the box K*; zero inside.
    [[nodiscard]] double excess(std::size_t i, double xi) const {
        if (xi > w_plus[i]) return xi - w_plus[i];
        if (xi < -w_minus[i]) return xi + w_minus[i];
        return 0.0;
    }

    /// min_{z in K*} ||xi - z||_{L^2}, computed componentwise.
    [[nodiscard]] double dual_dist(const GridFunction& xi) const {
        double s = 0.0;
        for (std::size_t i = 0; i < xi.values.size(); ++i) {
            const double e = excess(i, xi.values[i]);
            s += e * e;
        }
        return std::sqrt(xi.grid.spacing() * s);
    }

    /// Nearest point of K* to xi (the box projection).
    [[nodiscard]] GridFunction project(const GridFunction& xi) const {
        GridFunction z = xi;
        for (std::size_t i = 0; i < z.values.size(); ++i)
            z.values[i] = std::clamp(z.values[i], -w_minus[i], w_plus[i]);
        return z;
    }
};

/// Viscous potential Phi(v) = F(||v||) with F quadratic (default) or a power law.
struct ViscousPotential {
    enum class Form { quadratic, power };
    Form form = Form::quadratic;
    double nu = 1.0; // power form F(r) = nu r^p / p
    double p = 2.0;

    static ViscousPotential quadratic() { return {}; }

    static ViscousPotential power(double nu, double p) {
        if (!(nu > 0.0) || !(p > 1.0))
            throw invalid_parameter("ViscousPotential: need nu > 0 and p > 1");
        return {Form::power, nu, p};
    }

    [[nodiscard]] double F(double r) const {
        return form == Form::quadratic ? 0.5 * r * r : nu * std::pow(r, p) / p;
    }

    [[nodiscard]] double F_prime(double r) const {
        return form == Form::quadratic ? r : nu * std::pow(r, p - 1.0);
    }

    [[nodiscard]] double F_prime_inv(double s) const {
        return form == Form::quadratic ? s : std::pow(s / nu, 1.0 / (p - 1.0));
    }

    /// Legendre conjugate; for the power form F*(s) = nu^{1-q} s^q / q, 1/p + 1/q = 1.
    [[nodiscard]] double F_star(double s) const {
        if (form == Form::quadratic) return 0.5 * s * s;
        const double q = p / (p - 1.0);
        return std::pow(nu, 1.0 - q) * std::pow(s, q) / q;
    }

    [[nodiscard]] double F_star_prime(double s) const {
        if (form == Form::quadratic) return s;
        const double q = p / (p - 1.0);
        return std::pow(nu, 1.0 - q) * std::pow(s, q - 1.0);
    }
};

/// The pair (Psi, Phi) with the induced vanishing-viscosity family
/// Psi_eps(v) = Psi(v) + eps^{-1} Phi(eps v) and its conjugates.
struct DissipationPair {
    Gauge gauge;
    ViscousPotential viscous;

    [[nodiscard]] double psi(const GridFunction& v) const { return gauge.psi(v); }

    [[nodiscard]] double phi(const GridFunction& v) const { return viscous.F(l2_norm(v)); }

    [[nodiscard]] double psi_eps(const GridFunction& v, double eps) const {
        if (!(eps > 0.0)) throw invalid_parameter("psi_eps: eps must be positive");
        return gauge.psi(v) + viscous.F(eps * l2_norm(v)) / eps;
    }

    /// Psi_eps^*(xi) = eps^{-1} F*( dist(xi, K*) ), the inf-convolution duality formula.
    [[nodiscard]] double psi_eps_conj(const GridFunction& xi, double eps) const {
        if (!(eps > 0.0)) throw invalid_parameter("psi_eps_conj: eps must be positive");
        return viscous.F_star(gauge.dual_dist(xi)) / eps;
    }

    /// Contact potential p(v, xi) = inf_eps [Psi_eps(v) + Psi_eps^*(xi)]
    /// in its closed form Psi(v) + ||v|| dist(xi, K*).
    [[nodiscard]] double contact_potential(const GridFunction& v, const GridFunction& xi) const {
        return gauge.psi(v) + l2_norm(v) * gauge.dual_dist(xi);
    }
};

/// argmin_x { a|x| + (b/2) x^2 + (1/2)(x-y)^2 } = sign(y) max(0, |y|-a) / (1+b).
[[nodiscard]] inline double shrink_scale(double y, double a, double b) {
    if (!(a >= 0.0) || !(b >= 0.0)) throw invalid_parameter("shrink_scale: need a, b >= 0");
    const double m = std::abs(y) - a;
    return m <= 0.0 ? 0.0 : (y > 0.0 ? m : -m) / (1.0 + b);
}

/// Asymmetric variant: thresholds a_plus for x > 0 and a_minus for x < 0.
[[nodiscard]] inline double shrink_scale_asym(double y, double a_plus, double a_minus, double b) {
    if (y > a_plus) return (y - a_plus) / (1.0 + b);
    if (y < -a_minus) return (y + a_minus) / (1.0 + b);
    return 0.0;
}

} // namespace bvsol
