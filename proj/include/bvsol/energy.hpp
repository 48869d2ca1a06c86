#pragma once

// Discretized energies E_t(u) = sum_cells [beta-term + W(u) - l(t,x) u] with
// value, smooth gradient, power, slack, witness validation and the
// two-norm convexity checks.

#include "bvsol/dissipation.hpp"
#include "bvsol/errors.hpp"
#include "bvsol/numerics.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace bvsol {

/// External loading l(t,x) = a(t) + b(t) x with a, b either affine in t or
/// C^1-interpolated sample tables (cubic Hermite, finite-difference slopes).
struct Loading {
    struct Coef {
        // affine: c0 + c1 t; table: Hermite interpolation of (t_k, y_k)
        bool is_table = false;
        double c0 = 0.0, c1 = 0.0;
        std::vector<double> t, y;

        [[nodiscard]] double value(double s) const {
            if (!is_table) return c0 + c1 * s;
            return hermite(s, false);
        }
        [[nodiscard]] double deriv(double s) const {
            if (!is_table) return c1;
            return hermite(s, true);
        }

    private:
        [[nodiscard]] double hermite(double s, bool want_deriv) const {
            const std::size_t n = t.size();
            if (s <= t.front()) s = t.front();
            if (s >= t.back()) s = t.back();
            std::size_t k = 1;
            while (k + 1 < n && t[k] < s) ++k;
            const double t0 = t[k - 1], t1 = t[k], dt = t1 - t0;
            const double y0 = y[k - 1], y1 = y[k];
            const double m0 = slope(k - 1), m1 = slope(k);
            const double x = (s - t0) / dt;
            const double h00 = 2 * x * x * x - 3 * x * x + 1, h10 = x * x * x - 2 * x * x + x;
            const double h01 = -2 * x * x * x + 3 * x * x, h11 = x * x * x - x * x;
            if (!want_deriv) return h00 * y0 + h10 * dt * m0 + h01 * y1 + h11 * dt * m1;
            const double d00 = 6 * x * x - 6 * x, d10 = 3 * x * x - 4 * x + 1;
            const double d01 = -6 * x * x + 6 * x, d11 = 3 * x * x - 2 * x;
            return (d00 * y0 + d10 * dt * m0 + d01 * y1 + d11 * dt * m1) / dt;
        }
        [[nodiscard]] double slope(std::size_t k) const {
            const std::size_t n = t.size();
            if (k == 0) return (y[1] - y[0]) / (t[1] - t[0]);
            if (k + 1 == n) return (y[n - 1] - y[n - 2]) / (t[n - 1] - t[n - 2]);
            return (y[k + 1] - y[k - 1]) / (t[k + 1] - t[k - 1]);
        }
    };

    Coef a, b;

    /// l(t,x) = la * t + lb * x + lc.
    static Loading affine_tx(double la, double lb, double lc) {
        Loading l;
        l.a.c0 = lc;
        l.a.c1 = la;
        l.b.c0 = lb;
        return l;
    }

    static Loading tables(std::vector<double> tt, std::vector<double> av, std::vector<double> bv) {
        if (tt.size() < 2 || av.size() != tt.size() || bv.size() != tt.size())
            throw invalid_parameter("Loading: tables need >= 2 aligned samples");
        Loading l;
        l.a.is_table = l.b.is_table = true;
        l.a.t = tt;
        l.a.y = std::move(av);
        l.b.t = std::move(tt);
        l.b.y = std::move(bv);
        return l;
    }

    [[nodiscard]] double value(double t, double x) const { return a.value(t) + b.value(t) * x; }
    [[nodiscard]] double dt(double t, double x) const { return a.deriv(t) + b.deriv(t) * x; }
    [[nodiscard]] bool affine_in_t() const { return !a.is_table && !b.is_table; }
};

/// Bulk potential W. The explicit double well is the C^1 piecewise quadratic
///   W(u) = (u+4)^2/2 for u <= -2,  4 - u^2/2 for |u| < 2,  (u-4)^2/2 for u >= 2,
/// with one-sided second derivatives giving semiconvexity W'' >= -1.
struct Well {
    enum class Kind { smooth, double_well, indicator };

    Kind kind = Kind::smooth;
    std::function<double(double)> W;
    std::function<double(double)> Wp;
    double semiconvexity = 0.0;   // lower bound on W'' (one-sided)
    double curvature_bound = 0.0; // sup |W''| on the working range
    std::string name = "custom";

    static Well smooth_lambda_convex(std::function<double(double)> w,
                                     std::function<double(double)> wp, double lambda,
                                     double curvature, std::string name = "custom") {
        Well out;
        out.kind = Kind::smooth;
        out.W = std::move(w);
        out.Wp = std::move(wp);
        out.semiconvexity = lambda;
        out.curvature_bound = curvature;
        out.name = std::move(name);
        return out;
    }

    /// W(u) = (lambda/2) (u - center)^2.
    static Well quadratic(double lambda, double center) {
        if (!(lambda > 0.0)) throw invalid_parameter("Well::quadratic: lambda must be positive");
        return smooth_lambda_convex([lambda, center](double u) { return 0.5 * lambda * (u - center) * (u - center); },
                                    [lambda, center](double u) { return lambda * (u - center); },
                                    lambda, lambda, "quadratic");
    }

    /// The classical quartic double well W(u) = (1-u^2)^2/4, W'' >= -1.
    static Well quartic() {
        return smooth_lambda_convex([](double u) { return 0.25 * (1 - u * u) * (1 - u * u); },
                                    [](double u) { return u * (u * u - 1.0); }, -1.0, 26.0,
                                    "quartic");
    }

    static Well double_well() {
        Well out;
        out.kind = Kind::double_well;
        out.W = [](double u) {
            if (u <= -2.0) return 0.5 * (u + 4.0) * (u + 4.0);
            if (u < 2.0) return 4.0 - 0.5 * u * u;
            return 0.5 * (u - 4.0) * (u - 4.0);
        };
        out.Wp = [](double u) {
            if (u <= -2.0) return u + 4.0;
            if (u < 2.0) return -u;
            return u - 4.0;
        };
        out.semiconvexity = -1.0;
        out.curvature_bound = 1.0;
        out.name = "double_well";
        return out;
    }

    static Well indicator01() {
        Well out;
        out.kind = Kind::indicator;
        out.W = [](double) { return 0.0; }; // inside [0,1]; admissibility handled by the model
        out.Wp = nullptr;
        out.semiconvexity = 0.0;
        out.curvature_bound = 0.0;
        out.name = "indicator";
        return out;
    }

    [[nodiscard]] bool differentiable() const { return kind != Kind::indicator; }
};

enum class GradTerm { none, dirichlet, tv };

/// Candidate subgradient xi in dE_t(u) for a nonsmooth model, together with
/// the worst probe residual of its defining inequality.
struct SubgradientWitness {
    GridFunction xi;
    double residual_gap = 0.0;
};

/// Result of a slack evaluation; `upper_bound_only` marks witness-based values.
struct SlackValue {
    double value = 0.0;
    bool upper_bound_only = false;
};

/// A member of the discretized energy class: grad term, well, loading, grid.
struct EnergyModel {
    GradTerm grad_term = GradTerm::none;
    double tv_delta = 0.0; // coefficient of the TV term
    Well well;
    Loading loading;
    Grid1D grid;

    [[nodiscard]] bool decoupled() const { return grad_term == GradTerm::none; }
    [[nodiscard]] bool smooth() const {
        return well.differentiable() && grad_term != GradTerm::tv;
    }

    [[nodiscard]] bool admissible(const GridFunction& u) const {
        if (!u.finite()) return false;
        if (well.kind == Well::Kind::indicator)
            for (double v : u.values)
                if (v < 0.0 || v > 1.0) return false;
        return true;
    }

    /// E_t(u); returns +infinity (not an error) for inadmissible states of
    /// indicator-well models.
    [[nodiscard]] double energy(double t, const GridFunction& u) const {
        if (!u.finite()) throw invalid_state("energy: state has non-finite entries");
        if (!admissible(u)) return std::numeric_limits<double>::infinity();
        const double h = grid.spacing();
        double bulk = 0.0;
        for (int i = 0; i < grid.n_cells(); ++i) {
            const double ui = u.values[static_cast<std::size_t>(i)];
            bulk += well.W(ui) - loading.value(t, grid.center(i)) * ui;
        }
        double grad = 0.0;
        if (grad_term == GradTerm::dirichlet) {
            for (int i = 0; i + 1 < grid.n_cells(); ++i) {
                const double d = (u.values[static_cast<std::size_t>(i + 1)] -
                                  u.values[static_cast<std::size_t>(i)]) / h;
                grad += 0.5 * h * d * d;
            }
        } else if (grad_term == GradTerm::tv) {
            for (int i = 0; i + 1 < grid.n_cells(); ++i)
                grad += tv_delta * std::abs(u.values[static_cast<std::size_t>(i + 1)] -
                                            u.values[static_cast<std::size_t>(i)]);
        }
        return h * bulk + grad;
    }

    /// P_t(u) = -integral of dl/dt * u.
    [[nodiscard]] double power(double t, const GridFunction& u) const {
        const double h = grid.spacing();
        double s = 0.0;
        for (int i = 0; i < grid.n_cells(); ++i)
            s += loading.dt(t, grid.center(i)) * u.values[static_cast<std::size_t>(i)];
        return -h * s;
    }

    /// L^2-representer of the energy gradient for C^1 wells without TV term:
    /// -Lap u + W'(u) - l(t, .) with natural (no-flux) boundary handling.
    [[nodiscard]] GridFunction smooth_gradient(double t, const GridFunction& u) const {
        if (!smooth())
            throw unsupported_model("smooth_gradient: model has a nonsmooth energy (TV or indicator)");
        const int n = grid.n_cells();
        const double h = grid.spacing();
        GridFunction g(grid);
        for (int i = 0; i < n; ++i) {
            const std::size_t k = static_cast<std::size_t>(i);
            double v = well.Wp(u.values[k]) - loading.value(t, grid.center(i));
            if (grad_term == GradTerm::dirichlet) {
                const double left = i > 0 ? u.values[k - 1] - u.values[k] : 0.0;
                const double right = i + 1 < n ? u.values[k + 1] - u.values[k] : 0.0;
                v -= (left + right) / (h * h);
            }
            g.values[k] = v;
        }
        return g;
    }

    /// Slack e_t(u) = dist(-dE_t(u), K*). Exact for smooth models (singleton
    /// subdifferential); witness-based upper bound otherwise.
    [[nodiscard]] SlackValue slack(const Gauge& gauge, double t, const GridFunction& u,
                                   const SubgradientWitness* witness = nullptr) const {
        if (smooth()) {
            GridFunction g = smooth_gradient(t, u);
            for (double& v : g.values) v = -v;
            return {gauge.dual_dist(g), false};
        }
        if (witness == nullptr)
            throw witness_required("slack: nonsmooth model needs a subgradient witness");
        GridFunction neg = witness->xi;
        for (double& v : neg.values) v = -v;
        return {gauge.dual_dist(neg), true};
    }

    /// Residual of the Garding-type subdifferentiability inequality at probe v:
    ///   E_t(v) - E_t(u) - <xi, v-u> - alpha ||v-u||^2 + Lambda Psi_w(v-u) ||v-u||.
    /// Nonnegative (>= -tol) certifies the inequality for this probe.
    [[nodiscard]] double check_garding(const Gauge& gauge, double t, const GridFunction& u,
                                       const GridFunction& v, const GridFunction& xi,
                                       double alpha_E, double lambda_E) const {
        const GridFunction d = v - u;
        return energy(t, v) - energy(t, u) - dot(xi, d) - alpha_E * l2_norm_sq(d) +
               lambda_E * gauge.psi_wedge(d) * l2_norm(d);
    }

    /// Residual of the generalized two-norm lambda-convexity inequality at (u, v, theta).
    [[nodiscard]] double check_lambda_convexity(const Gauge& gauge, double t,
                                                const GridFunction& u, const GridFunction& v,
                                                double theta, double alpha_E,
                                                double lambda_E) const {
        if (theta < 0.0 || theta > 1.0)
            throw invalid_parameter("check_lambda_convexity: theta must lie in [0,1]");
        const GridFunction mix = (1.0 - theta) * u + theta * v;
        const GridFunction d = u - v;
        return (1.0 - theta) * energy(t, u) + theta * energy(t, v) - energy(t, mix) -
               theta * (1.0 - theta) *
                   (alpha_E * l2_norm_sq(d) - lambda_E * gauge.psi_wedge(d) * l2_norm(d));
    }
};

/// Produces a witness xi in dE_t(u) for sample k of a curve.
using WitnessProvider =
    std::function<SubgradientWitness(std::size_t sample, double t, const GridFunction& u)>;

/// Check a witness xi against E_t(v) >= E_t(u) + <xi, v-u> - (kappa/2)||v-u||^2
/// over the supplied probes; returns the worst (most negative) margin.
[[nodiscard]] inline double validate_witness(const EnergyModel& model, double t,
                                             const GridFunction& u, const GridFunction& xi,
                                             const std::vector<GridFunction>& probes,
                                             double kappa) {
    double worst = std::numeric_limits<double>::infinity();
    const double eu = model.energy(t, u);
    for (const auto& v : probes) {
        const double ev = model.energy(t, v);
        if (!std::isfinite(ev)) continue; // inadmissible probes carry no information
        const GridFunction d = v - u;
        worst = std::min(worst, ev - eu - dot(xi, d) + 0.5 * kappa * l2_norm_sq(d));
    }
    return worst;
}

} // namespace bvsol
