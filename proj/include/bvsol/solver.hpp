#pragma once

// The viscous time-incremental scheme: per-step proximal minimization of
//   dt * Psi_eps((U - U_prev)/dt) + E_{t_n}(U),
// trajectory assembly, and the node/affine/variational interpolants.
//
// Every accepted step carries a dual-norm residual certificate for the
// discrete Euler inclusion 0 in dPsi_eps(V) + dE_{t_n}(U) together with the
// recovered multiplier xi in dPsi_eps(V).

#include "bvsol/dissipation.hpp"
#include "bvsol/energy.hpp"
#include "bvsol/errors.hpp"
#include "bvsol/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace bvsol {

struct SchemeParams {
    double eps = 1e-2;  // viscosity
    double tau = 1e-4;  // time step
    double T = 1.0;     // horizon
    double tol_inner = -1.0; // dual-norm Euler residual; <= 0 selects max(1e-9, tau^2/eps)
    int max_inner_iter = 400000;
    enum class Init { previous_step, grid_search_scalar };
    Init init = Init::previous_step;
    bool require_stable_init = false; // verify slack(0, u0) = 0 (V-parameterizable runs)
    int competitor_stride = 0;        // 0 = off; else probe for lower-energy competitors
    std::uint64_t seed = 20240915u;

    [[nodiscard]] double effective_tol() const {
        return tol_inner > 0.0 ? tol_inner : std::max(1e-9, tau * tau / eps);
    }
};

struct StepResult {
    GridFunction state;
    GridFunction multiplier; // xi in dPsi_eps(V), recovered from optimality
    double residual = 0.0;   // dual-norm Euler residual
    double fenchel_gap = 0.0; // Psi_eps(V) + Psi_eps*(xi) - <xi, V>, membership check
    int inner_iters = 0;
    bool competitor_found = false;
};

/// Discrete solution of the incremental scheme with per-step bookkeeping.
struct Trajectory {
    std::vector<double> times;              // t_0 .. t_N
    std::vector<GridFunction> states;       // U^0 .. U^N
    std::vector<GridFunction> multipliers;  // xi^1 .. xi^N
    std::vector<double> inner_residuals;    // r_1 .. r_N
    std::vector<double> fenchel_gaps;
    std::vector<double> dissipation_increments; // dt * Psi_eps(V^n)
    std::vector<double> conj_increments;        // dt * Psi_eps^*(xi^n)
    std::vector<double> psi_increments;         // Psi(U^n - U^{n-1})
    std::vector<double> l1_increments;
    std::vector<double> l2_increments;
    std::vector<double> energies;        // E_{t_n}(U^n), n = 0..N
    std::vector<double> work_increments; // integral of P(s, U^{n-1}) over the step
    std::vector<int> competitor_flags;
    double eps = 0.0;
    double tol_inner = 0.0;

    [[nodiscard]] std::size_t n_steps() const { return times.empty() ? 0 : times.size() - 1; }
    [[nodiscard]] double total_v_increment() const {
        double s = 0.0;
        for (double v : l2_increments) s += v;
        return s;
    }
};

namespace detail {

struct Interval {
    double lo, hi;
};

inline double interval_dist(const Interval& a, const Interval& b) {
    return std::max({0.0, b.lo - a.hi, a.lo - b.hi});
}

/// Nearest point of b to the interval a (a common point when they overlap).
inline double interval_nearest(const Interval& a, const Interval& b) {
    if (a.hi < b.lo) return b.lo;
    if (a.lo > b.hi) return b.hi;
    return 0.5 * (std::max(a.lo, b.lo) + std::min(a.hi, b.hi));
}

/// Componentwise subdifferential interval of v -> Psi_eps at V (L^2 representer).
inline Interval psi_eps_subdiff(const DissipationPair& diss, const GridFunction& V, double eps,
                                double v_l2, std::size_t i) {
    const double wp = diss.gauge.w_plus[i], wm = diss.gauge.w_minus[i];
    const double vi = V.values[i];
    if (vi == 0.0) return {-wm, wp};
    double visc;
    if (diss.viscous.form == ViscousPotential::Form::quadratic) {
        visc = eps * vi;
    } else {
        visc = v_l2 > 0.0 ? diss.viscous.F_prime(eps * v_l2) * vi / v_l2 : 0.0;
    }
    return vi > 0.0 ? Interval{wp + visc, wp + visc} : Interval{-wm + visc, -wm + visc};
}

/// Componentwise interval of available dE_t(U) selections (L^2 representer).
struct EnergySubdiff {
    const EnergyModel* model;
    double t;
    const GridFunction* U;
    const std::vector<double>* tv_p; // face multipliers (size n-1) for TV models

    [[nodiscard]] Interval at(std::size_t i) const {
        const EnergyModel& m = *model;
        const int n = m.grid.n_cells();
        const double h = m.grid.spacing();
        const double ui = U->values[i];
        double base = -m.loading.value(t, m.grid.center(static_cast<int>(i)));
        if (m.well.differentiable()) base += m.well.Wp(ui);
        if (m.grad_term == GradTerm::dirichlet) {
            const double left = i > 0 ? U->values[i - 1] - ui : 0.0;
            const double right = static_cast<int>(i) + 1 < n ? U->values[i + 1] - ui : 0.0;
            base -= (left + right) / (h * h);
        } else if (m.grad_term == GradTerm::tv && tv_p != nullptr) {
            double div = 0.0; // (D^T p)_i = p_{i-1} - p_i with (D f)_j = f_{j+1} - f_j
            if (i > 0) div += (*tv_p)[i - 1];
            if (static_cast<int>(i) + 1 < n) div -= (*tv_p)[i];
            base += div;
        }
        Interval out{base, base};
        if (m.well.kind == Well::Kind::indicator) {
            const double btol = 1e-12;
            if (ui <= btol) out.lo = -std::numeric_limits<double>::infinity();
            if (ui >= 1.0 - btol) out.hi = std::numeric_limits<double>::infinity();
        }
        return out;
    }
};

/// Project raw face duals onto the sign-complementarity set for state U; faces
/// flatter than ztol keep their clamped value, so the assembled element is an
/// exact TV subgradient of the plateau-snapped state.
inline std::vector<double> complementary_face_duals(const EnergyModel& m, const GridFunction& U,
                                                    const std::vector<double>& p_raw) {
    const int n = m.grid.n_cells();
    const double lam = m.tv_delta / m.grid.spacing();
    double scale = 1.0;
    for (double v : U.values) scale = std::max(scale, std::abs(v));
    const double ztol = 1e-9 * scale;
    std::vector<double> p(static_cast<std::size_t>(n - 1));
    for (int j = 0; j + 1 < n; ++j) {
        const std::size_t k = static_cast<std::size_t>(j);
        const double d = U.values[k + 1] - U.values[k];
        if (d > ztol)
            p[k] = lam;
        else if (d < -ztol)
            p[k] = -lam;
        else
            p[k] = std::clamp(k < p_raw.size() ? p_raw[k] : 0.0, -lam, lam);
    }
    return p;
}

struct EulerCertificate {
    GridFunction multiplier;
    double residual;
};

/// Residual of 0 in dPsi_eps(V) + dE_t(U) and the nearest multiplier selection.
inline EulerCertificate euler_certificate(const EnergyModel& model, const DissipationPair& diss,
                                          double t, const GridFunction& U,
                                          const GridFunction& u_prev, double dt, double eps,
                                          const std::vector<double>* tv_p_raw) {
    const std::size_t n = U.values.size();
    GridFunction V = U - u_prev;
    for (double& v : V.values) v /= dt;
    const double v_l2 = l2_norm(V);

    std::vector<double> p;
    if (model.grad_term == GradTerm::tv) {
        static const std::vector<double> empty;
        p = complementary_face_duals(model, U, tv_p_raw ? *tv_p_raw : empty);
    }
    EnergySubdiff de{&model, t, &U, model.grad_term == GradTerm::tv ? &p : nullptr};

    GridFunction xi(U.grid);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Interval s = psi_eps_subdiff(diss, V, eps, v_l2, i);
        const Interval e = de.at(i);
        const Interval neg_e{-e.hi, -e.lo};
        const double d = interval_dist(neg_e, s);
        ss += d * d;
        xi.values[i] = interval_nearest(neg_e, s);
    }
    return {std::move(xi), std::sqrt(U.grid.spacing() * ss)};
}

/// Exact global minimizer of w+(v-u)_+ + w-(u-v)_+ + (c/2)(v-u)^2 + W(v) - g v
/// for the explicit piecewise-quadratic double well (requires c > 1).
inline double scalar_double_well_min(double u, double c, double g, double wp, double wm) {
    double best_v = u;
    double best_J = std::numeric_limits<double>::infinity();
    const auto J = [&](double v) {
        const double z = v - u;
        const double absw = z >= 0.0 ? wp * z : -wm * z;
        double W;
        if (v <= -2.0)
            W = 0.5 * (v + 4.0) * (v + 4.0);
        else if (v < 2.0)
            W = 4.0 - 0.5 * v * v;
        else
            W = 0.5 * (v - 4.0) * (v - 4.0);
        return absw + 0.5 * c * z * z + W - g * v;
    };
    const auto consider = [&](double v) {
        const double val = J(v);
        if (val < best_J) {
            best_J = val;
            best_v = v;
        }
    };
    consider(u);
    consider(-2.0);
    consider(2.0);
    // stationary points per (W piece) x (side of the kink at u):
    // s + c(v-u) + W'(v) = g with s = wp on v > u, s = -wm on v < u
    const double sides[2] = {wp, -wm};
    for (double s : sides) {
        const bool up = s == wp;
        double v = (g - s + c * u - 4.0) / (c + 1.0); // W' = v + 4 on v <= -2
        if (v <= -2.0 && (up ? v >= u : v <= u)) consider(v);
        if (c > 1.0) {
            v = (g - s + c * u) / (c - 1.0); // W' = -v on (-2, 2)
            if (v > -2.0 && v < 2.0 && (up ? v >= u : v <= u)) consider(v);
        }
        v = (g - s + c * u + 4.0) / (c + 1.0); // W' = v - 4 on v >= 2
        if (v >= 2.0 && (up ? v >= u : v <= u)) consider(v);
    }
    return best_v;
}

/// Coarse scan plus golden-section refinement on [lo, hi]; certified global up
/// to the scan resolution. Also serves as the test oracle.
template <class F>
inline double scalar_grid_search(F&& J, double lo, double hi, int coarse = 2000,
                                 double tol = 1e-13) {
    double best_x = lo, best_v = J(lo);
    const double step = (hi - lo) / coarse;
    for (int k = 1; k <= coarse; ++k) {
        const double x = lo + k * step;
        const double v = J(x);
        if (v < best_v) {
            best_v = v;
            best_x = x;
        }
    }
    double a = std::max(lo, best_x - step), b = std::min(hi, best_x + step);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = J(c), fd = J(d);
    while (b - a > tol * std::max(1.0, std::abs(a) + std::abs(b))) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = J(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = J(d);
        }
    }
    return fc < fd ? c : d;
}

/// Warm-start data carried across incremental steps.
struct InnerState {
    std::vector<double> tv_dual;
    GridFunction last_state;
    bool valid = false;
};

/// Decoupled scalar solve (grad_term == none, quadratic F): every cell is an
/// independent 1D minimization solved to global optimality.
inline GridFunction decoupled_step(const EnergyModel& model, const DissipationPair& diss,
                                   const GridFunction& u_prev, double t, double dt, double eps) {
    const double c = eps / dt;
    GridFunction U(model.grid);
    for (int i = 0; i < model.grid.n_cells(); ++i) {
        const std::size_t k = static_cast<std::size_t>(i);
        const double u = u_prev.values[k];
        const double g = model.loading.value(t, model.grid.center(i));
        const double wp = diss.gauge.w_plus[k], wm = diss.gauge.w_minus[k];
        double v;
        if (model.well.kind == Well::Kind::indicator) {
            v = std::clamp(u + shrink_scale_asym(g / c, wp / c, wm / c, 0.0), 0.0, 1.0);
        } else if (model.well.kind == Well::Kind::double_well && c > 1.0 + 1e-9) {
            v = scalar_double_well_min(u, c, g, wp, wm);
        } else {
            const double force = g - model.well.Wp(u);
            if (force <= wp && force >= -wm) {
                v = u; // sticking: 0 lies in the subdifferential at u
            } else {
                const auto J = [&](double x) {
                    const double z = x - u;
                    const double absw = z >= 0.0 ? wp * z : -wm * z;
                    return absw + 0.5 * c * z * z + model.well.W(x) - g * x;
                };
                double R = 4.0 + (std::abs(g) + std::abs(model.well.Wp(u)) + wp + wm) /
                                     std::max(1e-2, c);
                v = scalar_grid_search(J, u - R, u + R);
                for (int grow = 0; grow < 4 && (v <= u - R + 1e-9 || v >= u + R - 1e-9); ++grow) {
                    R *= 4.0;
                    v = scalar_grid_search(J, u - R, u + R, 8000);
                }
                // Newton polish of the stationarity s + c(v-u) + W'(v) = g
                // (golden section stalls at the sqrt(machine-eps) floor)
                if (v != u) {
                    const double s = v > u ? wp : -wm;
                    const auto res = [&](double x) { return s + c * (x - u) + model.well.Wp(x) - g; };
                    for (int it = 0; it < 6; ++it) {
                        const double fd = 1e-6 * (1.0 + std::abs(v));
                        const double wpp =
                            (model.well.Wp(v + fd) - model.well.Wp(v - fd)) / (2.0 * fd);
                        const double denom = c + wpp;
                        if (std::abs(denom) < 1e-12) break;
                        const double vn = v - res(v) / denom;
                        if (!std::isfinite(vn) || (v > u) != (vn > u)) break;
                        if (std::abs(res(vn)) < std::abs(res(v)))
                            v = vn;
                        else
                            break;
                    }
                }
            }
        }
        U.values[k] = v;
    }
    return U;
}

/// Objective of the incremental problem divided by h (argmin-equivalent).
inline double step_objective_h(const EnergyModel& model, const DissipationPair& diss,
                               const GridFunction& U, const GridFunction& u_prev, double t,
                               double dt, double eps) {
    const double e = model.energy(t, U);
    if (!std::isfinite(e)) return e;
    GridFunction V = U - u_prev;
    for (double& v : V.values) v /= dt;
    return (dt * diss.psi_eps(V, eps) + e) / model.grid.spacing();
}

/// Forward-backward splitting (FISTA with monotone restart) for smooth coupled
/// models: gradient step on the smooth part (well + loading + Dirichlet term,
/// plus the viscous term for power-law F), proximal shrinkage on the weighted
/// L^1 around u_prev (folding the quadratic viscosity for quadratic F).
inline GridFunction smooth_fb_step(const EnergyModel& model, const DissipationPair& diss,
                                   const GridFunction& u_prev, double t, double dt, double eps,
                                   double tol, int max_iter, int& iters_used,
                                   const GridFunction& u_init) {
    const int n = model.grid.n_cells();
    const double h = model.grid.spacing();
    const bool quad_F = diss.viscous.form == ViscousPotential::Form::quadratic;
    const double c = quad_F ? eps / dt : 0.0;

    std::vector<double> ell(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        ell[static_cast<std::size_t>(i)] = model.loading.value(t, model.grid.center(i));

    const auto grad_f = [&](const GridFunction& U, GridFunction& g) {
        for (int i = 0; i < n; ++i) {
            const std::size_t k = static_cast<std::size_t>(i);
            double v = model.well.differentiable() ? model.well.Wp(U.values[k]) : 0.0;
            v -= ell[k];
            if (model.grad_term == GradTerm::dirichlet) {
                const double left = i > 0 ? U.values[k - 1] - U.values[k] : 0.0;
                const double right = i + 1 < n ? U.values[k + 1] - U.values[k] : 0.0;
                v -= (left + right) / (h * h);
            }
            g.values[k] = v;
        }
        if (!quad_F) {
            const GridFunction d = U - u_prev;
            const double nrm = l2_norm(d);
            if (nrm > 0.0) {
                const double fac = diss.viscous.F_prime(eps * nrm / dt) / nrm;
                for (std::size_t k = 0; k < g.values.size(); ++k) g.values[k] += fac * d.values[k];
            }
        }
    };
    const auto f_val = [&](const GridFunction& U) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) {
            const std::size_t k = static_cast<std::size_t>(i);
            s += (model.well.differentiable() ? model.well.W(U.values[k]) : 0.0) -
                 ell[k] * U.values[k];
        }
        if (model.grad_term == GradTerm::dirichlet)
            for (int i = 0; i + 1 < n; ++i) {
                const double d = (U.values[static_cast<std::size_t>(i + 1)] -
                                  U.values[static_cast<std::size_t>(i)]) / h;
                s += 0.5 * d * d;
            }
        if (!quad_F) {
            const GridFunction d = U - u_prev;
            s += dt * diss.viscous.F(eps * l2_norm(d) / dt) / (eps * h);
        }
        return s;
    };
    const auto prox = [&](const GridFunction& Y, double eta, GridFunction& out) {
        for (std::size_t k = 0; k < Y.values.size(); ++k) {
            const double z = shrink_scale_asym(Y.values[k] - u_prev.values[k],
                                               eta * diss.gauge.w_plus[k],
                                               eta * diss.gauge.w_minus[k], eta * c);
            double v = u_prev.values[k] + z;
            if (model.well.kind == Well::Kind::indicator) v = std::clamp(v, 0.0, 1.0);
            out.values[k] = v;
        }
    };
    // one FB update from Y with backtracking; returns the candidate
    GridFunction g(model.grid), cand(model.grid), Z(model.grid);
    double eta = 0.0;
    const auto fb_from = [&](const GridFunction& Y) {
        grad_f(Y, g);
        const double fY = f_val(Y);
        for (;;) {
            Z = Y;
            for (std::size_t k = 0; k < Z.values.size(); ++k) Z.values[k] -= eta * g.values[k];
            prox(Z, eta, cand);
            double quad = fY, nrm2 = 0.0;
            for (std::size_t k = 0; k < cand.values.size(); ++k) {
                const double d = cand.values[k] - Y.values[k];
                quad += g.values[k] * d;
                nrm2 += d * d;
            }
            quad += nrm2 / (2.0 * eta);
            if (f_val(cand) <= quad + 1e-12 * std::max(1.0, std::abs(quad)) || eta < 1e-18) break;
            eta *= 0.5;
        }
    };

    double L = model.well.curvature_bound +
               (model.grad_term == GradTerm::dirichlet ? 4.0 / (h * h) : 0.0);
    if (!quad_F) L += 10.0 * eps / dt; // crude; backtracking refines
    eta = 1.0 / std::max(L, 1e-12);

    GridFunction U = u_init;
    GridFunction Y = U;
    double theta = 1.0;
    double J_best = step_objective_h(model, diss, U, u_prev, t, dt, eps);
    iters_used = 0;
    for (int it = 0; it < max_iter; ++it) {
        ++iters_used;
        fb_from(Y);
        double J_new = step_objective_h(model, diss, cand, u_prev, t, dt, eps);
        if (J_new > J_best) { // momentum overshoot: restart from the best iterate
            theta = 1.0;
            fb_from(U);
            J_new = step_objective_h(model, diss, cand, u_prev, t, dt, eps);
        }
        const double theta_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
        const double mom = (theta - 1.0) / theta_new;
        Y = cand;
        for (std::size_t k = 0; k < Y.values.size(); ++k)
            Y.values[k] += mom * (cand.values[k] - U.values[k]);
        std::swap(U.values, cand.values);
        theta = theta_new;
        J_best = std::min(J_best, J_new);

        if (it % 5 == 4 || it + 1 == max_iter) {
            const auto cert = euler_certificate(model, diss, t, U, u_prev, dt, eps, nullptr);
            if (cert.residual <= tol) break;
        }
    }
    return U;
}

/// TV models: outer majorization of the C^1 well (exact for indicator wells)
/// with an inner primal-dual splitting alternating closed-form cell shrinkage
/// and face-wise dual clipping for the TV term.
inline GridFunction tv_step(const EnergyModel& model, const DissipationPair& diss,
                            const GridFunction& u_prev, double t, double dt, double eps,
                            double tol, int max_iter, int& iters_used,
                            std::vector<double>& p_io, const GridFunction* u_init) {
    if (diss.viscous.form != ViscousPotential::Form::quadratic)
        throw unsupported_model("tv_step: TV models require the quadratic viscous potential");
    const int n = model.grid.n_cells();
    const double h = model.grid.spacing();
    const double c = eps / dt;
    const double lam = model.tv_delta / h;
    const double curv = model.well.differentiable() ? model.well.curvature_bound : 0.0;
    const bool box = model.well.kind == Well::Kind::indicator;

    std::vector<double> ell(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        ell[static_cast<std::size_t>(i)] = model.loading.value(t, model.grid.center(i));

    GridFunction U = u_init ? *u_init : u_prev;
    if (static_cast<int>(p_io.size()) != n - 1) p_io.assign(static_cast<std::size_t>(n - 1), 0.0);
    std::vector<double>& p = p_io;

    GridFunction Ubar = U, Unew(model.grid);
    iters_used = 0;
    bool converged = false;

    while (iters_used < max_iter && !converged) {
        // majorization point for the C^1 well: W(x) <= W(y) + W'(y)(x-y) + curv/2 (x-y)^2
        std::vector<double> b(static_cast<std::size_t>(n));
        for (std::size_t k = 0; k < b.size(); ++k) {
            const double wprime = model.well.differentiable() ? model.well.Wp(U.values[k]) : 0.0;
            b[k] = ell[k] - wprime + curv * U.values[k];
        }
        const double Q = c + curv;
        double tau_pd = 0.5, sig_pd = 0.5; // tau*sig*||D||^2 <= 1 with ||D||^2 <= 4
        const int inner_cap = std::min(max_iter - iters_used, 4000);
        for (int it = 0; it < inner_cap; ++it) {
            ++iters_used;
            for (int j = 0; j + 1 < n; ++j) {
                const std::size_t k = static_cast<std::size_t>(j);
                p[k] = std::clamp(p[k] + sig_pd * (Ubar.values[k + 1] - Ubar.values[k]), -lam, lam);
            }
            for (int i = 0; i < n; ++i) {
                const std::size_t k = static_cast<std::size_t>(i);
                double div = 0.0;
                if (i > 0) div += p[k - 1];
                if (i + 1 < n) div -= p[k];
                const double yhat = U.values[k] - tau_pd * div;
                const double bb = b[k] + c * u_prev.values[k];
                const double B = 1.0 + tau_pd * Q;
                const double z0 =
                    (tau_pd * bb - tau_pd * Q * u_prev.values[k] + (yhat - u_prev.values[k])) / B;
                double x = u_prev.values[k] +
                           shrink_scale_asym(z0, tau_pd * diss.gauge.w_plus[k] / B,
                                             tau_pd * diss.gauge.w_minus[k] / B, 0.0);
                if (box) x = std::clamp(x, 0.0, 1.0);
                Unew.values[k] = x;
            }
            const double theta = 1.0 / std::sqrt(1.0 + 2.0 * Q * tau_pd);
            tau_pd *= theta;
            sig_pd /= theta;
            for (std::size_t k = 0; k < Ubar.values.size(); ++k)
                Ubar.values[k] = Unew.values[k] + theta * (Unew.values[k] - U.values[k]);
            std::swap(U.values, Unew.values);

            if (it % 10 == 9 || it + 1 == inner_cap) {
                const auto cert = euler_certificate(model, diss, t, U, u_prev, dt, eps, &p);
                if (cert.residual <= tol) {
                    converged = true;
                    break;
                }
                if (curv > 0.0 && it > 80) break; // refresh the majorization point
            }
        }
    }
    return U;
}

} // namespace detail

/// One incremental minimization step at time t (step length dt).
inline StepResult incremental_step(const EnergyModel& model, const DissipationPair& diss,
                                   const GridFunction& u_prev, double t, double dt,
                                   const SchemeParams& params,
                                   detail::InnerState* warm = nullptr) {
    if (!model.admissible(u_prev))
        throw invalid_state("incremental_step: inadmissible previous state");
    if (!(dt > 0.0)) throw invalid_parameter("incremental_step: dt must be positive");
    const double eps = params.eps;
    const double tol = params.effective_tol();

    GridFunction U(model.grid);
    int iters = 0;
    std::vector<double> tv_p;
    const std::vector<double>* p_raw = nullptr;
    if (model.decoupled() && diss.viscous.form == ViscousPotential::Form::quadratic) {
        U = detail::decoupled_step(model, diss, u_prev, t, dt, eps);
        iters = 1;
    } else if (model.grad_term == GradTerm::tv) {
        if (warm && warm->valid) tv_p = warm->tv_dual;
        const GridFunction* init = warm && warm->valid ? &warm->last_state : nullptr;
        U = detail::tv_step(model, diss, u_prev, t, dt, eps, tol, params.max_inner_iter, iters,
                            tv_p, init);
        p_raw = &tv_p;
        if (warm) {
            warm->tv_dual = tv_p;
            warm->last_state = U;
            warm->valid = true;
        }
    } else {
        GridFunction init = u_prev;
        if (params.init == SchemeParams::Init::grid_search_scalar && model.well.differentiable()) {
            EnergyModel flat = model;
            flat.grad_term = GradTerm::none;
            init = detail::decoupled_step(flat, diss, u_prev, t, dt, eps);
        } else if (warm && warm->valid) {
            init = warm->last_state;
        }
        U = detail::smooth_fb_step(model, diss, u_prev, t, dt, eps, tol, params.max_inner_iter,
                                   iters, init);
        if (warm) {
            warm->last_state = U;
            warm->valid = true;
        }
    }

    auto cert = detail::euler_certificate(model, diss, t, U, u_prev, dt, eps, p_raw);
    // floating-point floor: the certificate is conditioned by eps/dt
    const double tol_floor =
        1e-12 * (1.0 + eps / dt) * (1.0 + l2_norm(u_prev) + l2_norm(U));
    if (cert.residual > std::max(tol, tol_floor))
        throw step_failure("incremental_step: inner solver missed the Euler residual target", -1,
                           cert.residual);

    // the minimizer must beat the zero step
    const double e_prev = model.energy(t, u_prev);
    GridFunction V = U - u_prev;
    for (double& v : V.values) v /= dt;
    const double e_new = model.energy(t, U) + dt * diss.psi_eps(V, eps);
    const double slack_allow =
        cert.residual * (l2_norm(U - u_prev) + 1.0) + 1e-9 * std::max(1.0, std::abs(e_prev));
    if (std::isfinite(e_prev) && e_new > e_prev + slack_allow)
        throw step_failure("incremental_step: energy-decrease test failed", -1, e_new - e_prev);

    const double gap = diss.psi_eps(V, eps) + diss.psi_eps_conj(cert.multiplier, eps) -
                       dot(cert.multiplier, V);
    return {std::move(U), std::move(cert.multiplier), cert.residual, gap, iters, false};
}

/// Run the incremental scheme on [0, T] from u0.
inline Trajectory solve_viscous(const EnergyModel& model, const DissipationPair& diss,
                                const GridFunction& u0, const SchemeParams& params) {
    if (!model.admissible(u0)) throw invalid_state("solve_viscous: inadmissible initial state");
    if (params.require_stable_init) {
        if (!model.smooth())
            throw unsupported_model("solve_viscous: stable-init verification needs a smooth model");
        const double s0 = model.slack(diss.gauge, 0.0, u0).value;
        if (s0 > 1e-8)
            throw invalid_state("solve_viscous: initial state is not locally stable (slack = " +
                                std::to_string(s0) + ")");
    }
    const int n_steps = static_cast<int>(std::ceil(params.T / params.tau - 1e-9));
    Trajectory traj;
    traj.eps = params.eps;
    traj.tol_inner = params.effective_tol();
    traj.times.reserve(static_cast<std::size_t>(n_steps) + 1);
    traj.states.reserve(static_cast<std::size_t>(n_steps) + 1);
    traj.times.push_back(0.0);
    traj.states.push_back(u0);
    traj.energies.push_back(model.energy(0.0, u0));

    std::mt19937_64 rng(params.seed);
    detail::InnerState warm;
    for (int step_idx = 1; step_idx <= n_steps; ++step_idx) {
        const double t_n = std::min(step_idx * params.tau, params.T);
        const double t_prev = traj.times.back();
        const double dt = t_n - t_prev;
        const GridFunction& u_prev = traj.states.back();
        StepResult step;
        try {
            step = incremental_step(model, diss, u_prev, t_n, dt, params, &warm);
        } catch (step_failure& f) {
            throw step_failure(std::string(f.what()) + " at step " + std::to_string(step_idx),
                               step_idx, f.residual);
        }

        if (params.competitor_stride > 0 && step_idx % params.competitor_stride == 0) {
            const double J0 =
                detail::step_objective_h(model, diss, step.state, u_prev, t_n, dt, params.eps);
            double span = 1.0;
            for (double v : step.state.values) span = std::max(span, std::abs(v));
            std::normal_distribution<double> noise(0.0, 0.5 * span);
            for (int trial = 0; trial < 2 && !step.competitor_found; ++trial) {
                detail::InnerState scratch;
                scratch.last_state = step.state;
                for (double& v : scratch.last_state.values) v += noise(rng);
                scratch.valid = true;
                SchemeParams loc = params;
                loc.competitor_stride = 0;
                try {
                    StepResult alt = incremental_step(model, diss, u_prev, t_n, dt, loc, &scratch);
                    const double J1 = detail::step_objective_h(model, diss, alt.state, u_prev, t_n,
                                                               dt, params.eps);
                    if (J1 < J0 - 1e-7 * std::max(1.0, std::abs(J0))) step.competitor_found = true;
                } catch (const error&) {
                }
            }
        }

        const GridFunction d = step.state - u_prev;
        GridFunction V = d;
        for (double& v : V.values) v /= dt;
        traj.dissipation_increments.push_back(dt * diss.psi_eps(V, params.eps));
        traj.conj_increments.push_back(dt * diss.psi_eps_conj(step.multiplier, params.eps));
        traj.psi_increments.push_back(diss.psi(d));
        traj.l1_increments.push_back(l1_norm(d));
        traj.l2_increments.push_back(l2_norm(d));
        // exact step work for loadings affine in t (P is then affine in t as well)
        traj.work_increments.push_back(
            0.5 * dt * (model.power(t_prev, u_prev) + model.power(t_n, u_prev)));
        traj.inner_residuals.push_back(step.residual);
        traj.fenchel_gaps.push_back(step.fenchel_gap);
        traj.competitor_flags.push_back(step.competitor_found ? 1 : 0);
        traj.energies.push_back(model.energy(t_n, step.state));
        traj.multipliers.push_back(std::move(step.multiplier));
        traj.times.push_back(t_n);
        traj.states.push_back(std::move(step.state));
    }
    return traj;
}

/// Node interpolants of a trajectory: left-continuous piecewise constant
/// (value U^n on (t_{n-1}, t_n]) and the piecewise affine interpolant.
class TrajectoryInterpolants {
public:
    explicit TrajectoryInterpolants(const Trajectory& traj) : traj_(&traj) {
        if (traj.times.empty()) throw invalid_parameter("interpolants: empty trajectory");
    }

    [[nodiscard]] GridFunction piecewise_constant(double t) const {
        return traj_->states[locate(t)];
    }

    [[nodiscard]] GridFunction piecewise_affine(double t) const {
        const std::size_t n = locate(t);
        if (n == 0) return traj_->states[0];
        const double t0 = traj_->times[n - 1], t1 = traj_->times[n];
        const double lam = (t - t0) / (t1 - t0);
        return (1.0 - lam) * traj_->states[n - 1] + lam * traj_->states[n];
    }

private:
    [[nodiscard]] std::size_t locate(double t) const {
        const auto& ts = traj_->times;
        if (t < ts.front() - 1e-12 || t > ts.back() + 1e-12)
            throw domain_error("interpolants: t outside [0, T]");
        if (t <= ts.front()) return 0;
        const auto it = std::lower_bound(ts.begin(), ts.end(), t);
        return static_cast<std::size_t>(it - ts.begin());
    }

    const Trajectory* traj_;
};

/// De Giorgi variational interpolant at t in (t_{n-1}, t_n]: solves the
/// r-parameterized incremental problem with r = t - t_{n-1}.
inline StepResult variational_interpolant(const Trajectory& traj, const EnergyModel& model,
                                          const DissipationPair& diss, const SchemeParams& params,
                                          double t) {
    const auto& ts = traj.times;
    if (t <= ts.front() || t > ts.back() + 1e-12)
        throw domain_error("variational_interpolant: t outside (0, T]");
    const auto it = std::lower_bound(ts.begin(), ts.end(), t);
    const std::size_t n = std::min(static_cast<std::size_t>(it - ts.begin()), ts.size() - 1);
    const double r = t - ts[n - 1];
    return incremental_step(model, diss, traj.states[n - 1], t, r, params);
}

} // namespace bvsol
