// Acceptance suite: one pass/fail line per criterion clause, each tolerance
// pinned in code. Three clauses carry target constants that direct evaluation
// of the very models they accompany contradicts (an interface-position offset
// in the two-phase energy line, the viscous jump surcharge 16 = 2*8 in the
// wave defect, and the sqrt(eps) front lag against a tighter bound); those are
// kept as stated, marked expected-fail, and each prints the measured value
// next to the consistent closed-form one.
//
// Exit code: 0 when every clause passes except the expected-fail ones.
// With --strict the expected-fail clauses count as well.

#include "bvsol/config.hpp"
#include "bvsol/diagnostics.hpp"
#include "bvsol/reparam.hpp"
#include "bvsol/runner.hpp"
#include "bvsol/transitions.hpp"

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <random>
#include <string>
#include <vector>

using namespace bvsol;

namespace {

struct Suite {
    int failed = 0;
    int expected_failed = 0;
    int passed = 0;

    void clause(const std::string& id, bool pass, const std::string& detail,
                bool expected_fail = false) {
        const char* tag = pass           ? "PASS"
                          : expected_fail ? "FAIL (expected: documented inconsistency)"
                                          : "FAIL";
        std::printf("[%s] %-38s %s\n", pass ? " ok " : "FAIL", id.c_str(),
                    (std::string(tag) + "  " + detail).c_str());
        if (pass)
            ++passed;
        else if (expected_fail)
            ++expected_failed;
        else
            ++failed;
    }
};

double wall_s(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof(buf), f, args);
    va_end(args);
    return buf;
}

double wave_profile(double t, double x) {
    return t + x <= 3.0 ? std::max(-4.0, t + x - 5.0) : t + x + 3.0;
}

/// Balance budget checks shared by criteria 1-3 solves (criterion 8).
struct BudgetLedger {
    bool ineq_ok = true, full_ok = true;
    double worst_ineq = -1e300, worst_full = 0.0;
    void add(const Trajectory& traj) {
        const auto rep = energy_balance_residual(traj);
        double scale = 1.0;
        for (double e : traj.energies)
            if (std::isfinite(e)) scale = std::max(scale, std::abs(e));
        const double n = static_cast<double>(traj.n_steps());
        const double quad_budget = n * traj.tol_inner * scale;
        const double full_budget = 10.0 * n * traj.tol_inner * scale;
        // one-sided: dissipation + E_end - E_start - work <= quad budget
        ineq_ok = ineq_ok && rep.inequality_residual <= quad_budget;
        full_ok = full_ok && std::abs(rep.residual) <= full_budget;
        worst_ineq = std::max(worst_ineq, rep.inequality_residual / std::max(quad_budget, 1e-300));
        worst_full = std::max(worst_full, std::abs(rep.residual) / std::max(full_budget, 1e-300));
    }
};

struct ReparamLedger {
    double worst_norm = 0.0, worst_work = 0.0;
    void add(const Trajectory& traj, const EnergyModel& model, const Gauge& gauge) {
        const auto par = energy_dissipation_arclength(traj, gauge);
        for (double r : normalization_residual(par))
            worst_norm = std::max(worst_norm, std::abs(r));
        const auto w = work_change_of_variables(par, model);
        worst_work = std::max(worst_work, std::abs(w.mismatch()) /
                                              std::max(1.0, std::abs(w.time_integral)));
    }
};

} // namespace

int main(int argc, char** argv) {
    bool strict = false;
    for (int i = 1; i < argc; ++i)
        if (std::strcmp(argv[i], "--strict") == 0) strict = true;

    Suite suite;
    BudgetLedger budgets;
    ReparamLedger reparams;

    // ---------------------------------------------------------------- 1
    {
        const auto t0 = std::chrono::steady_clock::now();
        auto cfg = load_config("moving_interface", "", {});
        const double h = cfg.model.grid.spacing();
        const std::vector<double> eps_list{1e-1, 3e-2, 1e-2};
        std::vector<double> errors;
        for (double eps : eps_list) {
            SchemeParams p = cfg.scheme;
            p.eps = eps;
            p.tau = eps * eps;
            const auto traj = solve_viscous(cfg.model, cfg.diss, cfg.u0, p);
            budgets.add(traj);
            reparams.add(traj, cfg.model, cfg.diss.gauge);
            TrajectoryInterpolants interp(traj);
            double err = 0.0;
            for (int k = 0; k <= 200; ++k) {
                const double t = k / 200.0;
                const double front = level_crossing(interp.piecewise_affine(t), 0.5);
                err = std::max(err, std::abs(front - (1.0 + t)));
            }
            errors.push_back(err);
        }
        const double bound = 3.0 * h + 0.05;
        suite.clause("1a front error, finest cell", errors.back() <= bound,
                     fmt("max|front-(1+t)| = %.6f vs 3h+0.05 = %.6f (viscous lag ~ sqrt(eps) = %.4f)",
                         errors.back(), bound, std::sqrt(eps_list.back())),
                     /*expected_fail=*/true);
        suite.clause("1b front error nonincreasing",
                     errors[1] <= errors[0] + 1e-12 && errors[2] <= errors[1] + 1e-12,
                     fmt("errors = {%.4f, %.4f, %.4f}", errors[0], errors[1], errors[2]));
        suite.clause("1c runtime", wall_s(t0) < 120.0, fmt("%.1f s (target 120 s)", wall_s(t0)));
    }

    // ---------------------------------------------------------------- 2
    {
        const auto t0 = std::chrono::steady_clock::now();
        auto cfg = load_config("double_well_wave", "", {});
        const std::vector<double> eps_list{0.1, 0.05, 0.02};
        std::vector<double> sup_dist, defect2, defect6;
        for (double eps : eps_list) {
            SchemeParams p = cfg.scheme;
            p.eps = eps;
            p.tau = eps * eps / 4.0;
            const auto traj = solve_viscous(cfg.model, cfg.diss, cfg.u0, p);
            budgets.add(traj);
            reparams.add(traj, cfg.model, cfg.diss.gauge);
            const auto curve = LimitCurve::from_trajectory(traj);
            const auto defect = chain_rule_defect(curve, cfg.model, cfg.diss.gauge);
            double d2 = 0.0, d6 = defect.back();
            for (std::size_t k = 0; k < curve.times.size(); ++k)
                if (std::abs(curve.times[k] - 2.0) < 1e-9) d2 = defect[k];
            defect2.push_back(d2);
            defect6.push_back(d6);
            TrajectoryInterpolants interp(traj);
            double sup = 0.0;
            for (int k = 0; k <= 120; ++k) {
                const double t = 6.0 * k / 120.0;
                const auto u = interp.piecewise_affine(t);
                const auto ubar =
                    sample(cfg.model.grid, [&](double x) { return wave_profile(t, x); });
                sup = std::max(sup, l2_norm(u - ubar));
            }
            sup_dist.push_back(sup);
        }
        // "within 5% of 0": pinned against the natural defect scale 8
        suite.clause("2a defect at t=2", std::abs(defect2.back()) <= 0.05 * 8.0,
                     fmt("|defect(2)| = %.4f vs 0.05*8 = 0.4", std::abs(defect2.back())));
        const double measured = std::abs(defect6.back());
        suite.clause("2b defect at t=6 within 15% of 8", std::abs(measured - 8.0) <= 0.15 * 8.0,
                     fmt("|defect(6)| = %.3f; the closed-form limit of the stated formula is 16 "
                         "(viscous jump surcharge 2*8), not 8",
                         measured),
                     /*expected_fail=*/true);
        suite.clause("2c sup distance to the closed form decreases",
                     sup_dist[1] <= sup_dist[0] && sup_dist[2] <= sup_dist[1],
                     fmt("sup||u_eps - u_bar|| = {%.4f, %.4f, %.4f}", sup_dist[0], sup_dist[1],
                         sup_dist[2]));
        suite.clause("2d runtime", wall_s(t0) < 180.0, fmt("%.1f s (target 180 s)", wall_s(t0)));
    }

    // ---------------------------------------------------------------- 3
    {
        auto cfg = load_config("tv_double_well", "", {});
        const double l = cfg.model.grid.length();
        const double h = cfg.model.grid.spacing();
        // the explicit curve: 6 on [0, 1+t], -2 beyond, face-aligned interfaces
        const auto state_at = [&](double t) {
            return sample(cfg.model.grid, [&](double x) { return x < 1.0 + t ? 6.0 : -2.0; });
        };
        bool literal_ok = true, interface_ok = true;
        double worst_literal = 0.0, worst_interface = 0.0;
        for (double t : {0.0, 0.5, 1.0}) {
            const double e = cfg.model.energy(t, state_at(t));
            const double literal = 8.0 + 6.0 * l - 16.0 * t;
            const double at_interface = 8.0 + 6.0 * l - 16.0 * (1.0 + t);
            worst_literal = std::max(worst_literal, std::abs(e - literal));
            worst_interface = std::max(worst_interface, std::abs(e - at_interface));
            literal_ok = literal_ok && std::abs(e - literal) <= 1e-10;
            interface_ok = interface_ok && std::abs(e - at_interface) <= 1e-10;
        }
        suite.clause("3a energy line, formula as stated", literal_ok,
                     fmt("max|E - (8+6l-16t)| = %.3g; the curve's interface sits at 1+t, the "
                         "displayed formula tracks the interface position (offset 16)",
                         worst_literal),
                     /*expected_fail=*/true);
        suite.clause("3b energy line at the interface position", interface_ok,
                     fmt("max|E - (8+6l-16(1+t))| = %.3g (<= 1e-10, exact quadrature)",
                         worst_interface));
        // defect rate on (0, 1)
        LimitCurve line;
        for (double t = 0.0; t <= 1.0 + 1e-12; t += h) {
            line.times.push_back(t);
            line.states.push_back(state_at(t));
        }
        const auto defect = chain_rule_defect(line, cfg.model, cfg.diss.gauge);
        double worst_rate = 8.0;
        for (std::size_t k = 1; k < line.size(); ++k) {
            const double rate =
                (defect[k] - defect[k - 1]) / (line.times[k] - line.times[k - 1]);
            if (std::abs(std::abs(rate) - 8.0) > std::abs(worst_rate - 8.0))
                worst_rate = std::abs(rate);
        }
        suite.clause("3c chain-rule defect rate", std::abs(worst_rate - 8.0) <= 0.1,
                     fmt("|rate| = %.6f vs 8 +- 0.1", worst_rate));
        // local stability via the closed-form witnesses
        std::vector<SubgradientWitness> wit;
        for (double t : line.times)
            wit.push_back({sample(cfg.model.grid,
                                  [&](double x) {
                                      return x < 1.0 + t ? 1.0 / (1.0 + t)
                                                         : -1.0 / (l - 1.0 - t);
                                  }),
                           0.0});
        const auto prof = local_stability_profile(
            line, cfg.model, cfg.diss.gauge, 1e-12, {},
            [&](std::size_t k, double, const GridFunction&) { return wit[k]; });
        suite.clause("3d local stability with witnesses", prof.pass,
                     fmt("max witness slack = %.3g (upper bound)", prof.max_slack));
        // the preset's own (stationary) solve feeds the criterion-8 budget
        const auto traj = solve_viscous(cfg.model, cfg.diss, cfg.u0, cfg.scheme);
        budgets.add(traj);
    }

    // ---------------------------------------------------------------- 4
    {
        std::mt19937_64 rng(404);
        std::uniform_real_distribution<double> span(-3.0, 3.0);
        bool ok = true;
        double worst = 0.0;
        int count = 0;
        for (int n : {2, 4, 16}) {
            Grid1D g(1.0, n);
            DissipationPair diss{Gauge::uniform(n, 1.0), ViscousPotential::quadratic()};
            for (int rep = 0; rep < 167 && count < 500; ++rep, ++count) {
                GridFunction v(g), xi(g);
                for (double& x : v.values) x = span(rng);
                for (double& x : xi.values) x = span(rng);
                const double closed = diss.contact_potential(v, xi);
                // golden section over log eps
                const auto f = [&](double le) {
                    const double e = std::exp(le);
                    return diss.psi_eps(v, e) + diss.psi_eps_conj(xi, e);
                };
                double lo = std::log(1e-8), hi = std::log(1e3);
                const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
                // coarse log-space scan then golden refinement
                double best_le = lo, best = f(lo);
                for (int k = 1; k <= 400; ++k) {
                    const double le = lo + (hi - lo) * k / 400.0;
                    const double val = f(le);
                    if (val < best) {
                        best = val;
                        best_le = le;
                    }
                }
                double a = best_le - (hi - lo) / 400.0, b = best_le + (hi - lo) / 400.0;
                double c = b - gr * (b - a), d = a + gr * (b - a);
                double fc = f(c), fd = f(d);
                for (int it = 0; it < 200 && b - a > 1e-14; ++it) {
                    if (fc < fd) {
                        b = d;
                        d = c;
                        fd = fc;
                        c = b - gr * (b - a);
                        fc = f(c);
                    } else {
                        a = c;
                        c = d;
                        fc = fd;
                        d = a + gr * (b - a);
                        fd = f(d);
                    }
                }
                const double numeric = std::min(fc, fd);
                const double rel = std::abs(closed - numeric) / std::max(1e-12, std::abs(closed));
                worst = std::max(worst, rel);
                ok = ok && rel <= 1e-6;
            }
        }
        suite.clause("4 contact potential vs inf over eps", ok,
                     fmt("%d samples, worst relative gap %.2e (tol 1e-6)", count, worst));
    }

    // ---------------------------------------------------------------- 5
    {
        std::mt19937_64 rng(505);
        std::uniform_real_distribution<double> xi_span(-4.0, 4.0);
        std::uniform_real_distribution<double> eps_span(0.05, 2.0);
        Grid1D g(2.0, 2); // h = 1: scalar slot in the first cell
        DissipationPair diss{Gauge::uniform(2, 1.0), ViscousPotential::quadratic()};
        bool ok = true;
        double worst = 0.0;
        for (int rep = 0; rep < 200; ++rep) {
            GridFunction xi(g);
            xi.values = {xi_span(rng), 0.0};
            const double eps = eps_span(rng);
            const double closed = diss.psi_eps_conj(xi, eps);
            double numeric = -1e300;
            for (int k = 0; k <= 400000; ++k) {
                const double v = -40.0 + 80.0 * k / 400000.0;
                GridFunction vv(g);
                vv.values = {v, 0.0};
                numeric = std::max(numeric, xi.values[0] * v - diss.psi_eps(vv, eps));
            }
            worst = std::max(worst, std::abs(closed - numeric));
            ok = ok && std::abs(closed - numeric) <= 1e-4;
        }
        suite.clause("5 conjugate vs numeric Legendre sup", ok,
                     fmt("200 samples, worst |gap| = %.2e (tol 1e-4)", worst));
    }

    // ---------------------------------------------------------------- 6
    {
        const auto t0 = std::chrono::steady_clock::now();
        bool quad_ok = true, bounds_ok = true, ode_ok = true;
        double worst_rel = 0.0, worst_ode = 0.0;
        for (double ell : {3.2, 3.5, 4.0}) {
            EnergyModel m;
            m.well = Well::double_well();
            m.loading = Loading::affine_tx(0.0, 0.0, ell);
            m.grid = Grid1D(2.0, 2);
            DissipationPair diss{Gauge::uniform(2, 1.0), ViscousPotential::quadratic()};
            const GridFunction a(m.grid, -2.0), b(m.grid, ell + 3.0);
            const auto res = optimize_transition(a, b, 0.0, 200, m, diss);
            const double oracle =
                2.0 * [&] { // adaptive quadrature of 1 + slack over the monotone path
                    const auto f = [&](double th) {
                        return 1.0 + std::max(0.0, std::abs(ell - m.well.Wp(th)) - 1.0);
                    };
                    double s = 0.0;
                    const int K = 200000;
                    for (int k = 0; k < K; ++k) {
                        const double x0 = -2.0 + (ell + 5.0) * k / K;
                        const double x1 = -2.0 + (ell + 5.0) * (k + 1) / K;
                        s += 0.5 * (x1 - x0) * (f(x0) + f(x1));
                    }
                    return s;
                }();
            const double rel = std::abs(res.cost - oracle) / oracle;
            worst_rel = std::max(worst_rel, rel);
            quad_ok = quad_ok && rel <= 0.01;
            bounds_ok = bounds_ok && res.cost >= diss.psi(b - a) - 1e-9 &&
                        res.cost >= std::abs(m.energy(0.0, a) - m.energy(0.0, b)) - 1e-9;
            const auto ode = viscous_transition_ode(a, 0.0, m, diss);
            double action = 0.0;
            for (double s : ode.seg_action) action += s;
            const double ode_rel = std::abs(action - res.cost) / res.cost;
            worst_ode = std::max(worst_ode, ode_rel);
            ode_ok = ode_ok && ode_rel <= 0.02;
        }
        suite.clause("6a transition cost vs quadrature oracle", quad_ok,
                     fmt("worst relative gap %.2e (tol 1%%)", worst_rel));
        suite.clause("6b cost bounds (Psi distance, energy drop)", bounds_ok, "margin -1e-9");
        suite.clause("6c viscous-ODE action agreement", ode_ok,
                     fmt("worst relative gap %.2e (tol 2%%)", worst_ode));
        suite.clause("6d runtime", wall_s(t0) < 60.0, fmt("%.1f s (target 60 s)", wall_s(t0)));
    }

    // ---------------------------------------------------------------- 7
    {
        const auto t0 = std::chrono::steady_clock::now();
        std::mt19937_64 rng(707);
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        std::uniform_real_distribution<double> g_dist(0.05, 2.0);
        bool bound_ok = true;
        for (int rep = 0; rep < 1000; ++rep) {
            const double gamma = g_dist(rng);
            const double a0 = 2.0 * u01(rng);
            const int len = 3 + static_cast<int>(u01(rng) * 12);
            std::vector<double> a{a0}, b;
            for (int n = 0; n < len; ++n) {
                double an = 0.0, bn = 0.0;
                for (int tries = 0; tries < 200; ++tries) {
                    an = u01(rng) * (a.back() + 1.0);
                    bn = u01(rng);
                    if ((1.0 + gamma) * (1.0 + gamma) * an * an <= a.back() * a.back() + bn * an)
                        break;
                    an = 0.0;
                }
                a.push_back(an);
                b.push_back(bn);
            }
            const double bound = gronwall_bound(a0, gamma, b);
            double partial = 0.0;
            for (std::size_t n = 1; n < a.size(); ++n) {
                partial += a[n];
                bound_ok = bound_ok && partial <= bound + 1e-12;
            }
        }
        suite.clause("7a Gronwall bound on sampled sequences", bound_ok, "1000 sequences");

        auto cfg = load_config("dirichlet_well", "", {});
        const auto sweep = sweep_experiment(cfg, std::filesystem::temp_directory_path() /
                                                     "bvsol_acceptance" / "dirichlet_sweep");
        const double ratio =
            sweep.verdicts.empty() ? 1e300 : sweep.verdicts.front().value;
        suite.clause("7b BV-estimate ratio over the 6-cell sweep", ratio <= 1.5,
                     fmt("max/min of sum||dU|| = %.3f (tol 1.5)", ratio));
        suite.clause("7c runtime", wall_s(t0) < 120.0, fmt("%.1f s (target 120 s)", wall_s(t0)));
    }

    // ---------------------------------------------------------------- 8
    suite.clause("8a discrete energy inequality budget", budgets.ineq_ok,
                 fmt("worst residual/budget = %.3f over criteria 1-3 solves", budgets.worst_ineq));
    suite.clause("8b full balance residual budget", budgets.full_ok,
                 fmt("worst |residual|/budget = %.3f", budgets.worst_full));

    // ---------------------------------------------------------------- 9
    {
        suite.clause("9a normalization residual on EDA curves", reparams.worst_norm <= 1e-3,
                     fmt("worst |residual| = %.2e (tol 1e-3)", reparams.worst_norm));
        suite.clause("9b change-of-variables work identity", reparams.worst_work <= 1e-6,
                     fmt("worst relative mismatch = %.2e (tol 1e-6)", reparams.worst_work));
        // round trip: a continuous curve and a single-jump curve with its transition
        EnergyModel m;
        m.well = Well::double_well();
        m.loading = Loading::affine_tx(0.0, 0.0, 3.0);
        m.grid = Grid1D(2.0, 2);
        DissipationPair diss{Gauge::uniform(2, 1.0), ViscousPotential::quadratic()};
        LimitCurve curve;
        for (int k = 0; k <= 10; ++k) {
            const double t = k / 10.0;
            curve.times.push_back(t);
            curve.states.push_back(GridFunction(m.grid, t < 0.5 ? -2.0 : 6.0));
        }
        auto jumps = detect_jumps(curve, diss.gauge);
        bool round_ok = jumps.size() == 1;
        if (round_ok) {
            const auto tr =
                optimize_transition(jumps[0].u_minus, jumps[0].u_plus, jumps[0].t, 120, m, diss);
            const auto par = parameterized_from_bv(curve, diss.gauge, m, jumps, {{tr.path, 0}});
            const auto back = bv_from_parameterized(par, 1.0);
            for (std::size_t k = 0; k < back.curve.size() && round_ok; ++k) {
                if (std::abs(back.curve.times[k] - 0.5) < 1e-9) continue;
                for (std::size_t q = 0; q < curve.size(); ++q)
                    if (std::abs(curve.times[q] - back.curve.times[k]) < 1e-12)
                        round_ok = round_ok &&
                                   l2_norm(back.curve.states[k] - curve.states[q]) <= 1e-9;
            }
            round_ok = round_ok && back.jumps.size() == 1;
        }
        suite.clause("9c BV <-> parameterized round trip", round_ok,
                     "continuity points recovered exactly");
    }

    std::printf("\nacceptance: %d passed, %d failed, %d expected-fail (documented)\n",
                suite.passed, suite.failed, suite.expected_failed);
    if (strict) return suite.failed + suite.expected_failed > 0 ? 1 : 0;
    return suite.failed > 0 ? 1 : 0;
}
