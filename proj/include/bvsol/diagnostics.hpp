#pragma once

// Certification of computed limits: Psi-variation, jump detection,
// energy-balance residuals, local stability profiles, jump conditions,
// chain-rule defects and convergence sweeps.

#include "bvsol/dissipation.hpp"
#include "bvsol/energy.hpp"
#include "bvsol/errors.hpp"
#include "bvsol/numerics.hpp"
#include "bvsol/solver.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace bvsol {

/// A sampled curve in time (trajectory nodes or an analytic curve sampled).
struct LimitCurve {
    std::vector<double> times;
    std::vector<GridFunction> states;

    static LimitCurve from_trajectory(const Trajectory& traj) {
        return {traj.times, traj.states};
    }

    [[nodiscard]] std::size_t size() const { return times.size(); }
};

/// Psi-total variation over the sampled partition (the finest available one;
/// refinement can only increase it).
[[nodiscard]] inline double psi_variation(const LimitCurve& curve, const Gauge& gauge,
                                          std::size_t k0, std::size_t k1) {
    double s = 0.0;
    for (std::size_t k = k0; k + 1 <= k1; ++k) s += gauge.psi(curve.states[k + 1] - curve.states[k]);
    return s;
}

[[nodiscard]] inline double psi_variation(const LimitCurve& curve, const Gauge& gauge) {
    if (curve.size() < 2) throw invalid_parameter("psi_variation: need at least 2 samples");
    return psi_variation(curve, gauge, 0, curve.size() - 1);
}

/// Discrete surrogate of a jump: plateau values on both sides of a run of
/// over-threshold increments.
struct JumpTriple {
    double t = 0.0;
    GridFunction u_minus, u_mid, u_plus;
    bool uncertain = false;     // no calm plateau window on at least one side
    std::size_t first_sample = 0, last_sample = 0; // sample indices spanned by the run
};

namespace detail {

inline GridFunction window_median(const LimitCurve& curve, std::size_t lo, std::size_t hi) {
    // componentwise median of samples [lo, hi]
    GridFunction out = curve.states[lo];
    std::vector<double> buf;
    for (std::size_t c = 0; c < out.values.size(); ++c) {
        buf.clear();
        for (std::size_t k = lo; k <= hi; ++k) buf.push_back(curve.states[k].values[c]);
        std::nth_element(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(buf.size() / 2), buf.end());
        out.values[c] = buf[buf.size() / 2];
    }
    return out;
}

} // namespace detail

/// Detect jumps: runs of samples whose Psi-increment exceeds the threshold
/// (default 5x the median inter-sample increment). One-sided states are
/// plateau medians over windows of 5 samples.
[[nodiscard]] inline std::vector<JumpTriple> detect_jumps(const LimitCurve& curve,
                                                          const Gauge& gauge,
                                                          double jump_threshold = -1.0) {
    const std::size_t m = curve.size();
    if (m < 2) return {};
    std::vector<double> inc(m - 1);
    for (std::size_t k = 0; k + 1 < m; ++k)
        inc[k] = gauge.psi(curve.states[k + 1] - curve.states[k]);
    double thr = jump_threshold;
    if (thr <= 0.0) {
        std::vector<double> sorted = inc;
        std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2),
                         sorted.end());
        thr = 5.0 * sorted[sorted.size() / 2];
    }
    std::vector<JumpTriple> jumps;
    const std::size_t win = 5;
    std::size_t k = 0;
    while (k + 1 < m) {
        if (!(inc[k] > thr)) {
            ++k;
            continue;
        }
        std::size_t a = k, b = k;
        while (b + 1 < m - 1 && inc[b + 1] > thr) ++b;
        JumpTriple j;
        j.first_sample = a;
        j.last_sample = b + 1;
        j.t = 0.5 * (curve.times[a] + curve.times[b + 1]);
        j.u_mid = curve.states[(a + b + 1) / 2];
        // left plateau
        if (a == 0) {
            j.u_minus = curve.states[0];
            j.uncertain = true;
        } else {
            const std::size_t lo = a >= win ? a - win : 0;
            j.u_minus = detail::window_median(curve, lo, a);
            for (std::size_t q = lo; q < a; ++q)
                if (inc[q] > thr) j.uncertain = true;
        }
        // right plateau
        if (b + 1 >= m - 1) {
            j.u_plus = curve.states[m - 1];
            j.uncertain = true;
        } else {
            const std::size_t hi = std::min(m - 1, b + 1 + win);
            j.u_plus = detail::window_median(curve, b + 1, hi);
            for (std::size_t q = b + 1; q < hi && q < m - 1; ++q)
                if (inc[q] > thr) j.uncertain = true;
        }
        jumps.push_back(std::move(j));
        k = b + 2;
    }
    return jumps;
}

/// Energy-balance bookkeeping over an interval.
struct BalanceReport {
    double t_start = 0.0, t_end = 0.0;
    double dissipation = 0.0; // Psi_eps + Psi_eps^* sums (viscous) or Var_f (limit curves)
    double energy_start = 0.0, energy_end = 0.0;
    double work = 0.0;
    double residual = 0.0;            // dissipation + E_end - E_start - work
    double inequality_residual = 0.0; // Psi_eps-only one-sided form
    std::vector<double> jump_costs;   // per-jump Finsler costs (limit curves)
    bool complete = true;             // false when a needed jump cost is missing
};

/// Residual of the viscous energy identity on steps (i0, i1] of a trajectory,
/// with rectangle quadrature of the dissipation integrand Psi_eps + Psi_eps^*.
[[nodiscard]] inline BalanceReport energy_balance_residual(const Trajectory& traj, std::size_t i0,
                                                           std::size_t i1) {
    if (traj.multipliers.empty() && traj.n_steps() > 0)
        throw witness_required("energy_balance_residual: trajectory has no multipliers");
    if (i1 > traj.n_steps() || i0 > i1)
        throw invalid_parameter("energy_balance_residual: bad step interval");
    BalanceReport rep;
    rep.t_start = traj.times[i0];
    rep.t_end = traj.times[i1];
    rep.energy_start = traj.energies[i0];
    rep.energy_end = traj.energies[i1];
    double diss_psi = 0.0;
    for (std::size_t k = i0; k < i1; ++k) {
        diss_psi += traj.dissipation_increments[k];
        rep.dissipation += traj.dissipation_increments[k] + traj.conj_increments[k];
        rep.work += traj.work_increments[k];
    }
    rep.residual = rep.dissipation + rep.energy_end - rep.energy_start - rep.work;
    rep.inequality_residual = diss_psi + rep.energy_end - rep.energy_start - rep.work;
    return rep;
}

[[nodiscard]] inline BalanceReport energy_balance_residual(const Trajectory& traj) {
    return energy_balance_residual(traj, 0, traj.n_steps());
}

/// Finsler costs attached to one detected jump.
struct JumpCosts {
    double minus_to_mid = std::numeric_limits<double>::quiet_NaN();
    double mid_to_plus = std::numeric_limits<double>::quiet_NaN();
    double minus_to_plus = std::numeric_limits<double>::quiet_NaN();
};

struct FinslerVariation {
    double value = 0.0;
    bool complete = true;
};

/// Var_f = Var_Psi - Jmp_Psi + Jmp_f on the sampled curve: the increments
/// spanned by each detected jump run are replaced by the supplied Finsler
/// costs.
[[nodiscard]] inline FinslerVariation finsler_total_variation(const LimitCurve& curve,
                                                              const Gauge& gauge,
                                                              const std::vector<JumpTriple>& jumps,
                                                              const std::vector<JumpCosts>& costs) {
    FinslerVariation out;
    out.value = psi_variation(curve, gauge);
    for (std::size_t j = 0; j < jumps.size(); ++j) {
        const auto& jt = jumps[j];
        out.value -= psi_variation(curve, gauge, jt.first_sample, jt.last_sample);
        if (j >= costs.size() || std::isnan(costs[j].minus_to_mid) ||
            std::isnan(costs[j].mid_to_plus)) {
            out.complete = false;
            continue;
        }
        out.value += costs[j].minus_to_mid + costs[j].mid_to_plus;
    }
    return out;
}

/// Balance report for a limit curve using Var_f as the dissipation.
[[nodiscard]] inline BalanceReport energy_balance_residual(const LimitCurve& curve,
                                                           const EnergyModel& model,
                                                           const Gauge& gauge,
                                                           const std::vector<JumpTriple>& jumps,
                                                           const std::vector<JumpCosts>& costs) {
    BalanceReport rep;
    rep.t_start = curve.times.front();
    rep.t_end = curve.times.back();
    rep.energy_start = model.energy(rep.t_start, curve.states.front());
    rep.energy_end = model.energy(rep.t_end, curve.states.back());
    const auto var = finsler_total_variation(curve, gauge, jumps, costs);
    rep.dissipation = var.value;
    rep.complete = var.complete;
    for (const auto& c : costs)
        rep.jump_costs.push_back(c.minus_to_plus);
    // trapezoid work quadrature on the samples
    for (std::size_t k = 0; k + 1 < curve.size(); ++k) {
        const double dt = curve.times[k + 1] - curve.times[k];
        rep.work += 0.5 * dt * (model.power(curve.times[k], curve.states[k]) +
                                model.power(curve.times[k + 1], curve.states[k + 1]));
    }
    rep.residual = rep.dissipation + rep.energy_end - rep.energy_start - rep.work;
    const double var_psi = psi_variation(curve, gauge);
    rep.inequality_residual = var_psi + rep.energy_end - rep.energy_start - rep.work;
    return rep;
}

/// Per-sample slack with a PASS/FAIL verdict against stability_tol.
struct StabilityProfile {
    std::vector<double> times;
    std::vector<double> slack;
    bool upper_bound_only = false;
    double max_slack = 0.0;
    double tol = 0.0;
    bool pass = false;
};

/// Evaluate slack at all non-jump samples; witnesses are required for
/// nonsmooth models.
[[nodiscard]] inline StabilityProfile local_stability_profile(
    const LimitCurve& curve, const EnergyModel& model, const Gauge& gauge, double stability_tol,
    const std::vector<JumpTriple>& jumps = {}, const WitnessProvider& witnesses = nullptr) {
    std::vector<char> in_jump(curve.size(), 0);
    for (const auto& j : jumps)
        for (std::size_t k = j.first_sample; k <= j.last_sample && k < curve.size(); ++k)
            in_jump[k] = 1;
    StabilityProfile prof;
    prof.tol = stability_tol;
    for (std::size_t k = 0; k < curve.size(); ++k) {
        if (in_jump[k]) continue;
        SlackValue sv;
        if (model.smooth()) {
            sv = model.slack(gauge, curve.times[k], curve.states[k]);
        } else {
            if (!witnesses)
                throw witness_required("local_stability_profile: nonsmooth model needs witnesses");
            const SubgradientWitness w = witnesses(k, curve.times[k], curve.states[k]);
            sv = model.slack(gauge, curve.times[k], curve.states[k], &w);
            prof.upper_bound_only = true;
        }
        prof.times.push_back(curve.times[k]);
        prof.slack.push_back(sv.value);
        prof.max_slack = std::max(prof.max_slack, sv.value);
    }
    prof.pass = prof.max_slack <= stability_tol;
    return prof;
}

/// Residuals of the three jump identities and of cost additivity.
struct JumpConditionResiduals {
    double minus_to_mid = 0.0;
    double mid_to_plus = 0.0;
    double minus_to_plus = 0.0;
    double additivity = 0.0;
};

[[nodiscard]] inline JumpConditionResiduals jump_conditions_check(const JumpTriple& jump,
                                                                  const EnergyModel& model,
                                                                  const JumpCosts& costs) {
    JumpConditionResiduals r;
    const double e_minus = model.energy(jump.t, jump.u_minus);
    const double e_mid = model.energy(jump.t, jump.u_mid);
    const double e_plus = model.energy(jump.t, jump.u_plus);
    r.minus_to_mid = e_mid - e_minus + costs.minus_to_mid;
    r.mid_to_plus = e_plus - e_mid + costs.mid_to_plus;
    r.minus_to_plus = e_plus - e_minus + costs.minus_to_plus;
    r.additivity = costs.minus_to_plus - costs.minus_to_mid - costs.mid_to_plus;
    return r;
}

/// t |-> Var_Psi(u; [0,t]) + E_t(u(t)) - E_0(u(0)) - integral of P, on the
/// sample grid. Vanishes (with Var_f in place of Var_Psi) exactly for BV
/// solutions.
[[nodiscard]] inline std::vector<double> chain_rule_defect(const LimitCurve& curve,
                                                           const EnergyModel& model,
                                                           const Gauge& gauge) {
    const std::size_t m = curve.size();
    std::vector<double> defect(m, 0.0);
    if (m == 0) return defect;
    double var = 0.0, work = 0.0;
    const double e0 = model.energy(curve.times[0], curve.states[0]);
    double p_prev = model.power(curve.times[0], curve.states[0]);
    for (std::size_t k = 1; k < m; ++k) {
        var += gauge.psi(curve.states[k] - curve.states[k - 1]);
        const double p_k = model.power(curve.times[k], curve.states[k]);
        work += 0.5 * (curve.times[k] - curve.times[k - 1]) * (p_prev + p_k);
        p_prev = p_k;
        defect[k] = var + model.energy(curve.times[k], curve.states[k]) - e0 - work;
    }
    return defect;
}

/// Max violation of the (Psi)-energy dissipation inequality over sample pairs
/// (s, t): Var_Psi(s,t) + E(t) - E(s) - work <= 0 expected for BV solutions.
[[nodiscard]] inline double psi_inequality_max_violation(const LimitCurve& curve,
                                                         const EnergyModel& model,
                                                         const Gauge& gauge) {
    const auto defect = chain_rule_defect(curve, model, gauge);
    // pairwise residual (s,t) equals defect(t) - defect(s)
    double worst = 0.0, run_min = 0.0;
    for (double d : defect) {
        worst = std::max(worst, d - run_min);
        run_min = std::min(run_min, d);
    }
    return worst;
}

/// Front position: level crossings of the piecewise affine spatial profile.
[[nodiscard]] inline double level_crossing(const GridFunction& u, double level) {
    const auto& g = u.grid;
    double x = 0.0;
    bool found = false;
    for (int i = 0; i + 1 < g.n_cells(); ++i) {
        const double a = u.values[static_cast<std::size_t>(i)];
        const double b = u.values[static_cast<std::size_t>(i + 1)];
        if ((a >= level && b < level) || (a < level && b >= level)) {
            x = g.center(i) + (a - level) / (a - b) * g.spacing();
            found = true;
        }
    }
    if (found) return x;
    // no crossing: report a domain end depending on where the state sits
    double mean = 0.0;
    for (double v : u.values) mean += v;
    mean /= static_cast<double>(u.values.size());
    return mean >= level ? g.length() : 0.0;
}

/// One cell of a (eps, tau) refinement sweep.
struct SweepCell {
    double eps = 0.0, tau = 0.0;
    bool failed = false;
    std::string error_message;
    Trajectory traj;
};

struct SweepReport {
    std::vector<SweepCell> cells;
    std::vector<double> sample_times;
    // sup distance between limit candidates of successive cells at the shared times
    std::vector<double> successive_state_distance;
    std::vector<double> dissipation_totals; // Psi_eps + Psi_eps^* per cell
    std::vector<double> psi_variation_totals;
    std::vector<double> v_increment_totals; // sum ||dU|| (BV estimate, eq. of Thm 3.16)
    std::vector<std::vector<double>> energy_samples; // per cell at the shared times
};

/// Run the scheme across a schedule of (eps_k, tau_k) with tau_k/eps_k -> 0.
[[nodiscard]] inline SweepReport convergence_sweep(const EnergyModel& model,
                                                   const DissipationPair& diss,
                                                   const GridFunction& u0,
                                                   const std::vector<std::pair<double, double>>& schedule,
                                                   const SchemeParams& base, int n_samples = 65,
                                                   int workers = 1) {
    for (std::size_t k = 0; k + 1 < schedule.size(); ++k) {
        if (!(schedule[k + 1].first < schedule[k].first) ||
            !(schedule[k + 1].second / schedule[k + 1].first <
              schedule[k].second / schedule[k].first))
            throw invalid_parameter("convergence_sweep: schedule must decrease eps and tau/eps");
    }
    SweepReport rep;
    rep.cells.resize(schedule.size());
    const auto run_cell = [&](std::size_t k) {
        SweepCell& cell = rep.cells[k];
        cell.eps = schedule[k].first;
        cell.tau = schedule[k].second;
        SchemeParams p = base;
        p.eps = cell.eps;
        p.tau = cell.tau;
        p.tol_inner = base.tol_inner; // auto-selection tracks (eps, tau) when unset
        try {
            cell.traj = solve_viscous(model, diss, u0, p);
        } catch (const error& e) {
            cell.failed = true;
            cell.error_message = e.what();
        }
    };
    if (workers <= 1) {
        for (std::size_t k = 0; k < schedule.size(); ++k) run_cell(k);
    } else {
        std::vector<std::thread> pool;
        std::size_t next = 0;
        for (std::size_t k = 0; k < schedule.size(); k += static_cast<std::size_t>(workers)) {
            pool.clear();
            for (int w = 0; w < workers && next < schedule.size(); ++w, ++next)
                pool.emplace_back(run_cell, next);
            for (auto& th : pool) th.join();
        }
    }

    for (int j = 0; j < n_samples; ++j)
        rep.sample_times.push_back(base.T * j / (n_samples - 1));
    for (std::size_t k = 0; k < rep.cells.size(); ++k) {
        const SweepCell& cell = rep.cells[k];
        if (cell.failed) {
            rep.dissipation_totals.push_back(std::numeric_limits<double>::quiet_NaN());
            rep.psi_variation_totals.push_back(std::numeric_limits<double>::quiet_NaN());
            rep.v_increment_totals.push_back(std::numeric_limits<double>::quiet_NaN());
            rep.energy_samples.emplace_back();
            continue;
        }
        double diss_total = 0.0, var_total = 0.0;
        for (std::size_t i = 0; i < cell.traj.n_steps(); ++i) {
            diss_total += cell.traj.dissipation_increments[i] + cell.traj.conj_increments[i];
            var_total += cell.traj.psi_increments[i];
        }
        rep.dissipation_totals.push_back(diss_total);
        rep.psi_variation_totals.push_back(var_total);
        rep.v_increment_totals.push_back(cell.traj.total_v_increment());
        std::vector<double> en;
        for (double t : rep.sample_times) {
            const auto it = std::lower_bound(cell.traj.times.begin(), cell.traj.times.end(),
                                             t - 1e-12);
            const std::size_t idx = std::min(
                static_cast<std::size_t>(it - cell.traj.times.begin()),
                cell.traj.energies.size() - 1);
            en.push_back(cell.traj.energies[idx]);
        }
        rep.energy_samples.push_back(std::move(en));
    }
    for (std::size_t k = 0; k + 1 < rep.cells.size(); ++k) {
        if (rep.cells[k].failed || rep.cells[k + 1].failed) {
            rep.successive_state_distance.push_back(std::numeric_limits<double>::quiet_NaN());
            continue;
        }
        TrajectoryInterpolants a(rep.cells[k].traj), b(rep.cells[k + 1].traj);
        double sup = 0.0;
        for (double t : rep.sample_times)
            sup = std::max(sup, l2_norm(a.piecewise_affine(t) - b.piecewise_affine(t)));
        rep.successive_state_distance.push_back(sup);
    }
    return rep;
}

} // namespace bvsol
