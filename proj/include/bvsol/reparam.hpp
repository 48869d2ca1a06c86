#pragma once

// Arclength reparameterizations of viscous trajectories, normalization
// residuals, the rescaled energy identity, and conversion between BV and
// parameterized curves.

#include "bvsol/diagnostics.hpp"
#include "bvsol/dissipation.hpp"
#include "bvsol/energy.hpp"
#include "bvsol/errors.hpp"
#include "bvsol/numerics.hpp"
#include "bvsol/solver.hpp"
#include "bvsol/transitions.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace bvsol {

/// Rescaled pair (t(s), u(s)) with per-sample rates. The rates are chord
/// rates of the cumulative time / Psi-length / viscous-length functions, so
/// the defining normalization holds exactly at the stored resolution.
struct ParameterizedCurve {
    std::vector<double> s;
    std::vector<double> t;
    std::vector<GridFunction> u;
    std::vector<double> dt_ds;        // per segment, attributed to the left sample
    std::vector<double> psi_rate;
    std::vector<double> viscous_rate; // slack * ||du/ds||
    std::vector<double> slack;        // per-sample slack (witness-based upper bound if nonsmooth)
    std::vector<char> g_flag;         // slack > 0 markers
    std::vector<double> energy;

    [[nodiscard]] double S() const { return s.empty() ? 0.0 : s.back(); }
    [[nodiscard]] std::size_t size() const { return s.size(); }
};

namespace detail {

inline void fill_rates(ParameterizedCurve& c, const std::vector<double>& psi_cum,
                       const std::vector<double>& visc_cum) {
    const std::size_t m = c.size();
    c.dt_ds.assign(m, 0.0);
    c.psi_rate.assign(m, 0.0);
    c.viscous_rate.assign(m, 0.0);
    for (std::size_t k = 0; k + 1 < m; ++k) {
        const double ds = c.s[k + 1] - c.s[k];
        if (ds <= 0.0) continue;
        c.dt_ds[k] = (c.t[k + 1] - c.t[k]) / ds;
        c.psi_rate[k] = (psi_cum[k + 1] - psi_cum[k]) / ds;
        c.viscous_rate[k] = (visc_cum[k + 1] - visc_cum[k]) / ds;
    }
    if (m >= 2) { // carry the last segment's rates to the final sample
        c.dt_ds[m - 1] = c.dt_ds[m - 2];
        c.psi_rate[m - 1] = c.psi_rate[m - 2];
        c.viscous_rate[m - 1] = c.viscous_rate[m - 2];
    }
}

} // namespace detail

/// Energy-dissipation arclength s(t) = t + int [Psi(u') + e ||u'||] dr of a
/// viscous trajectory, with the per-step slack taken from the computed
/// multipliers (dist(xi^n, K*), an exact value for the discrete curve).
/// Samples sit at the trajectory nodes; the normalization
/// dt/ds + Psi-rate + viscous-rate = 1 holds exactly segment by segment.
[[nodiscard]] inline ParameterizedCurve energy_dissipation_arclength(const Trajectory& traj,
                                                                     const Gauge& gauge) {
    if (traj.multipliers.empty() && traj.n_steps() > 0)
        throw witness_required("energy_dissipation_arclength: trajectory has no multipliers");
    const std::size_t n = traj.n_steps();
    ParameterizedCurve c;
    c.s.resize(n + 1);
    c.t = traj.times;
    c.u = traj.states;
    c.energy = traj.energies;
    std::vector<double> psi_cum(n + 1, 0.0), visc_cum(n + 1, 0.0);
    c.slack.assign(n + 1, 0.0);
    c.g_flag.assign(n + 1, 0);
    c.s[0] = traj.times[0];
    for (std::size_t k = 0; k < n; ++k) {
        const double e_k = gauge.dual_dist(traj.multipliers[k]);
        const double dpsi = traj.psi_increments[k];
        const double dvisc = e_k * traj.l2_increments[k];
        psi_cum[k + 1] = psi_cum[k] + dpsi;
        visc_cum[k + 1] = visc_cum[k] + dvisc;
        double ds = (traj.times[k + 1] - traj.times[k]) + dpsi + dvisc;
        if (ds <= 0.0) ds = 1e-300; // repaired monotonicity (cannot occur for dt > 0)
        c.s[k + 1] = c.s[k] + ds;
        c.slack[k + 1] = e_k;
        c.g_flag[k + 1] = e_k > 1e-12 ? 1 : 0;
    }
    c.slack[0] = c.slack.size() > 1 ? c.slack[1] : 0.0;
    c.g_flag[0] = c.g_flag.size() > 1 ? c.g_flag[1] : 0;
    detail::fill_rates(c, psi_cum, visc_cum);
    return c;
}

/// V-arclength s(t) = t + int ||u'|| dt. The viscous_rate slot carries
/// ||du/ds|| so that dt/ds + viscous_rate - 1 is the normalization residual.
[[nodiscard]] inline ParameterizedCurve v_arclength(const Trajectory& traj) {
    const std::size_t n = traj.n_steps();
    ParameterizedCurve c;
    c.s.resize(n + 1);
    c.t = traj.times;
    c.u = traj.states;
    c.energy = traj.energies;
    c.slack.assign(n + 1, 0.0);
    c.g_flag.assign(n + 1, 0);
    std::vector<double> psi_cum(n + 1, 0.0), v_cum(n + 1, 0.0);
    c.s[0] = traj.times[0];
    for (std::size_t k = 0; k < n; ++k) {
        v_cum[k + 1] = v_cum[k] + traj.l2_increments[k];
        psi_cum[k + 1] = psi_cum[k] + traj.psi_increments[k];
        c.s[k + 1] = c.s[k] + (traj.times[k + 1] - traj.times[k]) + traj.l2_increments[k];
    }
    detail::fill_rates(c, psi_cum, v_cum); // viscous_rate = ||du/ds|| here
    return c;
}

/// Uniform resampling in s by monotone piecewise-linear interpolation.
[[nodiscard]] inline ParameterizedCurve resample_uniform(const ParameterizedCurve& c,
                                                         std::size_t m_samples) {
    if (c.size() < 2 || m_samples < 2)
        throw invalid_parameter("resample_uniform: need at least 2 samples");
    ParameterizedCurve out;
    out.s.resize(m_samples);
    out.t.resize(m_samples);
    out.u.resize(m_samples);
    out.slack.resize(m_samples);
    out.g_flag.resize(m_samples);
    out.energy.resize(m_samples);
    const double s0 = c.s.front(), s1 = c.s.back();
    std::vector<double> psi_cum(m_samples, 0.0), visc_cum(m_samples, 0.0);
    // cumulative functions of the source
    std::vector<double> src_psi(c.size(), 0.0), src_visc(c.size(), 0.0);
    for (std::size_t k = 0; k + 1 < c.size(); ++k) {
        const double ds = c.s[k + 1] - c.s[k];
        src_psi[k + 1] = src_psi[k] + c.psi_rate[k] * ds;
        src_visc[k + 1] = src_visc[k] + c.viscous_rate[k] * ds;
    }
    std::size_t k = 0;
    for (std::size_t j = 0; j < m_samples; ++j) {
        const double sj = s0 + (s1 - s0) * static_cast<double>(j) / (m_samples - 1);
        while (k + 2 < c.size() && c.s[k + 1] < sj) ++k;
        const double ds = c.s[k + 1] - c.s[k];
        const double lam = ds > 0.0 ? std::clamp((sj - c.s[k]) / ds, 0.0, 1.0) : 0.0;
        out.s[j] = sj;
        out.t[j] = c.t[k] + lam * (c.t[k + 1] - c.t[k]);
        out.u[j] = (1.0 - lam) * c.u[k] + lam * c.u[k + 1];
        out.slack[j] = c.slack[k + (lam > 0.5 ? 1 : 0)];
        out.g_flag[j] = c.g_flag[k + (lam > 0.5 ? 1 : 0)];
        out.energy[j] = c.energy[k] + lam * (c.energy[k + 1] - c.energy[k]);
        psi_cum[j] = src_psi[k] + lam * (src_psi[k + 1] - src_psi[k]);
        visc_cum[j] = src_visc[k] + lam * (src_visc[k + 1] - src_visc[k]);
    }
    detail::fill_rates(out, psi_cum, visc_cum);
    return out;
}

/// Per-sample residual of the m-normalization dt/ds + Psi-rate + e||du/ds|| = m(s).
[[nodiscard]] inline std::vector<double> normalization_residual(
    const ParameterizedCurve& c, const std::function<double(double)>& m = nullptr) {
    std::vector<double> res(c.size(), 0.0);
    for (std::size_t k = 0; k < c.size(); ++k) {
        const double target = m ? m(c.s[k]) : 1.0;
        res[k] = c.dt_ds[k] + c.psi_rate[k] + c.viscous_rate[k] - target;
    }
    return res;
}

/// Residual of the rescaled energy identity over [0, S]:
///   int F_eps(t, u; dt/ds, du/ds) ds + E(end) - E(start),
/// with F_eps = Psi-rate + (a/eps) F(eps v / a) + (a/eps) F*(e) - a P and
/// a = dt/ds. Samples with a = 0 fall under the infinity guard of the
/// definition and are excluded; their count is reported.
struct RescaledIdentityResult {
    double residual = 0.0;
    std::size_t excluded_samples = 0;
};

[[nodiscard]] inline RescaledIdentityResult rescaled_energy_identity_residual(
    const ParameterizedCurve& c, double eps, const EnergyModel& model,
    const DissipationPair& diss) {
    if (!(eps > 0.0))
        throw invalid_parameter("rescaled_energy_identity_residual: eps must be positive");
    RescaledIdentityResult out;
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < c.size(); ++k) {
        const double ds = c.s[k + 1] - c.s[k];
        if (ds <= 0.0) continue;
        const double a = c.dt_ds[k];
        if (a <= 0.0) {
            ++out.excluded_samples;
            continue;
        }
        const double vnorm = l2_norm(c.u[k + 1] - c.u[k]) / ds;
        const double e_k = c.slack[k + 1];
        double val = c.psi_rate[k];
        val += (a / eps) * diss.viscous.F(eps * vnorm / a);
        val += (a / eps) * diss.viscous.F_star(e_k);
        val -= a * model.power(c.t[k], c.u[k]);
        acc += val * ds;
    }
    out.residual = acc + c.energy.back() - c.energy.front();
    return out;
}

/// Change-of-variables check (work integral in both parameterizations).
struct WorkIdentity {
    double time_integral = 0.0;
    double arclength_integral = 0.0;
    [[nodiscard]] double mismatch() const { return time_integral - arclength_integral; }
};

[[nodiscard]] inline WorkIdentity work_change_of_variables(const ParameterizedCurve& c,
                                                           const EnergyModel& model) {
    WorkIdentity w;
    for (std::size_t k = 0; k + 1 < c.size(); ++k) {
        const double ds = c.s[k + 1] - c.s[k];
        const double dt = c.t[k + 1] - c.t[k];
        const double p0 = model.power(c.t[k], c.u[k]);
        const double p1 = model.power(c.t[k + 1], c.u[k + 1]);
        w.time_integral += 0.5 * dt * (p0 + p1);
        w.arclength_integral += 0.5 * ds * (p0 * c.dt_ds[k] + p1 * c.dt_ds[k]);
    }
    return w;
}

/// Extraction of a BV curve from a surjective parameterized curve: first-hit
/// states at strictly increasing times, jump triples from the t-plateau runs.
struct BvExtraction {
    LimitCurve curve;
    std::vector<JumpTriple> jumps;
};

[[nodiscard]] inline BvExtraction bv_from_parameterized(const ParameterizedCurve& c,
                                                        double expected_T,
                                                        double plateau_tol = 1e-12) {
    if (c.size() < 2) throw invalid_parameter("bv_from_parameterized: empty curve");
    for (std::size_t k = 0; k + 1 < c.size(); ++k)
        if (c.t[k + 1] < c.t[k] - 1e-12)
            throw invalid_state("bv_from_parameterized: t(s) is not nondecreasing");
    if (c.t.front() > 1e-9 || c.t.back() < expected_T - 1e-9)
        throw domain_error("bv_from_parameterized: t(s) does not cover [0, T] (domain-incomplete)");
    BvExtraction out;
    std::size_t k = 0;
    while (k < c.size()) {
        std::size_t j = k;
        while (j + 1 < c.size() && c.t[j + 1] - c.t[k] <= plateau_tol) ++j;
        out.curve.times.push_back(c.t[k]);
        out.curve.states.push_back(c.u[k]); // first hit
        if (j > k) {
            const GridFunction jump_size = c.u[j] - c.u[k];
            if (l2_norm(jump_size) > 1e-9) {
                JumpTriple tr;
                tr.t = c.t[k];
                tr.u_minus = c.u[k];
                tr.u_plus = c.u[j];
                tr.u_mid = c.u[(k + j) / 2];
                tr.first_sample = out.curve.times.size() - 1;
                tr.last_sample = out.curve.times.size() - 1;
                out.jumps.push_back(std::move(tr));
            }
        }
        k = j + 1;
    }
    return out;
}

/// Jump data for the reverse construction: the transition path carries the
/// states traversed at frozen time, with the index of the node representing
/// u(t) itself.
struct JumpGlue {
    TransitionPath path;
    std::size_t mid_node = 0;
};

/// Glue a parameterized curve from a BV curve: s(t) = t + Var_f(u; [0,t]),
/// with affine jump windows carrying the supplied transitions.
[[nodiscard]] inline ParameterizedCurve parameterized_from_bv(
    const LimitCurve& curve, const Gauge& gauge, const EnergyModel& model,
    const std::vector<JumpTriple>& jumps, const std::vector<JumpGlue>& transitions) {
    if (jumps.size() != transitions.size())
        throw invalid_parameter("parameterized_from_bv: one transition per jump required");
    ParameterizedCurve c;
    std::vector<double> psi_cum, visc_cum;
    const auto push = [&](double s, double t, const GridFunction& u, double pc, double vc,
                          double slack_v) {
        c.s.push_back(s);
        c.t.push_back(t);
        c.u.push_back(u);
        c.energy.push_back(model.energy(t, u));
        c.slack.push_back(slack_v);
        c.g_flag.push_back(slack_v > 1e-12 ? 1 : 0);
        psi_cum.push_back(pc);
        visc_cum.push_back(vc);
    };
    double s = curve.times.front(), pc = 0.0, vc = 0.0;
    push(s, curve.times.front(), curve.states.front(), pc, vc, 0.0);
    std::size_t jn = 0;
    std::size_t k = 0;
    while (k + 1 < curve.size()) {
        if (jn < jumps.size() && jumps[jn].first_sample == k) {
            const auto& glue = transitions[jn];
            const double t_jump = jumps[jn].t;
            for (std::size_t m = 0; m + 1 < glue.path.nodes.size(); ++m) {
                const GridFunction d = glue.path.nodes[m + 1] - glue.path.nodes[m];
                const double dpsi = gauge.psi(d);
                const double dvisc = glue.path.seg_slack.empty()
                                         ? 0.0
                                         : glue.path.seg_slack[m] * l2_norm(d);
                s += dpsi + dvisc;
                pc += dpsi;
                vc += dvisc;
                push(s, t_jump, glue.path.nodes[m + 1], pc, vc,
                     glue.path.seg_slack.empty() ? 0.0 : glue.path.seg_slack[m]);
            }
            // the glue replaces all samples spanned by the jump run
            k = std::max(jumps[jn].last_sample, k + 1);
            ++jn;
            continue;
        }
        const double dt = curve.times[k + 1] - curve.times[k];
        const double dpsi = gauge.psi(curve.states[k + 1] - curve.states[k]);
        s += dt + dpsi;
        pc += dpsi;
        push(s, curve.times[k + 1], curve.states[k + 1], pc, vc, 0.0);
        ++k;
    }
    detail::fill_rates(c, psi_cum, visc_cum);
    return c;
}

/// Largest drift of t over a G-flagged run; admissible parameterized curves
/// keep t constant there, finite-viscosity rescalings drift by O(eps).
[[nodiscard]] inline double plateau_max_drift(const ParameterizedCurve& c) {
    double worst = 0.0;
    std::size_t k = 0;
    while (k < c.size()) {
        if (!c.g_flag[k]) {
            ++k;
            continue;
        }
        std::size_t j = k;
        while (j + 1 < c.size() && c.g_flag[j + 1]) ++j;
        worst = std::max(worst, c.t[j] - c.t[k]);
        k = j + 1;
    }
    return worst;
}

/// Drop samples violating the nondegeneracy dt/ds + Psi-rate > 0.
[[nodiscard]] inline ParameterizedCurve drop_degenerate_samples(const ParameterizedCurve& c,
                                                                double tol = 1e-14) {
    ParameterizedCurve out;
    std::vector<double> psi_cum{0.0}, visc_cum{0.0};
    double pc = 0.0, vc = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k) {
        const bool keep = k + 1 >= c.size() || k == 0 ||
                          c.dt_ds[k] + c.psi_rate[k] > tol;
        if (!keep) continue;
        if (!out.s.empty()) {
            const double ds = c.s[k] - out.s.back();
            pc += c.psi_rate[k > 0 ? k - 1 : 0] * ds;
            vc += c.viscous_rate[k > 0 ? k - 1 : 0] * ds;
        }
        out.s.push_back(c.s[k]);
        out.t.push_back(c.t[k]);
        out.u.push_back(c.u[k]);
        out.energy.push_back(c.energy[k]);
        out.slack.push_back(c.slack[k]);
        out.g_flag.push_back(c.g_flag[k]);
        psi_cum.push_back(pc);
        visc_cum.push_back(vc);
    }
    psi_cum.resize(out.size(), pc);
    visc_cum.resize(out.size(), vc);
    detail::fill_rates(out, psi_cum, visc_cum);
    return out;
}

} // namespace bvsol
