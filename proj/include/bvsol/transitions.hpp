#pragma once

// Finsler jump costs by transition-path optimization, regime classification,
// and reconstruction of viscous transitions by the rescaled inclusion
//   dPsi(theta') + dPhi(theta') + dE_t(theta) in 0.

#include "bvsol/dissipation.hpp"
#include "bvsol/energy.hpp"
#include "bvsol/errors.hpp"
#include "bvsol/numerics.hpp"
#include "bvsol/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

namespace bvsol {

enum class SegmentRegime { sliding, viscous };

/// Discretized admissible transition at frozen time t.
struct TransitionPath {
    double t = 0.0;
    std::vector<double> r;            // node parameters in [0,1]
    std::vector<GridFunction> nodes;  // theta_0 .. theta_M, endpoints pinned
    std::vector<double> seg_action;   // per-segment midpoint-rule action
    std::vector<double> seg_slack;    // slack at segment midpoints
    std::vector<SegmentRegime> labels;
    std::vector<double> eps_force_balance; // (F')^{-1}(slack)/||theta'|| per segment
    std::vector<double> eps_formula;       // the displayed (F*)'(e)/F(||theta'||) variant
    double total_action = 0.0;

    [[nodiscard]] std::size_t n_segments() const { return nodes.empty() ? 0 : nodes.size() - 1; }
};

namespace detail {

inline double slack_at(const EnergyModel& model, const Gauge& gauge, double t,
                       const GridFunction& u, const WitnessProvider* witnesses,
                       std::size_t seg_index) {
    if (model.smooth()) return model.slack(gauge, t, u).value;
    if (witnesses == nullptr || !*witnesses)
        throw witness_required("finsler_action: nonsmooth model needs slack witnesses");
    const SubgradientWitness w = (*witnesses)(seg_index, t, u);
    return model.slack(gauge, t, u, &w).value;
}

} // namespace detail

/// Midpoint-rule action of a path:
///   sum_m [ Psi(theta_{m+1}-theta_m) + e_t(midpoint_m) ||theta_{m+1}-theta_m|| ].
/// Fills per-segment data of the path and returns the total. Independent of
/// the node parameters r (1-homogeneous integrand).
inline double finsler_action(TransitionPath& path, const EnergyModel& model,
                             const DissipationPair& diss,
                             const WitnessProvider* witnesses = nullptr) {
    const std::size_t M = path.n_segments();
    path.seg_action.assign(M, 0.0);
    path.seg_slack.assign(M, 0.0);
    path.labels.assign(M, SegmentRegime::sliding);
    path.eps_force_balance.assign(M, 0.0);
    path.eps_formula.assign(M, 0.0);
    double total = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
        const GridFunction d = path.nodes[m + 1] - path.nodes[m];
        const GridFunction mid = 0.5 * (path.nodes[m] + path.nodes[m + 1]);
        const double e = detail::slack_at(model, diss.gauge, path.t, mid, witnesses, m);
        const double len = l2_norm(d);
        path.seg_slack[m] = e;
        path.seg_action[m] = diss.psi(d) + e * len;
        total += path.seg_action[m];
        const double dr = path.r.empty() ? 1.0 / static_cast<double>(M)
                                         : path.r[m + 1] - path.r[m];
        const double rate = len / std::max(dr, 1e-300);
        if (rate > 0.0 && e > 0.0) {
            path.eps_force_balance[m] = diss.viscous.F_prime_inv(e) / rate;
            path.eps_formula[m] = diss.viscous.F_star_prime(e) / diss.viscous.F(rate);
        }
    }
    path.total_action = total;
    return total;
}

/// Per-segment slack integral along the straight segment by adaptive Simpson;
/// used for the reported cost so the eq. (3.12)/(3.16)-type bounds hold to
/// quadrature precision.
inline double refined_action(const TransitionPath& path, const EnergyModel& model,
                             const DissipationPair& diss,
                             const WitnessProvider* witnesses = nullptr, double tol = 1e-12) {
    double total = 0.0;
    GridFunction probe;
    for (std::size_t m = 0; m < path.n_segments(); ++m) {
        const GridFunction& a = path.nodes[m];
        const GridFunction d = path.nodes[m + 1] - path.nodes[m];
        const double len = l2_norm(d);
        probe = a;
        const auto slack_s = [&](double s) {
            for (std::size_t i = 0; i < probe.values.size(); ++i)
                probe.values[i] = a.values[i] + s * d.values[i];
            return detail::slack_at(model, diss.gauge, path.t, probe, witnesses, m);
        };
        std::function<double(double, double, double, double, double, int)> simp =
            [&](double lo, double hi, double flo, double fmid, double fhi, int depth) -> double {
            const double mid = 0.5 * (lo + hi);
            const double lm = 0.5 * (lo + mid), rm = 0.5 * (mid + hi);
            const double flm = slack_s(lm), frm = slack_s(rm);
            const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
            const double left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid);
            const double right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi);
            if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol * (hi - lo))
                return left + right + (left + right - whole) / 15.0;
            return simp(lo, mid, flo, flm, fmid, depth - 1) +
                   simp(mid, hi, fmid, frm, fhi, depth - 1);
        };
        const double f0 = slack_s(0.0), f5 = slack_s(0.5), f1 = slack_s(1.0);
        total += diss.psi(d) + len * simp(0.0, 1.0, f0, f5, f1, 26);
    }
    return total;
}

struct TransitionOptions {
    double tol_rel = 1e-9;  // stop when a sweep improves the action less than this
    int max_sweeps = 400;
    int restarts = 3;       // perturbed seeds for nonconvex landscapes
    std::uint64_t seed = 7070u;
    double slack_tol = 1e-9; // sliding/viscous classification threshold
};

struct TransitionResult {
    TransitionPath path;
    double cost = 0.0;                   // refined action of the optimized path
    std::vector<double> restart_actions; // midpoint action of every restart
};

/// Optimize the transition path between pinned endpoints by coordinate
/// descent with per-node 1D line searches from the linear-interpolation seed.
inline TransitionResult optimize_transition(const GridFunction& u_minus,
                                            const GridFunction& u_plus, double t, int M,
                                            const EnergyModel& model, const DissipationPair& diss,
                                            const TransitionOptions& opts = {},
                                            const WitnessProvider* witnesses = nullptr) {
    if (M < 2) throw invalid_parameter("optimize_transition: need M >= 2 segments");
    if (!model.admissible(u_minus) || !model.admissible(u_plus))
        throw infeasible_transition("optimize_transition: endpoints are inadmissible");

    const std::size_t n_nodes = static_cast<std::size_t>(M) + 1;
    const auto make_seed = [&](double jitter, std::mt19937_64& rng) {
        TransitionPath path;
        path.t = t;
        path.r.resize(n_nodes);
        path.nodes.resize(n_nodes);
        std::normal_distribution<double> noise(0.0, jitter);
        for (std::size_t m = 0; m < n_nodes; ++m) {
            const double lam = static_cast<double>(m) / M;
            path.r[m] = lam;
            path.nodes[m] = (1.0 - lam) * u_minus + lam * u_plus;
            if (jitter > 0.0 && m > 0 && m + 1 < n_nodes)
                for (double& v : path.nodes[m].values) v += noise(rng);
            if (model.well.kind == Well::Kind::indicator)
                for (double& v : path.nodes[m].values) v = std::clamp(v, 0.0, 1.0);
            if (!model.admissible(path.nodes[m]))
                throw infeasible_transition("optimize_transition: inadmissible seed node");
        }
        return path;
    };

    // local action of the two segments adjacent to node m
    const auto local_action = [&](TransitionPath& path, std::size_t m) {
        double s = 0.0;
        for (std::size_t seg : {m - 1, m}) {
            const GridFunction d = path.nodes[seg + 1] - path.nodes[seg];
            const GridFunction mid = 0.5 * (path.nodes[seg] + path.nodes[seg + 1]);
            s += diss.psi(d) +
                 detail::slack_at(model, diss.gauge, t, mid, witnesses, seg) * l2_norm(d);
        }
        return s;
    };
    const auto golden_component = [&](TransitionPath& path, std::size_t m, std::size_t comp,
                                      double radius) {
        const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
        const double x0 = path.nodes[m].values[comp];
        double a = x0 - radius, b = x0 + radius;
        if (model.well.kind == Well::Kind::indicator) {
            a = std::max(a, 0.0);
            b = std::min(b, 1.0);
        }
        const auto f = [&](double x) {
            path.nodes[m].values[comp] = x;
            return local_action(path, m);
        };
        const double f0 = f(x0);
        double c = b - gr * (b - a), d = a + gr * (b - a);
        double fc = f(c), fd = f(d);
        for (int it = 0; it < 80 && b - a > 1e-12 * (1.0 + std::abs(a) + std::abs(b)); ++it) {
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
        const double x_new = fc < fd ? c : d;
        const double f_new = std::min(fc, fd);
        path.nodes[m].values[comp] = f_new < f0 ? x_new : x0;
    };

    std::mt19937_64 rng(opts.seed);
    TransitionResult best;
    double best_action = std::numeric_limits<double>::infinity();
    const double span = l2_norm(u_plus - u_minus) + 1.0;
    for (int restart = 0; restart <= opts.restarts; ++restart) {
        TransitionPath path = make_seed(restart == 0 ? 0.0 : 0.25 * span, rng);
        double prev = finsler_action(path, model, diss, witnesses);
        if (!std::isfinite(prev))
            throw infeasible_transition("optimize_transition: seed action diverges");
        for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
            const double radius = span * std::max(0.02, 1.0 / (sweep + 2.0));
            for (std::size_t m = 1; m + 1 < n_nodes; ++m)
                for (std::size_t comp = 0; comp < path.nodes[m].values.size(); ++comp)
                    golden_component(path, m, comp, radius);
            const double now = finsler_action(path, model, diss, witnesses);
            if (prev - now < opts.tol_rel * std::max(1.0, std::abs(prev))) {
                prev = now;
                break;
            }
            prev = now;
        }
        best.restart_actions.push_back(prev);
        if (prev < best_action) {
            best_action = prev;
            best.path = path;
        }
    }
    finsler_action(best.path, model, diss, witnesses);
    for (std::size_t m = 0; m < best.path.n_segments(); ++m)
        best.path.labels[m] = best.path.seg_slack[m] > opts.slack_tol ? SegmentRegime::viscous
                                                                      : SegmentRegime::sliding;
    best.cost = refined_action(best.path, model, diss, witnesses);

    // every admissible path dominates the Psi-distance of its endpoints and
    // the energy drop between them
    const double lower = diss.psi(u_plus - u_minus);
    if (best.cost < lower - 1e-9)
        throw error("optimize_transition: cost fell below the Psi lower bound");
    const double e_minus = model.energy(t, u_minus), e_plus = model.energy(t, u_plus);
    if (std::isfinite(e_minus) && std::isfinite(e_plus) &&
        best.cost < std::abs(e_minus - e_plus) - 1e-9)
        throw error("optimize_transition: cost fell below the energy-drop lower bound");
    return best;
}

/// Maximal sliding/viscous runs of an optimized path.
struct TransitionDecomposition {
    struct Run {
        SegmentRegime regime;
        std::size_t first_segment, last_segment;
        std::vector<double> eps_profile; // recovered viscosity on viscous runs
    };
    std::vector<Run> runs;
};

[[nodiscard]] inline TransitionDecomposition classify_transition(const TransitionPath& path) {
    TransitionDecomposition out;
    const std::size_t M = path.n_segments();
    std::size_t m = 0;
    while (m < M) {
        TransitionDecomposition::Run run;
        run.regime = path.labels[m];
        run.first_segment = m;
        while (m + 1 < M && path.labels[m + 1] == run.regime) ++m;
        run.last_segment = m;
        if (run.regime == SegmentRegime::viscous)
            for (std::size_t k = run.first_segment; k <= run.last_segment; ++k)
                run.eps_profile.push_back(path.eps_force_balance[k]);
        out.runs.push_back(std::move(run));
        ++m;
    }
    return out;
}

struct ViscousOdeOptions {
    double slack_stop = 1e-7;   // re-stabilization threshold
    double target_step = 0.0;   // Psi-length per step; 0 selects span/400
    int max_steps = 200000;
    double probe = 1e-4;        // nudge size used to detect unstable directions
    double tol_inner = 1e-10;
    int max_inner_iter = 20000;
};

/// Integrate the rescaled viscous inclusion by semi-implicit steps (each an
/// incremental step with frozen t and eps = 1) until the slack vanishes again.
/// Returns the traversed path; the arrival point is the last node.
inline TransitionPath viscous_transition_ode(const GridFunction& u_minus, double t,
                                             const EnergyModel& model, const DissipationPair& diss,
                                             const ViscousOdeOptions& opts = {},
                                             const GridFunction* direction_hint = nullptr) {
    if (!model.smooth())
        throw unsupported_model("viscous_transition_ode: needs a smooth model");
    GridFunction theta = u_minus;
    double e0 = model.slack(diss.gauge, t, theta).value;
    if (e0 <= opts.slack_stop) {
        // probe for an unstable direction before giving up
        bool found = false;
        std::vector<GridFunction> probes;
        if (direction_hint) {
            probes.push_back(theta + opts.probe * *direction_hint);
            probes.push_back(theta - opts.probe * *direction_hint);
        }
        for (std::size_t c = 0; c < theta.values.size() && probes.size() < 8; ++c) {
            GridFunction e(theta.grid);
            e.values[c] = 1.0;
            probes.push_back(theta + opts.probe * e);
            probes.push_back(theta - opts.probe * e);
        }
        const double base_energy = model.energy(t, theta);
        for (const auto& pr : probes) {
            if (!model.admissible(pr)) continue;
            if (model.slack(diss.gauge, t, pr).value > opts.slack_stop &&
                model.energy(t, pr) < base_energy + diss.psi(pr - theta)) {
                theta = pr;
                found = true;
                break;
            }
        }
        if (!found)
            throw no_transition("viscous_transition_ode: no unstable direction at the start point");
    }

    TransitionPath path;
    path.t = t;
    path.nodes.push_back(u_minus);
    if (theta.values != u_minus.values) path.nodes.push_back(theta);

    SchemeParams sp;
    sp.eps = 1.0;
    sp.tol_inner = opts.tol_inner;
    sp.max_inner_iter = opts.max_inner_iter;

    double span = 1.0 + l2_norm(theta);
    double sigma = (opts.target_step > 0.0 ? opts.target_step : span / 400.0);
    int stalls = 0;
    for (int k = 0; k < opts.max_steps; ++k) {
        const StepResult step = incremental_step(model, diss, theta, t, sigma, sp);
        const double move = l2_norm(step.state - theta);
        const double target = (opts.target_step > 0.0 ? opts.target_step : span / 400.0);
        if (move < 0.25 * target)
            sigma *= 2.0;
        else if (move > 4.0 * target)
            sigma *= 0.5;
        if (move < 1e-14 * span) {
            if (++stalls > 3) break;
        } else {
            stalls = 0;
            theta = step.state;
            path.nodes.push_back(theta);
        }
        if (model.slack(diss.gauge, t, theta).value <= opts.slack_stop && k > 0 &&
            move < 0.5 * target)
            break;
    }
    // uniform parameters; the action is parameterization-independent
    path.r.resize(path.nodes.size());
    const std::size_t M = path.nodes.size() - 1;
    for (std::size_t m = 0; m < path.nodes.size(); ++m)
        path.r[m] = static_cast<double>(m) / static_cast<double>(std::max<std::size_t>(M, 1));
    finsler_action(path, model, DissipationPair{diss.gauge, diss.viscous});
    for (std::size_t m = 0; m < path.n_segments(); ++m)
        path.labels[m] =
            path.seg_slack[m] > 1e-9 ? SegmentRegime::viscous : SegmentRegime::sliding;
    return path;
}

} // namespace bvsol
