#include <catch2/catch_amalgamated.hpp>

#include "bvsol/energy.hpp"
#include "oracles.hpp"

#include <cmath>
#include <random>

using namespace bvsol;

namespace {

// Example models used throughout: the moving-interface energy (TV + indicator
// well, loading t+2-x), the decoupled double well (loading t+x), the TV double
// well (loading 2), and the Dirichlet quadratic well.

EnergyModel moving_interface(int n = 64, double l = 4.0, double delta = 1.0) {
    EnergyModel m;
    m.grad_term = GradTerm::tv;
    m.tv_delta = delta;
    m.well = Well::indicator01();
    m.loading = Loading::affine_tx(1.0, -1.0, 2.0);
    m.grid = Grid1D(l, n);
    return m;
}

EnergyModel double_well_wave(int n = 64) {
    EnergyModel m;
    m.grad_term = GradTerm::none;
    m.well = Well::double_well();
    m.loading = Loading::affine_tx(1.0, 1.0, 0.0);
    m.grid = Grid1D(1.0, n);
    return m;
}

EnergyModel tv_double_well(int n = 64, double l = 4.0) {
    EnergyModel m;
    m.grad_term = GradTerm::tv;
    m.tv_delta = 1.0;
    m.well = Well::double_well();
    m.loading = Loading::affine_tx(0.0, 0.0, 2.0);
    m.grid = Grid1D(l, n);
    return m;
}

EnergyModel dirichlet_well(int n = 64, double lambda = 1.0) {
    EnergyModel m;
    m.grad_term = GradTerm::dirichlet;
    m.well = Well::quadratic(lambda, 0.0);
    m.loading = Loading::affine_tx(3.0, 0.5, 0.0);
    m.grid = Grid1D(1.0, n);
    return m;
}

/// Two-phase profile: hi on [0, a), lo on (a, l], exact when a is a face.
GridFunction two_phase(const Grid1D& g, double a, double hi, double lo) {
    return sample(g, [&](double x) { return x < a ? hi : lo; });
}

} // namespace

TEST_CASE("energy values") {
    SECTION("two-phase double-well state under constant loading 2") {
        // E(interface at a) = 8 + 6l - 16a for the 6 / -2 two-phase profile
        const auto m = tv_double_well(64, 4.0);
        for (double a : {0.5, 1.0, 1.5, 2.0, 3.0}) {
            const auto u = two_phase(m.grid, a, 6.0, -2.0);
            CHECK(m.energy(0.0, u) == Catch::Approx(8.0 + 6.0 * 4.0 - 16.0 * a).margin(1e-10));
        }
    }
    SECTION("constant state in the double well with zero loading") {
        EnergyModel m;
        m.well = Well::double_well();
        m.loading = Loading::affine_tx(0.0, 0.0, 0.0);
        m.grid = Grid1D(1.0, 8);
        CHECK(m.energy(0.0, GridFunction(m.grid, 0.0)) == Catch::Approx(4.0));
    }
    SECTION("moving-interface energy against the analytic quadrature") {
        const auto m = moving_interface(64, 4.0, 1.0);
        const double t = 0.5, a = 1.5; // cell-aligned: h = 1/16
        const auto u = two_phase(m.grid, a, 1.0, 0.0);
        const double analytic = 1.0 - (t + 2.0) * a + 0.5 * a * a;
        CHECK(m.energy(t, u) == Catch::Approx(analytic).margin(1e-12));
    }
    SECTION("indicator well signals inadmissible states with +infinity") {
        const auto m = moving_interface(16);
        GridFunction u(m.grid, 0.5);
        u.values[3] = 1.5;
        CHECK(std::isinf(m.energy(0.0, u)));
        u.values[3] = -0.5;
        CHECK(std::isinf(m.energy(0.0, u)));
    }
    SECTION("non-finite states are rejected") {
        const auto m = moving_interface(16);
        GridFunction u(m.grid, 0.5);
        u.values[0] = std::numeric_limits<double>::quiet_NaN();
        CHECK_THROWS_AS(m.energy(0.0, u), invalid_state);
    }
}

TEST_CASE("power") {
    SECTION("time-constant loading has zero power") {
        const auto m = tv_double_well(32);
        auto r = oracles::rng(41);
        const auto u = oracles::random_state(m.grid, r, 3.0);
        CHECK(m.power(0.3, u) == 0.0);
    }
    SECTION("moving interface: P = -a for the indicator of [0, a]") {
        const auto m = moving_interface(256, 4.0);
        const double a = 1.5;
        const auto u = two_phase(m.grid, a, 1.0, 0.0);
        CHECK(m.power(0.5, u) == Catch::Approx(-a).margin(1e-12));
    }
    SECTION("central-difference oracle in t") {
        const auto m = double_well_wave(16);
        auto r = oracles::rng(42);
        const auto u = oracles::random_state(m.grid, r, 4.0);
        const double t = 0.7, dt = 1e-4;
        const double fd =
            oracles::central_diff([&](double s) { return m.energy(s, u); }, t, dt);
        CHECK(m.power(t, u) == Catch::Approx(fd).margin(1e-8));
    }
}

TEST_CASE("smooth gradient") {
    SECTION("well bottom is stationary") {
        EnergyModel m;
        m.well = Well::double_well();
        m.loading = Loading::affine_tx(0.0, 0.0, 0.0);
        m.grid = Grid1D(1.0, 8);
        const auto g = m.smooth_gradient(0.0, GridFunction(m.grid, 4.0));
        for (double v : g.values) CHECK(v == Catch::Approx(0.0).margin(1e-14));
    }
    SECTION("decoupled double well: pointwise value W'(u) - l") {
        const auto m = double_well_wave(4);
        const double tau = 2.0;
        EnergyModel frozen = m;
        frozen.loading = Loading::affine_tx(0.0, 0.0, tau);
        const auto g = frozen.smooth_gradient(0.0, GridFunction(m.grid, -4.0));
        for (double v : g.values) CHECK(v == Catch::Approx(-tau).margin(1e-14));
    }
    SECTION("directional-derivative consistency (50 random probes)") {
        const auto m = dirichlet_well(32);
        auto r = oracles::rng(43);
        for (int rep = 0; rep < 50; ++rep) {
            const auto u = oracles::random_state(m.grid, r, 1.5);
            const auto du = oracles::random_state(m.grid, r, 1.0);
            const auto g = m.smooth_gradient(0.4, u);
            const double s = 1e-6;
            const double fd = (m.energy(0.4, u + s * du) - m.energy(0.4, (-s) * du + u)) / (2 * s);
            CHECK(dot(g, du) == Catch::Approx(fd).epsilon(1e-5).margin(1e-7));
        }
    }
    SECTION("unsupported for TV and indicator models") {
        const auto m = moving_interface(16);
        CHECK_THROWS_AS(m.smooth_gradient(0.0, GridFunction(m.grid, 0.5)), unsupported_model);
        const auto m2 = tv_double_well(16);
        CHECK_THROWS_AS(m2.smooth_gradient(0.0, GridFunction(m2.grid, 0.0)), unsupported_model);
    }
}

TEST_CASE("slack") {
    const Gauge gauge = Gauge::uniform(4, 1.0);
    SECTION("locally stable smooth state has zero slack") {
        auto m = double_well_wave(4);
        m.loading = Loading::affine_tx(0.0, 0.0, 0.5);
        const auto s = m.slack(gauge, 0.0, GridFunction(m.grid, -4.0));
        CHECK_FALSE(s.upper_bound_only);
        CHECK(s.value == Catch::Approx(0.0).margin(1e-14));
    }
    SECTION("scalar double well at loading 3: slack = dist(3, [-1,1]) = 2") {
        auto m = double_well_wave(4);
        m.loading = Loading::affine_tx(0.0, 0.0, 3.0);
        const auto s = m.slack(gauge, 0.0, GridFunction(m.grid, -4.0));
        CHECK(s.value == Catch::Approx(2.0).margin(1e-12));
    }
    SECTION("nonsmooth model requires a witness") {
        const auto m = moving_interface(4);
        CHECK_THROWS_AS(m.slack(gauge, 0.0, GridFunction(m.grid, 0.5)), witness_required);
    }
    SECTION("witness-based upper bound is flagged") {
        const auto m = moving_interface(4);
        SubgradientWitness w{GridFunction(m.grid, 0.2), 0.0};
        const auto s = m.slack(Gauge::uniform(4, 1.0), 0.0, GridFunction(m.grid, 0.5), &w);
        CHECK(s.upper_bound_only);
        CHECK(s.value == Catch::Approx(0.0));
    }
}

TEST_CASE("explicit witness for the TV double well") {
    // xi_t = 1/(1+t) on (0, 1+t), -1/(l-1-t) on (1+t, l) lies in dE_t(u(t))
    // and in K*, certifying local stability of the two-phase curve.
    const double l = 4.0;
    const int n = 64;
    const auto m = tv_double_well(n, l);
    const Gauge gauge = Gauge::uniform(n, 1.0);
    auto r = oracles::rng(44);
    for (double t : {0.0, 0.5, 1.0, 2.0}) {
        const double a = 1.0 + t;
        const auto u = two_phase(m.grid, a, 6.0, -2.0);
        const auto xi = sample(m.grid, [&](double x) {
            return x < a ? 1.0 / (1.0 + t) : -1.0 / (l - 1.0 - t);
        });
        // witness inequality with the (-1)-convexity correction on random probes
        std::vector<GridFunction> probes;
        for (int rep = 0; rep < 40; ++rep) probes.push_back(u + oracles::random_state(m.grid, r, 3.0));
        probes.push_back(two_phase(m.grid, a + 0.5, 6.0, -2.0));
        probes.push_back(GridFunction(m.grid, 6.0));
        probes.push_back(GridFunction(m.grid, -2.0));
        const double gap = validate_witness(m, t, u, xi, probes, 1.0);
        CHECK(gap >= -1e-9);
        // in K*, so the witness slack bound vanishes: local stability holds
        SubgradientWitness w{xi, gap};
        const auto s = m.slack(gauge, t, u, &w);
        CHECK(s.value == Catch::Approx(0.0).margin(1e-12));
    }
}

TEST_CASE("Garding-type subdifferentiability residual") {
    const Gauge gauge = Gauge::uniform(32, 1.0);
    SECTION("degenerate probe v = u") {
        const auto m = dirichlet_well(32);
        auto r = oracles::rng(45);
        const auto u = oracles::random_state(m.grid, r, 1.0);
        const auto xi = m.smooth_gradient(0.2, u);
        CHECK(m.check_garding(gauge, 0.2, u, u, xi, 1.0, 0.0) == Catch::Approx(0.0).margin(1e-13));
    }
    SECTION("Dirichlet + lambda-convex well: random probes certify alpha = lambda") {
        const auto m = dirichlet_well(32, 1.0);
        auto r = oracles::rng(46);
        for (int rep = 0; rep < 100; ++rep) {
            const auto u = oracles::random_state(m.grid, r, 1.5);
            const auto v = oracles::random_state(m.grid, r, 1.5);
            const auto xi = m.smooth_gradient(0.1, u);
            CHECK(m.check_garding(gauge, 0.1, u, v, xi, 1.0, 0.0) >= -1e-9);
        }
    }
    SECTION("detects the nonconvexity of the bare double well") {
        EnergyModel m;
        m.well = Well::double_well();
        m.loading = Loading::affine_tx(0.0, 0.0, 0.0);
        m.grid = Grid1D(1.0, 32);
        const Gauge g32 = Gauge::uniform(32, 1.0);
        const GridFunction u(m.grid, 0.0), v(m.grid, 1.0);
        const auto xi = m.smooth_gradient(0.0, u);
        CHECK(m.check_garding(g32, 0.0, u, v, xi, 1.0, 0.0) < 0.0);
    }
}

TEST_CASE("generalized lambda-convexity residual") {
    const Gauge gauge = Gauge::uniform(32, 1.0);
    const auto m = dirichlet_well(32, 1.0);
    auto r = oracles::rng(47);
    SECTION("endpoints are exact") {
        const auto u = oracles::random_state(m.grid, r, 1.0);
        const auto v = oracles::random_state(m.grid, r, 1.0);
        CHECK(m.check_lambda_convexity(gauge, 0.0, u, v, 0.0, 1.0, 0.0) ==
              Catch::Approx(0.0).margin(1e-12));
        CHECK(m.check_lambda_convexity(gauge, 0.0, u, v, 1.0, 1.0, 0.0) ==
              Catch::Approx(0.0).margin(1e-12));
    }
    SECTION("theta = 1/2 on random pairs") {
        for (int rep = 0; rep < 100; ++rep) {
            const auto u = oracles::random_state(m.grid, r, 1.5);
            const auto v = oracles::random_state(m.grid, r, 1.5);
            CHECK(m.check_lambda_convexity(gauge, 0.0, u, v, 0.5, 1.0, 0.0) >= -1e-9);
        }
    }
    SECTION("degenerate pair u = v") {
        const auto u = oracles::random_state(m.grid, r, 1.0);
        CHECK(m.check_lambda_convexity(gauge, 0.0, u, u, 0.5, 1.0, 0.0) ==
              Catch::Approx(0.0).margin(1e-12));
    }
    SECTION("theta outside [0,1] is rejected") {
        const auto u = oracles::random_state(m.grid, r, 1.0);
        CHECK_THROWS_AS(m.check_lambda_convexity(gauge, 0.0, u, u, 1.5, 1.0, 0.0),
                        invalid_parameter);
    }
}

TEST_CASE("power-control constant and the Gronwall-type energy bound") {
    // sample C_P on states, then check Psi(u) + E_s(u) <= exp(C_P T)(Psi(u) + E_t(u))
    // after shifting E by a constant that makes Psi + E positive on the samples.
    const auto m = double_well_wave(16);
    const Gauge gauge = Gauge::uniform(16, 1.0);
    const DissipationPair diss{gauge, ViscousPotential::quadratic()};
    auto r = oracles::rng(48);
    const double T = 2.0;
    std::vector<GridFunction> samples;
    for (int rep = 0; rep < 30; ++rep) samples.push_back(oracles::random_state(m.grid, r, 5.0));
    double shift = 0.0;
    for (const auto& u : samples)
        for (double t : {0.0, 0.5 * T, T})
            shift = std::max(shift, -(diss.psi(u) + m.energy(t, u)) + 1.0);
    double cp = 0.0;
    for (const auto& u : samples)
        for (double t : {0.0, 0.5 * T, T})
            cp = std::max(cp, std::abs(m.power(t, u)) / (diss.psi(u) + m.energy(t, u) + shift));
    for (const auto& u : samples)
        for (double s : {0.0, 1.0, T})
            for (double t : {0.0, 0.7, T}) {
                const double lhs = diss.psi(u) + m.energy(s, u) + shift;
                const double rhs = std::exp(cp * T) * (diss.psi(u) + m.energy(t, u) + shift);
                CHECK(lhs >= 0.0);
                CHECK(lhs <= rhs * (1.0 + 1e-12));
            }
}

TEST_CASE("slack lower-semicontinuity probe") {
    // u_k -> u with slack(u_k) -> 0 forces slack(u) = 0 for smooth models
    auto m = double_well_wave(8);
    m.loading = Loading::affine_tx(0.0, 0.0, 0.8);
    const Gauge gauge = Gauge::uniform(8, 1.0);
    const GridFunction u_limit(m.grid, -4.0 + 0.8); // W'(u) = u + 4 = 0.8 = l, slack 0
    for (int k = 1; k <= 6; ++k) {
        const GridFunction u_k = u_limit + std::pow(2.0, -k) * GridFunction(m.grid, 1.0);
        CHECK(m.slack(gauge, 0.0, u_k).value <= m.slack(gauge, 0.0, u_limit).value +
                                                     std::pow(2.0, -k) + 1e-12);
    }
    CHECK(m.slack(gauge, 0.0, u_limit).value == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("table loading interpolates values and derivatives") {
    // samples of l(t,x) = t^2 + x on a fine table reproduce value and d/dt
    std::vector<double> tt, av, bv;
    for (int k = 0; k <= 40; ++k) {
        const double t = k / 40.0;
        tt.push_back(t);
        av.push_back(t * t);
        bv.push_back(1.0);
    }
    const Loading load = Loading::tables(tt, av, bv);
    for (double t : {0.1, 0.33, 0.77}) {
        CHECK(load.value(t, 0.5) == Catch::Approx(t * t + 0.5).margin(1e-3));
        CHECK(load.dt(t, 0.5) == Catch::Approx(2.0 * t).margin(1e-2));
    }
    CHECK_FALSE(load.affine_in_t());
}
