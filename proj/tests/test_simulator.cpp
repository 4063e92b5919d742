#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "levy_she/kernel.hpp"
#include "levy_she/rng.hpp"
#include "levy_she/simulator.hpp"

using namespace levy_she;

namespace {

LevyNoiseSpec unit_poisson(bool compensate, double size = 1.0, double rate = 1.0) {
    LevyNoiseSpec s;
    s.atoms = {{size, rate}};
    s.compensate = compensate;
    return s;
}

ModelConfig pam_model(double kappa, double sigma0, double f, LevyNoiseSpec noise) {
    ModelConfig c;
    c.d = 1;
    c.kappa = kappa;
    c.sigma = SigmaSpec::pam(sigma0);
    c.f = InitialSpec::constant(f);
    c.noise = std::move(noise);
    return c;
}

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

std::vector<double> random_field(std::size_t n, std::uint32_t box) {
    CounterStream rng(7, 0, box, StreamPurpose::test);
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform();
    return v;
}

}  // namespace

TEST(HeatPropagate, ConservesMass) {
    for (int d : {1, 2}) {
        Grid g{d, d == 1 ? 256 : 32, 3.0};
        for (double dt : {1e-7, 1e-4, 1e-2, 0.5}) {
            FieldState s{g, 0.0, random_field(g.size(), 1)};
            const double before = s.mass();
            const auto after = heat_propagate(s, 0.7, dt);
            EXPECT_NEAR(after.mass(), before, 1e-12 * before) << "d=" << d << " dt=" << dt;
            EXPECT_DOUBLE_EQ(after.time, dt);
        }
    }
}

TEST(HeatPropagate, PointMassMatchesSampledKernel) {
    const double kappa = 1.0;
    Grid g{1, 1024, 20.0};
    const double dt = std::pow(4.0 * g.dx(), 2) / kappa;
    FieldState s{g, 0.0, std::vector<double>(g.size(), 0.0)};
    s.values[g.center()] = 1.0 / g.dx();
    const auto out = heat_propagate(s, kappa, dt);
    const KernelParams k{kappa, 1};
    for (int j = g.cells / 2 - 4; j <= g.cells / 2 + 4; ++j) {
        const double exact = heat_kernel(k, dt, {g.coordinate(j)});
        EXPECT_NEAR(out.values[j], exact, 1e-6 * exact) << "cell " << j;
    }
}

TEST(HeatPropagate, SemigroupAndPositivity) {
    Grid g{1, 128, 4.0};
    HeatPropagator heat(g);
    const auto f = random_field(g.size(), 2);
    auto once = f, twice = f;
    heat.apply(once, 1.0, 0.3);
    heat.apply(twice, 1.0, 0.1);
    heat.apply(twice, 1.0, 0.2);
    EXPECT_LT(max_abs_diff(once, twice), 1e-13);

    // Short steps compose exactly as well.
    auto a = f, b = f;
    const double small = 1e-2 * g.dx() * g.dx();
    heat.apply(a, 1.0, 10 * small);
    for (int i = 0; i < 10; ++i) heat.apply(b, 1.0, small);
    EXPECT_LT(max_abs_diff(a, b), 1e-13);

    for (double dt : {1e-8, 1e-5, 1e-3, 1e-1}) {
        std::vector<double> y(g.size(), 0.0);
        y[g.center()] = 1.0 / g.dx();
        heat.apply(y, 1.0, dt);
        EXPECT_GE(*std::min_element(y.begin(), y.end()), -1e-12 * max_abs(y)) << "dt=" << dt;
    }
}

TEST(EventDriven, NoNoiseMatchesClosedForms) {
    LevyNoiseSpec quiet;
    quiet.b = -0.4;
    auto c = pam_model(1.0, 1.5, 2.0, quiet);
    SimOptions o;
    o.horizon = 1.3;
    o.snapshots = {0.5, 1.3};
    const auto tr = solve_event_driven(c, o, 1, 0);
    ASSERT_EQ(tr.snapshots.size(), 2u);
    for (const auto& s : tr.snapshots)
        for (double v : s.values) EXPECT_NEAR(v, 2.0 * std::exp(-0.4 * 1.5 * s.time), 1e-12);

    c.sigma = SigmaSpec::constant(0.5);
    const auto lin = solve_event_driven(c, o, 1, 0);
    for (double v : lin.snapshots[1].values) EXPECT_NEAR(v, 2.0 - 0.4 * 0.5 * 1.3, 1e-12);

    // Nonlinear sigma: y' = b sigma(y) is separable; compare against a fine RK4 integration.
    c.sigma = SigmaSpec::lipschitz_floor(2.0, 0.5);
    const auto nl = solve_event_driven(c, o, 1, 0);
    double y = 2.0;
    const int n = 200000;
    const double h = 1.3 / n;
    for (int i = 0; i < n; ++i) y += h * quiet.b * c.sigma(y + 0.5 * h * quiet.b * c.sigma(y));
    for (double v : nl.snapshots[1].values) EXPECT_NEAR(v, y, 1e-8);
}

TEST(EventDriven, CableFormMatchesDriftSubsteps) {
    auto c = pam_model(0.5, 0.8, 1.0, unit_poisson(true, 0.5, 3.0));
    c.noise.b = -0.7;
    SimOptions o;
    o.horizon = 2.0;
    o.cells = 128;
    o.drift = DriftMode::cable;
    const auto cable = solve_event_driven(c, o, 11, 3);
    o.drift = DriftMode::rk4;
    const auto rk = solve_event_driven(c, o, 11, 3);
    ASSERT_GT(cable.jumps, 0u);
    const auto& a = cable.snapshots.back().values;
    EXPECT_LT(max_abs_diff(a, rk.snapshots.back().values), 1e-8 * max_abs(a));
}

TEST(EventDriven, DeterministicPerSeedAndReplica) {
    auto c = pam_model(1.0, 1.0, 1.0, unit_poisson(true));
    SimOptions o;
    o.horizon = 1.5;
    const auto a = solve_event_driven(c, o, 5, 2);
    const auto b = solve_event_driven(c, o, 5, 2);
    const auto other = solve_event_driven(c, o, 5, 3);
    EXPECT_EQ(a.snapshots.back().values, b.snapshots.back().values);
    EXPECT_NE(a.snapshots.back().values, other.snapshots.back().values);

    // Jumps in [0, 1) do not depend on the horizon.
    SimOptions shorter = o;
    shorter.horizon = 0.9;
    EXPECT_EQ(solve_event_driven(c, shorter, 5, 2).snapshots.back().values,
              [&] {
                  SimOptions s = o;
                  s.snapshots = {0.9};
                  s.length = default_torus_length(1.0, 0.9);
                  return solve_event_driven(c, s, 5, 2).snapshots.back().values;
              }());
}

TEST(EventDriven, MeanIdentityForCompensatedNoise) {
    // E Y(t, x) = f for PAM driven by compensated noise with b = 0.
    auto c = pam_model(1.0, 1.0, 1.0, unit_poisson(true));
    SimOptions o;
    o.horizon = 1.0;
    o.cells = 64;
    const int n = 3000;
    double sum = 0.0, sum2 = 0.0;
    for (int r = 0; r < n; ++r) {
        const auto tr = solve_event_driven(c, o, 17, r);
        const double v = tr.snapshots.back().values[tr.snapshots.back().grid.center()];
        sum += v;
        sum2 += v * v;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sum2 / n - mean * mean) / n);
    EXPECT_LT(std::abs(mean - 1.0), 4.0 * se) << "mean " << mean << " se " << se;
}

TEST(EventDriven, SuperpositionForLinearModel) {
    auto c = pam_model(0.5, 1.0, 1.0, unit_poisson(false, 0.8, 2.0));
    SimOptions o;
    o.horizon = 1.5;
    o.length = 6.0;
    auto c1 = c, c2 = c, c12 = c;
    c1.f = InitialSpec::exponential_decay(1.0, 2.0);
    c2.f = InitialSpec::constant(0.5);
    const auto y1 = solve_event_driven(c1, o, 3, 1).snapshots.back().values;
    // Linear sigma: doubling f doubles Y.
    c12.f = InitialSpec::exponential_decay(2.0, 2.0);
    const auto y1x2 = solve_event_driven(c12, o, 3, 1).snapshots.back().values;
    for (std::size_t i = 0; i < y1.size(); ++i) EXPECT_NEAR(y1x2[i], 2.0 * y1[i], 1e-10 * max_abs(y1x2));
    // Additive sigma: Y_{f1} - Y_{f2} is the deterministic heat flow of f1 - f2.
    auto a = c1, b = c2;
    a.sigma = b.sigma = SigmaSpec::constant(1.0);
    const auto ya = solve_event_driven(a, o, 3, 1).snapshots.back();
    const auto yb = solve_event_driven(b, o, 3, 1).snapshots.back();
    auto diff0 = sample_initial(c1.f, ya.grid);
    const auto f2 = sample_initial(c2.f, ya.grid);
    for (std::size_t i = 0; i < diff0.values.size(); ++i) diff0.values[i] -= f2.values[i];
    const auto flow = heat_propagate(diff0, c.kappa, o.horizon);
    for (std::size_t i = 0; i < flow.values.size(); ++i)
        EXPECT_NEAR(ya.values[i] - yb.values[i], flow.values[i], 1e-10 * std::max(1.0, max_abs(ya.values)));
}

TEST(EventDriven, DriftOrdering) {
    auto lo = pam_model(1.0, 1.0, 1.0, unit_poisson(false));
    auto hi = lo;
    lo.noise.b = -0.5;
    hi.noise.b = 0.5;
    SimOptions o;
    o.horizon = 1.0;
    for (std::uint32_t r = 0; r < 20; ++r) {
        const auto a = solve_event_driven(lo, o, 9, r).snapshots.back().values;
        const auto b = solve_event_driven(hi, o, 9, r).snapshots.back().values;
        for (std::size_t i = 0; i < a.size(); ++i) ASSERT_LE(a[i], b[i]);
    }
}

TEST(EventDriven, TorusSizeRobustness) {
    LevyNoiseSpec quiet;
    ModelConfig c = pam_model(1.0, 1.0, 0.0, quiet);
    c.f = InitialSpec::exponential_decay(1.0, 1.0);
    SimOptions o;
    o.horizon = 1.0;
    o.cells = 512;
    const auto base = solve_event_driven(c, o, 1, 0).snapshots.back();
    o.length = 1.5 * default_torus_length(1.0, 1.0);
    o.cells = 768;
    const auto big = solve_event_driven(c, o, 1, 0).snapshots.back();
    EXPECT_NEAR(base.values[base.grid.center()], big.values[big.grid.center()], 1e-6);
}

TEST(EventDriven, GaussianPartHasZeroMean) {
    ModelConfig c;
    c.sigma = SigmaSpec::constant(1.0);
    c.f = InitialSpec::constant(0.0);
    c.noise.rho = 1.0;
    SimOptions o;
    o.horizon = 0.2;
    o.cells = 64;
    o.gaussian_dt = 1e-2;
    double sum = 0.0, sum2 = 0.0;
    const int n = 400;
    for (int r = 0; r < n; ++r) {
        const double v = solve_event_driven(c, o, 4, r).snapshots.back().values[32];
        sum += v;
        sum2 += v * v;
    }
    const double mean = sum / n, se = std::sqrt((sum2 / n - mean * mean) / n);
    EXPECT_GT(se, 0.0);
    EXPECT_LT(std::abs(mean), 4.0 * se);
}

TEST(EventDriven, RejectsUnsupportedSetups) {
    auto c = pam_model(1.0, 1.0, 1.0, unit_poisson(true));
    SimOptions o;
    c.d = 3;
    EXPECT_THROW(solve_event_driven(c, o, 1, 0), ConfigError);
    c.d = 2;
    c.noise.rho = 1.0;
    EXPECT_THROW(solve_event_driven(c, o, 1, 0), ConfigError);
    c.noise.rho = 0.0;
    o.cells = 16;
    EXPECT_NO_THROW(solve_event_driven(c, o, 1, 0));
    o.snapshots = {2.0};
    EXPECT_THROW(solve_event_driven(c, o, 1, 0), ConfigError);
}

TEST(EventDriven, NonFiniteFieldRaisesFault) {
    auto c = pam_model(1.0, 1.0, 1.0, unit_poisson(false, 1e306, 5.0));
    SimOptions o;
    o.horizon = 2.0;
    EXPECT_THROW(solve_event_driven(c, o, 1, 0), SimulationFault);
}

TEST(FiniteDifference, StabilityIsEnforced) {
    auto c = pam_model(1.0, 1.0, 1.0, unit_poisson(true));
    SimOptions o;
    o.horizon = 0.1;
    o.cells = 64;
    const Grid g = make_grid(c, o);
    const double limit = g.dx() * g.dx() / (2.0 * c.kappa);
    EXPECT_THROW(solve_finite_difference(c, o, 1.5 * limit, 1, 0), ConfigError);
    EXPECT_NO_THROW(solve_finite_difference(c, o, o.horizon / std::ceil(o.horizon / limit), 1, 0));
}

TEST(FiniteDifference, AgreesWithEventDrivenOnSharedRealization) {
    auto c = pam_model(1.0, 1.0, 0.0, unit_poisson(false, 0.3, 0.5));
    c.f = InitialSpec::exponential_decay(1.0, 1.0);
    SimOptions o;
    o.horizon = 1.0;
    o.cells = 128;
    o.symbol = HeatSymbol::lattice;
    const Grid g = make_grid(c, o);
    const auto ev = solve_event_driven(c, o, 21, 0).snapshots.back().values;
    std::vector<double> errors;
    for (int refine : {1, 4}) {
        const double dt0 = g.dx() * g.dx() / (2.0 * c.kappa) / refine;
        const double dt = o.horizon / std::ceil(o.horizon / dt0);
        const auto fd = solve_finite_difference(c, o, dt, 21, 0).snapshots.back().values;
        double l1 = 0.0, norm = 0.0;
        for (std::size_t i = 0; i < fd.size(); ++i) {
            l1 += std::abs(fd[i] - ev[i]);
            norm += std::abs(ev[i]);
        }
        errors.push_back(l1 / norm);
    }
    EXPECT_LT(errors.back(), 1e-2);
    EXPECT_LT(errors.back(), 0.5 * errors.front());
}

TEST(Picard, IteratesConvergeToEventDrivenSolution) {
    auto c = pam_model(1.0, 1.0, 1.0, unit_poisson(true, 0.5, 2.0));
    SimOptions o;
    o.horizon = 1.0;
    o.cells = 128;
    const auto pic = picard_reference(c, o, 12, 8, 1, 1e-3);
    ASSERT_EQ(pic.iterates.size(), 13u);
    const auto& d = pic.sup_differences;
    for (std::size_t n = 4; n < d.size(); ++n) EXPECT_LT(d[n], d[n - 1] + 1e-15);
    EXPECT_LT(d.back(), 1e-3 * d.front());
    const auto ev = solve_event_driven(c, o, 8, 1).snapshots.back().values;
    EXPECT_LT(max_abs_diff(pic.iterates.back().values, ev), 1e-4 * max_abs(ev));
}

TEST(Comparison, OrderedInitialDataStayOrdered) {
    auto c = pam_model(1.0, 1.0, 2.0, unit_poisson(false, 0.5, 2.0));
    c.noise.nonnegative = true;
    SimOptions o;
    o.horizon = 1.0;
    o.cells = 128;
    for (std::uint32_t r = 0; r < 10; ++r) {
        const auto res = comparison_run(c, InitialSpec::constant(1.0), o, 31, r);
        EXPECT_EQ(res.violations, 0u);
        EXPECT_GT(res.checks, 1u);
        EXPECT_GT(res.min_gap, 0.0);
    }
}

TEST(Comparison, RejectsBrokenHypotheses) {
    auto c = pam_model(1.0, 1.0, 2.0, unit_poisson(false));
    SimOptions o;
    EXPECT_THROW(comparison_run(c, InitialSpec::constant(1.0), o, 1, 0), ConfigError);
    c.noise.nonnegative = true;
    EXPECT_THROW(comparison_run(c, InitialSpec::constant(3.0), o, 1, 0), ConfigError);
    c.sigma = SigmaSpec::pam(-1.0);
    EXPECT_THROW(comparison_run(c, InitialSpec::constant(1.0), o, 1, 0), ConfigError);
}

TEST(ReplicaFile, RoundTrip) {
    auto c = pam_model(1.0, 1.0, 1.0, unit_poisson(true));
    SimOptions o;
    o.horizon = 1.0;
    o.snapshots = {0.5, 1.0};
    o.cells = 32;
    const auto tr = solve_event_driven(c, o, 99, 4);
    const auto path = std::filesystem::temp_directory_path() / "levy_she_replica_test.bin";
    ReplicaHeader h{"abc123", 99, 4, tr.snapshots.front().grid};
    write_replica_file(path, h, tr.snapshots);
    const auto [rh, snaps] = read_replica_file(path);
    EXPECT_EQ(rh.config_hash, "abc123");
    EXPECT_EQ(rh.seed, 99u);
    EXPECT_EQ(rh.replica, 4u);
    EXPECT_EQ(rh.grid.cells, 32);
    ASSERT_EQ(snaps.size(), 2u);
    for (std::size_t k = 0; k < 2; ++k) {
        EXPECT_EQ(snaps[k].time, tr.snapshots[k].time);
        EXPECT_EQ(snaps[k].values, tr.snapshots[k].values);
    }
    {
        std::ofstream bad(path, std::ios::binary | std::ios::trunc);
        bad << "NOTAFILE";
    }
    EXPECT_THROW(read_replica_file(path), std::runtime_error);
    std::filesystem::remove(path);
}
