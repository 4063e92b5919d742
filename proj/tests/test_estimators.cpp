#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <boost/math/special_functions/erf.hpp>
#include <gtest/gtest.h>

#include "levy_she/analytic_bounds.hpp"
#include "levy_she/estimators.hpp"
#include "levy_she/rng.hpp"

using namespace levy_she;

namespace {

std::vector<double> pareto_samples(double alpha, std::size_t n, std::uint32_t box) {
    CounterStream rng(2024, 0, box, StreamPurpose::test);
    std::vector<double> x(n);
    for (double& v : x) v = std::pow(rng.uniform(), -1.0 / alpha);
    return x;
}

std::vector<double> exponential_samples(std::size_t n) {
    CounterStream rng(2024, 1, 0, StreamPurpose::test);
    std::vector<double> x(n);
    for (double& v : x) v = -std::log(rng.uniform());
    return x;
}

ModelConfig pam_delta_one(double kappa) {
    ModelConfig c;
    c.kappa = kappa;
    c.sigma = SigmaSpec::pam(1.0);
    c.f = InitialSpec::constant(1.0);
    c.noise.atoms = {{1.0, 1.0}};
    c.noise.compensate = true;
    return c;
}

PointEnsemble run_ensemble(const ModelConfig& c, const SimOptions& o, int replicas, std::uint64_t seed) {
    PointEnsemble e;
    const auto pts = reference_points(make_grid(c, o));
    for (int r = 0; r < replicas; ++r) append_replica(e, solve_event_driven(c, o, seed, r), pts);
    return e;
}

// Closed form of M(t) = 1 + int_0^t c (t - s)^{-1/2} M(s) ds: e^{z^2} erfc(-z), z = c sqrt(pi t).
double mittag_leffler_half(double c, double t) {
    const double z = c * std::sqrt(std::numbers::pi * t);
    return std::exp(z * z) * boost::math::erfc(-z);
}

}  // namespace

TEST(EstimateMoments, DeterministicEnsembleIsExact) {
    ModelConfig c = pam_delta_one(1.0);
    c.noise = LevyNoiseSpec{};
    c.noise.b = 0.3;
    c.f = InitialSpec::constant(2.0);
    SimOptions o;
    o.horizon = 1.0;
    o.snapshots = {0.25, 0.5, 1.0};
    o.cells = 32;
    const auto e = run_ensemble(c, o, 4, 1);
    const auto s = estimate_moments(e, {1.0, 2.0, 2.5});
    for (std::size_t t = 0; t < s.times.size(); ++t)
        for (std::size_t k = 0; k < s.orders.size(); ++k) {
            const double y0 = 2.0 * std::exp(0.3 * s.times[t]);
            EXPECT_NEAR(s.estimate(t, k), std::pow(y0, s.orders[k]), 1e-12 * std::pow(y0, s.orders[k]));
            EXPECT_LT(s.cells[t][k].stderr_, 1e-12);
            EXPECT_FALSE(s.cells[t][k].unstable);
        }
}

TEST(EstimateMoments, MeanOfCompensatedPamCoversOne) {
    SimOptions o;
    o.horizon = 1.0;
    o.snapshots = {0.5, 1.0};
    o.cells = 64;
    const auto s = estimate_moments(run_ensemble(pam_delta_one(1.0), o, 1500, 3), {1.0});
    for (std::size_t t = 0; t < s.times.size(); ++t) {
        const auto& cell = s.cells[t][0];
        EXPECT_LT(std::abs(cell.estimate - 1.0), 1.96 * 1.5 * cell.stderr_) << "t=" << s.times[t];
        EXPECT_GT(cell.stderr_, 0.0);
    }
}

TEST(EstimateMoments, NormsIncreaseWithOrder) {
    SimOptions o;
    o.horizon = 1.0;
    o.snapshots = {0.5, 1.0};
    o.cells = 64;
    const std::vector<double> orders = {1.0, 1.5, 2.0, 2.5};
    const auto s = estimate_moments(run_ensemble(pam_delta_one(1.0), o, 300, 4), orders);
    for (std::size_t t = 0; t < s.times.size(); ++t)
        for (std::size_t k = 1; k < orders.size(); ++k)
            EXPECT_LE(std::pow(s.estimate(t, k - 1), 1.0 / orders[k - 1]), std::pow(s.estimate(t, k), 1.0 / orders[k]) * (1.0 + 1e-12));
}

TEST(EstimateMoments, FlagsDivergentOrders) {
    // Samples with tail index 2.5: the third moment does not exist.
    PointEnsemble e;
    e.times = {1.0};
    e.points = 1;
    for (double v : pareto_samples(2.5, 40000, 5)) e.data.push_back({v});
    MomentOptions opt;
    opt.resamples = 200;
    const auto s = estimate_moments(e, {1.0, 3.0}, opt);
    EXPECT_FALSE(s.cells[0][0].divergent_order);
    EXPECT_FALSE(s.cells[0][0].unstable);
    EXPECT_TRUE(s.cells[0][1].divergent_order);
    EXPECT_TRUE(s.cells[0][1].unstable);
}

TEST(EstimateMoments, RejectsEmptyEnsemble) {
    PointEnsemble e;
    EXPECT_THROW(estimate_moments(e, {1.0}), DomainError);
}

TEST(LyapunovFit, ExponentialSeries) {
    std::vector<double> t, v;
    for (int k = 0; k <= 10; ++k) {
        t.push_back(0.5 * k);
        v.push_back(std::exp(3.0 * t.back()));
    }
    const auto f = lyapunov_fit(deterministic_series(t, 2.0, v), 2.0);
    EXPECT_NEAR(f.gamma, 3.0, 1e-9);
    EXPECT_NEAR(f.t0, 1.0, 1e-12);
}

TEST(LyapunovFit, ZeroNoiseSlopeVanishes) {
    ModelConfig c = pam_delta_one(1.0);
    c.noise = LevyNoiseSpec{};
    SimOptions o;
    o.horizon = 2.0;
    for (int k = 1; k <= 8; ++k) o.snapshots.push_back(0.25 * k);
    o.cells = 32;
    const auto s = estimate_moments(run_ensemble(c, o, 3, 1), {2.0});
    EXPECT_NEAR(lyapunov_fit(s, 2.0).gamma, 0.0, 1e-10);
}

TEST(LyapunovFit, SecondMomentRateOfPam) {
    // Series from the d=1 PAM second moment with sigma0 = kappa = v = 1; late slope 1/4.
    const auto oracle = second_moment_oracle(1.0, 1.0, 1.0, 40.0, 4000);
    std::vector<double> t, v;
    for (int k = 1; k <= 40; ++k) {
        t.push_back(k);
        v.push_back(oracle(k));
    }
    const auto f = lyapunov_fit(deterministic_series(t, 2.0, v), 2.0);
    EXPECT_NEAR(f.gamma, 0.25, 0.2 * 0.25);
}

TEST(LyapunovFit, BootstrapIntervalAndErrors) {
    SimOptions o;
    o.horizon = 1.0;
    for (int k = 1; k <= 6; ++k) o.snapshots.push_back(k / 6.0);
    o.cells = 64;
    const auto s = estimate_moments(run_ensemble(pam_delta_one(1.0), o, 200, 6), {1.0, 2.0});
    const auto f = lyapunov_fit(s, 2.0, {s.times.front(), 1.0});
    EXPECT_LE(f.ci_low, f.gamma);
    EXPECT_GE(f.ci_high, f.gamma);
    EXPECT_LT(f.ci_low, f.ci_high);
    EXPECT_THROW(lyapunov_fit(s, 2.0, {0.5, 1.0}), DomainError);  // 4 points
    EXPECT_THROW(lyapunov_fit(s, 3.0), DomainError);
    std::vector<double> t = {1, 2, 3, 4, 5};
    EXPECT_THROW(lyapunov_fit(deterministic_series(t, 1.0, {1, 2, 0, 4, 5}), 1.0, {1.0, 5.0}), DomainError);
}

TEST(HillTailIndex, ParetoSamples) {
    const auto x = pareto_samples(3.0, 100000, 1);
    const auto h = hill_tail_index(x, 500);
    EXPECT_GE(h.alpha, 2.7);
    EXPECT_LE(h.alpha, 3.3);
    EXPECT_LT(h.ci_low, h.alpha);
    EXPECT_GT(h.ci_high, h.alpha);
    EXPECT_EQ(hill_tail_index(x).k, default_hill_k(100000));
}

TEST(HillTailIndex, ExponentialSamplesDriftUpward) {
    // No power tail: the estimate keeps rising as the threshold moves out, instead of settling.
    const auto x = exponential_samples(100000);
    const auto plot = hill_plot(x, {20000, 5000, 1000, 200, 50});
    for (std::size_t i = 1; i < plot.size(); ++i) EXPECT_GT(plot[i].alpha, plot[i - 1].alpha);
    double previous = 0.0;
    for (std::size_t n : {10000u, 30000u, 100000u}) {
        const double a = hill_tail_index(std::vector<double>(x.begin(), x.begin() + n)).alpha;
        EXPECT_GT(a, previous);
        previous = a;
    }
}

TEST(HillTailIndex, ScaleInvariant) {
    auto x = pareto_samples(2.0, 20000, 2);
    const double a = hill_tail_index(x, 300).alpha;
    for (double& v : x) v *= 7.0;
    EXPECT_NEAR(hill_tail_index(x, 300).alpha, a, 1e-12);
}

TEST(HillTailIndex, Preconditions) {
    auto x = pareto_samples(3.0, 12000, 3);
    EXPECT_THROW(hill_tail_index(x, 10), DomainError);
    x.resize(9000);
    EXPECT_THROW(hill_tail_index(x, 100), DomainError);
    // Nonpositive samples are dropped before counting.
    auto y = pareto_samples(3.0, 10000, 4);
    y.push_back(-1.0);
    y.push_back(0.0);
    EXPECT_EQ(hill_tail_index(y, 100).n, 10000u);
}

TEST(FrontScan, ZeroNoiseDecaysInEveryCone) {
    ModelConfig c = pam_delta_one(1.0);
    c.noise = LevyNoiseSpec{};
    c.f.kind = InitialKind::indicator;
    SimOptions o;
    o.horizon = 4.0;
    for (int k = 1; k <= 8; ++k) o.snapshots.push_back(0.5 * k);
    FieldMoments m;
    m.p = 2.0;
    m.add(solve_event_driven(c, o, 1, 0));
    const auto fs = front_scan(m, {0.1, 0.5, 1.0, 2.0, 2.9});
    for (double g : fs.growth) EXPECT_LT(g, 0.0);
    EXPECT_FALSE(fs.lower.has_value());
    EXPECT_THROW(front_scan(m, {4.0}), DomainError);
}

TEST(FrontScan, PamBracketIsFiniteAndMonotone) {
    ModelConfig c = pam_delta_one(1.0);
    c.f.kind = InitialKind::indicator;
    c.f.lower = {-2.0, -2.0, -2.0};
    c.f.upper = {2.0, 2.0, 2.0};
    SimOptions o;
    o.horizon = 6.0;
    o.cells = 256;
    for (int k = 1; k <= 8; ++k) o.snapshots.push_back(0.75 * k);
    FieldMoments m;
    m.p = 2.0;
    for (int r = 0; r < 200; ++r) m.add(solve_event_driven(c, o, 12, r));
    std::vector<double> alphas;
    for (double a = 0.1; a < 2.35; a += 0.2) alphas.push_back(a);
    const auto fs = front_scan(m, alphas);
    for (std::size_t k = 1; k < fs.growth.size(); ++k) EXPECT_LE(fs.growth[k], fs.growth[k - 1]);
    ASSERT_TRUE(fs.lower.has_value());
    ASSERT_TRUE(fs.upper.has_value());
    EXPECT_LT(*fs.lower, *fs.upper);

    // Cones beyond the analytic upper front see decay.
    const auto bounds = front_rate_bounds(c.noise, {1.0, 1}, 2.0, 1.0, ConstantsMode::normalized());
    for (std::size_t k = 0; k < fs.alphas.size(); ++k)
        if (fs.alphas[k] > bounds.upper) {
            EXPECT_LT(fs.growth[k], 0.0);
        }
}

TEST(SecondMomentOracle, NoNoiseIsConstant) {
    const auto o = second_moment_oracle(1.0, 0.0, 1.0, 5.0, 100);
    for (double t : {0.0, 1.0, 5.0}) EXPECT_DOUBLE_EQ(o(t), 1.0);
}

TEST(SecondMomentOracle, MatchesClosedFormAndSlope) {
    for (double kappa : {0.5, 1.0, 2.0}) {
        const double v = 1.3, sigma0 = 0.9;
        const double target = v * v * std::pow(sigma0, 4) / (4.0 * kappa);
        const double horizon = 40.0 / target;
        const auto o = second_moment_oracle(kappa, sigma0, v, horizon, 8000);
        EXPECT_DOUBLE_EQ(o.slope_target, target);
        const double c = v * sigma0 * sigma0 / std::sqrt(4.0 * std::numbers::pi * kappa);
        for (double f : {0.1, 0.5, 1.0}) {
            const double exact = mittag_leffler_half(c, f * horizon);
            EXPECT_NEAR(o(f * horizon), exact, 1e-3 * exact) << "kappa=" << kappa << " t=" << f * horizon;
        }
        EXPECT_NEAR(o.late_slope(), target, 0.02 * target);
    }
}

TEST(SecondMomentOracle, NoiseSpecPlumbing) {
    LevyNoiseSpec s;
    s.atoms = {{1.0, 1.0}, {-0.5, 2.0}};
    s.rho = 0.5;
    EXPECT_NEAR(noise_second_moment_density(s), 0.25 + 1.0 + 0.5, 1e-14);
    s.atoms = {{1.0, 1.0}};
    s.compensate = false;
    EXPECT_THROW(second_moment_oracle(s, 1.0, 1.0, 1.0), DomainError);
    LevyNoiseSpec heavy;
    JumpFamily f;
    f.kind = FamilyKind::pareto;
    f.alpha = 1.5;
    heavy.families = {f};
    EXPECT_THROW(second_moment_oracle(heavy, 1.0, 1.0, 1.0), DivergenceError);
}
