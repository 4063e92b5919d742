#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/poisson.hpp>
#include <gtest/gtest.h>

#include "levy_she/noise.hpp"
#include "levy_she/quadrature.hpp"

using namespace levy_she;

namespace {

LevyNoiseSpec unit_poisson(bool compensate) {
    LevyNoiseSpec s;
    s.atoms = {{1.0, 1.0}};
    s.compensate = compensate;
    return s;
}

JumpFamily family(FamilyKind kind, double nu, double theta, double alpha = 0.0, double cutoff = 1.0) {
    JumpFamily f;
    f.kind = kind;
    f.intensity = nu;
    f.theta = theta;
    f.alpha = alpha;
    f.cutoff = cutoff;
    return f;
}

// Density of lambda on (0, inf) for one-sided families.
double family_density(const JumpFamily& f, double z) {
    switch (f.kind) {
        case FamilyKind::exponential: return f.intensity * f.theta * std::exp(-f.theta * z);
        case FamilyKind::pareto: return z > f.cutoff ? f.intensity * f.alpha * std::pow(f.cutoff, f.alpha) * std::pow(z, -f.alpha - 1.0) : 0.0;
        case FamilyKind::tempered_stable: return f.intensity * std::pow(z, -1.0 - f.alpha) * std::exp(-f.theta * z);
        default: return 0.0;
    }
}

double tail_quadrature(const JumpFamily& f, double delta, double power) {
    if (f.kind == FamilyKind::pareto) delta = std::max(delta, f.cutoff);
    return quad::half_line([&](double z) { return z > 0.0 ? std::pow(z, power) * family_density(f, z) : 0.0; }, delta, 1e-11);
}

}  // namespace

TEST(Philox, KnownAnswerVectors) {
    auto zero = Philox4x32::encrypt({0, 0, 0, 0}, {0, 0});
    EXPECT_EQ(zero, (Philox4x32::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
    auto ones = Philox4x32::encrypt({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
    EXPECT_EQ(ones, (Philox4x32::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
    auto pi = Philox4x32::encrypt({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
    EXPECT_EQ(pi, (Philox4x32::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(CounterStream, DependsOnlyOnKey) {
    CounterStream a(42, 7, 3), b(42, 7, 3), c(42, 8, 3), e(42, 7, 3, StreamPurpose::bootstrap);
    std::vector<std::uint32_t> xa, xb, xc, xe;
    for (int i = 0; i < 50; ++i) {
        xa.push_back(a());
        xb.push_back(b());
        xc.push_back(c());
        xe.push_back(e());
    }
    EXPECT_EQ(xa, xb);
    EXPECT_NE(xa, xc);
    EXPECT_NE(xa, xe);
    CounterStream u(1, 0, 0);
    double sum = 0.0;
    for (int i = 0; i < 100000; ++i) {
        double v = u.uniform();
        ASSERT_GT(v, 0.0);
        ASSERT_LT(v, 1.0);
        sum += v;
    }
    EXPECT_NEAR(sum / 1e5, 0.5, 3.0 * std::sqrt(1.0 / 12.0 / 1e5));
}

TEST(MLambda, AtomsAndFamilies) {
    auto s = unit_poisson(true);
    for (double p : {1.0, 1.5, 2.0, 3.7}) EXPECT_DOUBLE_EQ(*m_lambda(s, p), 1.0);
    LevyNoiseSpec two;
    two.atoms = {{0.5, 2.0}, {2.0, 1.0}};
    EXPECT_NEAR(*m_lambda(two, 2.0), std::sqrt(4.5), 1e-15);
    LevyNoiseSpec par;
    par.families = {family(FamilyKind::pareto, 1.0, 1.0, 2.5, 1.0)};
    EXPECT_FALSE(m_lambda(par, 3.0).has_value());
    EXPECT_TRUE(m_lambda(par, 2.0).has_value());
    EXPECT_THROW(m_lambda_or_throw(par, 3.0), DivergenceError);
    EXPECT_THROW(m_lambda(s, 0.5), DomainError);
}

TEST(MLambda, FamilyMomentsMatchQuadrature) {
    std::vector<JumpFamily> fams = {family(FamilyKind::exponential, 2.0, 1.5), family(FamilyKind::pareto, 0.7, 1.0, 3.5, 0.4),
                                    family(FamilyKind::tempered_stable, 1.2, 2.0, 0.6)};
    for (const auto& f : fams)
        for (double p : {1.0, 1.7, 2.5})
            for (double delta : {0.05, 0.5, 2.0}) {
                double expected = tail_quadrature(f, delta, p);
                EXPECT_NEAR(detail::family_pmoment_above(f, p, delta), expected, 1e-8 * expected) << to_string(f.kind);
                double mass = tail_quadrature(f, delta, 0.0);
                EXPECT_NEAR(detail::family_mass_above(f, delta), mass, 1e-8 * mass) << to_string(f.kind);
                double first = tail_quadrature(f, delta, 1.0);
                EXPECT_NEAR(detail::family_first_above(f, delta), first, 1e-8 * first) << to_string(f.kind);
            }
    auto ts0 = family(FamilyKind::tempered_stable, 1.0, 1.0, 0.0);
    double mass = tail_quadrature(ts0, 0.3, 0.0);
    EXPECT_NEAR(detail::family_mass_above(ts0, 0.3), mass, 1e-8 * mass);
    auto ts15 = family(FamilyKind::tempered_stable, 1.0, 1.0, 1.5);
    mass = tail_quadrature(ts15, 0.3, 0.0);
    EXPECT_NEAR(detail::family_mass_above(ts15, 0.3), mass, 1e-8 * mass);
}

TEST(MLambda, AdditiveOverDisjointAtoms) {
    LevyNoiseSpec a, b, ab;
    a.atoms = {{0.3, 1.5}, {-2.0, 0.2}};
    b.atoms = {{1.1, 0.7}};
    ab.atoms = {a.atoms[0], a.atoms[1], b.atoms[0]};
    for (double p : {1.0, 2.0, 2.9}) {
        double lhs = std::pow(*m_lambda(ab, p), p);
        double rhs = std::pow(*m_lambda(a, p), p) + std::pow(*m_lambda(b, p), p);
        EXPECT_NEAR(lhs, rhs, 1e-13 * rhs);
    }
}

TEST(Truncate, DriftBookkeeping) {
    auto s = unit_poisson(true);
    auto t = truncate(s, 0.5, true);
    EXPECT_DOUBLE_EQ(drift_adjustment(t), -1.0);
    EXPECT_DOUBLE_EQ(retained_rate(t), 1.0);
    auto gone = truncate(s, 2.0, true);
    EXPECT_EQ(retained_rate(gone), 0.0);
    EXPECT_EQ(drift_adjustment(gone), 0.0);

    LevyNoiseSpec e;
    e.families = {family(FamilyKind::exponential, 3.0, 2.0)};
    auto te = truncate(e, 0.4, true);
    double expected = tail_quadrature(e.families[0], 0.4, 1.0);
    EXPECT_NEAR(-drift_adjustment(te), expected, 1e-9 * expected);
    EXPECT_EQ(drift_adjustment(truncate(e, 0.4, false)), 0.0);
    EXPECT_THROW(truncate(e, 0.0, true), DomainError);
}

TEST(Truncate, ComposesIdempotently) {
    LevyNoiseSpec s;
    s.b = 0.3;
    s.atoms = {{0.2, 1.0}, {0.9, 2.0}, {-1.5, 0.5}};
    s.families = {family(FamilyKind::tempered_stable, 1.0, 1.0, 0.5)};
    s.delta_sim = 0.01;
    for (auto [d1, d2] : {std::pair{0.1, 0.5}, std::pair{0.5, 1.0}, std::pair{0.3, 0.3}}) {
        auto twice = truncate(truncate(s, d1, true), d2, true);
        auto once = truncate(s, d2, true);
        EXPECT_EQ(twice.delta_sim, once.delta_sim);
        EXPECT_DOUBLE_EQ(effective_drift(twice), effective_drift(once));
        EXPECT_DOUBLE_EQ(retained_rate(twice), retained_rate(once));
    }
}

TEST(Validate, FieldPaths) {
    LevyNoiseSpec s;
    s.atoms = {{1.0, -2.0}};
    try {
        validate(s);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.path(), "noise.jumps[0].rate");
    }
    LevyNoiseSpec ts;
    ts.families = {family(FamilyKind::tempered_stable, 1.0, 1.0, 0.5)};
    EXPECT_THROW(validate(ts), ConfigError);
    ts.delta_sim = 0.1;
    EXPECT_NO_THROW(validate(ts));
    LevyNoiseSpec neg;
    neg.nonnegative = true;
    neg.atoms = {{-1.0, 1.0}};
    EXPECT_THROW(validate(neg), ConfigError);
    neg.atoms = {{1.0, 1.0}};
    neg.rho = 0.5;
    EXPECT_THROW(validate(neg), ConfigError);
}

TEST(SampleBox, EmptyForZeroNoise) {
    LevyNoiseSpec s;
    s.compensate = false;
    CounterStream rng(1, 0, 0);
    SpaceTimeBox box;
    auto r = sample_box(s, box, rng);
    EXPECT_TRUE(r.jumps.empty());
    EXPECT_TRUE(r.gaussian.empty());
    EXPECT_EQ(r.drift_per_cell, 0.0);
}

TEST(SampleBox, CountMeanAndPositions) {
    auto s = unit_poisson(true);
    s.atoms[0].rate = 2.5;
    SpaceTimeBox box{0.5, 1.3, 2, {-1.0, 0.0}, {1.0, 0.5}, 4};
    const double mean = 2.5 * box.volume();
    const int n = 100000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        CounterStream rng(9, static_cast<std::uint32_t>(i), 0);
        auto r = sample_box(s, box, rng);
        sum += static_cast<double>(r.jumps.size());
        for (const auto& e : r.jumps) {
            ASSERT_GE(e.t, box.t0);
            ASSERT_LT(e.t, box.t1);
            ASSERT_GE(e.x[0], -1.0);
            ASSERT_LT(e.x[1], 0.5);
        }
        if (i == 0) {
            EXPECT_NEAR(r.drift_per_cell, -2.5 * box.volume() / 16.0, 1e-15);
        }
    }
    EXPECT_NEAR(sum / n, mean, 3.0 * std::sqrt(mean / n));
}

TEST(SampleBox, DisjointBoxesUncorrelated) {
    auto s = unit_poisson(false);
    SpaceTimeBox b1{0.0, 1.0, 1, {0.0}, {2.0}, 1}, b2{1.0, 2.0, 1, {0.0}, {2.0}, 1};
    const int n = 50000;
    double s1 = 0, s2 = 0, s12 = 0;
    for (int i = 0; i < n; ++i) {
        CounterStream r1(5, static_cast<std::uint32_t>(i), 0), r2(5, static_cast<std::uint32_t>(i), 1);
        double c1 = static_cast<double>(sample_box(s, b1, r1).jumps.size());
        double c2 = static_cast<double>(sample_box(s, b2, r2).jumps.size());
        s1 += c1;
        s2 += c2;
        s12 += c1 * c2;
    }
    double cov = s12 / n - (s1 / n) * (s2 / n);
    // Var(c1 c2) = E[c1^2] E[c2^2] - 4 = 36 - 4 for Poisson(2) counts.
    EXPECT_NEAR(cov, 0.0, 3.0 * std::sqrt(32.0 / n));
}

TEST(SampleBox, PartitionMatchesSingleDrawInDistribution) {
    auto s = unit_poisson(false);
    s.atoms[0].rate = 1.5;
    const double mean = 1.5 * 2.0;
    const int n = 10000;
    const int bins = 9;  // 0..7 and >= 8
    std::vector<double> observed(bins, 0.0);
    for (int i = 0; i < n; ++i) {
        long total = 0;
        for (int part = 0; part < 4; ++part) {
            SpaceTimeBox piece{0.5 * part, 0.5 * (part + 1), 1, {0.0}, {1.0}, 1};
            CounterStream rng(77, static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(part));
            total += static_cast<long>(sample_box(s, piece, rng).jumps.size());
        }
        observed[std::min<long>(total, bins - 1)] += 1.0;
    }
    boost::math::poisson_distribution<double> law(mean);
    double chi2 = 0.0;
    for (int k = 0; k < bins; ++k) {
        double pk = k < bins - 1 ? boost::math::pdf(law, k) : boost::math::cdf(boost::math::complement(law, bins - 2));
        double expected = n * pk;
        chi2 += (observed[k] - expected) * (observed[k] - expected) / expected;
    }
    double critical = boost::math::quantile(boost::math::complement(boost::math::chi_squared_distribution<double>(bins - 1), 0.01));
    EXPECT_LT(chi2, critical);
}

TEST(SampleBox, GaussianVarianceAndSizes) {
    LevyNoiseSpec s;
    s.rho = 0.7;
    s.families = {family(FamilyKind::tempered_stable, 2.0, 1.0, 0.5)};
    s.delta_sim = 0.2;
    SpaceTimeBox box{0.0, 0.5, 1, {0.0}, {4.0}, 8};
    double sq = 0.0, zsum = 0.0;
    long cells = 0, jumps = 0;
    for (int i = 0; i < 4000; ++i) {
        CounterStream rng(3, static_cast<std::uint32_t>(i), 0);
        auto r = sample_box(s, box, rng);
        for (double g : r.gaussian) sq += g * g;
        cells += static_cast<long>(r.gaussian.size());
        for (const auto& e : r.jumps) {
            ASSERT_GT(e.z, 0.2);
            zsum += e.z;
        }
        jumps += static_cast<long>(r.jumps.size());
    }
    const double var = 0.49 * 0.5 * 0.5;
    EXPECT_NEAR(sq / cells, var, 3.0 * var * std::sqrt(2.0 / cells));
    const auto& f = s.families[0];
    double cond_mean = detail::family_first_above(f, 0.2) / detail::family_mass_above(f, 0.2);
    double cond_second = detail::family_pmoment_above(f, 2.0, 0.2) / detail::family_mass_above(f, 0.2);
    double sd = std::sqrt((cond_second - cond_mean * cond_mean) / jumps);
    EXPECT_NEAR(zsum / jumps, cond_mean, 3.5 * sd);
}
