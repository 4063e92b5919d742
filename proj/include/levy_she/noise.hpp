#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <boost/math/special_functions/expint.hpp>

#include "errors.hpp"
#include "rng.hpp"
#include "special.hpp"

namespace levy_she {

struct JumpAtom {
    double size = 1.0;
    double rate = 1.0;
};

enum class FamilyKind {
    exponential,            // nu theta e^{-theta z} on z > 0
    two_sided_exponential,  // (nu/2) theta e^{-theta |z|}
    pareto,                 // nu alpha m^alpha z^{-alpha-1} on z > m
    tempered_stable,        // nu z^{-1-alpha} e^{-theta z} on z > 0, infinite activity
};

struct JumpFamily {
    FamilyKind kind = FamilyKind::exponential;
    double intensity = 1.0;  // nu
    double theta = 1.0;      // exponential rate (exponential, two-sided, tempered stable)
    double alpha = 3.0;      // tail / activity index (pareto, tempered stable)
    double cutoff = 1.0;     // lower cutoff m (pareto)
};

// Lambda = b dt dx + rho W + int z (mu - nu) restricted to |z| > delta_sim. With
// compensate = false the jumps enter raw and b is the drift next to them.
struct LevyNoiseSpec {
    double b = 0.0;
    double rho = 0.0;
    std::vector<JumpAtom> atoms;
    std::vector<JumpFamily> families;
    double delta_sim = 0.0;
    bool compensate = true;
    bool nonnegative = false;
};

inline const char* to_string(FamilyKind k) {
    switch (k) {
        case FamilyKind::exponential: return "exponential";
        case FamilyKind::two_sided_exponential: return "two_sided_exponential";
        case FamilyKind::pareto: return "pareto";
        case FamilyKind::tempered_stable: return "tempered_stable";
    }
    return "?";
}

namespace detail {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Gamma(s, x) for any real s and x > 0.
inline double upper_gamma_any(double s, double x) {
    if (s > 0.0) return incomplete_gamma_upper(s, x);
    int n = static_cast<int>(std::ceil(-s));
    double base_s = s + n;
    double value = base_s > 0.0 ? incomplete_gamma_upper(base_s, x) : boost::math::expint(1, x);
    // Gamma(s, x) = (Gamma(s+1, x) - x^s e^{-x}) / s, stepping down from base_s.
    for (double cur = base_s - 1.0; cur >= s - 1e-12; cur -= 1.0) value = (value - std::pow(x, cur) * std::exp(-x)) / cur;
    return value;
}

inline bool infinite_activity(const JumpFamily& f) { return f.kind == FamilyKind::tempered_stable; }

// lambda_f(|z| > delta)
inline double family_mass_above(const JumpFamily& f, double delta) {
    switch (f.kind) {
        case FamilyKind::exponential:
        case FamilyKind::two_sided_exponential: return f.intensity * std::exp(-f.theta * delta);
        case FamilyKind::pareto: return f.intensity * std::pow(f.cutoff / std::max(delta, f.cutoff), f.alpha);
        case FamilyKind::tempered_stable:
            if (!(delta > 0.0)) return kInf;
            return f.intensity * std::pow(f.theta, f.alpha) * upper_gamma_any(-f.alpha, f.theta * delta);
    }
    return 0.0;
}

// int z 1{|z| > delta} lambda_f(dz)
inline double family_first_above(const JumpFamily& f, double delta) {
    switch (f.kind) {
        case FamilyKind::exponential: return f.intensity * std::exp(-f.theta * delta) * (delta + 1.0 / f.theta);
        case FamilyKind::two_sided_exponential: return 0.0;
        case FamilyKind::pareto: {
            if (!(f.alpha > 1.0)) return kInf;
            double m = std::max(delta, f.cutoff);
            return f.intensity * f.alpha * std::pow(f.cutoff, f.alpha) * std::pow(m, 1.0 - f.alpha) / (f.alpha - 1.0);
        }
        case FamilyKind::tempered_stable:
            if (!(delta > 0.0) && !(f.alpha < 1.0)) return kInf;
            if (!(delta > 0.0)) return f.intensity * std::pow(f.theta, f.alpha - 1.0) * std::tgamma(1.0 - f.alpha);
            return f.intensity * std::pow(f.theta, f.alpha - 1.0) * upper_gamma_any(1.0 - f.alpha, f.theta * delta);
    }
    return 0.0;
}

// int |z|^p 1{|z| > delta} lambda_f(dz); +inf when divergent.
inline double family_pmoment_above(const JumpFamily& f, double p, double delta) {
    switch (f.kind) {
        case FamilyKind::exponential:
        case FamilyKind::two_sided_exponential:
            return f.intensity * std::pow(f.theta, -p) * incomplete_gamma_upper(p + 1.0, f.theta * delta);
        case FamilyKind::pareto: {
            if (!(p < f.alpha)) return kInf;
            double m = std::max(delta, f.cutoff);
            return f.intensity * f.alpha * std::pow(f.cutoff, f.alpha) * std::pow(m, p - f.alpha) / (f.alpha - p);
        }
        case FamilyKind::tempered_stable:
            if (delta > 0.0) return f.intensity * std::pow(f.theta, f.alpha - p) * upper_gamma_any(p - f.alpha, f.theta * delta);
            if (!(p > f.alpha)) return kInf;
            return f.intensity * std::pow(f.theta, f.alpha - p) * std::tgamma(p - f.alpha);
    }
    return 0.0;
}

// int (1 ^ z^2) lambda_f(dz), analytic finiteness check.
inline bool family_levy_integrable(const JumpFamily& f) {
    switch (f.kind) {
        case FamilyKind::exponential:
        case FamilyKind::two_sided_exponential:
        case FamilyKind::pareto: return true;
        case FamilyKind::tempered_stable: return f.alpha >= 0.0 && f.alpha < 2.0;
    }
    return false;
}

inline double sample_family_above(const JumpFamily& f, double delta, CounterStream& rng) {
    switch (f.kind) {
        case FamilyKind::exponential: return delta + rng.exponential(f.theta);
        case FamilyKind::two_sided_exponential: {
            double mag = delta + rng.exponential(f.theta);
            return rng.uniform() < 0.5 ? -mag : mag;
        }
        case FamilyKind::pareto: return std::max(delta, f.cutoff) * std::pow(rng.uniform(), -1.0 / f.alpha);
        case FamilyKind::tempered_stable:
            for (;;) {
                if (f.alpha > 0.0) {
                    double z = delta * std::pow(rng.uniform(), -1.0 / f.alpha);
                    if (rng.uniform() < std::exp(-f.theta * (z - delta))) return z;
                } else {
                    double z = delta + rng.exponential(f.theta);
                    if (rng.uniform() < delta / z) return z;
                }
            }
    }
    return 0.0;
}

}  // namespace detail

inline void validate(const LevyNoiseSpec& s, const std::string& path = "noise") {
    if (!std::isfinite(s.b)) throw ConfigError(path + ".b", "must be finite");
    if (!std::isfinite(s.rho)) throw ConfigError(path + ".rho", "must be finite");
    if (!(s.delta_sim >= 0.0) || !std::isfinite(s.delta_sim)) throw ConfigError(path + ".delta_sim", "must be a nonnegative number");
    for (std::size_t i = 0; i < s.atoms.size(); ++i) {
        const auto& a = s.atoms[i];
        std::string at = path + ".jumps[" + std::to_string(i) + "]";
        if (!(a.rate > 0.0) || !std::isfinite(a.rate)) throw ConfigError(at + ".rate", "must be a positive number");
        if (!std::isfinite(a.size) || a.size == 0.0) throw ConfigError(at + ".size", "must be finite and nonzero");
        if (s.nonnegative && !(a.size > 0.0)) throw ConfigError(at + ".size", "nonnegative noise needs positive jump sizes");
    }
    for (std::size_t i = 0; i < s.families.size(); ++i) {
        const auto& f = s.families[i];
        std::string at = path + ".families[" + std::to_string(i) + "]";
        if (!(f.intensity > 0.0) || !std::isfinite(f.intensity)) throw ConfigError(at + ".intensity", "must be a positive number");
        if (f.kind != FamilyKind::pareto && !(f.theta > 0.0)) throw ConfigError(at + ".theta", "must be positive");
        if (f.kind == FamilyKind::pareto) {
            if (!(f.alpha > 0.0)) throw ConfigError(at + ".alpha", "must be positive");
            if (!(f.cutoff > 0.0)) throw ConfigError(at + ".cutoff", "must be positive");
        }
        if (f.kind == FamilyKind::tempered_stable) {
            if (!detail::family_levy_integrable(f)) throw ConfigError(at + ".alpha", "tempered stable index must lie in [0, 2)");
            if (!(s.delta_sim > 0.0)) throw ConfigError(path + ".delta_sim", "infinite-activity family needs delta_sim > 0");
        }
        if (s.nonnegative && f.kind == FamilyKind::two_sided_exponential)
            throw ConfigError(at + ".kind", "nonnegative noise excludes two-sided families");
    }
    if (s.nonnegative && s.rho != 0.0) throw ConfigError(path + ".rho", "nonnegative noise needs rho = 0");
}

// lambda([-delta, delta]^c)
inline double tail_mass(const LevyNoiseSpec& s, double delta) {
    double m = 0.0;
    for (const auto& a : s.atoms)
        if (std::abs(a.size) > delta) m += a.rate;
    for (const auto& f : s.families) m += detail::family_mass_above(f, delta);
    return m;
}

// int z 1{|z| > delta} lambda(dz)
inline double tail_first_moment(const LevyNoiseSpec& s, double delta) {
    double m = 0.0;
    for (const auto& a : s.atoms)
        if (std::abs(a.size) > delta) m += a.rate * a.size;
    for (const auto& f : s.families) m += detail::family_first_above(f, delta);
    return m;
}

// int |z|^p 1{|z| > delta} lambda(dz); +inf when the tail makes it diverge.
inline double tail_pmoment(const LevyNoiseSpec& s, double p, double delta) {
    double m = 0.0;
    for (const auto& a : s.atoms)
        if (std::abs(a.size) > delta) m += a.rate * std::pow(std::abs(a.size), p);
    for (const auto& f : s.families) m += detail::family_pmoment_above(f, p, delta);
    return m;
}

// m_lambda(p) = (int |z|^p lambda(dz))^{1/p}; empty when the integral diverges.
inline std::optional<double> m_lambda(const LevyNoiseSpec& s, double p) {
    if (!(p >= 1.0)) throw DomainError("m_lambda needs p >= 1");
    double v = tail_pmoment(s, p, 0.0);
    if (!std::isfinite(v)) return std::nullopt;
    return std::pow(v, 1.0 / p);
}

inline double m_lambda_or_throw(const LevyNoiseSpec& s, double p) {
    auto m = m_lambda(s, p);
    if (!m) throw DivergenceError("m_lambda(" + std::to_string(p) + ") is infinite for this jump measure");
    return *m;
}

inline bool is_nonnegative(const LevyNoiseSpec& s) {
    if (s.rho != 0.0) return false;
    for (const auto& a : s.atoms)
        if (!(a.size > 0.0)) return false;
    for (const auto& f : s.families)
        if (f.kind == FamilyKind::two_sided_exponential) return false;
    return true;
}

// Rate of simulated jumps per unit space-time volume.
inline double retained_rate(const LevyNoiseSpec& s) { return tail_mass(s, s.delta_sim); }

// Drift change produced by compensating the retained jumps.
inline double drift_adjustment(const LevyNoiseSpec& s) {
    if (!s.compensate) return 0.0;
    double m1 = tail_first_moment(s, s.delta_sim);
    if (!std::isfinite(m1)) throw ConfigError("noise", "compensation needs a finite first moment above delta_sim");
    return -m1;
}

// Drift density seen by the raw retained jumps.
inline double effective_drift(const LevyNoiseSpec& s) { return s.b + drift_adjustment(s); }

// Drops jumps with |z| <= delta. Thresholds compose as a maximum, so the drift
// bookkeeping is always relative to the untruncated measure.
inline LevyNoiseSpec truncate(const LevyNoiseSpec& s, double delta, bool compensate) {
    if (!(delta > 0.0)) throw DomainError("truncation threshold must be positive");
    LevyNoiseSpec out = s;
    out.delta_sim = std::max(s.delta_sim, delta);
    out.compensate = compensate;
    return out;
}

struct SpaceTimeBox {
    double t0 = 0.0;
    double t1 = 1.0;
    int d = 1;
    std::array<double, 3> lower{};
    std::array<double, 3> upper{1.0, 1.0, 1.0};
    int cells = 1;  // per axis, for the Gaussian increment field

    double space_volume() const {
        double v = 1.0;
        for (int i = 0; i < d; ++i) v *= upper[i] - lower[i];
        return v;
    }
    double volume() const { return (t1 - t0) * space_volume(); }
    std::size_t cell_count() const {
        std::size_t n = 1;
        for (int i = 0; i < d; ++i) n *= static_cast<std::size_t>(cells);
        return n;
    }
};

struct JumpEvent {
    double t = 0.0;
    std::array<double, 3> x{};
    double z = 0.0;
};

struct BoxRealization {
    std::vector<JumpEvent> jumps;   // sorted by time
    std::vector<double> gaussian;   // rho W(cell), empty when rho = 0
    double drift_per_cell = 0.0;    // b_eff * dt * cell volume
};

// Sizes of retained jumps, drawn from lambda restricted to |z| > delta_sim and normalized.
class JumpSizeSampler {
  public:
    explicit JumpSizeSampler(const LevyNoiseSpec& s) : spec_(&s) {
        double acc = 0.0;
        for (std::size_t i = 0; i < s.atoms.size(); ++i)
            if (std::abs(s.atoms[i].size) > s.delta_sim) {
                acc += s.atoms[i].rate;
                cumulative_.push_back(acc);
                component_.push_back(static_cast<int>(i));
            }
        for (std::size_t i = 0; i < s.families.size(); ++i) {
            double m = detail::family_mass_above(s.families[i], s.delta_sim);
            if (!std::isfinite(m)) throw ConfigError("noise.delta_sim", "retained jump rate is infinite");
            if (m > 0.0) {
                acc += m;
                cumulative_.push_back(acc);
                component_.push_back(-1 - static_cast<int>(i));
            }
        }
        total_ = acc;
    }

    double total_rate() const { return total_; }

    double operator()(CounterStream& rng) const {
        double u = rng.uniform() * total_;
        auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
        std::size_t k = std::min<std::size_t>(it - cumulative_.begin(), cumulative_.size() - 1);
        int c = component_[k];
        if (c >= 0) return spec_->atoms[c].size;
        return detail::sample_family_above(spec_->families[-1 - c], spec_->delta_sim, rng);
    }

  private:
    const LevyNoiseSpec* spec_;
    std::vector<double> cumulative_;
    std::vector<int> component_;
    double total_ = 0.0;
};

inline BoxRealization sample_box(const LevyNoiseSpec& s, const SpaceTimeBox& box, CounterStream& rng) {
    if (!(box.volume() > 0.0)) throw DomainError("box volume must be positive");
    BoxRealization out;
    JumpSizeSampler sizes(s);
    if (sizes.total_rate() > 0.0) {
        std::poisson_distribution<long long> count(sizes.total_rate() * box.volume());
        long long n = count(rng);
        out.jumps.resize(static_cast<std::size_t>(n));
        for (auto& e : out.jumps) {
            e.t = box.t0 + (box.t1 - box.t0) * rng.uniform();
            for (int i = 0; i < box.d; ++i) e.x[i] = box.lower[i] + (box.upper[i] - box.lower[i]) * rng.uniform();
            e.z = sizes(rng);
        }
        std::sort(out.jumps.begin(), out.jumps.end(), [](const JumpEvent& a, const JumpEvent& b) { return a.t < b.t; });
    }
    const double cell_vol = box.space_volume() / static_cast<double>(box.cell_count());
    const double dt = box.t1 - box.t0;
    if (s.rho != 0.0) {
        std::normal_distribution<double> normal;
        const double scale = s.rho * std::sqrt(dt * cell_vol);
        out.gaussian.resize(box.cell_count());
        for (auto& g : out.gaussian) g = scale * normal(rng);
    }
    out.drift_per_cell = effective_drift(s) * dt * cell_vol;
    return out;
}

}  // namespace levy_she
