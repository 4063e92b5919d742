#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "errors.hpp"
#include "kernel.hpp"
#include "noise.hpp"
#include "quadrature.hpp"
#include "special.hpp"

namespace levy_she {

// Universal constants that only enter multiplicatively. Normalized mode sets them to 1.
struct ConstantsMode {
    std::string tag = "normalized";
    double bdg_cp = 1.0;
    double split_cp = 1.0;
    double poi_cp = 1.0;

    static ConstantsMode normalized() { return {}; }

    // Split constant 1/4 on (1,2], 1/6 on (2,3]; the others default to 1.
    static ConstantsMode conservative(double p, double bdg_cp = 1.0, double poi_cp = 1.0) {
        if (!(p > 1.0) || !(p <= 3.0)) throw DomainError("conservative split constant is known for p in (1, 3]");
        return {"conservative", bdg_cp, p <= 2.0 ? 0.25 : 1.0 / 6.0, poi_cp};
    }
};

struct BoundReport {
    double C_beta_c = 0.0;
    double beta0 = 0.0;
    double upper_gamma_bound = 0.0;
    std::optional<double> front_upper;
    double renewal_mass = 0.0;
    double malthusian_beta1 = 0.0;
    double epsilon = 0.0;
    double delta = 0.0;
    std::string constants_mode = "normalized";
};

namespace detail {

inline double log_add(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    double m = std::max(a, b);
    return m + std::log1p(std::exp(std::min(a, b) - m));
}

// Mean drift of Lambda: compensated specs carry it in b, raw ones also through the retained jumps.
inline double lambda_mean_drift(const LevyNoiseSpec& s) {
    return s.compensate ? s.b : s.b + tail_first_moment(s, s.delta_sim);
}

inline void check_young_region(const LevyNoiseSpec& s, const KernelParams& k, double p) {
    validate(k);
    if (!(p >= 1.0) || !(p < p_critical(k.d))) throw DomainError("stochastic Young constant needs 1 <= p < 1 + 2/d");
    if (p < 2.0 && s.rho != 0.0) throw DomainError("stochastic Young constant needs rho = 0 when p < 2");
}

}  // namespace detail

// log C_{beta,c}(kappa,p) written in terms of shift = beta - kappa c^2 d / 2.
inline double log_stoch_young_constant(const LevyNoiseSpec& s, const KernelParams& k, double p, double log_shift,
                                       double c, const ConstantsMode& mode) {
    detail::check_young_region(s, k, p);
    const int d = k.d;
    const double shift = std::exp(log_shift);
    const double b = std::abs(detail::lambda_mean_drift(s));
    double out = -std::numeric_limits<double>::infinity();
    if (b > 0.0) out = std::log(std::pow(2.0, d) * b) - log_shift;
    const double mp = m_lambda_or_throw(s, p);
    if (mp > 0.0) {
        const double a = time_exponent(d, p);
        const double lt = 0.5 * d * (3.0 - p) / p * std::log(2.0) + std::lgamma(a) / p + std::log(mp)
                        - (2.0 + (2.0 - p) * d) / (2.0 * p) * std::log(p)
                        - d * (p - 1.0) / (2.0 * p) * std::log(std::numbers::pi * k.kappa)
                        - (2.0 - d * (p - 1.0)) / (2.0 * p) * log_shift;
        out = detail::log_add(out, lt);
    }
    if (d == 1 && p >= 2.0) {
        const double num = m_lambda_or_throw(s, 2.0) + std::abs(s.rho);
        // beta - kappa c^2 / 2 coincides with the shift for d = 1.
        if (num > 0.0) out = detail::log_add(out, std::log(num) - 0.25 * std::log(2.0 * k.kappa * shift));
    }
    (void)c;
    return std::log(mode.bdg_cp) + out;
}

inline double stoch_young_constant(const LevyNoiseSpec& s, const KernelParams& k, double p, double beta, double c,
                                   const ConstantsMode& mode) {
    validate(k);
    if (!(c >= 0.0)) throw DomainError("c must be nonnegative");
    const double shift = beta - 0.5 * k.kappa * c * c * k.d;
    if (!(shift > 0.0)) throw DomainError("stochastic Young constant needs beta > kappa c^2 d / 2");
    return std::exp(log_stoch_young_constant(s, k, p, std::log(shift), c, mode));
}

struct UpperRate {
    double log_shift = 0.0;  // log(beta0 - kappa c^2 d / 2)
    double beta0 = 0.0;      // inf when beyond double range
    double gamma_upper = 0.0;
    std::optional<double> front_upper;

    double log_beta0(double edge) const { return detail::log_add(edge > 0.0 ? std::log(edge) : -std::numeric_limits<double>::infinity(), log_shift); }
};

// Smallest beta with C_{beta,c} <= 1/L, bisected in log(beta - kappa c^2 d / 2).
inline UpperRate beta0(const LevyNoiseSpec& s, const KernelParams& k, double p, double c, double L,
                       const ConstantsMode& mode) {
    detail::check_young_region(s, k, p);
    if (!(L > 0.0)) throw DomainError("Lipschitz constant must be positive");
    if (!(c >= 0.0)) throw DomainError("c must be nonnegative");
    const double edge = 0.5 * k.kappa * c * c * k.d;
    const double target = -std::log(L);
    auto excess = [&](double ls) { return log_stoch_young_constant(s, k, p, ls, c, mode) - target; };
    UpperRate r;
    if (excess(0.0) == -std::numeric_limits<double>::infinity()) {
        r.log_shift = std::log(1e-8 * std::max(edge, 1.0));
    } else {
        double lo = 0.0, hi = 0.0;
        if (excess(0.0) > 0.0) {
            double step = 1.0;
            while (excess(hi) > 0.0) {
                lo = hi;
                hi += step;
                step *= 2.0;
            }
        } else {
            double step = 1.0;
            while (excess(lo) <= 0.0) {
                hi = lo;
                lo -= step;
                step *= 2.0;
            }
        }
        auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-9 * std::max(1.0, std::abs(a)); };
        auto br = boost::math::tools::bisect(excess, lo, hi, tol);
        // The upper end always satisfies C <= 1/L.
        r.log_shift = excess(br.second) <= 0.0 ? br.second : hi;
    }
    const double log_b0 = r.log_beta0(edge);
    r.beta0 = std::exp(log_b0);
    r.gamma_upper = p * r.beta0;
    if (c > 0.0) r.front_upper = r.beta0 / c;
    return r;
}

// Renewal kernel w on (0, inf).
class RenewalKernel {
public:
    virtual ~RenewalKernel() = default;
    virtual double operator()(double t) const = 0;
    virtual double mass() const = 0;

    // Last time of the support; inf for kernels without compact support.
    virtual double support_end() const { return std::numeric_limits<double>::infinity(); }

    // log int_0^inf w(t) e^{-beta t} dt at beta = e^{log_beta}.
    virtual double log_laplace(double log_beta) const {
        const double beta = std::exp(log_beta);
        auto f = [&](double t) { return t > 0.0 ? (*this)(t) * std::exp(-beta * t) : 0.0; };
        const double T = support_end();
        double v = std::isfinite(T) ? quad::endpoint_singular(f, 0.0, T) : quad::half_line(f, 0.0);
        return std::log(v);
    }

    // (int_a^b w, int_a^b (t - a) w) over one cell.
    virtual std::pair<double, double> cell_moments(double a, double b) const {
        const double T = support_end();
        if (a >= T) return {0.0, 0.0};
        b = std::min(b, T);
        auto w0 = [&](double t) { return (*this)(t); };
        auto w1 = [&](double t) { return (t - a) * (*this)(t); };
        return {quad::endpoint_singular(w0, a, b), quad::endpoint_singular(w1, a, b)};
    }
};

// w(t) = A t^{k-1} e^{-theta t}; theta = 0 gives the improper power kernel.
class PowerExpKernel final : public RenewalKernel {
public:
    PowerExpKernel(double amplitude, double shape, double rate) : A_(amplitude), k_(shape), theta_(rate) {
        if (!(A_ >= 0.0) || !(k_ > 0.0) || !(theta_ >= 0.0)) throw DomainError("power-exponential kernel needs A >= 0, k > 0, theta >= 0");
    }

    // m * Gamma(k, theta) density.
    static PowerExpKernel gamma(double mass, double shape, double rate) {
        return PowerExpKernel(mass * std::pow(rate, shape) / std::tgamma(shape), shape, rate);
    }

    double operator()(double t) const override {
        if (!(t > 0.0)) return 0.0;
        return A_ * std::pow(t, k_ - 1.0) * std::exp(-theta_ * t);
    }
    double mass() const override {
        if (A_ == 0.0) return 0.0;
        if (theta_ == 0.0) return std::numeric_limits<double>::infinity();
        return A_ * std::tgamma(k_) * std::pow(theta_, -k_);
    }
    double log_laplace(double log_beta) const override {
        if (A_ == 0.0) return -std::numeric_limits<double>::infinity();
        return std::log(A_) + std::lgamma(k_) - k_ * std::log(theta_ + std::exp(log_beta));
    }
    std::pair<double, double> cell_moments(double a, double b) const override {
        const double w0 = cell(k_, a, b);
        return {w0, cell(k_ + 1.0, a, b) - a * w0};
    }

private:
    // int_a^b A t^{s-1} e^{-theta t} dt; far cells use upper gamma differences to avoid cancellation.
    double cell(double s, double a, double b) const {
        if (theta_ == 0.0) return A_ * (std::pow(b, s) - std::pow(std::max(a, 0.0), s)) / s;
        const double scale = A_ * std::pow(theta_, -s);
        if (theta_ * a > s) return scale * (incomplete_gamma_upper(s, theta_ * a) - incomplete_gamma_upper(s, theta_ * b));
        const double lower_a = a > 0.0 ? incomplete_gamma_lower(s, theta_ * a) : 0.0;
        return scale * (incomplete_gamma_lower(s, theta_ * b) - lower_a);
    }

    double A_, k_, theta_;
};

// w_p(t) = prefactor * int g^p 1{g > epsilon} dx, optionally times the cable factor e^{r t}.
class TruncatedRenewalKernel final : public RenewalKernel {
public:
    TruncatedRenewalKernel(const LevyNoiseSpec& s, const KernelParams& k, double p, double epsilon, double delta,
                           const ConstantsMode& mode)
        : k_(k), p_(p), eps_(epsilon) {
        validate(k);
        if (!(p > 1.0) || !(p < p_critical(k.d))) throw DomainError("renewal kernel needs 1 < p < 1 + 2/d");
        if (!(epsilon > 0.0)) throw DomainError("epsilon must be positive");
        if (!(delta >= 0.0)) throw DomainError("delta must be nonnegative");
        const double rate = tail_mass(s, delta);
        if (!(rate > 0.0)) throw DomainError("renewal kernel needs lambda([-delta, delta]^c) > 0");
        if (!std::isfinite(rate)) throw DomainError("renewal kernel needs a finite tail mass above delta");
        const double moment = tail_pmoment(s, p, delta);
        if (!std::isfinite(moment)) throw DivergenceError("p-th moment of lambda above delta is infinite");
        // For p >= 2 the superadditivity of x^{p/2} removes the normalization.
        const double expo = std::max(0.0, 1.0 - 0.5 * p);
        log_prefactor_ = std::log(mode.poi_cp * mode.split_cp * moment)
                       - expo * std::log(std::max(1.0, rate * super_level_volume(k, epsilon)));
    }

    double operator()(double t) const override {
        return std::exp(log_prefactor_) * slice_p_integral(k_, p_, eps_, t);
    }
    double mass() const override { return std::exp(log_prefactor_) * truncated_p_integral(k_, p_, eps_); }
    double support_end() const override { return slice_support_end(k_, eps_); }
    double log_laplace(double log_beta) const override {
        return log_prefactor_ + log_exp_weighted_truncated_integral(k_, p_, eps_, log_beta);
    }
    double log_prefactor() const { return log_prefactor_; }

private:
    KernelParams k_;
    double p_, eps_;
    double log_prefactor_ = 0.0;
};

// Multiplies kernel slices by e^{p b sigma0 t}, the weight that turns the PAM with drift into the cable equation.
struct CableTransform {
    double b = 0.0;
    double sigma0 = 1.0;

    CableTransform(double b_, double sigma0_) : b(b_), sigma0(sigma0_) {
        if (!(sigma0 > 0.0)) throw DomainError("cable transform needs sigma0 > 0");
    }

    double rate(double p) const { return p * b * sigma0; }
    double factor(double p, double t) const { return std::exp(rate(p) * t); }

    // Range of the factor over a support [0, T].
    std::pair<double, double> factor_bracket(double p, double T) const {
        double e = factor(p, T);
        return {std::min(1.0, e), std::max(1.0, e)};
    }

    std::function<double(double)> wrap(std::function<double(double)> slice, double p) const {
        const double r = rate(p);
        return [slice = std::move(slice), r](double t) { return slice(t) * std::exp(r * t); };
    }
};

class CableKernel final : public RenewalKernel {
public:
    CableKernel(std::shared_ptr<const RenewalKernel> base, const CableTransform& cable, double p)
        : base_(std::move(base)), r_(cable.rate(p)) {}

    double operator()(double t) const override { return (*base_)(t) * std::exp(r_ * t); }
    double support_end() const override { return base_->support_end(); }
    double mass() const override {
        if (r_ == 0.0) return base_->mass();
        if (r_ < 0.0) return std::exp(base_->log_laplace(std::log(-r_)));
        return std::exp(RenewalKernel::log_laplace(-std::numeric_limits<double>::infinity()));
    }
    double log_laplace(double log_beta) const override {
        const double shifted = std::exp(log_beta) - r_;
        if (shifted > 0.0 && r_ != 0.0) return base_->log_laplace(std::log(shifted));
        if (r_ == 0.0) return base_->log_laplace(log_beta);
        return RenewalKernel::log_laplace(log_beta);
    }

private:
    std::shared_ptr<const RenewalKernel> base_;
    double r_;
};

// log beta1 with int w e^{-beta1 t} dt = 1; -inf when the mass is at most 1.
inline double malthusian_log_exponent(const RenewalKernel& w) {
    if (!(w.mass() > 1.0)) return -std::numeric_limits<double>::infinity();
    auto f = [&](double lb) { return w.log_laplace(lb); };
    double lo = 0.0, hi = 0.0, step = 1.0;
    if (f(0.0) > 0.0) {
        while (f(hi) > 0.0) {
            lo = hi;
            hi += step;
            step *= 2.0;
        }
    } else {
        while (f(lo) <= 0.0) {
            hi = lo;
            lo -= step;
            step *= 2.0;
            if (lo < -700.0) return lo;
        }
    }
    auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-10 * std::max(1.0, std::abs(a)); };
    auto br = boost::math::tools::bisect(f, lo, hi, tol);
    return 0.5 * (br.first + br.second);
}

inline double malthusian_exponent(const RenewalKernel& w) {
    double lb = malthusian_log_exponent(w);
    return lb == -std::numeric_limits<double>::infinity() ? 0.0 : std::exp(lb);
}

struct RenewalSolution {
    double h = 0.0;
    std::vector<double> i;  // i[n] at t = n h

    double operator()(double t) const {
        if (i.empty()) return 0.0;
        double x = t / h;
        auto n = static_cast<std::size_t>(std::floor(x));
        if (n + 1 >= i.size()) return i.back();
        double f = x - static_cast<double>(n);
        return (1.0 - f) * i[n] + f * i[n + 1];
    }

    // Least-squares slope of log i over the last fraction of the grid.
    double late_log_slope(double fraction = 0.3) const {
        const std::size_t n = i.size();
        const auto start = static_cast<std::size_t>((1.0 - fraction) * static_cast<double>(n - 1));
        double sx = 0, sy = 0, sxx = 0, sxy = 0, m = 0;
        for (std::size_t j = start; j < n; ++j) {
            double x = h * static_cast<double>(j), y = std::log(i[j]);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
            m += 1.0;
        }
        return (m * sxy - sx * sy) / (m * sxx - sx * sx);
    }
};

// i(t) = a(t) + int_0^t w(t - s) i(s) ds by product trapezoid integration: i is piecewise linear
// and the kernel moments over each cell are taken from the kernel itself.
inline RenewalSolution renewal_solve(const std::function<double(double)>& a, const RenewalKernel& w, double horizon,
                                     std::size_t steps) {
    if (!(horizon > 0.0) || steps < 1) throw DomainError("renewal_solve needs a positive horizon and steps");
    const double h = horizon / static_cast<double>(steps);
    std::vector<double> alpha(steps), beta(steps);
    for (std::size_t m = 0; m < steps; ++m) {
        const double lo = h * static_cast<double>(m);
        auto [W0, W1] = w.cell_moments(lo, lo + h);
        // Weights of i at the cell ends nearer to and farther from u = 0.
        alpha[m] = (h * W0 - W1) / h;
        beta[m] = W1 / h;
    }
    RenewalSolution sol;
    sol.h = h;
    sol.i.resize(steps + 1);
    sol.i[0] = a(0.0);
    for (std::size_t n = 1; n <= steps; ++n) {
        // Cell [t_j, t_{j+1}] meets u = t_n - s in [t_m, t_{m+1}], m = n - j - 1.
        double acc = a(h * static_cast<double>(n)) + beta[0] * sol.i[n - 1];
        for (std::size_t j = 0; j + 1 < n; ++j) {
            const std::size_t m = n - j - 1;
            acc += beta[m] * sol.i[j] + alpha[m] * sol.i[j + 1];
        }
        const double denom = 1.0 - alpha[0];
        if (!(denom > 0.0)) throw DomainError("renewal_solve step too coarse for the kernel near 0");
        sol.i[n] = acc / denom;
    }
    return sol;
}

struct RateFit {
    double estimate = 0.0;
    double slope = 0.0;
    double r2 = 1.0;
    std::vector<std::string> warnings;
};

namespace detail {

inline RateFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
        syy += y[i] * y[i];
    }
    RateFit f;
    const double vx = n * sxx - sx * sx, vy = n * syy - sy * sy, cxy = n * sxy - sx * sy;
    f.slope = cxy / vx;
    f.estimate = (sy - f.slope * sx) / n;
    f.r2 = vy > 0.0 ? cxy * cxy / (vx * vy) : 1.0;
    return f;
}

}  // namespace detail

// Limit of (1+2/d-p)/|log(1+2/d-p)| log beta(p) as p -> 1+2/d. The normalized quantity is linear in
// 1/|log(1+2/d-p)| up to o(1), so the limit is read off as the intercept of that line.
inline RateFit asymptotic_rate_p(const std::vector<double>& p, const std::vector<double>& log_beta, int d) {
    if (p.size() != log_beta.size()) throw DomainError("p-grid and values differ in length");
    const double pc = p_critical(d);
    std::vector<double> x, y;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double gap = pc - p[i];
        if (!(gap > 0.0) || !(gap < 0.3)) throw DomainError("p-grid must lie in (1+2/d-0.3, 1+2/d)");
        if (!(gap < 1.0)) continue;
        const double lg = std::abs(std::log(gap));
        x.push_back(1.0 / lg);
        y.push_back(gap / lg * log_beta[i]);
    }
    RateFit f;
    if (x.size() < 3) {
        f.warnings.push_back("fewer than 3 usable grid points");
        if (x.empty()) return f;
        f.estimate = y.back();
        return f;
    }
    f = detail::least_squares(x, y);
    double min_gap = pc - *std::max_element(p.begin(), p.end());
    if (min_gap > 1e-2) f.warnings.push_back("grid stops at gap " + std::to_string(min_gap) + ", extrapolation is long");
    if (f.r2 < 0.99) f.warnings.push_back("normalized rate is not linear in 1/|log gap| (r2 = " + std::to_string(f.r2) + ")");
    return f;
}

// Log-log slope of beta against kappa.
inline RateFit asymptotic_rate_kappa(const std::vector<double>& kappa, const std::vector<double>& log_beta) {
    if (kappa.size() != log_beta.size() || kappa.size() < 2) throw DomainError("kappa-grid needs at least two matching points");
    std::vector<double> x;
    for (double k : kappa) {
        if (!(k > 0.0)) throw DomainError("kappa must be positive");
        x.push_back(std::log(k));
    }
    RateFit f = detail::least_squares(x, log_beta);
    f.estimate = f.slope;
    const auto [lo, hi] = std::minmax_element(kappa.begin(), kappa.end());
    if (*hi / *lo < 100.0 * (1.0 - 1e-12)) f.warnings.push_back("kappa-grid spans less than 2 decades");
    if (f.r2 < 0.999) f.warnings.push_back("log-log relation is not linear (r2 = " + std::to_string(f.r2) + ")");
    return f;
}

// Largest delta keeping at least half of the jump mass above delta_sim.
inline double default_delta(const LevyNoiseSpec& s) {
    const double total = tail_mass(s, s.delta_sim);
    if (!(total > 0.0)) throw DomainError("jump measure is zero");
    if (!std::isfinite(total)) throw DomainError("jump mass above delta_sim is infinite");
    double lo = s.delta_sim, hi = std::max(1.0, 2.0 * s.delta_sim);
    while (tail_mass(s, hi) >= 0.5 * total) {
        lo = hi;
        hi *= 2.0;
    }
    for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
        double mid = 0.5 * (lo + hi);
        (tail_mass(s, mid) >= 0.5 * total ? lo : hi) = mid;
    }
    return lo;
}

// epsilon at which lambda([-delta,delta]^c) times the super-level volume equals 1.
inline double balanced_epsilon(const LevyNoiseSpec& s, const KernelParams& k, double delta) {
    const double rate = tail_mass(s, delta);
    return std::pow(rate * truncated_integral_constant(k.d, 0.0) / k.kappa, 1.0 / p_critical(k.d));
}

struct LowerRate {
    double epsilon = 0.0;
    double delta = 0.0;
    double mass = 0.0;
    double log_beta1 = -std::numeric_limits<double>::infinity();
    double beta1 = 0.0;
};

inline LowerRate malthusian_at(const LevyNoiseSpec& s, const KernelParams& k, double p, double epsilon, double delta,
                               const ConstantsMode& mode) {
    TruncatedRenewalKernel w(s, k, p, epsilon, delta, mode);
    LowerRate r;
    r.epsilon = epsilon;
    r.delta = delta;
    r.mass = w.mass();
    r.log_beta1 = malthusian_log_exponent(w);
    r.beta1 = r.log_beta1 == -std::numeric_limits<double>::infinity() ? 0.0 : std::exp(r.log_beta1);
    return r;
}

// Malthusian root with epsilon chosen by a Brent search on log epsilon around the balanced value.
inline LowerRate optimized_malthusian(const LevyNoiseSpec& s, const KernelParams& k, double p, const ConstantsMode& mode,
                                      std::optional<double> delta_opt = std::nullopt) {
    const double delta = delta_opt ? *delta_opt : default_delta(s);
    const double center = std::log(balanced_epsilon(s, k, delta));
    // Larger roots first; below mass 1 the root is 0 and the mass itself is maximized.
    auto objective = [&](double le) {
        LowerRate r = malthusian_at(s, k, p, std::exp(le), delta, mode);
        if (r.log_beta1 == -std::numeric_limits<double>::infinity()) return 1e7 - std::log(r.mass);
        return -r.log_beta1;
    };
    auto best = boost::math::tools::brent_find_minima(objective, center - 8.0, center + 8.0, 40);
    LowerRate r = malthusian_at(s, k, p, std::exp(best.first), delta, mode);
    LowerRate at_center = malthusian_at(s, k, p, std::exp(center), delta, mode);
    if (at_center.log_beta1 > r.log_beta1 || (at_center.beta1 == 0.0 && r.beta1 == 0.0 && at_center.mass > r.mass))
        return at_center;
    return r;
}

// Smallest p on a grid where the best kernel mass exceeds 1, refined by bisection.
inline std::optional<double> intermittency_threshold_p0(const LevyNoiseSpec& s, const KernelParams& k,
                                                        const ConstantsMode& mode) {
    const double pc = p_critical(k.d);
    const double delta = default_delta(s);
    // For d = 1 the mass grows like epsilon^{-p/2} as epsilon -> 0, so every p > 1 qualifies.
    if (k.d == 1) return 1.0;
    auto excess = [&](double p) {
        TruncatedRenewalKernel w(s, k, p, balanced_epsilon(s, k, delta), delta, mode);
        return w.mass() - 1.0;
    };
    const int n = 200;
    double prev = 1.0;
    for (int i = 1; i < n; ++i) {
        double p = 1.0 + (pc - 1.0) * i / n;
        if (excess(p) > 0.0) {
            double lo = prev, hi = p;
            for (int it = 0; it < 60; ++it) {
                double mid = 0.5 * (lo + hi);
                (excess(mid) > 0.0 ? hi : lo) = mid;
            }
            return hi;
        }
        prev = p;
    }
    return std::nullopt;
}

struct FrontBounds {
    double log_upper = 0.0;      // log min over c of beta0(c)/c
    double upper = 0.0;
    double log_upper_c = 0.0;    // minimizing log c
    double log_upper_closed = 0.0;  // log sqrt(2 kappa d beta0(0))
    std::optional<double> upper_at_c;
    double log_lower = -std::numeric_limits<double>::infinity();  // log(alpha_tilde / sqrt(d))
    double lower = 0.0;          // 0 if not certified
    double lower_epsilon = 0.0;
    bool lower_certified = false;
};

struct FrontOptions {
    double L = 1.0;
    double threshold = 4.0;
    std::optional<double> delta;
};

inline FrontBounds front_rate_bounds(const LevyNoiseSpec& s, const KernelParams& k, double p, double c,
                                     const ConstantsMode& mode, const FrontOptions& opt = {}) {
    if (!(c > 0.0)) throw DomainError("front bounds need c > 0");
    FrontBounds fb;
    fb.upper_at_c = beta0(s, k, p, c, opt.L, mode).front_upper;

    // beta0(c) = kappa c^2 d / 2 + S with S = beta0(0), so beta0(c)/c is unimodal in log c.
    const double log_S = beta0(s, k, p, 0.0, opt.L, mode).log_shift;
    const double log_edge_coef = std::log(0.5 * k.kappa * k.d);
    fb.log_upper_closed = 0.5 * (std::log(2.0 * k.kappa * k.d) + log_S);
    auto log_ratio = [&](double lc) { return detail::log_add(log_edge_coef + 2.0 * lc, log_S) - lc; };
    const double lc0 = 0.5 * (std::log(2.0) + log_S - std::log(k.kappa * k.d));
    auto best = boost::math::tools::brent_find_minima(log_ratio, lc0 - 5.0, lc0 + 5.0, 50);
    fb.log_upper_c = best.first;
    fb.log_upper = best.second;
    fb.upper = std::exp(fb.log_upper);

    // Lower: C int h > threshold with int h >= front_integral_lower_bound / (2d).
    if (!(p > 1.0) || !(p < std::min(2.0, p_critical(k.d)))) return fb;
    const double delta = opt.delta ? *opt.delta : default_delta(s);
    const double rate = tail_mass(s, delta);
    const double log_moment = std::log(tail_pmoment(s, p, delta));
    const double a = time_exponent(k.d, p);
    // front_integral_lower_bound scales like alpha_tilde^{-2a}; evaluate it at alpha_tilde = 1.
    const double log_B = std::log(front_integral_lower_bound(k, p, std::numeric_limits<double>::min(), 1.0));
    auto log_alpha_max = [&](double eps) {
        const double log_C = std::log(mode.poi_cp * mode.split_cp) + log_moment
                           + (0.5 * p - 1.0) * std::log(std::max(1.0, rate * super_level_volume(k, eps)));
        return (log_C + log_B - std::log(2.0 * k.d * opt.threshold)) / (2.0 * a);
    };
    auto feasible = [&](double eps) {
        return log_alpha_max(eps) >= 0.5 * std::log(2.0 * std::numbers::pi) + std::log(k.kappa) + std::log(eps) / k.d;
    };
    double eps = balanced_epsilon(s, k, delta);
    if (!feasible(eps)) {
        double lo = std::log(eps) - 60.0, hi = std::log(eps);
        if (!feasible(std::exp(lo))) return fb;
        for (int it = 0; it < 100; ++it) {
            double mid = 0.5 * (lo + hi);
            (feasible(std::exp(mid)) ? lo : hi) = mid;
        }
        eps = std::exp(lo);
    }
    fb.lower_epsilon = eps;
    fb.log_lower = log_alpha_max(eps) - 0.5 * std::log(static_cast<double>(k.d));
    fb.lower = std::exp(fb.log_lower);
    fb.lower_certified = true;
    return fb;
}

struct BoundOptions {
    double c = 0.0;
    double L = 1.0;
    std::optional<double> epsilon;
    std::optional<double> delta;
};

inline BoundReport bound_report(const LevyNoiseSpec& s, const KernelParams& k, double p, const ConstantsMode& mode,
                                const BoundOptions& opt = {}) {
    BoundReport rep;
    rep.constants_mode = mode.tag;
    const UpperRate up = beta0(s, k, p, opt.c, opt.L, mode);
    rep.beta0 = up.beta0;
    rep.upper_gamma_bound = up.gamma_upper;
    rep.front_upper = up.front_upper;
    rep.C_beta_c = stoch_young_constant(s, k, p, up.beta0, opt.c, mode);
    if (p > 1.0) {
        const double delta = opt.delta ? *opt.delta : default_delta(s);
        LowerRate low = opt.epsilon ? malthusian_at(s, k, p, *opt.epsilon, delta, mode)
                                    : optimized_malthusian(s, k, p, mode, delta);
        rep.renewal_mass = low.mass;
        rep.malthusian_beta1 = low.beta1;
        rep.epsilon = low.epsilon;
        rep.delta = low.delta;
    }
    return rep;
}

}  // namespace levy_she
