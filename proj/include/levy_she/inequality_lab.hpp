#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/poisson.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>

#include "errors.hpp"
#include "kernel.hpp"
#include "rng.hpp"

namespace levy_she {

enum class Inequality { poimom, split_pmoment, poi_ineq, decoupling, g_power_moment };
enum class Method { exact_series, exact_lattice, quadrature, monte_carlo };

inline const char* to_string(Inequality i) {
    switch (i) {
        case Inequality::poimom: return "poimom";
        case Inequality::split_pmoment: return "split_pmoment";
        case Inequality::poi_ineq: return "poi_ineq";
        case Inequality::decoupling: return "decoupling";
        default: return "g_power_moment";
    }
}

inline const char* to_string(Method m) {
    switch (m) {
        case Method::exact_series: return "exact-series";
        case Method::exact_lattice: return "exact-lattice";
        case Method::quadrature: return "quadrature";
        default: return "monte-carlo";
    }
}

// margin = lhs - constant * rhs; holds is decided with zero tolerance for exact methods and a
// 3-SE band for Monte Carlo.
struct IneqCase {
    Inequality id = Inequality::poimom;
    std::string params;
    double lhs = 0.0;
    double rhs = 0.0;
    double constant = 1.0;
    double margin = 0.0;
    double se = 0.0;
    Method method = Method::exact_series;
    bool holds = true;

    double ratio() const { return rhs > 0.0 ? lhs / rhs : std::numeric_limits<double>::infinity(); }
};

namespace detail {

inline std::string format_params(std::initializer_list<std::pair<const char*, double>> kv) {
    std::ostringstream os;
    os.precision(17);
    bool first = true;
    for (const auto& [k, v] : kv) {
        if (!first) os << ';';
        os << k << '=' << v;
        first = false;
    }
    return os.str();
}

inline void settle(IneqCase& c) {
    c.margin = c.lhs - c.constant * c.rhs;
    c.holds = c.method == Method::monte_carlo ? c.margin + 3.0 * c.se >= 0.0 : c.margin >= 0.0;
}

// sum_k pmf(k) phi(k) for X ~ Poisson(lambda), stopping once the remaining mass is below tol
// and phi grows at most polynomially.
template <class F>
double poisson_expectation(double lambda, F&& phi, double tol = 1e-16) {
    if (lambda == 0.0) return phi(0.0);
    const boost::math::poisson_distribution<double> law(lambda);
    const auto mode = static_cast<long>(std::floor(lambda));
    double sum = 0.0;
    // Downward from the mode, then upward, each until the pmf is negligible.
    double pmf = boost::math::pdf(law, static_cast<double>(mode));
    const double log_tol = std::log(tol);
    double w = pmf;
    for (long k = mode; k >= 0; --k) {
        sum += w * phi(static_cast<double>(k));
        if (k > 0) w *= static_cast<double>(k) / lambda;
        if (w < tol * 1e-4 && std::log(w) + std::log(std::max(1.0, std::abs(phi(static_cast<double>(k))))) < log_tol) break;
    }
    w = pmf;
    for (long k = mode + 1;; ++k) {
        w *= lambda / static_cast<double>(k);
        const double term = w * phi(static_cast<double>(k));
        sum += term;
        if (k > 2.0 * lambda + 10.0 && std::abs(term) < tol * std::abs(sum) && w < tol) break;
    }
    return sum;
}

}  // namespace detail

inline double poimom_constant() { return std::exp(-1.0); }

// E[X^r] >= e^{-1} lambda^r (lambda > 1) or e^{-1} lambda (lambda <= 1), X ~ Poisson(lambda).
inline IneqCase poisson_moment_check(double lambda, double r) {
    if (!(lambda > 0.0) || !(r > 0.0)) throw DomainError("Poisson moment check needs lambda > 0 and r > 0");
    IneqCase c;
    c.id = Inequality::poimom;
    c.params = detail::format_params({{"lambda", lambda}, {"r", r}});
    c.lhs = detail::poisson_expectation(lambda, [r](double k) { return k == 0.0 ? 0.0 : std::pow(k, r); });
    c.rhs = lambda > 1.0 ? std::pow(lambda, r) : lambda;
    c.constant = poimom_constant();
    c.method = Method::exact_series;
    detail::settle(c);
    return c;
}

// Smallest E[X^r] / (lambda^r or lambda) over a lambda grid.
inline double poimom_best_constant(double r, const std::vector<double>& lambdas) {
    double best = std::numeric_limits<double>::infinity();
    for (double l : lambdas) best = std::min(best, poisson_moment_check(l, r).ratio());
    return best;
}

// Zero-mean laws for the split inequality.
enum class CenteredFamily { two_point, poisson, exponential };

struct ZeroMeanLaw {
    CenteredFamily family = CenteredFamily::two_point;
    // two_point: X = x1 w.p. q, x2 w.p. 1 - q. poisson: X = N - shift, N ~ Poisson(param).
    // exponential: X = E - shift, E ~ Exp(rate = param).
    double x1 = -1.0, x2 = 1.0, q = 0.5;
    double param = 1.0;
    double shift = 1.0;

    static ZeroMeanLaw two_point(double x1, double x2, double q) { return {CenteredFamily::two_point, x1, x2, q, 0.0, 0.0}; }
    static ZeroMeanLaw symmetric_two_point(double s) { return two_point(-s, s, 0.5); }
    static ZeroMeanLaw centered_poisson(double lambda) { return {CenteredFamily::poisson, 0, 0, 0, lambda, lambda}; }
    static ZeroMeanLaw centered_exponential(double rate) { return {CenteredFamily::exponential, 0, 0, 0, rate, 1.0 / rate}; }

    double mean() const {
        switch (family) {
            case CenteredFamily::two_point: return q * x1 + (1.0 - q) * x2;
            case CenteredFamily::poisson: return param - shift;
            default: return 1.0 / param - shift;
        }
    }
    double scale() const {
        switch (family) {
            case CenteredFamily::two_point: return std::max(std::abs(x1), std::abs(x2));
            case CenteredFamily::poisson: return std::max(1.0, param);
            default: return 1.0 / param;
        }
    }
    std::string describe() const {
        switch (family) {
            case CenteredFamily::two_point: return detail::format_params({{"two_point_x1", x1}, {"x2", x2}, {"q", q}});
            case CenteredFamily::poisson: return detail::format_params({{"poisson_lambda", param}});
            default: return detail::format_params({{"exponential_rate", param}});
        }
    }
};

// E|a + X|^p for a zero-mean law, with the method used.
inline std::pair<double, Method> abs_moment(const ZeroMeanLaw& law, double a, double p) {
    switch (law.family) {
        case CenteredFamily::two_point:
            return {law.q * std::pow(std::abs(a + law.x1), p) + (1.0 - law.q) * std::pow(std::abs(a + law.x2), p), Method::exact_series};
        case CenteredFamily::poisson:
            return {detail::poisson_expectation(law.param, [&](double k) { return std::pow(std::abs(a + k - law.shift), p); }),
                    Method::exact_series};
        default: {
            using boost::math::quadrature::exp_sinh;
            using boost::math::quadrature::gauss_kronrod;
            const double th = law.param;
            auto f = [&](double y) {
                const double z = std::abs(a + y - law.shift);
                return z == 0.0 ? 0.0 : std::exp(p * std::log(z) + std::log(th) - th * y);
            };
            const double kink = law.shift - a;
            double v = 0.0;
            double start = 0.0;
            if (kink > 0.0) {
                v += gauss_kronrod<double, 61>::integrate(f, 0.0, kink, 10, 1e-13);
                start = kink;
            }
            exp_sinh<double> tail;
            v += tail.integrate([&](double s) { return f(start + s); }, 1e-13);
            return {v, Method::quadrature};
        }
    }
}

inline double split_constant(double p) {
    if (!(p > 1.0) || p > 3.0) throw DomainError("split inequality needs p in (1, 3]");
    return p <= 2.0 ? 0.25 : 1.0 / 6.0;
}

// E|a + X|^p >= C_p (|a|^p + E|X|^p), C_p = 1/4 on (1, 2] and 1/6 on (2, 3].
inline IneqCase split_moment_check(const ZeroMeanLaw& law, double a, double p) {
    if (std::abs(law.mean()) > 1e-12 * law.scale()) throw DomainError("split inequality needs a zero-mean X");
    IneqCase c;
    c.id = Inequality::split_pmoment;
    c.constant = split_constant(p);
    c.params = law.describe() + ";" + detail::format_params({{"a", a}, {"p", p}});
    const auto [lhs, method] = abs_moment(law, a, p);
    c.lhs = lhs;
    c.rhs = std::pow(std::abs(a), p) + abs_moment(law, 0.0, p).first;
    c.method = method;
    detail::settle(c);
    return c;
}

// Deterministic simple integrand sum_i a_i 1_{A_i} with m(A_i) = m_i.
struct SimpleIntegrand {
    std::vector<double> a;
    std::vector<double> m;
};

// Floor for the empirical constant: (p-1)^p from the sharp square-function inequality times
// e^{-1} from the Poisson moment bound.
inline double poi_ineq_floor(double p) { return std::pow(p - 1.0, p) / std::exp(1.0); }

struct PoiIneqOptions {
    double tail = 1e-14;
    double max_points = 1e7;
    std::size_t mc_draws = 1000000;
    std::uint64_t seed = 0;
    std::uint32_t case_index = 0;
};

namespace detail {

inline std::size_t poisson_cutoff(double m, double tail) {
    if (m == 0.0) return 0;
    const boost::math::poisson_distribution<double> law(m);
    return static_cast<std::size_t>(boost::math::quantile(boost::math::complement(law, tail)));
}

// Common step h with a_i / h integral, denominators up to 64.
inline std::optional<std::pair<double, std::vector<long>>> lattice_step(const std::vector<double>& a) {
    for (long q = 1; q <= 64; ++q) {
        std::vector<long> k;
        bool ok = true;
        for (double x : a) {
            const double y = x * static_cast<double>(q);
            const double r = std::round(y);
            if (std::abs(y - r) > 1e-9 * std::max(1.0, std::abs(y))) {
                ok = false;
                break;
            }
            k.push_back(static_cast<long>(r));
        }
        if (ok) return std::make_pair(1.0 / static_cast<double>(q), k);
    }
    return std::nullopt;
}

}  // namespace detail

// E|sum a_i (N(A_i) - m_i)|^p >= C_p sum |a_i|^p m_i / (1 v sum m_i)^{1 - p/2}, p in (1, 2].
inline IneqCase poisson_integral_lower_check(const SimpleIntegrand& h, double p, const PoiIneqOptions& opt = {}) {
    if (h.a.size() != h.m.size() || h.a.empty()) throw DomainError("simple integrand needs matching, nonempty a and m");
    for (double m : h.m)
        if (!(m >= 0.0) || !std::isfinite(m)) throw DomainError("Poisson intensities must be nonnegative and finite");
    if (!(p > 1.0) || p > 2.0) throw DomainError("Poisson integral inequality needs p in (1, 2]");
    const std::size_t K = h.a.size();
    const double total = std::accumulate(h.m.begin(), h.m.end(), 0.0);
    IneqCase c;
    c.id = Inequality::poi_ineq;
    {
        std::ostringstream os;
        os.precision(17);
        os << "p=" << p << ";K=" << K << ";a=";
        for (std::size_t i = 0; i < K; ++i) os << (i ? "|" : "") << h.a[i];
        os << ";m=";
        for (std::size_t i = 0; i < K; ++i) os << (i ? "|" : "") << h.m[i];
        c.params = os.str();
    }
    double num = 0.0;
    for (std::size_t i = 0; i < K; ++i) num += std::pow(std::abs(h.a[i]), p) * h.m[i];
    c.rhs = num / std::pow(std::max(1.0, total), 1.0 - 0.5 * p);
    c.constant = poi_ineq_floor(p);

    std::vector<std::size_t> cut(K);
    double points = 1.0;
    for (std::size_t i = 0; i < K; ++i) {
        cut[i] = detail::poisson_cutoff(h.m[i], opt.tail / static_cast<double>(K));
        points *= static_cast<double>(cut[i] + 1);
    }
    std::vector<std::vector<double>> pmf(K);
    for (std::size_t i = 0; i < K; ++i) {
        pmf[i].resize(cut[i] + 1);
        if (h.m[i] == 0.0) {
            pmf[i][0] = 1.0;
            continue;
        }
        const boost::math::poisson_distribution<double> law(h.m[i]);
        for (std::size_t k = 0; k <= cut[i]; ++k) pmf[i][k] = boost::math::pdf(law, static_cast<double>(k));
    }
    double center = 0.0;
    for (std::size_t i = 0; i < K; ++i) center += h.a[i] * h.m[i];

    if (points <= opt.max_points) {
        // Product lattice by odometer.
        std::vector<std::size_t> n(K, 0);
        double acc = 0.0;
        while (true) {
            double w = 1.0, s = -center;
            for (std::size_t i = 0; i < K; ++i) {
                w *= pmf[i][n[i]];
                s += h.a[i] * static_cast<double>(n[i]);
            }
            acc += w * std::pow(std::abs(s), p);
            std::size_t i = 0;
            while (i < K && ++n[i] > cut[i]) n[i++] = 0;
            if (i == K) break;
        }
        c.lhs = acc;
        c.method = Method::exact_series;
    } else if (auto step = detail::lattice_step(h.a)) {
        // Law of sum k_i N_i on the integer lattice by successive convolution.
        const auto& k = step->second;
        long lo = 0, hi = 0;
        std::vector<double> dist{1.0};
        for (std::size_t i = 0; i < K; ++i) {
            const long span = std::abs(k[i]) * static_cast<long>(cut[i]);
            const long nlo = lo + std::min(0L, k[i] < 0 ? -span : 0L), nhi = hi + (k[i] > 0 ? span : 0L);
            std::vector<double> next(static_cast<std::size_t>(nhi - nlo + 1), 0.0);
            for (long v = lo; v <= hi; ++v) {
                const double w = dist[static_cast<std::size_t>(v - lo)];
                if (w == 0.0) continue;
                for (std::size_t j = 0; j <= cut[i]; ++j)
                    next[static_cast<std::size_t>(v + k[i] * static_cast<long>(j) - nlo)] += w * pmf[i][j];
            }
            dist.swap(next);
            lo = nlo;
            hi = nhi;
        }
        double acc = 0.0;
        for (long v = lo; v <= hi; ++v)
            acc += dist[static_cast<std::size_t>(v - lo)] * std::pow(std::abs(step->first * static_cast<double>(v) - center), p);
        c.lhs = acc;
        c.method = Method::exact_lattice;
    } else {
        CounterStream rng(opt.seed, opt.case_index, 0, StreamPurpose::lab);
        std::vector<std::poisson_distribution<long>> laws;
        for (double m : h.m) laws.emplace_back(std::max(m, 1e-300));
        double sum = 0.0, sum2 = 0.0;
        for (std::size_t d = 0; d < opt.mc_draws; ++d) {
            double s = -center;
            for (std::size_t i = 0; i < K; ++i)
                if (h.m[i] > 0.0) s += h.a[i] * static_cast<double>(laws[i](rng));
            const double v = std::pow(std::abs(s), p);
            sum += v;
            sum2 += v * v;
        }
        const double n = static_cast<double>(opt.mc_draws);
        c.lhs = sum / n;
        c.se = std::sqrt(std::max(0.0, sum2 / n - c.lhs * c.lhs) / (n - 1.0));
        c.method = Method::monte_carlo;
    }
    detail::settle(c);
    return c;
}

// Decoupling of martingale transforms sum H_i xi_i against sum H_i xibar_i.
enum class XiFamily { rademacher, centered_exponential, centered_poisson };
enum class HForm { deterministic, previous_xi, partial_sum, mixed_copy, multiplicative };

struct DecouplingSpec {
    XiFamily family = XiFamily::rademacher;
    HForm form = HForm::deterministic;
    int N = 2;
    double p = 2.0;
    std::size_t draws = 100000;
};

inline double decoupling_band(double p) {
    const double pstar = std::max(p, p / (p - 1.0));
    return std::pow(pstar - 1.0, 2.0 * p);
}

namespace detail {

inline double draw_xi(XiFamily f, CounterStream& rng) {
    switch (f) {
        case XiFamily::rademacher: return rng.uniform() < 0.5 ? -1.0 : 1.0;
        case XiFamily::centered_exponential: return -std::log(rng.uniform()) - 1.0;
        default: {
            std::poisson_distribution<int> law(1.0);
            return static_cast<double>(law(rng)) - 1.0;
        }
    }
}

// H_i from the pasts of xi and xibar (indices < i, zero-based).
inline double h_value(HForm form, int i, const std::vector<double>& xi, const std::vector<double>& xibar) {
    switch (form) {
        case HForm::deterministic: return 1.0 + 0.5 * i;
        case HForm::previous_xi: return i == 0 ? 1.0 : xi[static_cast<std::size_t>(i - 1)];
        case HForm::partial_sum: {
            double s = 0.0;
            for (int j = 0; j < i; ++j) s += xi[static_cast<std::size_t>(j)];
            return 1.0 + std::abs(s);
        }
        case HForm::mixed_copy: {
            double s = 0.0;
            for (int j = 0; j < i; ++j) s += xi[static_cast<std::size_t>(j)];
            return (s >= 0.0 ? 1.0 : -1.0) + (i == 0 ? 0.0 : 0.5 * xibar[static_cast<std::size_t>(i - 1)]);
        }
        default: {
            double prod = 1.0;
            for (int j = 0; j < i; ++j) prod *= 1.0 + 0.5 * xi[static_cast<std::size_t>(j)];
            return prod;
        }
    }
}

}  // namespace detail

inline const char* to_string(XiFamily f) {
    switch (f) {
        case XiFamily::rademacher: return "rademacher";
        case XiFamily::centered_exponential: return "centered_exponential";
        default: return "centered_poisson";
    }
}

inline const char* to_string(HForm h) {
    switch (h) {
        case HForm::deterministic: return "deterministic";
        case HForm::previous_xi: return "previous_xi";
        case HForm::partial_sum: return "partial_sum";
        case HForm::mixed_copy: return "mixed_copy";
        default: return "multiplicative";
    }
}

struct DecouplingResult {
    IneqCase upper;  // E|sum H xi|^p <= K E|sum H xibar|^p
    IneqCase lower;  // E|sum H xibar|^p <= K E|sum H xi|^p
    double coupled = 0.0, decoupled = 0.0;
    double coupled_se = 0.0, decoupled_se = 0.0;
    double ratio() const { return coupled / decoupled; }
};

// Paired Monte Carlo over (xi, xibar); both directions checked against the band K = (p*-1)^{2p}.
inline DecouplingResult decoupling_check(const DecouplingSpec& s, std::uint64_t seed, std::uint32_t case_index) {
    if (s.N < 1 || !(s.p > 1.0)) throw DomainError("decoupling check needs N >= 1 and p > 1");
    const double K = decoupling_band(s.p);
    CounterStream rng(seed, case_index, 1, StreamPurpose::lab);
    std::vector<double> xi(static_cast<std::size_t>(s.N)), xibar(xi.size());
    double a = 0, a2 = 0, b = 0, b2 = 0, up = 0, up2 = 0, lo = 0, lo2 = 0;
    for (std::size_t d = 0; d < s.draws; ++d) {
        for (int i = 0; i < s.N; ++i) {
            xi[static_cast<std::size_t>(i)] = detail::draw_xi(s.family, rng);
            xibar[static_cast<std::size_t>(i)] = detail::draw_xi(s.family, rng);
        }
        double sc = 0.0, sd = 0.0;
        for (int i = 0; i < s.N; ++i) {
            const double h = detail::h_value(s.form, i, xi, xibar);
            sc += h * xi[static_cast<std::size_t>(i)];
            sd += h * xibar[static_cast<std::size_t>(i)];
        }
        const double x = std::pow(std::abs(sc), s.p), y = std::pow(std::abs(sd), s.p);
        a += x;
        a2 += x * x;
        b += y;
        b2 += y * y;
        up += K * y - x;
        up2 += (K * y - x) * (K * y - x);
        lo += K * x - y;
        lo2 += (K * x - y) * (K * x - y);
    }
    const double n = static_cast<double>(s.draws);
    auto se = [n](double s1, double s2) { return std::sqrt(std::max(0.0, s2 / n - (s1 / n) * (s1 / n)) / (n - 1.0)); };
    DecouplingResult r;
    r.coupled = a / n;
    r.decoupled = b / n;
    r.coupled_se = se(a, a2);
    r.decoupled_se = se(b, b2);
    const std::string params = std::string("family=") + to_string(s.family) + ";H=" + to_string(s.form) + ";"
                             + detail::format_params({{"N", s.N}, {"p", s.p}, {"draws", n}});
    auto make = [&](double lhs, double rhs, double s1, double s2, const char* dir) {
        IneqCase c;
        c.id = Inequality::decoupling;
        c.params = params + ";direction=" + dir;
        c.lhs = lhs;
        c.rhs = rhs;
        c.constant = 1.0 / K;
        c.method = Method::monte_carlo;
        c.margin = s1 / n / K;  // (K rhs - lhs) / K, paired
        c.se = se(s1, s2) / K;
        c.holds = c.margin + 3.0 * c.se >= 0.0;
        return c;
    };
    // Written as lhs >= rhs / K with lhs the larger-side quantity of each direction.
    r.upper = make(r.decoupled, r.coupled, up, up2, "coupled_le_K_decoupled");
    r.lower = make(r.coupled, r.decoupled, lo, lo2, "decoupled_le_K_coupled");
    return r;
}

// E[g(U,V)^p] for U uniform on (0,1), V uniform on (0,1)^d; nullopt signals divergence
// (p >= 1 + 2/d).
inline std::optional<double> g_power_moment(const KernelParams& k, double p) {
    validate(k);
    if (!(p > 0.0)) throw DomainError("g_power_moment needs p > 0");
    if (p >= p_critical(k.d)) return std::nullopt;
    const double kappa = k.kappa, d = k.d;
    const double a = 0.5 * d * (p - 1.0);  // integrand u^{-a} near 0
    // inner(u) = int_0^{1/sqrt u} e^{-p y^2 / (2 kappa)} dy
    auto inner = [&](double u) {
        return std::sqrt(std::numbers::pi * kappa / (2.0 * p)) * boost::math::erf(std::sqrt(p / (2.0 * kappa * u)));
    };
    // u = w^{1/(1-a)} absorbs the u^{-a} singularity.
    const double e = 1.0 / (1.0 - a);
    auto f = [&](double w) {
        if (w <= 0.0) return std::pow(std::sqrt(std::numbers::pi * kappa / (2.0 * p)), d);
        return std::pow(inner(std::pow(w, e)), d);
    };
    const double integral = e * boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, 1.0, 10, 1e-13);
    return std::pow(2.0 * std::numbers::pi * kappa, -0.5 * p * d) * integral;
}

// The lower bound of the same display: the inner integral frozen at u = 1.
inline double g_power_moment_lower(const KernelParams& k, double p) {
    if (p >= p_critical(k.d)) return std::numeric_limits<double>::infinity();
    const double d = k.d, a = 0.5 * d * (p - 1.0);
    const double inner1 = std::sqrt(std::numbers::pi * k.kappa / (2.0 * p)) * boost::math::erf(std::sqrt(p / (2.0 * k.kappa)));
    return std::pow(2.0 * std::numbers::pi * k.kappa, -0.5 * p * d) * std::pow(inner1, d) / (1.0 - a);
}

inline IneqCase g_power_moment_case(const KernelParams& k, double p) {
    IneqCase c;
    c.id = Inequality::g_power_moment;
    c.params = detail::format_params({{"d", k.d}, {"kappa", k.kappa}, {"p", p}});
    c.method = Method::quadrature;
    const auto v = g_power_moment(k, p);
    c.lhs = v ? *v : std::numeric_limits<double>::infinity();
    c.rhs = g_power_moment_lower(k, p);
    c.margin = v ? c.lhs - c.rhs : 0.0;
    c.holds = !v || c.lhs >= c.rhs * (1.0 - 1e-10);
    return c;
}

// Committed suites.
struct SuiteReport {
    std::vector<IneqCase> cases;
    std::size_t violations() const {
        return static_cast<std::size_t>(std::count_if(cases.begin(), cases.end(), [](const IneqCase& c) { return !c.holds; }));
    }
    double min_ratio() const {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& c : cases) m = std::min(m, c.ratio());
        return m;
    }
};

// 200 cases: r on 10 values in (0, 3], lambda on 20 log-spaced values in [1e-3, 1e3].
inline SuiteReport poimom_suite() {
    SuiteReport rep;
    for (int i = 1; i <= 10; ++i)
        for (int j = 0; j < 20; ++j) rep.cases.push_back(poisson_moment_check(std::pow(10.0, -3.0 + 6.0 * j / 19.0), 0.3 * i));
    return rep;
}

// Randomized split cases over the three families, a in [-10, 10] and p in (1, 3].
inline SuiteReport split_suite(std::size_t n, std::uint64_t seed) {
    SuiteReport rep;
    for (std::size_t i = 0; i < n; ++i) {
        CounterStream rng(seed, static_cast<std::uint32_t>(i), 2, StreamPurpose::lab);
        const int fam = static_cast<int>(rng.uniform() * 3.0);
        ZeroMeanLaw law;
        if (fam == 0) {
            const double q = 0.05 + 0.9 * rng.uniform(), c = std::pow(10.0, -1.0 + 2.0 * rng.uniform());
            law = ZeroMeanLaw::two_point(-(1.0 - q) * c, q * c, q);
        } else if (fam == 1) {
            law = ZeroMeanLaw::centered_poisson(std::pow(10.0, -1.3 + 2.6 * rng.uniform()));
        } else {
            law = ZeroMeanLaw::centered_exponential(std::pow(10.0, -1.0 + 2.0 * rng.uniform()));
        }
        const double a = i % 20 == 0 ? 0.0 : -10.0 + 20.0 * rng.uniform();
        const double p = 3.0 - 2.0 * rng.uniform();  // (1, 3]
        rep.cases.push_back(split_moment_check(law, a, p));
    }
    return rep;
}

// 500 cases: p in {1.1, ..., 2.0} x total mass in {0.1, ..., 100} x K in {1, ..., 5}.
// a_i are multiples of 1/4 in [-3, 3] \ {0}; m_i are random proportions of the total.
inline SuiteReport poi_ineq_suite(std::uint64_t seed) {
    SuiteReport rep;
    const double totals[] = {0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0};
    std::uint32_t index = 0;
    for (int pi = 1; pi <= 10; ++pi)
        for (double total : totals)
            for (int K = 1; K <= 5; ++K) {
                CounterStream rng(seed, index, 3, StreamPurpose::lab);
                SimpleIntegrand h;
                double wsum = 0.0;
                for (int i = 0; i < K; ++i) {
                    int q = static_cast<int>(rng.uniform() * 24.0) - 12;
                    if (q >= 0) ++q;
                    h.a.push_back(0.25 * q);
                    h.m.push_back(0.1 + rng.uniform());
                    wsum += h.m.back();
                }
                for (double& m : h.m) m *= total / wsum;
                PoiIneqOptions opt;
                opt.seed = seed;
                opt.case_index = index++;
                rep.cases.push_back(poisson_integral_lower_check(h, 1.0 + 0.1 * pi, opt));
            }
    return rep;
}

// 100 paired Monte Carlo cases; each contributes both directions.
inline SuiteReport decoupling_suite(std::uint64_t seed, std::size_t draws = 100000) {
    SuiteReport rep;
    const double ps[] = {1.25, 1.5, 1.75, 2.0, 2.5, 3.0};
    for (std::uint32_t i = 0; i < 100; ++i) {
        CounterStream rng(seed, i, 4, StreamPurpose::lab);
        DecouplingSpec s;
        s.family = static_cast<XiFamily>(static_cast<int>(rng.uniform() * 3.0));
        s.form = static_cast<HForm>(static_cast<int>(rng.uniform() * 5.0));
        s.N = 2 + static_cast<int>(rng.uniform() * 5.0);
        s.p = ps[static_cast<int>(rng.uniform() * 6.0)];
        s.draws = draws;
        const auto r = decoupling_check(s, seed, i);
        rep.cases.push_back(r.upper);
        rep.cases.push_back(r.lower);
    }
    return rep;
}

}  // namespace levy_she
