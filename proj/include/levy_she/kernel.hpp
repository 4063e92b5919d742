#pragma once

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <numbers>
#include <span>

#include "errors.hpp"
#include "quadrature.hpp"
#include "special.hpp"

namespace levy_she {

struct KernelParams {
    double kappa = 1.0;
    int d = 1;
};

struct WeightedKernelQuery {
    double p = 1.0;
    double c = 0.0;
    double beta = 1.0;
    double epsilon = 0.0;
};

inline void validate(const KernelParams& k) {
    if (!(k.kappa > 0.0) || !std::isfinite(k.kappa)) throw DomainError("kappa must be positive");
    if (k.d < 1 || k.d > 3) throw DomainError("dimension must be 1, 2 or 3");
}

// Moments of order >= 1 + 2/d do not exist.
inline double p_critical(int d) { return 1.0 + 2.0 / d; }

// Exponent 1 - d(p-1)/2 of the time integrals; positive iff p < 1 + 2/d.
inline double time_exponent(int d, double p) { return 1.0 - 0.5 * d * (p - 1.0); }

inline double heat_kernel_r2(const KernelParams& k, double t, double r2) {
    validate(k);
    if (!(t > 0.0)) throw DomainError("heat kernel needs t > 0");
    double s = 2.0 * std::numbers::pi * k.kappa * t;
    return std::pow(s, -0.5 * k.d) * std::exp(-r2 / (2.0 * k.kappa * t));
}

inline double heat_kernel(const KernelParams& k, double t, std::span<const double> x) {
    if (static_cast<int>(x.size()) != k.d) throw DomainError("point dimension does not match d");
    double r2 = 0.0;
    for (double xi : x) r2 += xi * xi;
    return heat_kernel_r2(k, t, r2);
}

inline double heat_kernel(const KernelParams& k, double t, std::initializer_list<double> x) {
    return heat_kernel(k, t, std::span<const double>(x.begin(), x.size()));
}

inline double log_weighted_kernel_integral_bound(const KernelParams& k, const WeightedKernelQuery& q) {
    validate(k);
    const int d = k.d;
    const double p = q.p;
    if (!(p > 0.0) || !(p < p_critical(d)))
        throw DomainError("weighted kernel bound needs 0 < p < 1 + 2/d");
    if (!(q.c >= 0.0)) throw DomainError("weighted kernel bound needs c >= 0");
    const double shift = q.beta - 0.5 * k.kappa * q.c * q.c * d;
    if (!(shift > 0.0)) throw DomainError("weighted kernel bound needs beta > kappa c^2 d / 2");
    const double a = time_exponent(d, p);
    return 0.5 * d * (3.0 - p) * std::log(2.0) + std::lgamma(a)
         - (1.0 + d * (1.0 - 0.5 * p)) * std::log(p)
         - 0.5 * d * (p - 1.0) * std::log(std::numbers::pi * k.kappa) - a * std::log(shift);
}

// Closed-form bound on int int g_{beta,c}^p dt dx with g_{beta,c} = g e^{-beta t + c|x|}.
inline double weighted_kernel_integral_bound(const KernelParams& k, const WeightedKernelQuery& q) {
    return std::exp(log_weighted_kernel_integral_bound(k, q));
}

// p-independent factor of the truncated integrals:
// (d/2)^{d/2}/(pi Gamma(d/2)) int_0^1 int_0^1 s^{pd(z^2-1)/2} (-s log s)^{d/2} z^{d-1} dz ds.
// With s = e^{-v} the s-integral is Gamma(d/2+1)/(a + pd z^2/2)^{d/2+1}; the z-integral is
// elementary for d <= 3.
inline double truncated_integral_constant(int d, double p) {
    if (d < 1 || d > 3) throw DomainError("dimension must be 1, 2 or 3");
    if (!(p >= 0.0)) throw DomainError("truncated integral needs p >= 0");
    if (!(p < p_critical(d))) throw DivergenceError("truncated integral diverges for p >= 1 + 2/d");
    const double a = time_exponent(d, p);
    const double b = 0.5 * p * d;
    double z_integral = 0.0;
    switch (d) {
        case 1: z_integral = 1.0 / (a * std::sqrt(a + b)); break;
        case 2: z_integral = 1.0 / (2.0 * a * (a + b)); break;
        default: z_integral = 1.0 / (3.0 * a * std::pow(a + b, 1.5)); break;
    }
    const double h = 0.5 * d;
    return std::pow(h, h) * std::tgamma(h + 1.0) / (std::numbers::pi * std::tgamma(h)) * z_integral;
}

inline double truncated_p_integral(const KernelParams& k, double p, double epsilon) {
    validate(k);
    if (!(epsilon > 0.0)) throw DomainError("epsilon must be positive");
    const double cp = truncated_integral_constant(k.d, p);
    return cp / (k.kappa * std::pow(epsilon, p_critical(k.d) - p));
}

// Space-time volume of {g > epsilon}.
inline double super_level_volume(const KernelParams& k, double epsilon) {
    return truncated_p_integral(k, 0.0, epsilon);
}

// Last time at which {x : g(t,x) > epsilon} is nonempty.
inline double slice_support_end(const KernelParams& k, double epsilon) {
    validate(k);
    if (!(epsilon > 0.0)) throw DomainError("epsilon must be positive");
    return 1.0 / (2.0 * std::numbers::pi * k.kappa * std::pow(epsilon, 2.0 / k.d));
}

// int g^p(t,x) 1{g(t,x) > epsilon} dx.
inline double slice_p_integral(const KernelParams& k, double p, double epsilon, double t) {
    const double T = slice_support_end(k, epsilon);
    if (!(p >= 0.0)) throw DomainError("slice integral needs p >= 0");
    if (!(t > 0.0) || !(t < T)) return 0.0;
    const int d = k.d;
    const double h = 0.5 * d;
    const double s = 2.0 * std::numbers::pi * k.kappa * t;
    // X = -log(eps (2 pi kappa t)^{d/2}) > 0 inside the support.
    const double X = -std::log(epsilon) - h * std::log(s);
    if (p == 0.0) return std::pow(s * X, h) / std::tgamma(h + 1.0);
    return incomplete_gamma_lower(h, p * X) / (std::pow(p, h) * std::tgamma(h) * std::pow(s, h * (p - 1.0)));
}

// log of int_0^inf e^{-beta t} slice_p_integral(t) dt at beta = e^{log_beta}.
// Works for beta far outside double range: t = u / beta moves the weight onto u in [0, 800].
inline double log_exp_weighted_truncated_integral(const KernelParams& k, double p, double epsilon,
                                                  double log_beta) {
    validate(k);
    if (!(epsilon > 0.0)) throw DomainError("epsilon must be positive");
    if (!(p > 0.0)) throw DomainError("Laplace transform of the slice needs p > 0");
    if (!(p < p_critical(k.d))) throw DivergenceError("truncated integral diverges for p >= 1 + 2/d");
    const int d = k.d;
    const double h = 0.5 * d;
    const double a = time_exponent(d, p);
    const double log_2pik = std::log(2.0 * std::numbers::pi * k.kappa);
    const double G0 = -p * std::log(epsilon) - p * h * log_2pik;
    auto G = [&](double u) { return G0 - p * h * (std::log(u) - log_beta); };
    const double gamma_h = std::tgamma(h);

    const double log_U = log_beta + std::log(slice_support_end(k, epsilon));
    const double U = log_U > std::log(800.0) ? 800.0 : std::exp(log_U);
    const double m = std::min(U, 1.0);

    // Near u = 0 the factor u^{a-1} is integrated exactly against the limit value Gamma(d/2).
    auto deficit = [&](double u) {
        if (!(u > 0.0)) return 0.0;
        double g = G(u);
        if (!(g > 0.0)) return -std::pow(u, a - 1.0) * gamma_h;
        return std::pow(u, a - 1.0) * (std::expm1(-u) * incomplete_gamma_lower(h, g) - incomplete_gamma_upper(h, g));
    };
    double J = gamma_h * std::pow(m, a) / a + quad::endpoint_singular(deficit, 0.0, m);
    if (U > 1.0) {
        auto tail = [&](double u) {
            double g = G(u);
            if (!(g > 0.0)) return 0.0;
            return std::pow(u, a - 1.0) * std::exp(-u) * incomplete_gamma_lower(h, g);
        };
        J += quad::endpoint_singular(tail, 1.0, U);
    }
    const double log_A = -h * std::log(p) - std::lgamma(h) - (1.0 - a) * log_2pik;
    return log_A - a * log_beta + std::log(J);
}

inline double exp_weighted_truncated_integral(const KernelParams& k, double p, double epsilon, double beta) {
    if (!(beta >= 0.0)) throw DomainError("beta must be nonnegative");
    if (beta == 0.0) return truncated_p_integral(k, p, epsilon);
    return std::exp(log_exp_weighted_truncated_integral(k, p, epsilon, std::log(beta)));
}

// Smallest beta for which exp_weighted_truncated_lower_bound holds.
inline double exp_weighted_lower_bound_threshold(const KernelParams& k, double p, double epsilon) {
    validate(k);
    return 2.0 * std::numbers::pi * k.kappa * std::exp(2.0 / (p * k.d)) * std::pow(epsilon, 2.0 / k.d);
}

inline double exp_weighted_truncated_lower_bound(const KernelParams& k, double p, double epsilon, double beta) {
    validate(k);
    if (!(p > 0.0) || !(p < p_critical(k.d))) throw DomainError("lower bound needs 0 < p < 1 + 2/d");
    if (!(beta >= exp_weighted_lower_bound_threshold(k, p, epsilon)))
        throw DomainError("lower bound needs beta >= 2 pi kappa e^{2/(pd)} epsilon^{2/d}");
    const double h = 0.5 * k.d;
    const double a = time_exponent(k.d, p);
    return incomplete_gamma_lower(h, 1.0) * incomplete_gamma_lower(a, 1.0)
         / (std::pow(p, h) * std::tgamma(h) * std::pow(2.0 * std::numbers::pi * k.kappa, 1.0 - a) * std::pow(beta, a));
}

// Lower bound on int_0^inf int_{|x| >= alpha_tilde t} g^p 1{g > epsilon} dx dt.
inline double front_integral_lower_bound(const KernelParams& k, double p, double epsilon, double alpha_tilde) {
    validate(k);
    const int d = k.d;
    if (!(p > 0.0) || !(p < p_critical(d))) throw DomainError("front integral bound needs 0 < p < 1 + 2/d");
    if (!(epsilon > 0.0) || !(alpha_tilde > 0.0)) throw DomainError("epsilon and alpha_tilde must be positive");
    if (!(alpha_tilde * alpha_tilde * std::pow(epsilon, -2.0 / d) >= (1.0 - 1e-12) * 2.0 * std::numbers::pi * k.kappa * k.kappa))
        throw DomainError("front integral bound needs alpha_tilde^2 epsilon^{-2/d} >= 2 pi kappa^2");
    const double a = time_exponent(d, p);
    const double e1 = 1.0 + d * (1.0 - 0.5 * p);
    return 2.0 * std::pow(2.0 * k.kappa, 1.0 - d * (p - 1.0)) * std::pow(alpha_tilde, -2.0 * a)
         * incomplete_gamma_lower(e1, 1.0 / 6.0)
         / (d * std::tgamma(0.5 * d) * std::pow(std::numbers::pi, 0.5 * d * (p - 1.0)) * std::pow(p, e1)
            * (p_critical(d) - p));
}

}  // namespace levy_she
