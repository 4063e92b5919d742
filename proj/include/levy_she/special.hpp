#pragma once

#include <cmath>
#include <limits>

#include "errors.hpp"

namespace levy_she {

namespace detail {

inline constexpr int kGammaMaxIter = 100000;
inline constexpr double kGammaEps = 1e-16;

// e^{-T} T^x / Gamma(x) in log space.
inline double log_gamma_prefactor(double x, double T) {
    return x * std::log(T) - T - std::lgamma(x);
}

// Regularized lower P(x, T) by series; converges fast for T < x + 1.
inline double gamma_p_series(double x, double T) {
    double ap = x;
    double term = 1.0 / x;
    double sum = term;
    for (int n = 0; n < kGammaMaxIter; ++n) {
        ap += 1.0;
        term *= T / ap;
        sum += term;
        if (std::abs(term) < std::abs(sum) * kGammaEps) break;
    }
    return sum * std::exp(log_gamma_prefactor(x, T));
}

// Regularized upper Q(x, T) by modified Lentz continued fraction; T >= x + 1.
inline double gamma_q_cf(double x, double T) {
    constexpr double tiny = std::numeric_limits<double>::min() / kGammaEps;
    double b = T + 1.0 - x;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < kGammaMaxIter; ++i) {
        double an = -i * (i - x);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kGammaEps) break;
    }
    return std::exp(log_gamma_prefactor(x, T)) * h;
}

inline void check_gamma_args(double x, double T) {
    if (!(x > 0.0)) throw DomainError("incomplete gamma: shape must be positive");
    if (!(T >= 0.0)) throw DomainError("incomplete gamma: argument must be nonnegative");
}

}  // namespace detail

// Regularized lower incomplete gamma P(x, T) = gamma(x, T) / Gamma(x).
inline double gamma_p(double x, double T) {
    detail::check_gamma_args(x, T);
    if (T == 0.0) return 0.0;
    if (std::isinf(T)) return 1.0;
    if (T < x + 1.0) return detail::gamma_p_series(x, T);
    return 1.0 - detail::gamma_q_cf(x, T);
}

// Regularized upper incomplete gamma Q(x, T) = 1 - P(x, T), computed without cancellation.
inline double gamma_q(double x, double T) {
    detail::check_gamma_args(x, T);
    if (T == 0.0) return 1.0;
    if (std::isinf(T)) return 0.0;
    if (T < x + 1.0) return 1.0 - detail::gamma_p_series(x, T);
    return detail::gamma_q_cf(x, T);
}

// gamma(x, T) = int_0^T t^{x-1} e^{-t} dt.
inline double incomplete_gamma_lower(double x, double T) {
    return gamma_p(x, T) * std::tgamma(x);
}

// Gamma(x, T) = int_T^inf t^{x-1} e^{-t} dt.
inline double incomplete_gamma_upper(double x, double T) {
    return gamma_q(x, T) * std::tgamma(x);
}

}  // namespace levy_she
