#pragma once

#include <cmath>
#include <limits>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

namespace levy_she::quad {

inline constexpr double kRelTol = 1e-10;

// Smooth integrand on a finite interval.
template <class F>
double smooth(F&& f, double a, double b, double tol = kRelTol) {
    if (!(b > a)) return 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 10, tol);
}

// Finite interval, integrable endpoint singularities allowed.
template <class F>
double endpoint_singular(F&& f, double a, double b, double tol = kRelTol) {
    if (!(b > a)) return 0.0;
    thread_local boost::math::quadrature::tanh_sinh<double> integrator(12);
    if (a == 0.0) return integrator.integrate(f, a, b, tol);
    // Abscissas are generated relative to 0 so that points near either endpoint stay distinct from it.
    const double h = 0.5 * (b - a);
    return integrator.integrate([&](double u) { return f(a + u); }, 0.0, h, tol)
         + integrator.integrate([&](double v) { return f(b - v); }, 0.0, h, tol);
}

// [a, inf) with decaying integrand.
template <class F>
double half_line(F&& f, double a, double tol = kRelTol) {
    thread_local boost::math::quadrature::exp_sinh<double> integrator(12);
    return integrator.integrate([&](double u) { return f(a + u); }, tol);
}

}  // namespace levy_she::quad
