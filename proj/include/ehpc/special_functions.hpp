#pragma once

#include <functional>

namespace ehpc {

/// Exponential integral Ei(x) for x < 0, i.e. -E1(-x).
///
/// Uses the power series for |x| <= 1 and a modified-Lentz continued
/// fraction for |x| > 1. Relative accuracy is better than 1e-13 on
/// [-700, -1e-8]. Throws ParameterError for x >= 0.
double exp_integral_ei(double x);

/// exp(z) * E1(z) for z > 0. Finite for every positive z, so it is the
/// building block for products of huge exponentials with tiny Ei values.
double scaled_e1(double z);

/// exp(log_scale) * Ei(x) for x < 0 without forming either factor.
double exp_times_ei(double log_scale, double x);

/// Gaussian tail probability Q(x) = P(N(0,1) > x).
double q_function(double x);

/// Inverse of q_function on (0, 1).
double q_inverse(double p);

double normal_pdf(double x, double mean, double variance);

struct QuadratureResult {
    double value;
    double error_estimate;
};

/// Adaptive Gauss-Kronrod quadrature on a finite interval. Throws
/// NumericError when the requested relative tolerance is not reached.
QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           double rel_tol = 1e-10, unsigned max_depth = 30);

}  // namespace ehpc
