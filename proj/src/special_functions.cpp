#include "ehpc/special_functions.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>

#include "ehpc/errors.hpp"

namespace ehpc {
namespace {

constexpr double kEulerGamma = 0.57721566490153286060651209;

// E1(z) for 0 < z <= 1 by its alternating power series.
double e1_series(double z) {
    double sum = 0.0;
    double term = 1.0;
    for (int k = 1; k < 200; ++k) {
        term *= -z / k;
        const double contrib = term / k;
        sum += contrib;
        if (std::abs(contrib) < 1e-17 * std::abs(sum)) break;
    }
    return -kEulerGamma - std::log(z) - sum;
}

// exp(z) E1(z) for z > 1, continued fraction evaluated with modified Lentz.
double scaled_e1_fraction(double z) {
    constexpr double tiny = 1e-300;
    double b = z + 1.0;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 1000; ++i) {
        const double an = -static_cast<double>(i) * i;
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        const double delta = c * d;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-16) return h;
    }
    throw NumericError("scaled_e1: continued fraction did not converge", h);
}

}  // namespace

double scaled_e1(double z) {
    if (!(z > 0.0)) throw ParameterError("scaled_e1 requires z > 0");
    if (std::isinf(z)) return 0.0;
    if (z <= 1.0) return std::exp(z) * e1_series(z);
    return scaled_e1_fraction(z);
}

double exp_integral_ei(double x) {
    if (!(x < 0.0)) {
        std::ostringstream os;
        os << "exp_integral_ei: domain is x < 0, got " << x;
        throw ParameterError(os.str());
    }
    const double z = -x;
    if (z <= 1.0) return -e1_series(z);
    return -std::exp(-z) * scaled_e1_fraction(z);
}

double exp_times_ei(double log_scale, double x) {
    if (!(x < 0.0)) throw ParameterError("exp_times_ei requires x < 0");
    const double z = -x;
    if (std::isinf(z)) return 0.0;
    return -std::exp(log_scale - z) * scaled_e1(z);
}

double q_function(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

double q_inverse(double p) {
    if (!(p > 0.0 && p < 1.0)) throw ParameterError("q_inverse requires p in (0, 1)");
    return std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double normal_pdf(double x, double mean, double variance) {
    const double d = x - mean;
    return std::exp(-0.5 * d * d / variance) / std::sqrt(2.0 * std::numbers::pi * variance);
}

QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           double rel_tol, unsigned max_depth) {
    double err = 0.0;
    const double value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        f, a, b, max_depth, rel_tol, &err);
    const double scale = std::max(std::abs(value), std::numeric_limits<double>::min());
    if (!std::isfinite(value) || err > 10.0 * rel_tol * scale + 1e-300) {
        std::ostringstream os;
        os << "integrate: relative tolerance " << rel_tol << " not reached on [" << a << ", " << b
           << "], achieved " << err / scale;
        throw NumericError(os.str(), err / scale);
    }
    return {value, err};
}

}  // namespace ehpc
