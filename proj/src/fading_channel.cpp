#include "ehpc/fading_channel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "ehpc/errors.hpp"

namespace ehpc {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_gain(double mean_square_gain) {
    if (!(mean_square_gain > 0.0) || !std::isfinite(mean_square_gain))
        throw ParameterError("mean-square gain must be positive and finite");
}

void check_levels(std::size_t levels) {
    if (levels < 2) throw ParameterError("quantizer needs at least 2 levels");
}

// log Pr(a <= g < b) for Rayleigh g, in squared-gain units x = g^2 / gamma.
double log_cell_probability(double xa, double xb) {
    if (std::isinf(xb)) return -xa;
    return -xa + std::log(-std::expm1(-(xb - xa)));
}

// E{g 1[a <= g < b]} for the unit Rayleigh density 2u exp(-u^2).
double unit_partial_mean(double a, double b) {
    const double half_sqrt_pi = 0.5 * std::sqrt(std::numbers::pi);
    const double tail_b = std::isinf(b) ? 0.0 : b * std::exp(-b * b);
    const double erfc_b = std::isinf(b) ? 0.0 : std::erfc(b);
    return a * std::exp(-a * a) - tail_b + half_sqrt_pi * (std::erfc(a) - erfc_b);
}

double unit_survival(double u) { return std::isinf(u) ? 0.0 : std::exp(-u * u); }

// Shooting residual for the unit-scale MMAE conditions
//   2 u_l (u_l - u_{l-1}) = 1 - S(u_{l+1}) / S(u_l),
// parameterised by the first interior boundary t. Fills `out` with the
// interior boundaries; returns d_{L-1} - 1, or +inf when the recursion
// exhausts the tail mass early (t too large).
double mmae_shoot(double t, std::size_t levels, std::vector<double>& out) {
    out.assign(levels - 1, 0.0);
    double prev = 0.0;
    double u = t;
    double log_s = -t * t;
    for (std::size_t l = 0; l + 1 < levels; ++l) {
        out[l] = u;
        const double d = 2.0 * u * (u - prev);
        if (l + 2 == levels) return d - 1.0;
        if (d >= 1.0) return kInf;
        log_s += std::log1p(-d);
        prev = u;
        u = std::sqrt(-log_s);
    }
    return kInf;
}

}  // namespace

std::string to_string(QuantizerMethod m) {
    switch (m) {
        case QuantizerMethod::Mmae: return "mmae";
        case QuantizerMethod::Moe: return "moe";
        case QuantizerMethod::Explicit: return "explicit";
    }
    return "explicit";
}

QuantizerMethod quantizer_method_from_string(const std::string& s) {
    if (s == "mmae") return QuantizerMethod::Mmae;
    if (s == "moe") return QuantizerMethod::Moe;
    if (s == "explicit") return QuantizerMethod::Explicit;
    throw ParameterError("unknown quantizer method '" + s + "'");
}

std::size_t QuantizerSpec::level_of(double gain) const {
    auto it = std::upper_bound(boundaries.begin(), boundaries.end(), gain);
    const auto idx = static_cast<std::size_t>(std::distance(boundaries.begin(), it));
    return std::min(idx == 0 ? 0 : idx - 1, levels() - 1);
}

QuantizerSpec QuantizerSpec::from_thresholds(const std::vector<double>& thresholds,
                                             QuantizerMethod method) {
    QuantizerSpec q;
    q.boundaries = thresholds;
    q.boundaries.push_back(kInf);
    q.method = method;
    q.validate();
    return q;
}

void QuantizerSpec::validate() const {
    if (boundaries.size() < 3) throw ParameterError("quantizer needs at least 2 levels");
    if (boundaries.front() != 0.0) throw ParameterError("first quantizer boundary must be 0");
    if (!std::isinf(boundaries.back())) throw ParameterError("last quantizer boundary must be +inf");
    for (std::size_t i = 1; i < boundaries.size(); ++i) {
        if (!(boundaries[i] > boundaries[i - 1]))
            throw ParameterError("quantizer boundaries must be strictly increasing");
    }
}

FsmcModel::FsmcModel(std::vector<double> state_values, std::vector<double> stationary,
                     std::vector<double> column_major_transition)
    : values_(std::move(state_values)),
      stationary_(std::move(stationary)),
      matrix_(std::move(column_major_transition)) {
    const std::size_t m = values_.size();
    if (m == 0 || stationary_.size() != m || matrix_.size() != m * m)
        throw ParameterError("FsmcModel: inconsistent dimensions");
    for (std::size_t from = 0; from < m; ++from) {
        for (std::size_t to = 0; to < m; ++to) {
            const double p = transition(to, from);
            if (!(p >= 0.0 && p <= 1.0)) {
                std::ostringstream os;
                os << "FsmcModel: transition entry (" << to << "," << from << ") = " << p
                   << " outside [0,1]";
                throw ModelValidityError(os.str(), static_cast<int>(to), static_cast<int>(from));
            }
        }
    }
    if (max_column_sum_error() > 1e-12) throw ParameterError("FsmcModel: columns must sum to 1");
}

double FsmcModel::max_column_sum_error() const {
    double worst = 0.0;
    for (std::size_t from = 0; from < size(); ++from) {
        double s = 0.0;
        for (std::size_t to = 0; to < size(); ++to) s += transition(to, from);
        worst = std::max(worst, std::abs(s - 1.0));
    }
    return worst;
}

namespace {
std::size_t sample_discrete(const double* p, std::size_t n, std::mt19937_64& rng) {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += p[i];
        if (u < acc) return i;
    }
    // Round-off: return the last state carrying mass.
    for (std::size_t i = n; i-- > 0;)
        if (p[i] > 0.0) return i;
    return n - 1;
}
}  // namespace

std::size_t FsmcModel::sample_next(std::size_t from, std::mt19937_64& rng) const {
    return sample_discrete(column(from), size(), rng);
}

std::size_t FsmcModel::sample_stationary(std::mt19937_64& rng) const {
    return sample_discrete(stationary_.data(), size(), rng);
}

void ChannelParams::validate() const {
    check_gain(mean_square_gain);
    if (!(doppler_product > 0.0 && doppler_product < 0.5))
        throw ParameterError("doppler product f_D T_s must lie in (0, 0.5)");
    if (!(noise_variance > 0.0)) throw ParameterError("channel noise variance must be positive");
}

QuantizerSpec design_moe_thresholds(std::size_t levels, double mean_square_gain) {
    check_levels(levels);
    check_gain(mean_square_gain);
    QuantizerSpec q;
    q.method = QuantizerMethod::Moe;
    q.boundaries.resize(levels + 1);
    const double denom = static_cast<double>(levels + 1);
    for (std::size_t i = 0; i < levels; ++i)
        q.boundaries[i] = std::sqrt(-mean_square_gain * std::log1p(-static_cast<double>(i) / denom));
    q.boundaries[0] = 0.0;
    q.boundaries[levels] = kInf;
    return q;
}

QuantizerSpec design_mmae_thresholds(std::size_t levels, double mean_square_gain) {
    check_levels(levels);
    check_gain(mean_square_gain);
    std::vector<double> interior;
    // d_1 = 2 t^2 must stay below 1, so t lies in (0, 1/sqrt(2)].
    double lo = 0.0;
    double hi = std::numbers::sqrt2 / 2.0;
    const double scale = std::sqrt(mean_square_gain);
    const double tol = 1e-13;
    int iter = 0;
    for (; iter < 200 && hi - lo > tol; ++iter) {
        const double mid = 0.5 * (lo + hi);
        const double r = mmae_shoot(mid, levels, interior);
        if (r > 0.0) hi = mid;
        else lo = mid;
    }
    if (hi - lo > tol) throw NumericError("design_mmae_thresholds: bisection did not converge", lo);
    const double residual = mmae_shoot(0.5 * (lo + hi), levels, interior);
    if (!std::isfinite(residual))
        throw NumericError("design_mmae_thresholds: no stationary point found", lo);

    QuantizerSpec q;
    q.method = QuantizerMethod::Mmae;
    q.boundaries.reserve(levels + 1);
    q.boundaries.push_back(0.0);
    for (double u : interior) q.boundaries.push_back(u * scale);
    q.boundaries.push_back(kInf);
    q.validate();
    return q;
}

double mean_absolute_error(const QuantizerSpec& q, double mean_square_gain) {
    q.validate();
    check_gain(mean_square_gain);
    const double scale = std::sqrt(mean_square_gain);
    double mae = 0.0;
    for (std::size_t l = 0; l < q.levels(); ++l) {
        const double a = q.lower(l) / scale;
        const double b = q.upper(l) / scale;
        mae += unit_partial_mean(a, b) - a * (unit_survival(a) - unit_survival(b));
    }
    return mae * scale;
}

std::vector<double> level_probabilities(const QuantizerSpec& q, double mean_square_gain) {
    q.validate();
    check_gain(mean_square_gain);
    std::vector<double> phi(q.levels());
    for (std::size_t l = 0; l < q.levels(); ++l) {
        const double xa = q.lower(l) * q.lower(l) / mean_square_gain;
        const double xb = std::isinf(q.upper(l)) ? kInf : q.upper(l) * q.upper(l) / mean_square_gain;
        phi[l] = std::exp(log_cell_probability(xa, xb));
    }
    return phi;
}

double level_crossing_rate(double x, const ChannelParams& p) {
    if (std::isinf(x) || x <= 0.0) return 0.0;
    const double r = x / p.mean_square_gain;
    return std::sqrt(2.0 * std::numbers::pi * r) * p.doppler_product * std::exp(-r);
}

FsmcModel build_channel_fsmc(const QuantizerSpec& q, const ChannelParams& p) {
    q.validate();
    p.validate();
    const std::size_t L = q.levels();
    const double gamma = p.mean_square_gain;
    std::vector<double> log_phi(L);
    for (std::size_t l = 0; l < L; ++l) {
        const double xa = q.lower(l) * q.lower(l) / gamma;
        const double xb = std::isinf(q.upper(l)) ? kInf : q.upper(l) * q.upper(l) / gamma;
        log_phi[l] = log_cell_probability(xa, xb);
        if (!std::isfinite(log_phi[l])) {
            std::ostringstream os;
            os << "build_channel_fsmc: level " << l << " has zero probability";
            throw ModelValidityError(os.str(), static_cast<int>(l), static_cast<int>(l));
        }
    }
    // G(b^2) / phi_l in log space: 0.5 log(2 pi b^2/gamma) + log(f_D T_s) - b^2/gamma - log phi_l.
    auto crossing_ratio = [&](double boundary, std::size_t l) {
        const double r = boundary * boundary / gamma;
        return std::exp(0.5 * std::log(2.0 * std::numbers::pi * r) + std::log(p.doppler_product) - r -
                        log_phi[l]);
    };

    std::vector<double> matrix(L * L, 0.0);
    for (std::size_t l = 0; l < L; ++l) {
        const double up = (l + 1 < L) ? crossing_ratio(q.upper(l), l) : 0.0;
        const double down = (l > 0) ? crossing_ratio(q.lower(l), l) : 0.0;
        const double stay = 1.0 - up - down;
        auto check = [&](double v, std::size_t k) {
            if (!(v >= 0.0 && v <= 1.0)) {
                std::ostringstream os;
                os << "build_channel_fsmc: transition entry (" << k << "," << l << ") = " << v
                   << " is outside [0,1]; f_D T_s = " << p.doppler_product
                   << " is too large for this quantizer";
                throw ModelValidityError(os.str(), static_cast<int>(k), static_cast<int>(l));
            }
        };
        if (l + 1 < L) check(up, l + 1);
        if (l > 0) check(down, l - 1);
        check(stay, l);
        matrix[l * L + l] = stay;
        if (l + 1 < L) matrix[l * L + l + 1] = up;
        if (l > 0) matrix[l * L + l - 1] = down;
    }
    std::vector<double> values(q.boundaries.begin(), q.boundaries.end() - 1);
    std::vector<double> phi(L);
    for (std::size_t l = 0; l < L; ++l) phi[l] = std::exp(log_phi[l]);
    return FsmcModel(std::move(values), std::move(phi), std::move(matrix));
}

double sample_gain_in_level(std::size_t level, const QuantizerSpec& q, double mean_square_gain,
                            std::mt19937_64& rng) {
    if (level >= q.levels()) throw ParameterError("sample_gain_in_level: level out of range");
    const double xa = q.lower(level) * q.lower(level) / mean_square_gain;
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double x;
    if (std::isinf(q.upper(level))) {
        x = xa - std::log1p(-u);
    } else {
        const double xb = q.upper(level) * q.upper(level) / mean_square_gain;
        const double mass = -std::expm1(-(xb - xa));
        x = xa - std::log1p(-u * mass);
    }
    double g = std::sqrt(mean_square_gain * x);
    g = std::max(g, q.lower(level));
    if (g >= q.upper(level)) g = std::nextafter(q.upper(level), 0.0);
    return g;
}

}  // namespace ehpc
