#include "ehpc/divergence_reward.hpp"

#include <cmath>
#include <iomanip>
#include <limits>

#include "ehpc/errors.hpp"
#include "ehpc/special_functions.hpp"

namespace ehpc {

JCoefficients JCoefficients::from_rates(double pf, double pd) {
    if (!(pf >= 0.0 && pd <= 1.0 && pf <= pd))
        throw ParameterError("J coefficients need 0 <= P_f <= P_d <= 1");
    JCoefficients k;
    k.a = pf * (1.0 - pd) + pd * (pd - pf);
    k.c = pd * (1.0 - pf) - pf * (pd - pf);
    k.b = pd * (1.0 - pd);
    k.d = pf * (1.0 - pf);
    return k;
}

double j_pointwise(double gain, double amplitude, const JCoefficients& k, double noise_var) {
    const double u = gain * gain * amplitude * amplitude;
    return (noise_var + k.a * u) / (noise_var + k.b * u) + (noise_var + k.c * u) / (noise_var + k.d * u);
}

double gaussian_j_divergence(double m0, double v0, double m1, double v1) {
    const double dm2 = (m1 - m0) * (m1 - m0);
    return (v1 + dm2) / v0 + (v0 + dm2) / v1;
}

MomentMatch moment_match(double gain, double amplitude, double pf, double pd, double noise_var) {
    const double s = gain * amplitude;
    return {s * pf, s * s * pf * (1.0 - pf) + noise_var, s * pd, s * s * pd * (1.0 - pd) + noise_var};
}

std::string to_string(OmegaRate v) { return v == OmegaRate::Consistent ? "consistent" : "literal"; }
std::string to_string(JHatForm v) { return v == JHatForm::Weighted ? "weighted" : "conditional"; }
std::string to_string(RewardAveraging v) { return v == RewardAveraging::State ? "state" : "phi_averaged"; }

OmegaRate omega_rate_from_string(const std::string& s) {
    if (s == "consistent") return OmegaRate::Consistent;
    if (s == "literal") return OmegaRate::Literal;
    throw ParameterError("unknown omega rate '" + s + "' (expected consistent|literal)");
}

JHatForm jhat_form_from_string(const std::string& s) {
    if (s == "weighted") return JHatForm::Weighted;
    if (s == "conditional") return JHatForm::Conditional;
    throw ParameterError("unknown jhat form '" + s + "' (expected weighted|conditional)");
}

RewardAveraging reward_averaging_from_string(const std::string& s) {
    if (s == "state") return RewardAveraging::State;
    if (s == "phi_averaged") return RewardAveraging::PhiAveraged;
    throw ParameterError("unknown reward averaging '" + s + "' (expected state|phi_averaged)");
}

namespace {

// Antiderivative of (s2 + p x u) / (s2 + q x u) * kappa exp(-kappa u) at u = y.
double ratio_antiderivative(double p, double q, double x, double y, double s2, double kappa) {
    if (std::isinf(y)) return 0.0;
    if (q == 0.0) return -std::exp(-kappa * y) * (1.0 + p * x / s2 * (y + 1.0 / kappa));
    const double ratio = p / q;
    const double shift = s2 / (q * x);
    const double ei_part = exp_times_ei(kappa * shift, -kappa * (y + shift));
    return -ratio * std::exp(-kappa * y) + s2 * (1.0 - ratio) * kappa / (q * x) * ei_part;
}

}  // namespace

double omega(double x, double y, const JCoefficients& k, double noise_var, double mean_square_gain,
             OmegaRate rate) {
    const double kappa = rate == OmegaRate::Consistent ? 1.0 / mean_square_gain : mean_square_gain;
    if (std::isinf(y)) return 0.0;
    if (x == 0.0) return -2.0 * std::exp(-kappa * y);
    const double v = ratio_antiderivative(k.a, k.b, x, y, noise_var, kappa) +
                     ratio_antiderivative(k.c, k.d, x, y, noise_var, kappa);
    if (!std::isfinite(v)) throw NumericError("omega is not finite", v);
    return v;
}

double j_hat_level(std::size_t level, double amplitude, const QuantizerSpec& q, const JCoefficients& k,
                   double mean_square_gain, double noise_var, OmegaRate rate, JHatForm form) {
    if (level >= q.levels()) throw ParameterError("gain level out of range");
    const double lo = q.lower(level);
    const double hi = q.upper(level);
    const double phi = std::exp(-lo * lo / mean_square_gain) - std::exp(-hi * hi / mean_square_gain);
    double slice;
    if (amplitude == 0.0) {
        slice = 2.0 * phi;
    } else {
        const double x = amplitude * amplitude;
        const double y_hi = std::isinf(hi) ? hi : hi * hi;
        slice = omega(x, y_hi, k, noise_var, mean_square_gain, rate) -
                omega(x, lo * lo, k, noise_var, mean_square_gain, rate);
    }
    if (form == JHatForm::Weighted) return slice;
    if (!(phi > 0.0)) throw NumericError("gain level has zero probability", phi);
    return slice / phi;
}

std::vector<double> j_hat_all(double amplitude, const QuantizerSpec& q, const JCoefficients& k,
                              double mean_square_gain, double noise_var, const RewardOptions& opt) {
    std::vector<double> out(q.levels());
    for (std::size_t l = 0; l < out.size(); ++l)
        out[l] = j_hat_level(l, amplitude, q, k, mean_square_gain, noise_var, opt.omega_rate, opt.jhat_form);
    return out;
}

double j_bar_level(std::size_t level, const FsmcModel& channel, const std::vector<double>& j_hat) {
    const std::size_t n = channel.size();
    if (level >= n || j_hat.size() != n) throw ParameterError("j_bar_level: dimension mismatch");
    const std::size_t first = level == 0 ? 0 : level - 1;
    const std::size_t last = std::min(level + 1, n - 1);
    double sum = 0.0;
    for (std::size_t k = first; k <= last; ++k) sum += channel.transition(k, level) * j_hat[k];
    return sum;
}

double immediate_reward(std::size_t level, int cells, const SensorRewardContext& ctx) {
    if (cells == 0) return 0.0;
    const double amp = ctx.battery.amplitude(cells);
    const auto j_hat = j_hat_all(amp, ctx.quantizer, ctx.coeffs, ctx.mean_square_gain, ctx.noise_var, ctx.options);
    if (ctx.options.averaging == RewardAveraging::State)
        return ctx.transmit_prob * j_bar_level(level, ctx.channel, j_hat);
    const auto phi = level_probabilities(ctx.quantizer, ctx.mean_square_gain);
    double avg = 0.0;
    for (std::size_t l = 0; l < phi.size(); ++l) avg += phi[l] * j_bar_level(l, ctx.channel, j_hat);
    return ctx.transmit_prob * avg;
}

RewardTable::RewardTable(const SensorRewardContext& ctx)
    : levels_(ctx.quantizer.levels()), max_cells_(ctx.battery.capacity) {
    if (ctx.channel.size() != levels_) throw ParameterError("reward table: channel and quantizer sizes differ");
    values_.assign(levels_ * (max_cells_ + 1), 0.0);
    for (std::size_t l = 0; l < levels_; ++l)
        for (int c = 1; c <= max_cells_; ++c) {
            const double r = immediate_reward(l, c, ctx);
            if (!std::isfinite(r)) throw NumericError("reward is not finite", r);
            values_[l * (max_cells_ + 1) + c] = r;
        }
}

void RewardTable::write_csv(std::ostream& os, std::size_t sensor, bool header) const {
    if (header) os << "sensor,level,spend_cells,reward\n";
    const auto old = os.precision(std::numeric_limits<double>::max_digits10);
    for (std::size_t l = 0; l < levels_; ++l)
        for (int c = 0; c <= max_cells_; ++c) os << sensor << ',' << l << ',' << c << ',' << at(l, c) << '\n';
    os.precision(old);
}

}  // namespace ehpc
