#include "ehpc/sensing.hpp"

#include <cmath>

#include "ehpc/errors.hpp"
#include "ehpc/special_functions.hpp"

namespace ehpc {
namespace {

CensorStats finish(double pf, double pd, const SensingParams& p) {
    if (pf > pd + 1e-15) throw NumericError("censor stats: P_f exceeds P_d", pf - pd);
    CensorStats s;
    s.pf = pf;
    s.pd = pd;
    s.transmit_prob = p.prior0 * pf + p.prior1 * pd;
    s.silent_prob = 1.0 - s.transmit_prob;
    return s;
}

// Transmit probabilities at amplitude a (Gaussian shift family).
std::pair<double, double> shift_test(double a, const SensingParams& p) {
    const double s = a / std::sqrt(p.obs_noise_var);
    if (p.mode == CensorMode::FixedPd) return {q_function(q_inverse(p.pd_bar) + s), p.pd_bar};
    const double half = a * a / (2.0 * p.obs_noise_var);
    return {q_function((p.threshold + half) / s), q_function((p.threshold - half) / s)};
}

}  // namespace

void SensingParams::validate() const {
    if (!(signal_amplitude > 0.0)) throw ParameterError("signal amplitude must be positive");
    if (!(obs_noise_var > 0.0)) throw ParameterError("observation noise variance must be positive");
    if (!(prior0 >= 0.0 && prior1 >= 0.0) || std::abs(prior0 + prior1 - 1.0) > 1e-12)
        throw ParameterError("hypothesis priors must be nonnegative and sum to 1");
    if (mode == CensorMode::FixedPd && !(pd_bar > 0.0 && pd_bar < 1.0))
        throw ParameterError("target detection probability must lie in (0, 1)");
    if (mode == CensorMode::FixedThreshold && std::isnan(threshold))
        throw ParameterError("censoring threshold must be a number");
}

SensingParams SensingParams::from_snr_db(double snr_db, double obs_noise_var) {
    SensingParams p;
    p.obs_noise_var = obs_noise_var;
    p.signal_amplitude = std::sqrt(obs_noise_var) * std::pow(10.0, snr_db / 20.0);
    return p;
}

void DeploymentModel::validate() const {
    if (kind == DeploymentKind::Fixed) return;
    if (!(source_power > 0.0)) throw ParameterError("source power P_0 must be positive");
    if (!(inner_radius > 0.0 && inner_radius < outer_radius))
        throw ParameterError("deployment radii must satisfy 0 < r_0 < r_1");
    if (path_loss_exponent != 2.0)
        throw ParameterError("random-disk intensity law is defined for path-loss exponent 2 only");
}

double DeploymentModel::amplitude_for(double intensity) const {
    return form == IntensityForm::AsWritten ? intensity : std::sqrt(intensity);
}

double dbw_to_watts(double dbw) { return std::pow(10.0, dbw / 10.0); }

CensorStats censor_stats_fixed(const SensingParams& p) {
    p.validate();
    const auto [pf, pd] = shift_test(p.signal_amplitude, p);
    return finish(pf, pd, p);
}

double intensity_pdf(double z, const DeploymentModel& d) {
    if (z < d.min_intensity() || z > d.max_intensity()) return 0.0;
    return std::sqrt(d.source_power) / (2.0 * z * std::sqrt(z) * (d.outer_radius - d.inner_radius));
}

CensorStats censor_stats_random_disk(const SensingParams& p, const DeploymentModel& d) {
    p.validate();
    d.validate();
    if (d.kind != DeploymentKind::RandomDisk)
        throw ParameterError("censor_stats_random_disk needs a RandomDisk deployment");
    // Integrate over u = log z; f(z) dz = f(e^u) e^u du.
    const double lo = std::log(d.min_intensity());
    const double hi = std::log(d.max_intensity());
    constexpr double tol = 1e-8;
    auto weighted = [&](auto&& h) {
        return integrate(
                   [&](double u) {
                       const double z = std::exp(u);
                       return h(z) * intensity_pdf(z, d) * z;
                   },
                   lo, hi, tol)
            .value;
    };
    const double pf = weighted([&](double z) { return shift_test(d.amplitude_for(z), p).first; });
    const double pd = p.mode == CensorMode::FixedPd
                          ? p.pd_bar
                          : weighted([&](double z) { return shift_test(d.amplitude_for(z), p).second; });
    return finish(pf, pd, p);
}

CensorStats censor_stats(const SensingParams& p, const DeploymentModel& d) {
    return d.kind == DeploymentKind::Fixed ? censor_stats_fixed(p) : censor_stats_random_disk(p, d);
}

double sample_intensity(const DeploymentModel& d, std::mt19937_64& rng) {
    const double r = std::uniform_real_distribution<double>(d.inner_radius, d.outer_radius)(rng);
    return d.source_power / (r * r);
}

double sample_observation(int hypothesis, const SensingParams& p, const DeploymentModel& d,
                          std::mt19937_64& rng) {
    const double noise = std::normal_distribution<double>(0.0, std::sqrt(p.obs_noise_var))(rng);
    if (hypothesis == 0) return noise;
    const double a = d.kind == DeploymentKind::Fixed ? p.signal_amplitude : d.amplitude_for(sample_intensity(d, rng));
    return a + noise;
}

}  // namespace ehpc
