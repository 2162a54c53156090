#pragma once

#include <random>

namespace ehpc {

enum class CensorMode { FixedThreshold, FixedPd };

/// Local observation model x = A 1[h = 1] + v, v ~ N(0, obs_noise_var).
struct SensingParams {
    double signal_amplitude = 1.0;
    double obs_noise_var = 1.0;
    double prior0 = 0.5;  // zeta_0 = Pr(h = 0)
    double prior1 = 0.5;
    CensorMode mode = CensorMode::FixedPd;
    double threshold = 0.0;  // LLR threshold, FixedThreshold mode
    double pd_bar = 0.9;     // target detection probability, FixedPd mode

    void validate() const;
    static SensingParams from_snr_db(double snr_db, double obs_noise_var = 1.0);
};

enum class DeploymentKind { Fixed, RandomDisk };

/// How the random-disk intensity z enters the Gaussian shift test.
/// AsWritten uses z in place of the amplitude A; PowerAmplitude treats z as
/// received power so the amplitude is sqrt(z).
enum class IntensityForm { AsWritten, PowerAmplitude };

struct DeploymentModel {
    DeploymentKind kind = DeploymentKind::Fixed;
    double source_power = 1.0;  // P_0, linear watts
    double inner_radius = 1.0;  // r_0 [m]
    double outer_radius = 100.0;
    double path_loss_exponent = 2.0;
    IntensityForm form = IntensityForm::AsWritten;

    void validate() const;
    double min_intensity() const { return source_power / (outer_radius * outer_radius); }
    double max_intensity() const { return source_power / (inner_radius * inner_radius); }
    double amplitude_for(double intensity) const;
};

double dbw_to_watts(double dbw);

struct CensorStats {
    double pf = 0.0;         // Pr(transmit | h = 0)
    double pd = 0.0;         // Pr(transmit | h = 1)
    double silent_prob = 1;  // zeta-hat_0
    double transmit_prob = 0;  // zeta-hat_1
};

/// Transmit probabilities of an LLR-censoring sensor at a known amplitude.
CensorStats censor_stats_fixed(const SensingParams& p);

/// Same statistics averaged over the random-disk intensity law.
/// Throws NumericError when the quadrature misses its 1e-8 tolerance.
CensorStats censor_stats_random_disk(const SensingParams& p, const DeploymentModel& d);

/// Dispatches on the deployment kind.
CensorStats censor_stats(const SensingParams& p, const DeploymentModel& d);

/// Density of z = P_0 / r^2 for r ~ Uniform(r_0, r_1).
double intensity_pdf(double z, const DeploymentModel& d);

double sample_intensity(const DeploymentModel& d, std::mt19937_64& rng);

/// One observation under hypothesis h (0 or 1).
double sample_observation(int hypothesis, const SensingParams& p, const DeploymentModel& d,
                          std::mt19937_64& rng);

}  // namespace ehpc
