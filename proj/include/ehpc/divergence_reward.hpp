#pragma once

#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "ehpc/energy_model.hpp"
#include "ehpc/fading_channel.hpp"

namespace ehpc {

/// Coefficients of the moment-matched J-divergence.
struct JCoefficients {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    double d = 0.0;

    static JCoefficients from_rates(double pf, double pd);
};

/// (sigma^2 + A u) / (sigma^2 + B u) + (sigma^2 + C u) / (sigma^2 + D u), u = g^2 alpha^2.
double j_pointwise(double gain, double amplitude, const JCoefficients& k, double noise_var);

/// Symmetric divergence of two Gaussians written as
/// (v1 + dm^2) / v0 + (v0 + dm^2) / v1, the convention used for J above.
double gaussian_j_divergence(double m0, double v0, double m1, double v1);

struct MomentMatch {
    double mean0, var0, mean1, var1;
};

/// First two moments of y = g alpha 1[transmit] + w under each hypothesis.
MomentMatch moment_match(double gain, double amplitude, double pf, double pd, double noise_var);

/// Exponent convention inside the closed-form antiderivative. Consistent
/// uses exp(-y / gamma), the Rayleigh-power density; Literal uses exp(-y gamma).
enum class OmegaRate { Consistent, Literal };

/// How the per-level expectation is normalized. Weighted returns the slice
/// integral over the cell (sums to the unconditional mean over all cells);
/// Conditional divides it by the cell probability.
enum class JHatForm { Weighted, Conditional };

/// State-conditioned reward or the level-probability average of it.
enum class RewardAveraging { State, PhiAveraged };

struct RewardOptions {
    OmegaRate omega_rate = OmegaRate::Consistent;
    JHatForm jhat_form = JHatForm::Weighted;
    RewardAveraging averaging = RewardAveraging::State;
};

std::string to_string(OmegaRate v);
std::string to_string(JHatForm v);
std::string to_string(RewardAveraging v);
OmegaRate omega_rate_from_string(const std::string& s);
JHatForm jhat_form_from_string(const std::string& s);
RewardAveraging reward_averaging_from_string(const std::string& s);

/// Antiderivative in y = g^2 of J(sqrt(y), sqrt(x)) times the exponential
/// density of g^2. Returns 0 at y = +inf.
double omega(double x, double y, const JCoefficients& k, double noise_var, double mean_square_gain,
             OmegaRate rate = OmegaRate::Consistent);

/// Expectation of J over the gain restricted to cell `level`.
double j_hat_level(std::size_t level, double amplitude, const QuantizerSpec& q, const JCoefficients& k,
                   double mean_square_gain, double noise_var, OmegaRate rate = OmegaRate::Consistent,
                   JHatForm form = JHatForm::Weighted);

std::vector<double> j_hat_all(double amplitude, const QuantizerSpec& q, const JCoefficients& k,
                              double mean_square_gain, double noise_var, const RewardOptions& opt = {});

/// sum_k Psi[k, level] * j_hat[k] over the adjacent states of `level`.
double j_bar_level(std::size_t level, const FsmcModel& channel, const std::vector<double>& j_hat);

/// Everything the reward of one sensor depends on.
struct SensorRewardContext {
    JCoefficients coeffs;
    double transmit_prob = 0.5;  // zeta-hat_1
    QuantizerSpec quantizer;
    FsmcModel channel;
    double mean_square_gain = 1.0;
    double noise_var = 1.0;
    BatterySpec battery;
    RewardOptions options;
};

/// Reward for spending `cells` when the previous-slot level was `level`.
/// Zero when cells == 0.
double immediate_reward(std::size_t level, int cells, const SensorRewardContext& ctx);

/// Reward per (level, spend cells) for one sensor; spend runs 0..capacity.
class RewardTable {
public:
    RewardTable() = default;
    explicit RewardTable(const SensorRewardContext& ctx);

    std::size_t levels() const { return levels_; }
    int max_cells() const { return max_cells_; }
    double at(std::size_t level, int cells) const { return values_[level * (max_cells_ + 1) + cells]; }

    /// Rows `sensor,level,spend_cells,reward`; pass header=false to append.
    void write_csv(std::ostream& os, std::size_t sensor, bool header = true) const;

private:
    std::size_t levels_ = 0;
    int max_cells_ = 0;
    std::vector<double> values_;
};

}  // namespace ehpc
