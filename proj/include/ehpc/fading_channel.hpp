#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

namespace ehpc {

enum class QuantizerMethod { Mmae, Moe, Explicit };

std::string to_string(QuantizerMethod m);
QuantizerMethod quantizer_method_from_string(const std::string& s);

/// Channel-gain quantizer with `levels` cells [b_l, b_{l+1}).
///
/// `boundaries` holds levels+1 points: boundaries.front() == 0 and
/// boundaries.back() == +inf. A gain in cell l is reconstructed as its lower
/// boundary. Level indices are 0-based throughout the library.
struct QuantizerSpec {
    std::vector<double> boundaries;
    QuantizerMethod method = QuantizerMethod::Explicit;

    std::size_t levels() const { return boundaries.empty() ? 0 : boundaries.size() - 1; }
    double lower(std::size_t l) const { return boundaries.at(l); }
    double upper(std::size_t l) const { return boundaries.at(l + 1); }
    std::size_t level_of(double gain) const;

    /// Builds a spec from the finite lower boundaries {0, mu_2, ..., mu_L};
    /// the +inf sentinel is appended.
    static QuantizerSpec from_thresholds(const std::vector<double>& thresholds,
                                         QuantizerMethod method = QuantizerMethod::Explicit);
    void validate() const;
};

/// A finite-state Markov chain. transition(k, l) = Pr(next = k | current = l),
/// so every column sums to one.
class FsmcModel {
public:
    FsmcModel() = default;
    FsmcModel(std::vector<double> state_values, std::vector<double> stationary,
              std::vector<double> column_major_transition);

    std::size_t size() const { return values_.size(); }
    const std::vector<double>& state_values() const { return values_; }
    const std::vector<double>& stationary() const { return stationary_; }
    double transition(std::size_t to, std::size_t from) const { return matrix_[from * size() + to]; }
    /// Column `from`: next-state distribution given the current state.
    const double* column(std::size_t from) const { return matrix_.data() + from * size(); }

    double max_column_sum_error() const;
    std::size_t sample_next(std::size_t from, std::mt19937_64& rng) const;
    std::size_t sample_stationary(std::mt19937_64& rng) const;

private:
    std::vector<double> values_;
    std::vector<double> stationary_;
    std::vector<double> matrix_;  // column-major
};

struct ChannelParams {
    double mean_square_gain = 1.0;   // E{g^2}
    double doppler_product = 0.05;   // f_D * T_s
    double noise_variance = 1.0;     // sigma_w^2
    void validate() const;
};

QuantizerSpec design_moe_thresholds(std::size_t levels, double mean_square_gain);
QuantizerSpec design_mmae_thresholds(std::size_t levels, double mean_square_gain);

/// E|g - Q(g)| for Rayleigh g with E{g^2} = mean_square_gain, closed form.
double mean_absolute_error(const QuantizerSpec& q, double mean_square_gain);

/// Pr(g in cell l) = exp(-b_l^2/gamma) - exp(-b_{l+1}^2/gamma).
std::vector<double> level_probabilities(const QuantizerSpec& q, double mean_square_gain);

/// Level crossing rate G(x) = sqrt(2 pi x / gamma) f_D T_s exp(-x / gamma).
double level_crossing_rate(double x, const ChannelParams& p);

/// Adjacent-state FSMC of the quantized gain. Throws ModelValidityError when
/// any entry leaves [0, 1]; entries are never clamped.
FsmcModel build_channel_fsmc(const QuantizerSpec& q, const ChannelParams& p);

/// Draws g from the Rayleigh law truncated to cell `level` (inverse CDF).
double sample_gain_in_level(std::size_t level, const QuantizerSpec& q, double mean_square_gain,
                            std::mt19937_64& rng);

}  // namespace ehpc
