#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ehpc/mdp_core.hpp"
#include "ehpc/monte_carlo.hpp"
#include "ehpc/network_model.hpp"

namespace ehpc {

struct SensingBlock {
    std::optional<double> snr_s_db = 3.0;
    std::optional<double> amplitude;  // overrides snr_s_db when set
    double noise_var = 1.0;
    std::string mode = "fixed_pd";  // fixed_pd | fixed_threshold
    double pd_bar = 0.9;
    double threshold = 0.0;
    double prior0 = 0.5;
    double prior1 = 0.5;
};

struct DeploymentBlock {
    std::string kind = "fixed";  // fixed | random_disk
    double p0_dbw = 0.0;
    double r0_m = 1.0;
    double r1_m = 100.0;
    double path_loss_exp = 2.0;
    std::string intensity_form = "as_written";  // as_written | power_amplitude
};

struct QuantizerBlock {
    std::string method = "moe";  // moe | mmae | explicit
    std::size_t levels = 4;
    std::vector<double> boundaries;  // finite lower thresholds, explicit method
};

struct ChannelBlock {
    double mean_square_gain = 1.0;
    double doppler_product = 0.05;
    double noise_var = 1.0;
    QuantizerBlock quantizer;
};

struct EnergyBlock {
    double rho = 0.5;
    std::vector<int> harvest_levels_cells{0, 1, 2, 3};
    int capacity_cells = 5;
    double cell_energy_mj = 1.0;
    double slot_s = 1.0;
};

struct RewardBlock {
    std::string averaging = "state";
    std::string jhat = "weighted";
    std::string omega_rate = "consistent";
};

/// Everything that can differ between sensors.
struct SensorBlock {
    SensingBlock sensing;
    DeploymentBlock deployment;
    ChannelBlock channel;
    EnergyBlock energy;
    RewardBlock reward;
};

struct McBlock {
    std::size_t runs = 10000;
    std::uint64_t seed = 1;
    std::size_t warmup_slots = 100;
    std::string fusion = "genie";
    std::size_t workers = 1;
    std::size_t pilot_runs = 2000;
};

struct SweepBlock {
    std::string axis;
    std::vector<double> values;
    std::vector<std::string> modes{"suboptimal"};
};

struct ExperimentConfig {
    std::size_t sensors = 3;
    double p_tot_mw = 5.0;
    double eta = 0.9;
    SensorBlock base;
    std::vector<nlohmann::json> sensor_overrides;  // JSON merge patches over `base`
    SolverOptions solver;
    McBlock mc;
    SweepBlock sweep;
};

/// Parses and validates. Unknown keys and bad values throw ConfigError.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
nlohmann::json to_json(const ExperimentConfig& c);

/// Resolved sensor block for sensor n (base plus its override, if any).
SensorBlock sensor_block(const ExperimentConfig& c, std::size_t n);
SensorConfig to_sensor_config(const SensorBlock& b);
NetworkModel build_network(const ExperimentConfig& c);

/// Digest of the model-defining part of the config (network and sensors).
std::string model_hash(const ExperimentConfig& c);

/// Sweep axes: p_tot_mw, capacity_cells, sensors, snr_s_db, levels, eta,
/// rho, cell_energy_mj, p0_dbw.
const std::vector<std::string>& sweep_axes();
ExperimentConfig with_axis_value(const ExperimentConfig& c, const std::string& axis, double value);

enum class SolveMode { Optimal, Suboptimal, Random };
SolveMode solve_mode_from_string(const std::string& s);
std::string to_string(SolveMode m);

struct SolvedPolicy {
    NetworkPolicy policy;
    std::optional<SolveReport> report;
    bool per_slot_random = false;  // random mode whose table would not fit in memory
};

SolvedPolicy solve_policy(const NetworkModel& net, const ExperimentConfig& c, SolveMode mode);
McEstimate simulate_policy(const NetworkModel& net, const ExperimentConfig& c, const SolvedPolicy& p);

/// Command implementations used by the CLI. Each writes into `out_dir`
/// (created if missing) and a short summary to `log`.
void cmd_design_quantizer(const ExperimentConfig& c, const std::string& out_dir, std::ostream& log);
void cmd_solve(const ExperimentConfig& c, SolveMode mode, const std::string& out_dir, bool plotdata,
               std::ostream& log);
void cmd_simulate(const ExperimentConfig& c, SolveMode mode, const std::string& policy_dir,
                  const std::string& out_dir, std::ostream& log);
void cmd_sweep(const ExperimentConfig& c, const std::string& out_dir, bool plotdata, std::ostream& log);

/// Maps library exceptions to the CLI exit codes (2 config, 3 convergence, 4 guard, 1 other).
int exit_code_for(const std::exception& e);

}  // namespace ehpc
