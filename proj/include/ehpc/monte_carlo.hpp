#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "ehpc/mdp_core.hpp"

namespace ehpc {

/// Per-sensor side information the fusion center uses for one sensor.
struct FusionInput {
    double gain = 0.0;
    double amplitude = 0.0;
    double pf = 0.0;
    double pd = 0.0;
    double noise_var = 1.0;
};

/// Log-likelihood ratio of the received vector under the two Gaussian
/// mixtures, summed over sensors (log-sum-exp per term).
double fusion_llr(const std::vector<double>& received, const std::vector<FusionInput>& side);

/// Chooses spend cells for every sensor from the local states.
using SpendRule =
    std::function<void(const std::vector<std::size_t>& local_states, std::mt19937_64& rng, std::vector<int>& out)>;

SpendRule policy_rule(const NetworkPolicy& policy);
/// Fresh uniform feasible spend vector every slot.
SpendRule random_rule(const NetworkModel& net);

enum class FusionKnowledge { Genie, Quantized };
std::string to_string(FusionKnowledge k);
FusionKnowledge fusion_knowledge_from_string(const std::string& s);

struct McOptions {
    std::size_t runs = 10000;
    std::uint64_t seed = 1;
    std::size_t warmup_slots = 100;
    std::size_t workers = 1;
    FusionKnowledge fusion = FusionKnowledge::Genie;
    std::size_t pilot_runs = 2000;  // quantized-knowledge calibration
};

struct McEstimate {
    double p_e = 0.0;
    double p_e_se = 0.0;
    double avg_j = 0.0;
    double avg_j_se = 0.0;
    double avg_power_mw = 0.0;  // radiated, silent slots count as zero
    std::size_t violations = 0;  // runs whose prescribed total power exceeds the budget
    std::size_t runs = 0;
    std::uint64_t seed = 0;
};

/// Independent stationary single-slot experiments.
McEstimate run_episodes(const NetworkModel& net, const SpendRule& rule, const McOptions& opt);

/// Per-run generator: splitmix64 expansion of (root seed, run index).
std::mt19937_64 run_stream(std::uint64_t root_seed, std::uint64_t index);

struct TrajectoryStats {
    std::size_t slots = 0;
    std::size_t causality_violations = 0;  // spend above the battery content
    std::size_t battery_range_violations = 0;
    std::size_t closure_violations = 0;  // battery update disagrees with the energy balance
    std::size_t power_violations = 0;
    double error_rate = 0.0;
    double avg_j = 0.0;
};

/// One long correlated trajectory with full state bookkeeping checks.
TrajectoryStats run_trajectory(const NetworkModel& net, const SpendRule& rule, std::size_t slots,
                               std::uint64_t seed);

struct SweepRow {
    std::string axis;
    double value = 0.0;
    McEstimate estimate;
};

/// Evaluates every value, up to `workers` points at a time; rows come back
/// in input order. Errors are rethrown with the axis value attached.
std::vector<SweepRow> sweep(const std::string& axis, const std::vector<double>& values,
                            const std::function<McEstimate(double)>& evaluate, std::size_t workers = 1);

void write_mc_header(std::ostream& os);
void write_mc_row(std::ostream& os, const SweepRow& row);

}  // namespace ehpc
