#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "ehpc/network_model.hpp"

namespace ehpc {

/// Successor law of the network problem. Hypothesis conditions every
/// sensor's transmission on the shared hypothesis, so each sensor spends
/// only when it transmits. AnySensor spends every sensor's energy whenever
/// at least one sensor transmits (probability 1 - prod zeta-hat_0).
enum class GlobalMixing { Hypothesis, AnySensor };
std::string to_string(GlobalMixing m);
GlobalMixing global_mixing_from_string(const std::string& s);

/// Subgradient step. PerSensor divides beta0 / i by N so the multiplier
/// dynamics do not speed up with the size of the summed violation; Total
/// applies beta0 / i to the network violation as is. Both share the same
/// fixed point.
enum class StepScale { PerSensor, Total };
std::string to_string(StepScale m);
StepScale step_scale_from_string(const std::string& s);

/// Step counter i in beta0 / i. Harmonic advances it every outer iteration;
/// Kesten advances a multiplier's counter only when its violation changes
/// sign, so a one-sided approach keeps a constant step.
enum class StepRule { Kesten, Harmonic };
std::string to_string(StepRule r);
StepRule step_rule_from_string(const std::string& s);

struct SolverOptions {
    double eps1 = 1e-4;
    double eps2 = 1e-2;
    double beta0 = 0.5;  // step beta_i = beta0 / i
    std::size_t max_sweeps = 100000;
    std::size_t max_dual_iterations = 5000;
    std::size_t memory_budget_bytes = std::size_t{2} << 30;
    std::size_t oscillation_window = 50;
    GlobalMixing mixing = GlobalMixing::Hypothesis;
    StepScale step_scale = StepScale::PerSensor;
    StepRule step_rule = StepRule::Kesten;
};

/// Stop threshold on max |L^j - L^{j-1}|: eps1 (1 - eta) / (2 eta).
double bellman_threshold(double eps1, double eta);

/// L = sum_n r_n - lambda (sum_n alpha_n^2 - P_tot).
double modified_reward_global(const std::vector<double>& rewards, const std::vector<double>& powers_mw,
                              double lambda, double p_tot_mw);
/// X = r - lambda (alpha^2 - P_tot / N).
double modified_reward_local(double reward, double power_mw, double lambda, double p_tot_mw, std::size_t sensors);

/// Finite MDP with explicit sparse kernels. Actions of each state are listed
/// in increasing spend order; `label` holds the spend in cells.
struct ExplicitMdp {
    std::size_t states = 0;
    std::vector<std::size_t> action_begin;  // size states + 1
    std::vector<int> label;
    std::vector<double> reward;
    std::vector<std::size_t> succ_begin;  // size actions + 1
    std::vector<std::uint32_t> succ_state;
    std::vector<double> succ_prob;

    std::size_t actions() const { return label.size(); }
    std::size_t action_count(std::size_t s) const { return action_begin[s + 1] - action_begin[s]; }
    void validate() const;
};

struct ValueIterationResult {
    std::vector<double> value;
    std::vector<std::size_t> action;  // chosen action index (global numbering) per state
    std::vector<double> residuals;
    std::size_t sweeps = 0;
};

/// Synchronous value iteration from `warm_start` (zeros when empty). The
/// greedy action is the smallest-spend action within 1e-12 of the maximum.
/// Throws ConvergenceError after `max_sweeps` sweeps.
ValueIterationResult value_iteration(const ExplicitMdp& mdp, double eta, double eps1,
                                     std::size_t max_sweeps = 100000,
                                     const std::vector<double>& warm_start = {});

/// Exact value of a stationary deterministic policy: (I - eta P) v = r.
std::vector<double> evaluate_policy(const ExplicitMdp& mdp, double eta, const std::vector<std::size_t>& action);

struct OracleResult {
    std::vector<double> value;
    std::vector<std::size_t> action;
    std::size_t policies_evaluated = 0;
};

/// Enumerates every deterministic policy. Throws GuardError when there are
/// more than `max_policies` of them.
OracleResult brute_force_policy_oracle(const ExplicitMdp& mdp, double eta, double max_policies = 1e6);

/// Stationary distribution of the chain induced by `action` (lazy power iteration).
std::vector<double> stationary_distribution(const ExplicitMdp& mdp, const std::vector<std::size_t>& action);

/// Local MDP of one sensor with the transmit/silence-mixed kernel and the
/// uniform-multiplier reward.
ExplicitMdp build_local_mdp(const SensorModel& sensor, double lambda, double p_tot_mw, std::size_t sensors);
void set_local_rewards(ExplicitMdp& mdp, const SensorModel& sensor, double lambda, double p_tot_mw,
                       std::size_t sensors);

enum class PolicyScope { Global, Local };

/// Deterministic stationary policy table. Global tables have one column per
/// sensor and are indexed by the global state (sensor 0 most significant);
/// local tables have one column.
struct Policy {
    PolicyScope scope = PolicyScope::Local;
    std::size_t sensor = 0;  // Local scope only
    std::vector<std::size_t> state_counts;
    std::vector<int> spends;

    std::size_t width() const { return scope == PolicyScope::Global ? state_counts.size() : 1; }
    std::size_t rows() const { return width() == 0 ? 0 : spends.size() / width(); }
    int spend(std::size_t row, std::size_t column) const { return spends[row * width() + column]; }
};

/// Maps a global state index to per-sensor local indices and back.
class GlobalIndexer {
public:
    explicit GlobalIndexer(std::vector<std::size_t> state_counts);
    std::size_t size() const { return total_; }
    std::size_t encode(const std::vector<std::size_t>& local) const;
    void decode(std::size_t global, std::vector<std::size_t>& local) const;

private:
    std::vector<std::size_t> counts_;
    std::vector<std::size_t> strides_;
    std::size_t total_ = 1;
};

/// Either one global table or one local table per sensor.
struct NetworkPolicy {
    enum class Kind { Global, Decentralized } kind = Kind::Decentralized;
    Policy global;
    std::vector<Policy> local;

    void spends(const std::vector<std::size_t>& local_states, std::vector<int>& out) const;
};

struct ResidualRecord {
    std::size_t outer;
    long sensor;  // -1 for the network problem
    std::size_t sweep;
    double residual;
};

struct MultiplierRecord {
    std::size_t iteration;
    double lambda_max;
    double lambda_mean;
    double max_violation_mw;  // positive part, 0 when every constraint holds
    double max_relative_change;
    double max_step;  // largest |lambda_new - lambda_old|
};

struct SolveReport {
    std::string algorithm;
    NetworkPolicy policy;
    std::vector<std::vector<double>> value;  // one vector (global) or one per sensor
    std::vector<double> lambdas;             // final multipliers
    std::vector<MultiplierRecord> multipliers;
    std::vector<ResidualRecord> residuals;
    std::size_t sweeps = 0;
    std::size_t dual_iterations = 0;
    double final_residual = 0.0;
    std::size_t projected_states = 0;
    double seconds = 0.0;
};

void write_residuals_csv(std::ostream& os, const SolveReport& r);
void write_multipliers_csv(std::ostream& os, const SolveReport& r);

/// Centralized per-state multiplier solver over the global state space.
/// Throws GuardError when the tables exceed the memory budget.
SolveReport solve_optimal(const NetworkModel& net, const SolverOptions& opt = {});

/// Decentralized solver with one shared multiplier.
SolveReport solve_suboptimal(const NetworkModel& net, const SolverOptions& opt = {});

/// Uniformly random spend vector per global state subject to the battery and
/// total-power constraints.
NetworkPolicy random_policy(const NetworkModel& net, std::mt19937_64& rng,
                            std::size_t memory_budget_bytes = std::size_t{2} << 30);

/// Draws one uniformly random feasible spend vector.
void random_feasible_spends(const NetworkModel& net, const std::vector<std::size_t>& local_states,
                            std::mt19937_64& rng, std::vector<int>& out);

/// Greedy spend reduction until sum alpha^2 <= P_tot; returns true if changed.
bool project_to_budget(const NetworkModel& net, const std::vector<std::size_t>& local_states,
                       std::vector<int>& spends);

}  // namespace ehpc
