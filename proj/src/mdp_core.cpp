#include "ehpc/mdp_core.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <sstream>

#include "ehpc/errors.hpp"

namespace ehpc {

namespace {

constexpr double kTieTolerance = 1e-12;

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Detects a dual loop that has stopped making progress on both the worst
// constraint violation and the largest relative multiplier change.
bool stalled(const std::vector<MultiplierRecord>& trace, std::size_t window) {
    if (window == 0 || trace.size() <= window) return false;
    if (trace.back().max_violation_mw <= 0.0) return false;
    // Diminishing steps shrink |delta lambda| on a converging run even while
    // the iterates still alternate around the optimum, so progress on any of
    // violation, relative change or step size within the window counts.
    const std::size_t split = trace.size() - window;
    const double inf = std::numeric_limits<double>::infinity();
    double viol[2] = {inf, inf}, rel[2] = {inf, inf}, step[2] = {inf, inf};
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const int w = i < split ? 0 : 1;
        viol[w] = std::min(viol[w], trace[i].max_violation_mw);
        rel[w] = std::min(rel[w], trace[i].max_relative_change);
        step[w] = std::min(step[w], trace[i].max_step);
    }
    return viol[1] >= viol[0] && rel[1] >= rel[0] && step[1] >= step[0];
}

std::string trace_summary(const std::vector<MultiplierRecord>& trace, std::size_t last) {
    std::ostringstream os;
    os << "iteration,lambda_max,max_violation_mw,max_relative_change,max_step";
    const std::size_t start = trace.size() > last ? trace.size() - last : 0;
    for (std::size_t i = start; i < trace.size(); ++i)
        os << "; " << trace[i].iteration << ',' << trace[i].lambda_max << ',' << trace[i].max_violation_mw
           << ',' << trace[i].max_relative_change << ',' << trace[i].max_step;
    return os.str();
}

// Subgradient step on one multiplier. Returns the new value; `converged`
// is cleared unless the update meets the relative stop rule.
double dual_step(double lambda, double violation, double beta, double eps2, bool& converged, double& rel) {
    const double next = std::max(0.0, lambda + beta * violation);
    if (next == 0.0) {
        rel = lambda > 0.0 ? 1.0 : 0.0;
        if (!(violation <= 0.0 && lambda == 0.0)) converged = false;
    } else {
        rel = lambda > 0.0 ? std::abs(next - lambda) / lambda : std::numeric_limits<double>::infinity();
        if (!(rel < eps2)) converged = false;
    }
    return next;
}

}  // namespace

std::string to_string(GlobalMixing m) { return m == GlobalMixing::Hypothesis ? "hypothesis" : "any_sensor"; }

GlobalMixing global_mixing_from_string(const std::string& s) {
    if (s == "hypothesis") return GlobalMixing::Hypothesis;
    if (s == "any_sensor") return GlobalMixing::AnySensor;
    throw ParameterError("unknown global mixing '" + s + "' (expected hypothesis|any_sensor)");
}

std::string to_string(StepScale m) { return m == StepScale::PerSensor ? "per_sensor" : "total"; }

StepScale step_scale_from_string(const std::string& s) {
    if (s == "per_sensor") return StepScale::PerSensor;
    if (s == "total") return StepScale::Total;
    throw ParameterError("unknown step scale '" + s + "' (expected per_sensor|total)");
}

std::string to_string(StepRule r) { return r == StepRule::Kesten ? "kesten" : "harmonic"; }

StepRule step_rule_from_string(const std::string& s) {
    if (s == "kesten") return StepRule::Kesten;
    if (s == "harmonic") return StepRule::Harmonic;
    throw ParameterError("unknown step rule '" + s + "' (expected kesten|harmonic)");
}

namespace {

// Step sizes for a set of multipliers.
class StepSchedule {
public:
    StepSchedule(const SolverOptions& opt, std::size_t multipliers, std::size_t sensors)
        : opt_(opt), sensors_(sensors), count_(multipliers, 0), sign_(multipliers, 0) {}

    double next(std::size_t i, double violation, std::size_t outer) {
        std::uint32_t k = static_cast<std::uint32_t>(outer);
        if (opt_.step_rule == StepRule::Kesten) {
            const std::int8_t s = violation > 0.0 ? 1 : -1;
            if (count_[i] == 0 || s != sign_[i]) ++count_[i];
            sign_[i] = s;
            k = count_[i];
        }
        const double beta = opt_.beta0 / static_cast<double>(k);
        return opt_.step_scale == StepScale::PerSensor ? beta / static_cast<double>(sensors_) : beta;
    }

private:
    const SolverOptions& opt_;
    std::size_t sensors_;
    std::vector<std::uint32_t> count_;
    std::vector<std::int8_t> sign_;
};

}  // namespace

double bellman_threshold(double eps1, double eta) { return eps1 * (1.0 - eta) / (2.0 * eta); }

double modified_reward_global(const std::vector<double>& rewards, const std::vector<double>& powers_mw,
                              double lambda, double p_tot_mw) {
    const double r = std::accumulate(rewards.begin(), rewards.end(), 0.0);
    const double p = std::accumulate(powers_mw.begin(), powers_mw.end(), 0.0);
    return r - lambda * (p - p_tot_mw);
}

double modified_reward_local(double reward, double power_mw, double lambda, double p_tot_mw, std::size_t sensors) {
    return reward - lambda * (power_mw - p_tot_mw / static_cast<double>(sensors));
}

void ExplicitMdp::validate() const {
    if (action_begin.size() != states + 1) throw ParameterError("mdp: action offsets size mismatch");
    if (reward.size() != actions() || succ_begin.size() != actions() + 1)
        throw ParameterError("mdp: per-action arrays size mismatch");
    for (std::size_t s = 0; s < states; ++s)
        if (action_count(s) == 0) throw ParameterError("mdp: state without actions");
    for (std::size_t a = 0; a < actions(); ++a) {
        double mass = 0.0;
        for (std::size_t k = succ_begin[a]; k < succ_begin[a + 1]; ++k) {
            if (succ_state[k] >= states) throw ParameterError("mdp: successor out of range");
            mass += succ_prob[k];
        }
        if (std::abs(mass - 1.0) > 1e-12)
            throw ModelValidityError("mdp: successor mass differs from 1", -1, static_cast<int>(a));
    }
}

ValueIterationResult value_iteration(const ExplicitMdp& mdp, double eta, double eps1, std::size_t max_sweeps,
                                     const std::vector<double>& warm_start) {
    if (!(eta > 0.0 && eta < 1.0)) throw ParameterError("discount factor must lie in (0, 1)");
    const double threshold = bellman_threshold(eps1, eta);
    ValueIterationResult res;
    res.value = warm_start.empty() ? std::vector<double>(mdp.states, 0.0) : warm_start;
    if (res.value.size() != mdp.states) throw ParameterError("warm start has the wrong size");
    res.action.assign(mdp.states, 0);
    std::vector<double> next(mdp.states);
    std::vector<double> q;
    while (true) {
        if (res.sweeps >= max_sweeps)
            throw ConvergenceError("value iteration did not converge in " + std::to_string(max_sweeps) +
                                   " sweeps; last residual " +
                                   std::to_string(res.residuals.empty() ? 0.0 : res.residuals.back()));
        double residual = 0.0;
        for (std::size_t s = 0; s < mdp.states; ++s) {
            const std::size_t a0 = mdp.action_begin[s], a1 = mdp.action_begin[s + 1];
            q.resize(a1 - a0);
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t a = a0; a < a1; ++a) {
                double ev = 0.0;
                for (std::size_t k = mdp.succ_begin[a]; k < mdp.succ_begin[a + 1]; ++k)
                    ev += mdp.succ_prob[k] * res.value[mdp.succ_state[k]];
                q[a - a0] = mdp.reward[a] + eta * ev;
                best = std::max(best, q[a - a0]);
            }
            std::size_t pick = a0;
            while (q[pick - a0] < best - kTieTolerance) ++pick;
            res.action[s] = pick;
            next[s] = best;
            residual = std::max(residual, std::abs(best - res.value[s]));
        }
        res.value.swap(next);
        res.residuals.push_back(residual);
        ++res.sweeps;
        if (residual < threshold) break;
    }
    return res;
}

std::vector<double> evaluate_policy(const ExplicitMdp& mdp, double eta, const std::vector<std::size_t>& action) {
    const std::size_t n = mdp.states;
    std::vector<double> m(n * n, 0.0), v(n);
    for (std::size_t s = 0; s < n; ++s) {
        const std::size_t a = action[s];
        m[s * n + s] = 1.0;
        for (std::size_t k = mdp.succ_begin[a]; k < mdp.succ_begin[a + 1]; ++k)
            m[s * n + mdp.succ_state[k]] -= eta * mdp.succ_prob[k];
        v[s] = mdp.reward[a];
    }
    // Gaussian elimination with partial pivoting; I - eta P is diagonally dominant.
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(m[r * n + c]) > std::abs(m[piv * n + c])) piv = r;
        if (piv != c) {
            for (std::size_t k = 0; k < n; ++k) std::swap(m[c * n + k], m[piv * n + k]);
            std::swap(v[c], v[piv]);
        }
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = m[r * n + c] / m[c * n + c];
            if (f == 0.0) continue;
            for (std::size_t k = c; k < n; ++k) m[r * n + k] -= f * m[c * n + k];
            v[r] -= f * v[c];
        }
    }
    for (std::size_t r = n; r-- > 0;) {
        double acc = v[r];
        for (std::size_t k = r + 1; k < n; ++k) acc -= m[r * n + k] * v[k];
        v[r] = acc / m[r * n + r];
    }
    return v;
}

OracleResult brute_force_policy_oracle(const ExplicitMdp& mdp, double eta, double max_policies) {
    double count = 1.0;
    for (std::size_t s = 0; s < mdp.states; ++s) count *= static_cast<double>(mdp.action_count(s));
    if (count > max_policies)
        throw GuardError("brute-force oracle: " + std::to_string(count) + " policies exceed the guard",
                         static_cast<double>(mdp.states));
    OracleResult best;
    std::vector<std::size_t> action(mdp.states);
    for (std::size_t s = 0; s < mdp.states; ++s) action[s] = mdp.action_begin[s];
    double best_sum = 0.0;
    while (true) {
        auto v = evaluate_policy(mdp, eta, action);
        ++best.policies_evaluated;
        const double sum = std::accumulate(v.begin(), v.end(), 0.0);
        if (best.action.empty() || sum > best_sum + 1e-9 * (1.0 + std::abs(best_sum))) {
            best_sum = sum;
            best.value = std::move(v);
            best.action = action;
        }
        // Odometer with the last state varying fastest.
        std::size_t s = mdp.states;
        while (s > 0) {
            --s;
            if (++action[s] < mdp.action_begin[s + 1]) break;
            action[s] = mdp.action_begin[s];
            if (s == 0) return best;
        }
        if (mdp.states == 0) return best;
    }
}

std::vector<double> stationary_distribution(const ExplicitMdp& mdp, const std::vector<std::size_t>& action) {
    const std::size_t n = mdp.states;
    std::vector<double> pi(n, 1.0 / static_cast<double>(n)), next(n);
    for (int it = 0; it < 200000; ++it) {
        for (std::size_t s = 0; s < n; ++s) next[s] = 0.5 * pi[s];
        for (std::size_t s = 0; s < n; ++s) {
            const std::size_t a = action[s];
            for (std::size_t k = mdp.succ_begin[a]; k < mdp.succ_begin[a + 1]; ++k)
                next[mdp.succ_state[k]] += 0.5 * pi[s] * mdp.succ_prob[k];
        }
        double diff = 0.0;
        for (std::size_t s = 0; s < n; ++s) diff += std::abs(next[s] - pi[s]);
        pi.swap(next);
        if (diff < 1e-13) break;
    }
    const double total = std::accumulate(pi.begin(), pi.end(), 0.0);
    for (double& p : pi) p /= total;
    return pi;
}

ExplicitMdp build_local_mdp(const SensorModel& sensor, double lambda, double p_tot_mw, std::size_t sensors) {
    ExplicitMdp mdp;
    mdp.states = sensor.state_count();
    mdp.action_begin.push_back(0);
    mdp.succ_begin.push_back(0);
    for (std::size_t s = 0; s < mdp.states; ++s) {
        const LocalState ls = sensor.decode(s);
        for (int c = 0; c <= ls.battery; ++c) {
            mdp.label.push_back(c);
            for (const auto& succ : sensor.mixed_transition(s, c)) {
                mdp.succ_state.push_back(static_cast<std::uint32_t>(succ.state));
                mdp.succ_prob.push_back(succ.prob);
            }
            mdp.succ_begin.push_back(mdp.succ_state.size());
        }
        mdp.action_begin.push_back(mdp.label.size());
    }
    set_local_rewards(mdp, sensor, lambda, p_tot_mw, sensors);
    return mdp;
}

void set_local_rewards(ExplicitMdp& mdp, const SensorModel& sensor, double lambda, double p_tot_mw,
                       std::size_t sensors) {
    mdp.reward.resize(mdp.actions());
    for (std::size_t s = 0; s < mdp.states; ++s) {
        const LocalState ls = sensor.decode(s);
        for (std::size_t a = mdp.action_begin[s]; a < mdp.action_begin[s + 1]; ++a) {
            const int c = mdp.label[a];
            mdp.reward[a] = modified_reward_local(sensor.rewards.at(ls.level, c), sensor.power_mw(c), lambda,
                                                  p_tot_mw, sensors);
        }
    }
}

GlobalIndexer::GlobalIndexer(std::vector<std::size_t> state_counts) : counts_(std::move(state_counts)) {
    strides_.assign(counts_.size(), 1);
    total_ = 1;
    for (std::size_t n = counts_.size(); n-- > 0;) {
        strides_[n] = total_;
        total_ *= counts_[n];
    }
}

std::size_t GlobalIndexer::encode(const std::vector<std::size_t>& local) const {
    std::size_t g = 0;
    for (std::size_t n = 0; n < counts_.size(); ++n) g += local[n] * strides_[n];
    return g;
}

void GlobalIndexer::decode(std::size_t global, std::vector<std::size_t>& local) const {
    local.resize(counts_.size());
    for (std::size_t n = 0; n < counts_.size(); ++n) {
        local[n] = global / strides_[n];
        global %= strides_[n];
    }
}

void NetworkPolicy::spends(const std::vector<std::size_t>& local_states, std::vector<int>& out) const {
    out.resize(local_states.size());
    if (kind == Kind::Global) {
        const GlobalIndexer idx(global.state_counts);
        const std::size_t row = idx.encode(local_states);
        for (std::size_t n = 0; n < out.size(); ++n) out[n] = global.spend(row, n);
        return;
    }
    for (std::size_t n = 0; n < out.size(); ++n) out[n] = local[n].spend(local_states[n], 0);
}

void write_residuals_csv(std::ostream& os, const SolveReport& r) {
    os << "outer,sensor,sweep,residual\n";
    os.precision(17);
    for (const auto& x : r.residuals) os << x.outer << ',' << x.sensor << ',' << x.sweep << ',' << x.residual << '\n';
}

void write_multipliers_csv(std::ostream& os, const SolveReport& r) {
    os << "iteration,lambda_max,lambda_mean,max_violation_mw,max_relative_change,max_step\n";
    os.precision(17);
    for (const auto& x : r.multipliers)
        os << x.iteration << ',' << x.lambda_max << ',' << x.lambda_mean << ',' << x.max_violation_mw << ','
           << x.max_relative_change << ',' << x.max_step << '\n';
}

bool project_to_budget(const NetworkModel& net, const std::vector<std::size_t>& local_states,
                       std::vector<int>& spends) {
    auto total = [&] {
        double p = 0.0;
        for (std::size_t n = 0; n < spends.size(); ++n) p += net.sensors[n].power_mw(spends[n]);
        return p;
    };
    bool changed = false;
    while (total() > net.p_tot_mw * (1.0 + 1e-12)) {
        std::size_t pick = spends.size();
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t n = 0; n < spends.size(); ++n) {
            if (spends[n] == 0) continue;
            const auto& sm = net.sensors[n];
            const std::size_t level = sm.decode(local_states[n]).level;
            const double loss = sm.rewards.at(level, spends[n]) - sm.rewards.at(level, spends[n] - 1);
            const double saved = sm.power_mw(spends[n]) - sm.power_mw(spends[n] - 1);
            const double ratio = loss / saved;
            if (ratio < best) {
                best = ratio;
                pick = n;
            }
        }
        --spends[pick];
        changed = true;
    }
    return changed;
}

namespace {

// Per-sensor (state, spend) pairs with their unmixed successor lists.
struct PairTable {
    std::vector<std::size_t> begin;  // per local state, size S + 1
    std::vector<std::size_t> succ_begin;
    std::vector<std::uint32_t> succ_state;
    std::vector<double> succ_prob;

    std::size_t pairs() const { return begin.back(); }
};

// transmit_weight < 0 keeps the unmixed kernel; otherwise spending c > 0
// succeeds with that probability and the sensor stays silent otherwise.
PairTable build_pairs(const SensorModel& m, double transmit_weight) {
    PairTable t;
    t.begin.push_back(0);
    t.succ_begin.push_back(0);
    for (std::size_t s = 0; s < m.state_count(); ++s) {
        const int b = m.decode(s).battery;
        const auto silent = m.transition(s, 0);
        for (int c = 0; c <= b; ++c) {
            std::vector<Successor> law = m.transition(s, c);
            if (transmit_weight >= 0.0 && c > 0) {
                std::map<std::size_t, double> acc;
                for (const auto& x : silent) acc[x.state] += (1.0 - transmit_weight) * x.prob;
                for (const auto& x : law) acc[x.state] += transmit_weight * x.prob;
                law.clear();
                for (const auto& [k, p] : acc) law.push_back({k, p});
            }
            for (const auto& succ : law) {
                t.succ_state.push_back(static_cast<std::uint32_t>(succ.state));
                t.succ_prob.push_back(succ.prob);
            }
            t.succ_begin.push_back(t.succ_state.size());
        }
        t.begin.push_back(t.begin.back() + static_cast<std::size_t>(b) + 1);
    }
    return t;
}

// Value iteration over the global state space using the product structure
// of the kernel: E[V | pairs] is contracted one sensor at a time.
class GlobalEngine {
public:
    GlobalEngine(const NetworkModel& net, std::size_t budget, GlobalMixing mixing) : net_(net), mixing_(mixing) {
        const std::size_t n = net.size();
        std::vector<std::size_t> counts;
        for (const auto& s : net.sensors) counts.push_back(s.state_count());
        indexer_ = std::make_unique<GlobalIndexer>(counts);
        const auto& sp = net.sensors.front().config.sensing;
        if (mixing == GlobalMixing::AnySensor) {
            branches_.push_back({1.0, {}});
            for (const auto& s : net.sensors) branches_[0].pairs.push_back(build_pairs(s, -1.0));
        } else {
            branches_.push_back({sp.prior0, {}});
            branches_.push_back({sp.prior1, {}});
            for (const auto& s : net.sensors) {
                branches_[0].pairs.push_back(build_pairs(s, s.censor.pf));
                branches_[1].pairs.push_back(build_pairs(s, s.censor.pd));
            }
        }
        const auto& pairs0 = branches_[0].pairs;

        const double states = net.global_state_count();
        double largest = 0.0;
        for (std::size_t axis = 0; axis < n; ++axis) {
            double size = 1.0;
            for (std::size_t k = 0; k < n; ++k)
                size *= k < axis ? static_cast<double>(counts[k]) : static_cast<double>(pairs0[k].pairs());
            largest = std::max(largest, size);
        }
        const double bytes = 8.0 * (3.0 * largest + 5.0 * states) + 4.0 * states * static_cast<double>(n);
        if (bytes > static_cast<double>(budget)) {
            std::ostringstream os;
            os << "optimal solver needs about " << bytes / (1 << 20) << " MiB for " << states
               << " global states, above the memory budget of " << budget / (1 << 20) << " MiB";
            throw GuardError(os.str(), states);
        }
        states_ = indexer_->size();
        pair_strides_.assign(n, 1);
        for (std::size_t k = n; k-- > 1;) pair_strides_[k - 1] = pair_strides_[k] * pairs0[k].pairs();
        p_silent_ = 1.0;
        for (const auto& s : net.sensors) p_silent_ *= s.silent_prob();
        pair_begin_.resize(n);
        for (std::size_t k = 0; k < n; ++k) pair_begin_[k] = pairs0[k].begin;
    }

    std::size_t states() const { return states_; }

    // One synchronous sweep. Writes the new values, greedy spends and returns
    // the residual.
    double sweep(const std::vector<double>& lambda, const std::vector<double>& value, std::vector<double>& next,
                 std::vector<int>& policy) {
        expected_.assign(1, 0.0);
        for (const auto& br : branches_) {
            contract(value, br.pairs);
            if (expected_.size() != buf_a_.size()) expected_.assign(buf_a_.size(), 0.0);
            for (std::size_t i = 0; i < buf_a_.size(); ++i) expected_[i] += br.weight * buf_a_[i];
        }
        const std::vector<double>& w = expected_;
        const bool any_sensor = mixing_ == GlobalMixing::AnySensor;
        const std::size_t n = net_.size();
        std::vector<std::size_t> local(n);
        std::vector<int> c(n), best_c(n);
        std::vector<LocalState> ls(n);
        double residual = 0.0;
        for (std::size_t g = 0; g < states_; ++g) {
            indexer_->decode(g, local);
            std::size_t base = 0;
            for (std::size_t k = 0; k < n; ++k) {
                ls[k] = net_.sensors[k].decode(local[k]);
                base += pair_begin_[k][local[k]] * pair_strides_[k];
            }
            const double w0 = w[base];
            // Enumerate spends with the last sensor varying fastest.
            std::fill(c.begin(), c.end(), 0);
            double best = -std::numeric_limits<double>::infinity();
            int best_total = 0;
            q_.clear();
            while (true) {
                double r = 0.0, p = 0.0;
                std::size_t wi = base;
                int total = 0;
                for (std::size_t k = 0; k < n; ++k) {
                    r += net_.sensors[k].rewards.at(ls[k].level, c[k]);
                    p += net_.sensors[k].power_mw(c[k]);
                    wi += static_cast<std::size_t>(c[k]) * pair_strides_[k];
                    total += c[k];
                }
                const double future = any_sensor ? p_silent_ * w0 + (1.0 - p_silent_) * w[wi] : w[wi];
                const double q = r - lambda[g] * (p - net_.p_tot_mw) + net_.eta * future;
                if (q > best) best = q;
                q_.push_back({q, total});
                std::size_t k = n;
                bool done = true;
                while (k > 0) {
                    --k;
                    if (++c[k] <= ls[k].battery) {
                        done = false;
                        break;
                    }
                    c[k] = 0;
                }
                if (done) break;
            }
            // Smallest total spend among near-maximal actions, first in enumeration order.
            std::size_t pick = q_.size();
            for (std::size_t i = 0; i < q_.size(); ++i)
                if (q_[i].q >= best - kTieTolerance && (pick == q_.size() || q_[i].total < q_[pick].total)) pick = i;
            best_total = static_cast<int>(pick);
            for (std::size_t k = n; k-- > 0;) {
                const int span = ls[k].battery + 1;
                policy[g * n + k] = best_total % span;
                best_total /= span;
            }
            next[g] = best;
            residual = std::max(residual, std::abs(best - value[g]));
        }
        return residual;
    }

    const GlobalIndexer& indexer() const { return *indexer_; }

private:
    struct QEntry {
        double q;
        int total;
    };

    void contract(const std::vector<double>& value, const std::vector<PairTable>& pairs) {
        const std::size_t n = net_.size();
        buf_a_ = value;
        // Shape before contracting axis k: [S_0..S_k, A_{k+1}..A_{N-1}].
        std::size_t inner = 1;
        for (std::size_t k = n; k-- > 0;) {
            std::size_t outer = 1;
            for (std::size_t j = 0; j < k; ++j) outer *= net_.sensors[j].state_count();
            const std::size_t s_count = net_.sensors[k].state_count();
            const PairTable& pt = pairs[k];
            const std::size_t a_count = pt.pairs();
            buf_b_.assign(outer * a_count * inner, 0.0);
            for (std::size_t o = 0; o < outer; ++o) {
                const double* src = buf_a_.data() + o * s_count * inner;
                double* dst_block = buf_b_.data() + o * a_count * inner;
                for (std::size_t p = 0; p < a_count; ++p) {
                    double* dst = dst_block + p * inner;
                    for (std::size_t e = pt.succ_begin[p]; e < pt.succ_begin[p + 1]; ++e) {
                        const double w = pt.succ_prob[e];
                        const double* row = src + pt.succ_state[e] * inner;
                        for (std::size_t i = 0; i < inner; ++i) dst[i] += w * row[i];
                    }
                }
            }
            buf_a_.swap(buf_b_);
            inner *= a_count;
        }
    }

    struct Branch {
        double weight;
        std::vector<PairTable> pairs;
    };

    const NetworkModel& net_;
    GlobalMixing mixing_;
    std::unique_ptr<GlobalIndexer> indexer_;
    std::vector<Branch> branches_;
    std::vector<std::vector<std::size_t>> pair_begin_;
    std::vector<double> expected_;
    std::vector<std::size_t> pair_strides_;
    std::size_t states_ = 0;
    double p_silent_ = 1.0;
    std::vector<double> buf_a_, buf_b_;
    std::vector<QEntry> q_;
};

Policy make_global_policy(const NetworkModel& net, std::vector<int> spends) {
    Policy p;
    p.scope = PolicyScope::Global;
    for (const auto& s : net.sensors) p.state_counts.push_back(s.state_count());
    p.spends = std::move(spends);
    return p;
}

}  // namespace

SolveReport solve_optimal(const NetworkModel& net, const SolverOptions& opt) {
    net.validate();
    const auto t0 = std::chrono::steady_clock::now();
    GlobalEngine engine(net, opt.memory_budget_bytes, opt.mixing);
    const std::size_t states = engine.states();
    const std::size_t n = net.size();
    const double threshold = bellman_threshold(opt.eps1, net.eta);

    SolveReport rep;
    rep.algorithm = "optimal";
    std::vector<double> lambda(states, 0.0), value(states, 0.0), next(states);
    std::vector<int> policy(states * n, 0);
    std::vector<std::size_t> local;
    StepSchedule steps(opt, states, n);

    for (std::size_t outer = 1;; ++outer) {
        if (outer > opt.max_dual_iterations)
            throw ConvergenceError("optimal solver: multipliers did not converge in " +
                                   std::to_string(opt.max_dual_iterations) + " iterations; " +
                                   trace_summary(rep.multipliers, 5));
        double residual = std::numeric_limits<double>::infinity();
        std::size_t sweep = 0;
        while (!(residual < threshold)) {
            if (sweep >= opt.max_sweeps)
                throw ConvergenceError("optimal solver: value iteration exceeded " + std::to_string(opt.max_sweeps) +
                                       " sweeps, residual " + std::to_string(residual));
            residual = engine.sweep(lambda, value, next, policy);
            value.swap(next);
            rep.residuals.push_back({outer, -1, ++sweep, residual});
        }
        rep.sweeps += sweep;
        rep.final_residual = residual;
        rep.dual_iterations = outer;

        bool converged = true;
        MultiplierRecord rec{outer, 0.0, 0.0, 0.0, 0.0, 0.0};
        std::vector<double> updated(states);
        for (std::size_t g = 0; g < states; ++g) {
            engine.indexer().decode(g, local);
            double p = 0.0;
            for (std::size_t k = 0; k < n; ++k) p += net.sensors[k].power_mw(policy[g * n + k]);
            const double violation = p - net.p_tot_mw;
            double rel = 0.0;
            updated[g] = dual_step(lambda[g], violation, steps.next(g, violation, outer), opt.eps2, converged, rel);
            rec.max_step = std::max(rec.max_step, std::abs(updated[g] - lambda[g]));
            rec.max_violation_mw = std::max(rec.max_violation_mw, violation);
            if (std::isfinite(rel)) rec.max_relative_change = std::max(rec.max_relative_change, rel);
            else rec.max_relative_change = std::numeric_limits<double>::max();
        }
        for (double l : lambda) {
            rec.lambda_max = std::max(rec.lambda_max, l);
            rec.lambda_mean += l / static_cast<double>(states);
        }
        rep.multipliers.push_back(rec);
        if (converged) break;
        if (stalled(rep.multipliers, opt.oscillation_window))
            throw ConvergenceError("optimal solver: dual oscillation, no progress over " +
                                   std::to_string(opt.oscillation_window) + " iterations; " +
                                   trace_summary(rep.multipliers, opt.oscillation_window));
        lambda.swap(updated);
    }

    std::vector<int> spend(n);
    for (std::size_t g = 0; g < states; ++g) {
        engine.indexer().decode(g, local);
        for (std::size_t k = 0; k < n; ++k) spend[k] = policy[g * n + k];
        if (project_to_budget(net, local, spend)) {
            ++rep.projected_states;
            for (std::size_t k = 0; k < n; ++k) policy[g * n + k] = spend[k];
        }
    }
    rep.policy.kind = NetworkPolicy::Kind::Global;
    rep.policy.global = make_global_policy(net, std::move(policy));
    rep.value.push_back(std::move(value));
    rep.lambdas = std::move(lambda);
    rep.seconds = seconds_since(t0);
    return rep;
}

SolveReport solve_suboptimal(const NetworkModel& net, const SolverOptions& opt) {
    net.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t n = net.size();
    std::vector<ExplicitMdp> mdps;
    for (const auto& s : net.sensors) mdps.push_back(build_local_mdp(s, 0.0, net.p_tot_mw, n));

    SolveReport rep;
    rep.algorithm = "suboptimal";
    std::vector<ValueIterationResult> vi(n);
    double lambda = 0.0;
    StepSchedule steps(opt, 1, n);
    for (std::size_t outer = 1;; ++outer) {
        if (outer > opt.max_dual_iterations)
            throw ConvergenceError("sub-optimal solver: multiplier did not converge in " +
                                   std::to_string(opt.max_dual_iterations) + " iterations; " +
                                   trace_summary(rep.multipliers, 5));
        double expected_power = 0.0;
        rep.final_residual = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            set_local_rewards(mdps[k], net.sensors[k], lambda, net.p_tot_mw, n);
            const std::vector<double> warm = vi[k].value;
            vi[k] = value_iteration(mdps[k], net.eta, opt.eps1, opt.max_sweeps, warm);
            for (std::size_t i = 0; i < vi[k].residuals.size(); ++i)
                rep.residuals.push_back({outer, static_cast<long>(k), i + 1, vi[k].residuals[i]});
            rep.sweeps += vi[k].sweeps;
            rep.final_residual = std::max(rep.final_residual, vi[k].residuals.back());
            const auto pi = stationary_distribution(mdps[k], vi[k].action);
            for (std::size_t s = 0; s < pi.size(); ++s)
                expected_power += pi[s] * net.sensors[k].power_mw(mdps[k].label[vi[k].action[s]]);
        }
        rep.dual_iterations = outer;
        const double violation = expected_power - net.p_tot_mw;
        bool converged = true;
        double rel = 0.0;
        const double updated =
            dual_step(lambda, violation, steps.next(0, violation, outer), opt.eps2, converged, rel);
        // A small relative change alone can stop short of the budget while
        // the shrinking steps are still climbing; require a feasible iterate.
        if (violation > 0.0) converged = false;
        rep.multipliers.push_back({outer, lambda, lambda, std::max(0.0, violation),
                                   std::isfinite(rel) ? rel : std::numeric_limits<double>::max(),
                                   std::abs(updated - lambda)});
        if (converged) break;
        if (stalled(rep.multipliers, opt.oscillation_window))
            throw ConvergenceError("sub-optimal solver: dual oscillation, no progress over " +
                                   std::to_string(opt.oscillation_window) + " iterations; " +
                                   trace_summary(rep.multipliers, opt.oscillation_window));
        lambda = updated;
    }

    rep.policy.kind = NetworkPolicy::Kind::Decentralized;
    for (std::size_t k = 0; k < n; ++k) {
        Policy p;
        p.scope = PolicyScope::Local;
        p.sensor = k;
        p.state_counts = {net.sensors[k].state_count()};
        for (std::size_t s = 0; s < mdps[k].states; ++s) p.spends.push_back(mdps[k].label[vi[k].action[s]]);
        rep.policy.local.push_back(std::move(p));
        rep.value.push_back(std::move(vi[k].value));
    }
    rep.lambdas = {lambda};
    rep.seconds = seconds_since(t0);
    return rep;
}

void random_feasible_spends(const NetworkModel& net, const std::vector<std::size_t>& local_states,
                            std::mt19937_64& rng, std::vector<int>& out) {
    const std::size_t n = net.size();
    out.assign(n, 0);
    for (int attempt = 0; attempt < 100000; ++attempt) {
        double p = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const int b = net.sensors[k].decode(local_states[k]).battery;
            out[k] = std::uniform_int_distribution<int>(0, b)(rng);
            p += net.sensors[k].power_mw(out[k]);
        }
        if (p <= net.p_tot_mw * (1.0 + 1e-12)) return;
    }
    std::fill(out.begin(), out.end(), 0);
}

NetworkPolicy random_policy(const NetworkModel& net, std::mt19937_64& rng, std::size_t memory_budget_bytes) {
    net.validate();
    const double states = net.global_state_count();
    if (states * static_cast<double>(net.size()) * sizeof(int) > static_cast<double>(memory_budget_bytes))
        throw GuardError("random policy table exceeds the memory budget", states);
    std::vector<std::size_t> counts;
    for (const auto& s : net.sensors) counts.push_back(s.state_count());
    const GlobalIndexer idx(counts);
    std::vector<int> table(idx.size() * net.size()), spend;
    std::vector<std::size_t> local;
    for (std::size_t g = 0; g < idx.size(); ++g) {
        idx.decode(g, local);
        random_feasible_spends(net, local, rng, spend);
        std::copy(spend.begin(), spend.end(), table.begin() + static_cast<std::ptrdiff_t>(g * net.size()));
    }
    NetworkPolicy p;
    p.kind = NetworkPolicy::Kind::Global;
    p.global = make_global_policy(net, std::move(table));
    return p;
}

}  // namespace ehpc
