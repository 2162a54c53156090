#include "ehpc/monte_carlo.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

#include "ehpc/errors.hpp"
#include "ehpc/special_functions.hpp"

namespace ehpc {

namespace {

double log_normal_pdf(double y, double mean, double var) {
    const double d = y - mean;
    return -0.5 * d * d / var - 0.5 * std::log(2.0 * M_PI * var);
}

double log_mix(double w, double la, double lb) {
    // log(w e^la + (1 - w) e^lb)
    if (w <= 0.0) return lb;
    if (w >= 1.0) return la;
    const double a = std::log(w) + la;
    const double b = std::log1p(-w) + lb;
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Local censoring decision of one sensor given the hypothesis.
bool censor_transmit(const SensorModel& m, int h, std::mt19937_64& rng) {
    const auto& sp = m.config.sensing;
    if (m.config.deployment.kind == DeploymentKind::Fixed) {
        const double x = sample_observation(h, sp, m.config.deployment, rng);
        const double a = sp.signal_amplitude;
        if (sp.mode == CensorMode::FixedThreshold)
            return (a * x - 0.5 * a * a) / sp.obs_noise_var > sp.threshold;
        return x > a + std::sqrt(sp.obs_noise_var) * q_inverse(sp.pd_bar);
    }
    const double p = h == 1 ? m.censor.pd : m.censor.pf;
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

struct SlotOutcome {
    bool error = false;
    double j_total = 0.0;
    double radiated_mw = 0.0;
    double prescribed_mw = 0.0;
};

class Simulator {
public:
    Simulator(const NetworkModel& net, const SpendRule& rule) : net_(net), rule_(rule) {
        const auto& sp = net.sensors.front().config.sensing;
        prior1_ = sp.prior1;
        tau_ = std::log(sp.prior0 / sp.prior1);
    }

    // Amplitude the fusion center assumes per (sensor, previous level); empty = genie.
    std::vector<std::vector<double>> assumed_amplitude;

    void uniform_start(std::vector<std::size_t>& local, std::mt19937_64& rng) const {
        local.resize(net_.size());
        for (std::size_t n = 0; n < net_.size(); ++n)
            local[n] = std::uniform_int_distribution<std::size_t>(0, net_.sensors[n].state_count() - 1)(rng);
    }

    // Advances every sensor by one slot and returns the slot's detection record.
    SlotOutcome step(std::vector<std::size_t>& local, std::mt19937_64& rng, std::vector<int>& spends,
                     std::vector<int>* spent_out = nullptr, std::vector<int>* harvested_out = nullptr) const {
        const std::size_t n_s = net_.size();
        rule_(local, rng, spends);
        const int h = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < prior1_ ? 1 : 0;
        SlotOutcome out;
        std::vector<double> received(n_s);
        std::vector<FusionInput> side(n_s);
        for (std::size_t n = 0; n < n_s; ++n) {
            const SensorModel& m = net_.sensors[n];
            const LocalState s = m.decode(local[n]);
            const int c = spends[n];
            const bool transmit = c > 0 && censor_transmit(m, h, rng);
            const std::size_t level = m.channel_chain.sample_next(s.level, rng);
            const std::size_t harvest = m.harvest.chain.sample_next(s.harvest, rng);
            const double g = sample_gain_in_level(level, m.config.quantizer, m.config.channel.mean_square_gain, rng);
            const double amp = m.config.battery.amplitude(c);
            const double noise =
                std::normal_distribution<double>(0.0, std::sqrt(m.config.channel.noise_variance))(rng);
            received[n] = (transmit ? g * amp : 0.0) + noise;
            const double assumed = assumed_amplitude.empty() ? amp : assumed_amplitude[n][s.level];
            side[n] = {g, assumed, m.censor.pf, m.censor.pd, m.config.channel.noise_variance};
            out.j_total += j_pointwise(g, amp, m.coeffs, m.config.channel.noise_variance);
            out.prescribed_mw += m.power_mw(c);
            if (transmit) out.radiated_mw += m.power_mw(c);
            const int spent = transmit ? c : 0;
            const int harvested = m.harvest.levels[harvest];
            if (spent_out) (*spent_out)[n] = spent;
            if (harvested_out) (*harvested_out)[n] = harvested;
            const int b2 = battery_step(s.battery, harvested, spent, m.capacity());
            local[n] = m.index({b2, level, harvest});
        }
        const int decision = fusion_llr(received, side) > tau_ ? 1 : 0;
        out.error = decision != h;
        return out;
    }

private:
    const NetworkModel& net_;
    const SpendRule& rule_;
    double prior1_ = 0.5;
    double tau_ = 0.0;
};

struct RunRecord {
    bool error;
    bool violation;
    double j_total;
    double radiated_mw;
};

template <class Body>
void parallel_runs(std::size_t runs, std::size_t workers, Body body) {
    workers = std::max<std::size_t>(1, std::min(workers, runs));
    if (workers == 1) {
        body(0, runs);
        return;
    }
    std::vector<std::thread> pool;
    const std::size_t chunk = (runs + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk, hi = std::min(runs, lo + chunk);
        if (lo < hi) pool.emplace_back([&body, lo, hi] { body(lo, hi); });
    }
    for (auto& t : pool) t.join();
}

}  // namespace

double fusion_llr(const std::vector<double>& received, const std::vector<FusionInput>& side) {
    if (received.size() != side.size()) throw ParameterError("fusion_llr: length mismatch");
    double delta = 0.0;
    for (std::size_t n = 0; n < received.size(); ++n) {
        const FusionInput& s = side[n];
        const double mean = s.gain * s.amplitude;
        if (mean == 0.0) continue;  // both mixtures collapse to N(0, sigma^2)
        const double l_on = log_normal_pdf(received[n], mean, s.noise_var);
        const double l_off = log_normal_pdf(received[n], 0.0, s.noise_var);
        delta += log_mix(s.pd, l_on, l_off) - log_mix(s.pf, l_on, l_off);
    }
    return delta;
}

SpendRule policy_rule(const NetworkPolicy& policy) {
    return [&policy](const std::vector<std::size_t>& local, std::mt19937_64&, std::vector<int>& out) {
        policy.spends(local, out);
    };
}

SpendRule random_rule(const NetworkModel& net) {
    return [&net](const std::vector<std::size_t>& local, std::mt19937_64& rng, std::vector<int>& out) {
        random_feasible_spends(net, local, rng, out);
    };
}

std::string to_string(FusionKnowledge k) { return k == FusionKnowledge::Genie ? "genie" : "quantized"; }

FusionKnowledge fusion_knowledge_from_string(const std::string& s) {
    if (s == "genie") return FusionKnowledge::Genie;
    if (s == "quantized") return FusionKnowledge::Quantized;
    throw ParameterError("unknown fusion mode '" + s + "' (expected genie|quantized)");
}

std::mt19937_64 run_stream(std::uint64_t root_seed, std::uint64_t index) {
    std::uint64_t x = root_seed ^ (0xD1B54A32D192ED03ULL * (index + 1));
    std::seed_seq seq{splitmix64(x), splitmix64(x), splitmix64(x), splitmix64(x)};
    return std::mt19937_64(seq);
}

McEstimate run_episodes(const NetworkModel& net, const SpendRule& rule, const McOptions& opt) {
    net.validate();
    if (opt.runs == 0) throw ParameterError("Monte Carlo needs at least one run");
    Simulator sim(net, rule);

    auto warm_state = [&](std::mt19937_64& rng, std::vector<std::size_t>& local, std::vector<int>& spends) {
        sim.uniform_start(local, rng);
        for (std::size_t t = 0; t < opt.warmup_slots; ++t) sim.step(local, rng, spends);
    };

    if (opt.fusion == FusionKnowledge::Quantized) {
        // Calibrate E[amplitude | previous level] from stationary draws on a separate stream.
        std::vector<std::vector<double>> sum(net.size()), count(net.size());
        for (std::size_t n = 0; n < net.size(); ++n) {
            sum[n].assign(net.sensors[n].levels(), 0.0);
            count[n].assign(net.sensors[n].levels(), 0.0);
        }
        std::vector<std::size_t> local;
        std::vector<int> spends;
        for (std::size_t r = 0; r < opt.pilot_runs; ++r) {
            auto rng = run_stream(opt.seed ^ 0xA5A5A5A5A5A5A5A5ULL, r);
            warm_state(rng, local, spends);
            rule(local, rng, spends);
            for (std::size_t n = 0; n < net.size(); ++n) {
                const std::size_t l = net.sensors[n].decode(local[n]).level;
                sum[n][l] += net.sensors[n].config.battery.amplitude(spends[n]);
                count[n][l] += 1.0;
            }
        }
        sim.assumed_amplitude.resize(net.size());
        for (std::size_t n = 0; n < net.size(); ++n) {
            sim.assumed_amplitude[n].resize(sum[n].size());
            for (std::size_t l = 0; l < sum[n].size(); ++l)
                sim.assumed_amplitude[n][l] = count[n][l] > 0.0 ? sum[n][l] / count[n][l] : 0.0;
        }
    }

    std::vector<RunRecord> records(opt.runs);
    parallel_runs(opt.runs, opt.workers, [&](std::size_t lo, std::size_t hi) {
        std::vector<std::size_t> local;
        std::vector<int> spends;
        for (std::size_t r = lo; r < hi; ++r) {
            auto rng = run_stream(opt.seed, r);
            warm_state(rng, local, spends);
            const SlotOutcome o = sim.step(local, rng, spends);
            records[r] = {o.error, o.prescribed_mw > net.p_tot_mw * (1.0 + 1e-12), o.j_total, o.radiated_mw};
        }
    });

    McEstimate est;
    est.runs = opt.runs;
    est.seed = opt.seed;
    double errors = 0.0, j_sum = 0.0, j_sq = 0.0, power = 0.0;
    for (const auto& r : records) {
        errors += r.error ? 1.0 : 0.0;
        j_sum += r.j_total;
        j_sq += r.j_total * r.j_total;
        power += r.radiated_mw;
        est.violations += r.violation ? 1 : 0;
    }
    const double runs = static_cast<double>(opt.runs);
    est.p_e = errors / runs;
    est.p_e_se = std::sqrt(est.p_e * (1.0 - est.p_e) / runs);
    est.avg_j = j_sum / runs;
    const double var = runs > 1 ? std::max(0.0, (j_sq - j_sum * j_sum / runs) / (runs - 1.0)) : 0.0;
    est.avg_j_se = std::sqrt(var / runs);
    est.avg_power_mw = power / runs;
    return est;
}

TrajectoryStats run_trajectory(const NetworkModel& net, const SpendRule& rule, std::size_t slots,
                               std::uint64_t seed) {
    net.validate();
    Simulator sim(net, rule);
    auto rng = run_stream(seed, 0);
    std::vector<std::size_t> local;
    sim.uniform_start(local, rng);
    std::vector<int> spends, spent(net.size()), harvested(net.size());
    TrajectoryStats st;
    double errors = 0.0, j_sum = 0.0;
    for (std::size_t t = 0; t < slots; ++t) {
        std::vector<int> before(net.size());
        for (std::size_t n = 0; n < net.size(); ++n) before[n] = net.sensors[n].decode(local[n]).battery;
        std::vector<int> prescribed;
        // Record the prescribed spends before the step overwrites local states.
        rule(local, rng, prescribed);
        double total = 0.0;
        for (std::size_t n = 0; n < net.size(); ++n) {
            total += net.sensors[n].power_mw(prescribed[n]);
            if (prescribed[n] > before[n]) ++st.causality_violations;
        }
        if (total > net.p_tot_mw * (1.0 + 1e-12)) ++st.power_violations;
        const SpendRule fixed = [&prescribed](const std::vector<std::size_t>&, std::mt19937_64&,
                                              std::vector<int>& out) { out = prescribed; };
        Simulator replay(net, fixed);
        const SlotOutcome o = replay.step(local, rng, spends, &spent, &harvested);
        errors += o.error ? 1.0 : 0.0;
        j_sum += o.j_total;
        for (std::size_t n = 0; n < net.size(); ++n) {
            const int k = net.sensors[n].capacity();
            const int after = net.sensors[n].decode(local[n]).battery;
            if (after < 0 || after > k) ++st.battery_range_violations;
            const int raw = before[n] + harvested[n] - spent[n];
            const bool closes = raw <= k ? after == raw : after == k;
            if (!closes || raw < 0) ++st.closure_violations;
        }
        ++st.slots;
    }
    st.error_rate = errors / static_cast<double>(slots);
    st.avg_j = j_sum / static_cast<double>(slots);
    return st;
}

std::vector<SweepRow> sweep(const std::string& axis, const std::vector<double>& values,
                            const std::function<McEstimate(double)>& evaluate, std::size_t workers) {
    std::vector<SweepRow> rows(values.size());
    std::vector<std::exception_ptr> failures(values.size());
    parallel_runs(values.size(), workers, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            try {
                rows[i] = {axis, values[i], evaluate(values[i])};
            } catch (...) {
                failures[i] = std::current_exception();
            }
        }
    });
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!failures[i]) continue;
        const std::string where = axis + "=" + std::to_string(values[i]) + ": ";
        try {
            std::rethrow_exception(failures[i]);
        } catch (const GuardError& e) {
            throw GuardError(where + e.what(), e.state_count());
        } catch (const ConvergenceError& e) {
            throw ConvergenceError(where + e.what());
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        } catch (const ParameterError& e) {
            throw ParameterError(where + e.what());
        } catch (const std::exception& e) {
            throw Error(where + e.what());
        }
    }
    return rows;
}

void write_mc_header(std::ostream& os) {
    os << "axis,value,p_e,p_e_se,avg_j,avg_j_se,avg_power_mw,violations,runs,seed\n";
}

void write_mc_row(std::ostream& os, const SweepRow& row) {
    const auto old = os.precision(12);
    const auto& e = row.estimate;
    os << row.axis << ',' << row.value << ',' << e.p_e << ',' << e.p_e_se << ',' << e.avg_j << ',' << e.avg_j_se
       << ',' << e.avg_power_mw << ',' << e.violations << ',' << e.runs << ',' << e.seed << '\n';
    os.precision(old);
}

}  // namespace ehpc
