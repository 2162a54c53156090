#include "ehpc/network_model.hpp"

#include <algorithm>
#include <map>

#include "ehpc/errors.hpp"

namespace ehpc {

LocalState SensorModel::decode(std::size_t index) const {
    LocalState s;
    s.harvest = index % harvest_states();
    index /= harvest_states();
    s.level = index % levels();
    s.battery = static_cast<int>(index / levels());
    return s;
}

std::vector<Successor> SensorModel::transition(std::size_t state, int cells) const {
    const LocalState s = decode(state);
    if (cells < 0 || cells > s.battery)
        throw FeasibilityError("spend of " + std::to_string(cells) + " cells exceeds battery of " +
                               std::to_string(s.battery));
    std::vector<Successor> out;
    const std::size_t m_count = harvest_states();
    const std::size_t l_count = levels();
    for (std::size_t m2 = 0; m2 < m_count; ++m2) {
        const double pm = harvest.chain.transition(m2, s.harvest);
        if (pm == 0.0) continue;
        const int b2 = battery_step(s.battery, harvest.levels[m2], cells, capacity());
        for (std::size_t l2 = 0; l2 < l_count; ++l2) {
            const double pl = channel_chain.transition(l2, s.level);
            if (pl == 0.0) continue;
            out.push_back({index({b2, l2, m2}), pm * pl});
        }
    }
    std::sort(out.begin(), out.end(), [](const Successor& a, const Successor& b) { return a.state < b.state; });
    return out;
}

std::vector<Successor> SensorModel::mixed_transition(std::size_t state, int cells) const {
    if (cells == 0) return transition(state, 0);
    std::map<std::size_t, double> acc;
    for (const auto& s : transition(state, 0)) acc[s.state] += silent_prob() * s.prob;
    for (const auto& s : transition(state, cells)) acc[s.state] += transmit_prob() * s.prob;
    std::vector<Successor> out;
    out.reserve(acc.size());
    for (const auto& [k, p] : acc) out.push_back({k, p});
    return out;
}

SensorModel build_sensor_model(const SensorConfig& cfg) {
    cfg.battery.validate();
    cfg.channel.validate();
    cfg.quantizer.validate();
    cfg.sensing.validate();
    cfg.deployment.validate();
    SensorModel m;
    m.config = cfg;
    m.channel_chain = build_channel_fsmc(cfg.quantizer, cfg.channel);
    m.harvest = build_harvest_chain(cfg.harvest_persistence, cfg.harvest_levels.size(), cfg.harvest_levels);
    m.censor = censor_stats(cfg.sensing, cfg.deployment);
    m.coeffs = JCoefficients::from_rates(m.censor.pf, m.censor.pd);

    SensorRewardContext ctx;
    ctx.coeffs = m.coeffs;
    ctx.transmit_prob = m.censor.transmit_prob;
    ctx.quantizer = cfg.quantizer;
    ctx.channel = m.channel_chain;
    ctx.mean_square_gain = cfg.channel.mean_square_gain;
    ctx.noise_var = cfg.channel.noise_variance;
    ctx.battery = cfg.battery;
    ctx.options = cfg.reward;
    m.rewards = RewardTable(ctx);
    return m;
}

double NetworkModel::global_state_count() const {
    double n = 1.0;
    for (const auto& s : sensors) n *= static_cast<double>(s.state_count());
    return n;
}

void NetworkModel::validate() const {
    if (sensors.empty()) throw ParameterError("network needs at least one sensor");
    if (!(p_tot_mw > 0.0)) throw ParameterError("total power budget must be positive");
    if (!(eta > 0.0 && eta < 1.0)) throw ParameterError("discount factor must lie in (0, 1)");
}

}  // namespace ehpc
