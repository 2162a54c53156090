#pragma once

#include <cstddef>
#include <vector>

#include "ehpc/divergence_reward.hpp"
#include "ehpc/energy_model.hpp"
#include "ehpc/fading_channel.hpp"
#include "ehpc/sensing.hpp"

namespace ehpc {

/// Raw per-sensor inputs, before any derived quantity is computed.
struct SensorConfig {
    BatterySpec battery;
    std::vector<int> harvest_levels{0, 1, 2, 3};
    double harvest_persistence = 0.5;
    ChannelParams channel;
    QuantizerSpec quantizer;  // fully specified boundaries
    SensingParams sensing;
    DeploymentModel deployment;
    RewardOptions reward;
};

/// Local state (b, l, m): battery cells, previous-slot gain level, previous
/// harvest level. Indexed row-major: index = (b * L + l) * M + m.
struct LocalState {
    int battery = 0;
    std::size_t level = 0;
    std::size_t harvest = 0;
};

struct Successor {
    std::size_t state;
    double prob;
};

/// Derived model of one sensor.
struct SensorModel {
    SensorConfig config;
    FsmcModel channel_chain;
    HarvestSpec harvest;
    CensorStats censor;
    JCoefficients coeffs;
    RewardTable rewards;

    int capacity() const { return config.battery.capacity; }
    std::size_t levels() const { return config.quantizer.levels(); }
    std::size_t harvest_states() const { return harvest.levels.size(); }
    std::size_t state_count() const { return (capacity() + 1) * levels() * harvest_states(); }
    std::size_t index(const LocalState& s) const {
        return (s.battery * levels() + s.level) * harvest_states() + s.harvest;
    }
    LocalState decode(std::size_t index) const;
    double power_mw(int cells) const { return config.battery.power_mw(cells); }
    double silent_prob() const { return censor.silent_prob; }
    double transmit_prob() const { return censor.transmit_prob; }

    /// P(next | s, spend) without the transmit/silence mixing.
    std::vector<Successor> transition(std::size_t state, int cells) const;
    /// silent_prob * P(. | s, 0) + transmit_prob * P(. | s, cells).
    std::vector<Successor> mixed_transition(std::size_t state, int cells) const;
};

SensorModel build_sensor_model(const SensorConfig& cfg);

struct NetworkModel {
    std::vector<SensorModel> sensors;
    double p_tot_mw = 5.0;
    double eta = 0.9;

    std::size_t size() const { return sensors.size(); }
    /// |S|^N as a double (may exceed size_t).
    double global_state_count() const;
    void validate() const;
};

}  // namespace ehpc
