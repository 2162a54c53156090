#pragma once

#include <cstddef>
#include <vector>

#include "ehpc/fading_channel.hpp"

namespace ehpc {

/// Finite battery of `capacity` cells; one cell stores `cell_energy_mj` mJ.
///
/// Energy is tracked in integer cells. Spending c cells in a slot of
/// `slot_s` seconds radiates c * cell_energy_mj / slot_s milliwatts, and the
/// transmit amplitude is the square root of that power in sqrt(mW).
struct BatterySpec {
    int capacity = 5;
    double cell_energy_mj = 1.0;
    double slot_s = 1.0;

    void validate() const;
    double cell_power_mw() const { return cell_energy_mj / slot_s; }
    double power_mw(int cells) const { return cells * cell_power_mw(); }
    double power_w(int cells) const { return power_mw(cells) * 1e-3; }
    double amplitude(int cells) const;
};

/// Energy-arrival chain over harvest levels expressed in cells.
struct HarvestSpec {
    std::vector<int> levels;
    FsmcModel chain;
    double persistence = 0.5;
};

/// Tridiagonal harvest chain: stay with probability rho; boundary states move
/// inward with 1 - rho, interior states move to each neighbour with (1 - rho)/2.
HarvestSpec build_harvest_chain(double persistence, std::size_t state_count, const std::vector<int>& levels);

/// min(max(b + e - spent, 0), K). Throws FeasibilityError when spent > b.
int battery_step(int battery, int harvested, int spent, int capacity);

/// {0, 1, ..., battery}.
std::vector<int> feasible_spend_set(int battery);

}  // namespace ehpc
