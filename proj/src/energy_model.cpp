#include "ehpc/energy_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ehpc/errors.hpp"

namespace ehpc {

void BatterySpec::validate() const {
    if (capacity < 1) throw ParameterError("battery capacity K must be at least 1 cell");
    if (!(cell_energy_mj > 0.0)) throw ParameterError("cell energy b_u must be positive");
    if (!(slot_s > 0.0)) throw ParameterError("slot length T_s must be positive");
}

double BatterySpec::amplitude(int cells) const { return std::sqrt(power_mw(cells)); }

HarvestSpec build_harvest_chain(double persistence, std::size_t state_count, const std::vector<int>& levels) {
    if (!(persistence > 0.0 && persistence < 1.0))
        throw ParameterError("harvest persistence rho must lie in (0, 1)");
    if (state_count < 2) throw ParameterError("harvest chain needs at least 2 states");
    if (levels.size() != state_count)
        throw ParameterError("harvest levels must list one cell count per state");
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (levels[i] < 0) throw ParameterError("harvest levels must be nonnegative");
        if (i > 0 && levels[i] <= levels[i - 1])
            throw ParameterError("harvest levels must be strictly increasing");
    }
    const std::size_t m = state_count;
    const double move = 1.0 - persistence;
    std::vector<double> matrix(m * m, 0.0);
    for (std::size_t from = 0; from < m; ++from) {
        double* col = matrix.data() + from * m;
        col[from] = persistence;
        if (from == 0) {
            col[1] = move;
        } else if (from == m - 1) {
            col[m - 2] = move;
        } else {
            col[from - 1] = 0.5 * move;
            col[from + 1] = 0.5 * move;
        }
    }
    // Birth-death chain: pi_{i+1} / pi_i = P(i -> i+1) / P(i+1 -> i).
    std::vector<double> pi(m, 1.0);
    for (std::size_t i = 0; i + 1 < m; ++i)
        pi[i + 1] = pi[i] * matrix[i * m + i + 1] / matrix[(i + 1) * m + i];
    const double total = std::accumulate(pi.begin(), pi.end(), 0.0);
    for (double& v : pi) v /= total;

    std::vector<double> values(levels.begin(), levels.end());
    HarvestSpec h;
    h.levels = levels;
    h.persistence = persistence;
    h.chain = FsmcModel(std::move(values), std::move(pi), std::move(matrix));
    return h;
}

int battery_step(int battery, int harvested, int spent, int capacity) {
    if (battery < 0 || battery > capacity) throw ParameterError("battery level outside [0, K]");
    if (harvested < 0) throw ParameterError("harvested energy must be nonnegative");
    if (spent < 0 || spent > battery) {
        std::ostringstream os;
        os << "battery_step: spending " << spent << " cells from a battery holding " << battery;
        throw FeasibilityError(os.str());
    }
    return std::min(std::max(battery + harvested - spent, 0), capacity);
}

std::vector<int> feasible_spend_set(int battery) {
    if (battery < 0) throw ParameterError("battery level must be nonnegative");
    std::vector<int> out(static_cast<std::size_t>(battery) + 1);
    std::iota(out.begin(), out.end(), 0);
    return out;
}

}  // namespace ehpc
