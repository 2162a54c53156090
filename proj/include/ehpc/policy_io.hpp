#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "ehpc/mdp_core.hpp"

namespace ehpc {

inline constexpr int kPolicyFormatVersion = 1;

struct SensorDims {
    int capacity = 0;
    std::size_t levels = 0;
    std::size_t harvest_states = 0;
};

struct PolicyFile {
    int version = kPolicyFormatVersion;
    std::string model_hash;
    Policy policy;
    std::vector<SensorDims> dims;
};

std::vector<SensorDims> dims_of(const NetworkModel& net);

/// 64-bit FNV-1a digest, rendered as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

/// Header lines start with '#'; the body is a CSV with header
/// `state_index,spend_cells_1..N` and one row per state.
void write_policy(std::ostream& os, const PolicyFile& file);
PolicyFile read_policy(std::istream& is);

/// Checks dimensions, feasibility and (for global tables) the power budget.
void check_policy(const PolicyFile& file, const NetworkModel& net);

}  // namespace ehpc
