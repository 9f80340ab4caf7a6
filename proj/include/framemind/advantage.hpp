// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace framemind {

struct BatchVoidError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct AdvantageVector {
    std::vector<double> values;
};

/// Reward minus the group mean. Groups smaller than two carry no signal.
inline AdvantageVector group_advantages(std::span<const double> rewards) {
    if (rewards.size() < 2) throw BatchVoidError("group needs at least 2 rewards, got " + std::to_string(rewards.size()));
    const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / static_cast<double>(rewards.size());
    AdvantageVector out;
    out.values.reserve(rewards.size());
    for (double r : rewards) out.values.push_back(r - mean);
    return out;
}

} // namespace framemind
