#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace dpsr {

using Observation = std::vector<double>;
using Action = std::size_t;

/// Opaque full-state capture of an environment. Only the environment kind
/// that produced a snapshot knows how to interpret its contents.
struct Snapshot {
    std::string kind;
    std::vector<double> reals;
    std::vector<std::uint64_t> integers;

    bool empty() const noexcept { return kind.empty(); }
    bool operator==(const Snapshot&) const = default;
};

/// One stored transition plus what the replay machinery needs to recycle it.
struct Experience {
    Observation state;
    Action action = 0;
    double reward = 0.0;
    Observation next_state;
    bool terminal = false;
    Snapshot snapshot;  // taken at `state`, before `action`
    std::uint64_t birth_step = 0;
    double priority = 1.0;

    bool operator==(const Experience&) const = default;
};

}  // namespace dpsr
