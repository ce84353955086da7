#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mtopt/sim.hpp"
#include "mtopt/task.hpp"

namespace mtopt {

// View into an episode's step i: obs/action/next_obs plus the terminal flag.
struct Transition {
    const Observation* obs = nullptr;
    const Action* action = nullptr;
    const Observation* next_obs = nullptr;
    bool is_terminal = false;
};

// A task-labeled trajectory. Observations are stored once as a sequence of
// length len+1; transitions are views over consecutive pairs. Rewards are
// deliberately absent: they are assigned at log-replay time by the success
// detectors, so episodes can be relabeled when detectors improve.
struct Episode {
    std::string episode_id;
    TaskId collected_for;
    std::string policy_id;
    uint64_t seed = 0;
    int64_t created_at_us = 0;
    std::vector<Observation> observations;  // length = num_steps + 1
    std::vector<Action> actions;            // length = num_steps

    int num_steps() const { return static_cast<int>(actions.size()); }
    const Observation& terminal_obs() const { return observations.back(); }

    Transition transition(int i) const {
        return {&observations[i], &actions[i], &observations[i + 1],
                i + 1 == num_steps()};
    }

    // Empty string when valid, otherwise the violated invariant.
    std::string validate(int max_steps = 0) const;

    bool operator==(const Episode&) const = default;
};

struct LabeledEpisode {
    std::shared_ptr<const Episode> base;
    TaskId train_as;
    int reward = 0;  // {0,1}, attached to the terminal transition only
};

// Wire format: one episode per line, versioned JSON record.
std::string serialize_episode(const Episode& e);
Episode parse_episode(const std::string& line);

inline constexpr int kEpisodeFormatVersion = 1;

}  // namespace mtopt
