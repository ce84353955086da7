#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <vector>

#include "mtopt/episode.hpp"
#include "mtopt/rng.hpp"
#include "mtopt/success.hpp"
#include "mtopt/task.hpp"

namespace mtopt {

enum class ImpersonationKind { Orig, All, Skill, SkillStochastic };

// Expands one collected episode into per-task labeled training episodes.
// orig: only the collecting task; all: every registered task; skill: every
// task sharing the collector's skill; skill_stochastic: skill targets kept
// with probability p_s (successes) / p_f (failures), sampled independently
// per (episode, target).
struct ImpersonationStrategy {
    ImpersonationKind kind = ImpersonationKind::Skill;
    double p_s = 1.0;
    double p_f = 1.0;
    uint64_t rng_seed = 0;

    static ImpersonationStrategy orig() { return {ImpersonationKind::Orig}; }
    static ImpersonationStrategy all() { return {ImpersonationKind::All}; }
    static ImpersonationStrategy skill() { return {ImpersonationKind::Skill}; }
    static ImpersonationStrategy skill_stochastic(double p_s, double p_f,
                                                  uint64_t seed = 0) {
        return {ImpersonationKind::SkillStochastic, p_s, p_f, seed};
    }

    std::string label() const;
};

// Candidate target set for an episode collected for `collected_for`
// (retention sampling not applied).
std::vector<TaskId> impersonation_targets(const ImpersonationStrategy& strategy,
                                          const TaskRegistry& registry,
                                          const TaskId& collected_for);

class Impersonator {
public:
    Impersonator(ImpersonationStrategy strategy, const TaskRegistry& registry)
        : strategy_(strategy), registry_(registry), rng_(strategy.rng_seed) {}

    // Algorithm: for each target task, grade the terminal observation with
    // that task's SD and emit the episode labeled for the target with the
    // resulting binary reward (threshold 0.5).
    std::vector<LabeledEpisode> impersonate(std::shared_ptr<const Episode> episode,
                                            const SdFn& sd);

    const ImpersonationStrategy& strategy() const { return strategy_; }

private:
    ImpersonationStrategy strategy_;
    TaskRegistry registry_;
    Rng rng_;
};

struct ImpersonationTaskStats {
    int64_t native_count = 0;
    int64_t impersonated_extra_success = 0;
    int64_t impersonated_extra_failure = 0;
};

std::map<TaskId, ImpersonationTaskStats> impersonation_stats(
    const std::filesystem::path& dataset_dir, const SdFn& sd,
    const ImpersonationStrategy& strategy, const TaskRegistry& registry);

std::string impersonation_stats_csv(const std::map<TaskId, ImpersonationTaskStats>& stats);
std::string impersonation_stats_markdown(
    const std::map<TaskId, ImpersonationTaskStats>& stats);

}  // namespace mtopt
