#include "mtopt/impersonate.hpp"

#include <sstream>

#include "mtopt/dataset.hpp"

namespace mtopt {

std::string ImpersonationStrategy::label() const {
    switch (kind) {
        case ImpersonationKind::Orig: return "f_orig";
        case ImpersonationKind::All: return "f_all";
        case ImpersonationKind::Skill: return "f_skill";
        case ImpersonationKind::SkillStochastic: {
            std::ostringstream s;
            s << "f_skill(" << p_s << "," << p_f << ")";
            return s.str();
        }
    }
    return "?";
}

std::vector<TaskId> impersonation_targets(const ImpersonationStrategy& strategy,
                                          const TaskRegistry& registry,
                                          const TaskId& collected_for) {
    switch (strategy.kind) {
        case ImpersonationKind::Orig:
            return {collected_for};
        case ImpersonationKind::All:
            return registry.all_task_ids();
        case ImpersonationKind::Skill:
        case ImpersonationKind::SkillStochastic:
            return registry.tasks_in_skill(registry.skill_of(collected_for));
    }
    return {};
}

std::vector<LabeledEpisode> Impersonator::impersonate(
    std::shared_ptr<const Episode> episode, const SdFn& sd) {
    if (!episode || episode->observations.empty())
        throw std::invalid_argument("impersonate: episode missing terminal observation");
    const Observation& terminal = episode->terminal_obs();
    std::vector<LabeledEpisode> out;
    for (const TaskId& target : impersonation_targets(strategy_, registry_,
                                                      episode->collected_for)) {
        int reward = sd(terminal, target) >= 0.5 ? 1 : 0;
        if (strategy_.kind == ImpersonationKind::SkillStochastic) {
            double keep_p = reward ? strategy_.p_s : strategy_.p_f;
            if (!rng_.bernoulli(keep_p)) continue;
        }
        out.push_back({episode, target, reward});
    }
    return out;
}

std::map<TaskId, ImpersonationTaskStats> impersonation_stats(
    const std::filesystem::path& dataset_dir, const SdFn& sd,
    const ImpersonationStrategy& strategy, const TaskRegistry& registry) {
    std::map<TaskId, ImpersonationTaskStats> stats;
    for (const auto& t : registry.tasks()) stats[t.task_id] = {};
    Impersonator imp(strategy, registry);
    scan_dataset(dataset_dir, {}, [&](std::shared_ptr<const Episode> e) {
        for (const auto& labeled : imp.impersonate(e, sd)) {
            auto& s = stats[labeled.train_as];
            if (labeled.train_as == e->collected_for) {
                ++s.native_count;
            } else if (labeled.reward) {
                ++s.impersonated_extra_success;
            } else {
                ++s.impersonated_extra_failure;
            }
        }
    });
    return stats;
}

std::string impersonation_stats_csv(const std::map<TaskId, ImpersonationTaskStats>& stats) {
    std::ostringstream out;
    out << "task,native_count,impersonated_extra_success,impersonated_extra_failure\n";
    for (const auto& [task, s] : stats)
        out << task << ',' << s.native_count << ',' << s.impersonated_extra_success << ','
            << s.impersonated_extra_failure << '\n';
    return out.str();
}

std::string impersonation_stats_markdown(
    const std::map<TaskId, ImpersonationTaskStats>& stats) {
    std::ostringstream out;
    out << "| task | native | impersonated successes | impersonated failures |\n";
    out << "|---|---|---|---|\n";
    for (const auto& [task, s] : stats)
        out << "| " << task << " | " << s.native_count << " | "
            << s.impersonated_extra_success << " | " << s.impersonated_extra_failure
            << " |\n";
    return out.str();
}

}  // namespace mtopt
