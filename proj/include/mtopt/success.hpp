#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "mtopt/dataset.hpp"
#include "mtopt/net.hpp"
#include "mtopt/sim.hpp"
#include "mtopt/task.hpp"

namespace mtopt {

// Terminal outcome with a full 0/1 label map. source_task / source_seed
// identify where the outcome came from, which drives the by-source holdout
// split and the "other task" error columns of the holdout report.
struct LabeledOutcome {
    Observation terminal_obs;
    std::map<TaskId, int> labels;
    TaskId source_task;
    uint64_t source_seed = 0;
};

// Maps (terminal observation, task) -> success probability. The oracle kind
// reads the sim's ground-truth outcome summary, optionally flipping labels
// with per-task noise; the learned kind is a task-conditioned classifier.
class SuccessDetector {
public:
    static SuccessDetector oracle(const TaskRegistry& registry,
                                  std::map<TaskId, double> flip_noise = {},
                                  uint64_t noise_seed = 0);
    static SuccessDetector learned(const TaskRegistry& registry, Mlp net);

    double evaluate(const Observation& terminal_obs, const TaskId& task) const;
    SdFn as_fn() const;

    bool is_learned() const { return kind_ == Kind::Learned; }
    const TaskRegistry& registry() const { return registry_; }
    const Mlp& net() const { return *net_; }

    void save(const std::string& path) const;
    static SuccessDetector load(const std::string& path);

private:
    enum class Kind { Oracle, Learned };
    SuccessDetector(Kind kind, TaskRegistry registry)
        : kind_(kind), registry_(std::move(registry)) {}

    Kind kind_;
    TaskRegistry registry_;
    std::map<TaskId, double> flip_noise_;
    std::shared_ptr<Mlp> net_;
    mutable std::shared_ptr<std::pair<std::mutex, Rng>> noise_rng_;
};

// Propagate the task dependency lattice: a semantic-lift success implies
// failure for the other semantic lifts and success for lift-any; same for
// region places and place-any; lift-any=0 forces all semantic lifts to 0.
// Stated labels are never overwritten; contradictions are an error.
std::map<TaskId, int> expand_labels(const std::map<TaskId, int>& partial,
                                    const TaskRegistry& registry);

struct SdFitConfig {
    std::vector<int> hidden = {64, 64};
    int epochs = 80;
    int steps_per_epoch = 200;
    int batch_size = 64;
    double learning_rate = 1e-3;
    uint64_t seed = 0;
    // When set, holdout loss is recorded once per epoch.
    const std::vector<LabeledOutcome>* holdout = nullptr;
};

struct SdFitResult {
    SuccessDetector sd;
    std::vector<TaskId> excluded_tasks;  // single-class tasks, skipped with a warning
    std::vector<double> holdout_loss;    // one entry per epoch when holdout given
};

// Task-conditioned sigmoid classifier over terminal features + task one-hot,
// trained with logistic loss on batches balanced across tasks and across
// outcome classes within each task.
SdFitResult fit_classifier(const std::vector<LabeledOutcome>& outcomes,
                           const TaskRegistry& registry, const SdFitConfig& config);

struct SdHoldoutRow {
    TaskId task;
    int64_t total_count = 0;
    int64_t success_count = 0;
    int64_t failure_count = 0;
    double success_rate = 0.0;
    double false_negative_rate = 0.0;
    double false_positive_rate = 0.0;
    double other_task_false_negative_rate = 0.0;
    double other_task_false_positive_rate = 0.0;
};

std::vector<SdHoldoutRow> sd_holdout_report(const SuccessDetector& sd,
                                            const std::vector<LabeledOutcome>& holdout);

std::string holdout_report_csv(const std::vector<SdHoldoutRow>& rows);

// Oracle-label outcomes for every episode of a dataset. Optional per-task
// flip noise simulates an imperfect labeler.
std::vector<LabeledOutcome> outcomes_from_dataset(
    const std::filesystem::path& dir, const TaskRegistry& registry,
    std::map<TaskId, double> flip_noise = {}, uint64_t noise_seed = 0);

// Source-partitioned split: episodes whose seed falls in the top
// `holdout_fraction` of the seed range go to holdout.
std::pair<std::vector<LabeledOutcome>, std::vector<LabeledOutcome>> split_by_seed(
    const std::vector<LabeledOutcome>& outcomes, double holdout_fraction);

}  // namespace mtopt
