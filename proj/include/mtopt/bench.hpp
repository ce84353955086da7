#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mtopt/pipeline.hpp"
#include "mtopt/qlearn.hpp"
#include "mtopt/sim.hpp"
#include "mtopt/success.hpp"
#include "mtopt/task.hpp"

namespace mtopt {

// ---------------------------------------------------------------------------
// Evaluation

struct TaskEvalStats {
    int episodes = 0;
    int successes = 0;
    double rate = 0.0;
    bool feasibility_warning = false;  // task was infeasible in >=1 reset
};

struct EvalSummary {
    double min = 0, p25 = 0, median = 0, mean = 0, p75 = 0, max = 0;
    double mean_low_data = 0;
};

struct EvalReport {
    std::map<TaskId, TaskEvalStats> per_task;
    EvalSummary summary;
    std::vector<TaskId> low_data_tasks;
    uint64_t seed = 0;
    int episodes_per_task = 0;
    std::string scene_name;

    std::string to_csv() const;
    std::string to_markdown() const;
};

// Linear-interpolation percentile over a copy of `values`; p in [0,100].
double percentile(std::vector<double> values, double p);

EvalSummary summarize_rates(const std::vector<double>& rates,
                            const std::vector<double>& low_data_rates);

struct EvalOptions {
    int episodes_per_task = 20;
    uint64_t seed = 0;
    CemConfig cem;
    std::vector<TaskId> low_data_tasks;  // the mean_low_data subset
};

// Greedy (epsilon = 0) rollouts on fresh resets of `scene`, judged by the
// oracle predicates. Seeds enumerate deterministically per (task, episode).
EvalReport evaluate(const QFunction& q, const TaskRegistry& registry,
                    const std::vector<TaskId>& tasks, const SimConfig& sim,
                    const SceneSpec& scene, const EvalOptions& opts);

// The k tasks with the fewest natively collected episodes (ties broken by
// catalog order).
std::vector<TaskId> low_data_tasks(const std::filesystem::path& dataset,
                                   const TaskRegistry& registry, int k = 6);

// FNV-1a over every shard's bytes; grid cells must agree on it.
uint64_t dataset_fingerprint(const std::filesystem::path& dataset);

// ---------------------------------------------------------------------------
// Benchmark dataset generator: scripted + epsilon-greedy collection shaped
// like the paper's imbalance (indiscriminate >= 10x each narrow task).

struct BenchmarkDatasetConfig {
    double scale = 1.0;  // scales all episode counts
    int epsilon_greedy_episodes = 60;
    uint64_t seed = 0;
};

std::map<TaskId, TaskDataStats> generate_benchmark_dataset(
    const std::filesystem::path& dir, const TaskRegistry& registry,
    const SimConfig& sim, const BenchmarkDatasetConfig& cfg = {});

// ---------------------------------------------------------------------------
// Ablation grids

struct AblationCell {
    std::string name;
    ImpersonationStrategy strategy;
    bool rebalanced = true;
};

// The four corner cells of the Table-5 layout:
// f_orig+uniform, f_all+uniform, f_skill(1,0.15)+rebalanced,
// f_skill(1,1)+rebalanced.
std::vector<AblationCell> table5_cells();

struct AblationRun {
    std::string cell;
    uint64_t seed = 0;
    bool failed = false;
    std::string error;
    EvalReport report;
    uint64_t dataset_fingerprint = 0;
};

struct AblationGrid {
    std::vector<AblationRun> runs;
    // Seed-averaged summaries keyed by cell name.
    std::map<std::string, double> mean_by_cell;
    std::map<std::string, double> mean_low_data_by_cell;

    std::string to_csv() const;
    std::string to_markdown() const;
};

// One checkpoint + report per (cell, seed); failed cells are recorded and
// the grid continues. All cells must see identical dataset bytes.
AblationGrid run_ablation_grid(const std::filesystem::path& dataset,
                               const PipelineConfig& base, const SuccessDetector& sd,
                               const std::vector<AblationCell>& cells,
                               const std::vector<uint64_t>& seeds, const SimConfig& sim,
                               const SceneSpec& scene, const EvalOptions& eval_opts);

// ---------------------------------------------------------------------------
// Paired studies

struct PairedReport {
    std::string label_a, label_b;
    EvalReport a, b;

    std::string to_csv() const;
    std::string to_markdown() const;
};

// 12-task model vs a model trained on {lift-any, place-any} batches only,
// same dataset / impersonation / budget, evaluated on the two shared tasks
// plus any extra tasks in eval_opts-provided list.
PairedReport run_param_sharing_ablation(const std::filesystem::path& dataset,
                                        const PipelineConfig& base,
                                        const SuccessDetector& sd, const SimConfig& sim,
                                        const SceneSpec& scene,
                                        const EvalOptions& eval_opts,
                                        const std::vector<TaskId>& eval_tasks);

struct BootstrapResult {
    PairedReport report;  // a = successes-only single-task, b = full MT-Opt
    // Audit: rare-task failure-buffer insertions originating from episodes
    // collected for other tasks.
    int64_t baseline_foreign_failures = 0;
    int64_t mtopt_foreign_failures = 0;
};

BootstrapResult run_bootstrap_study(const std::filesystem::path& dataset,
                                    const TaskId& rare_task, const PipelineConfig& base,
                                    const SuccessDetector& sd, const SimConfig& sim,
                                    const SceneSpec& scene,
                                    const EvalOptions& eval_opts);

// Single- vs multi-headed variant from one config toggle; Fig.-8-style
// side-by-side per-task table, no ordering asserted.
PairedReport run_arch_comparison(const std::filesystem::path& dataset,
                                 const PipelineConfig& base, const SuccessDetector& sd,
                                 const SimConfig& sim, const SceneSpec& scene,
                                 const EvalOptions& eval_opts);

}  // namespace mtopt
