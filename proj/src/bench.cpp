#include "mtopt/bench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace mtopt {

// ---------------------------------------------------------------------------
// Summary statistics

double percentile(std::vector<double> values, double p) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    double pos = (static_cast<double>(values.size()) - 1.0) * p / 100.0;
    size_t lo = static_cast<size_t>(std::floor(pos));
    size_t hi = static_cast<size_t>(std::ceil(pos));
    double frac = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
}

EvalSummary summarize_rates(const std::vector<double>& rates,
                            const std::vector<double>& low_data_rates) {
    EvalSummary s;
    if (!rates.empty()) {
        s.min = *std::min_element(rates.begin(), rates.end());
        s.max = *std::max_element(rates.begin(), rates.end());
        s.p25 = percentile(rates, 25.0);
        s.median = percentile(rates, 50.0);
        s.p75 = percentile(rates, 75.0);
        double sum = 0.0;
        for (double r : rates) sum += r;
        s.mean = sum / static_cast<double>(rates.size());
    }
    if (!low_data_rates.empty()) {
        double sum = 0.0;
        for (double r : low_data_rates) sum += r;
        s.mean_low_data = sum / static_cast<double>(low_data_rates.size());
    }
    return s;
}

// ---------------------------------------------------------------------------
// Evaluation

EvalReport evaluate(const QFunction& q, const TaskRegistry& registry,
                    const std::vector<TaskId>& tasks, const SimConfig& sim,
                    const SceneSpec& scene, const EvalOptions& opts) {
    EvalReport report;
    report.seed = opts.seed;
    report.episodes_per_task = opts.episodes_per_task;
    report.scene_name = scene.name;
    report.low_data_tasks = opts.low_data_tasks;

    TabletopEnv env(sim);
    for (const TaskId& task : tasks) {
        int idx = registry.onehot_index(task);
        SceneSpec task_scene = scene;
        if (registry.skill_of(task) == kSkillManip && task_scene.start_held == -2) {
            // MANIP tasks are evaluated from the post-lift stage of a chain.
            task_scene.start_held = task == "push-to-zone" ? sim.zone_category : -1;
        }
        TaskEvalStats stats;
        for (int ep = 0; ep < opts.episodes_per_task; ++ep) {
            uint64_t ep_seed = opts.seed + static_cast<uint64_t>(idx) * 100003ULL +
                               static_cast<uint64_t>(ep);
            Observation obs = env.reset(ep_seed, task_scene);
            ++stats.episodes;
            if (!env.task_feasible(task)) {
                if (!stats.feasibility_warning)
                    std::cerr << "eval: task " << task << " infeasible at seed "
                              << ep_seed << "; counted as failure\n";
                stats.feasibility_warning = true;
                continue;
            }
            Rng rng(ep_seed ^ 0x6a09e667f3bcc909ULL);
            bool done = false;
            while (!done) {
                Action a = policy_act(q, obs.as_input(), idx, opts.cem, 0.0, rng);
                auto [next_obs, is_done] = env.step(a);
                obs = next_obs;
                done = is_done;
            }
            if (task_predicate(obs.summary, task)) ++stats.successes;
        }
        stats.rate = stats.episodes > 0
                         ? static_cast<double>(stats.successes) / stats.episodes
                         : 0.0;
        report.per_task[task] = stats;
    }

    std::vector<double> rates, low_rates;
    for (const TaskId& task : tasks) rates.push_back(report.per_task[task].rate);
    for (const TaskId& task : opts.low_data_tasks) {
        auto it = report.per_task.find(task);
        if (it != report.per_task.end()) low_rates.push_back(it->second.rate);
    }
    report.summary = summarize_rates(rates, low_rates);
    return report;
}

namespace {

void append_summary_rows(std::ostringstream& out, const EvalSummary& s,
                         const std::string& sep, const std::string& pre,
                         const std::string& post) {
    auto row = [&](const std::string& name, double v) {
        out << pre << name << sep << sep << sep << v << sep << post << "\n";
    };
    row("min", s.min);
    row("p25", s.p25);
    row("median", s.median);
    row("mean", s.mean);
    row("p75", s.p75);
    row("max", s.max);
    row("mean_low_data", s.mean_low_data);
}

}  // namespace

std::string EvalReport::to_csv() const {
    std::ostringstream out;
    out << "task,episodes,successes,success_rate,feasibility_warning\n";
    for (const auto& [task, s] : per_task)
        out << task << "," << s.episodes << "," << s.successes << "," << s.rate << ","
            << (s.feasibility_warning ? 1 : 0) << "\n";
    append_summary_rows(out, summary, ",", "", "");
    return out.str();
}

std::string EvalReport::to_markdown() const {
    std::ostringstream out;
    out << "| task | episodes | successes | success_rate |\n";
    out << "|---|---|---|---|\n";
    for (const auto& [task, s] : per_task)
        out << "| " << task << " | " << s.episodes << " | " << s.successes << " | "
            << s.rate << (s.feasibility_warning ? " (!)" : "") << " |\n";
    append_summary_rows(out, summary, " | ", "| ", "");
    return out.str();
}

std::vector<TaskId> low_data_tasks(const std::filesystem::path& dataset,
                                   const TaskRegistry& registry, int k) {
    std::map<TaskId, int64_t> counts;
    for (const auto& info : registry.tasks()) counts[info.task_id] = 0;
    scan_dataset(dataset, {}, [&](std::shared_ptr<const Episode> e) {
        auto it = counts.find(e->collected_for);
        if (it != counts.end()) ++it->second;
    });
    std::vector<TaskId> order = registry.all_task_ids();
    std::stable_sort(order.begin(), order.end(), [&](const TaskId& a, const TaskId& b) {
        return counts[a] < counts[b];
    });
    if (static_cast<int>(order.size()) > k) order.resize(k);
    return order;
}

uint64_t dataset_fingerprint(const std::filesystem::path& dataset) {
    std::vector<std::filesystem::path> shards;
    for (const auto& entry : std::filesystem::directory_iterator(dataset)) {
        if (entry.path().extension() == ".ndrec") shards.push_back(entry.path());
    }
    std::sort(shards.begin(), shards.end());
    uint64_t h = 1469598103934665603ULL;
    for (const auto& shard : shards) {
        std::ifstream in(shard, std::ios::binary);
        char c;
        while (in.get(c)) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ULL;
        }
    }
    return h;
}

// ---------------------------------------------------------------------------
// Benchmark dataset generator

std::map<TaskId, TaskDataStats> generate_benchmark_dataset(
    const std::filesystem::path& dir, const TaskRegistry& registry,
    const SimConfig& sim, const BenchmarkDatasetConfig& cfg) {
    DatasetWriter writer(dir);
    SceneSpec scene = SceneSpec::standard_eval_scene();
    auto n = [&](int count) {
        return std::max(1, static_cast<int>(std::lround(count * cfg.scale)));
    };

    // Indiscriminate bulk: noisy scripted lift-any, each followed by a
    // chained place-any attempt on the lifted object.
    TaskMixture bulk = TaskMixture::single("lift-any");
    bulk.chains["lift-any"] = {"place-any"};
    PolicySource scripted = PolicySource::scripted_source();
    collect(registry, sim, scene, scripted, bulk, n(600), writer, cfg.seed + 1,
            "scripted-bulk");

    // Narrow tasks: far fewer episodes, object-targeted scripted picks.
    PolicySource targeted = PolicySource::scripted_source({0.10, true});
    int per_cat[7] = {50, 50, 50, 50, 25, 25, 25};
    for (int k = 0; k < 7; ++k) {
        if (!registry.has_task("lift-cat" + std::to_string(k))) continue;
        collect(registry, sim, scene, targeted,
                TaskMixture::single("lift-cat" + std::to_string(k)), n(per_cat[k]),
                writer, cfg.seed + 10 + k, "scripted-cat" + std::to_string(k));
    }
    for (const char* place : {"place-A", "place-B", "place-C"}) {
        if (!registry.has_task(place)) continue;
        collect(registry, sim, scene, scripted, TaskMixture::single(place), n(20),
                writer, cfg.seed + 20 + place[6], "scripted-" + std::string(place));
    }

    // Random-coverage slice: a pure-random policy (explore probability 1)
    // visits wandering states no scripted rollout reaches. Without the
    // reward-0 terminals it contributes, greedy CEM policies chase optimistic
    // Q extrapolations into unvisited corners of the workspace.
    PolicySource random_cov = PolicySource::scripted_source({0.15, false, 1.0});
    collect(registry, sim, scene, random_cov, TaskMixture::single("lift-any"),
            n(150), writer, cfg.seed + 30, "random-coverage");
    if (registry.has_task("place-any"))  // held-state coverage for MANIP heads
        collect(registry, sim, scene, random_cov, TaskMixture::single("place-any"),
                n(100), writer, cfg.seed + 31, "random-coverage-held");

    // Exploration slice: epsilon-greedy on a fresh random-weight network,
    // uniformly mixed over the catalog.
    if (cfg.epsilon_greedy_episodes > 0) {
        Rng qrng(cfg.seed + 40);
        QFunction q = QFunction::make(QArch::SingleHeaded, feature_dim(scene.capacity),
                                      registry.num_tasks(), qrng);
        CemConfig cem;
        cem.iterations = 2;
        cem.samples_per_iter = 32;
        PolicySource eps = PolicySource::eps_greedy(q, 0.2, cem);
        TaskMixture uniform;
        for (const auto& info : registry.tasks())
            uniform.weights[info.task_id] = 1.0 / registry.num_tasks();
        collect(registry, sim, scene, eps, uniform, n(cfg.epsilon_greedy_episodes),
                writer, cfg.seed + 41, "eps-greedy");
    }

    SuccessDetector oracle = SuccessDetector::oracle(registry);
    return dataset_stats(dir, oracle.as_fn(), registry);
}

// ---------------------------------------------------------------------------
// Ablation grid

std::vector<AblationCell> table5_cells() {
    return {
        {"f_orig, uniform", ImpersonationStrategy::orig(), false},
        {"f_all, uniform", ImpersonationStrategy::all(), false},
        {"f_skill(1, 0.15), re-balanced", ImpersonationStrategy::skill_stochastic(1.0, 0.15),
         true},
        {"f_skill(1, 1), re-balanced", ImpersonationStrategy::skill(), true},
    };
}

AblationGrid run_ablation_grid(const std::filesystem::path& dataset,
                               const PipelineConfig& base, const SuccessDetector& sd,
                               const std::vector<AblationCell>& cells,
                               const std::vector<uint64_t>& seeds, const SimConfig& sim,
                               const SceneSpec& scene, const EvalOptions& eval_opts) {
    AblationGrid grid;
    uint64_t fp = dataset_fingerprint(dataset);
    EvalOptions eo = eval_opts;
    if (eo.low_data_tasks.empty())
        eo.low_data_tasks = low_data_tasks(dataset, base.registry, 6);

    for (const auto& cell : cells) {
        for (uint64_t seed : seeds) {
            AblationRun run;
            run.cell = cell.name;
            run.seed = seed;
            run.dataset_fingerprint = dataset_fingerprint(dataset);
            if (run.dataset_fingerprint != fp)
                throw std::runtime_error("ablation grid: dataset changed mid-grid");
            try {
                PipelineConfig cfg = base;
                cfg.datasets = {dataset};
                cfg.strategy = cell.strategy;
                if (cfg.strategy.kind == ImpersonationKind::SkillStochastic)
                    cfg.strategy.rng_seed = seed + 1000;
                cfg.uniform_sampling = !cell.rebalanced;
                cfg.seed = seed;
                TrainingResult res = run_training(cfg, sd);
                run.report = evaluate(res.q, base.registry, base.registry.all_task_ids(),
                                      sim, scene, eo);
            } catch (const std::exception& e) {
                run.failed = true;
                run.error = e.what();
            }
            grid.runs.push_back(std::move(run));
        }
    }

    for (const auto& cell : cells) {
        double mean = 0, mean_low = 0;
        int ok = 0;
        for (const auto& run : grid.runs) {
            if (run.cell != cell.name || run.failed) continue;
            mean += run.report.summary.mean;
            mean_low += run.report.summary.mean_low_data;
            ++ok;
        }
        if (ok > 0) {
            grid.mean_by_cell[cell.name] = mean / ok;
            grid.mean_low_data_by_cell[cell.name] = mean_low / ok;
        }
    }
    return grid;
}

namespace {

struct CellAverage {
    EvalSummary sum;
    int count = 0;
};

std::map<std::string, EvalSummary> averaged_summaries(const AblationGrid& grid) {
    std::map<std::string, CellAverage> acc;
    for (const auto& run : grid.runs) {
        if (run.failed) continue;
        CellAverage& a = acc[run.cell];
        const EvalSummary& s = run.report.summary;
        a.sum.min += s.min;
        a.sum.p25 += s.p25;
        a.sum.median += s.median;
        a.sum.mean += s.mean;
        a.sum.p75 += s.p75;
        a.sum.max += s.max;
        a.sum.mean_low_data += s.mean_low_data;
        ++a.count;
    }
    std::map<std::string, EvalSummary> out;
    for (auto& [cell, a] : acc) {
        EvalSummary s = a.sum;
        double n = a.count;
        s.min /= n; s.p25 /= n; s.median /= n; s.mean /= n;
        s.p75 /= n; s.max /= n; s.mean_low_data /= n;
        out[cell] = s;
    }
    return out;
}

}  // namespace

std::string AblationGrid::to_csv() const {
    std::ostringstream out;
    out << "strategy,min,p25,median,mean,p75,max,mean_low_data,seeds,failed\n";
    auto avg = averaged_summaries(*this);
    std::set<std::string> cells;
    for (const auto& run : runs) cells.insert(run.cell);
    for (const auto& cell : cells) {
        int ok = 0, failed = 0;
        for (const auto& run : runs) {
            if (run.cell != cell) continue;
            run.failed ? ++failed : ++ok;
        }
        auto it = avg.find(cell);
        out << "\"" << cell << "\",";
        if (it != avg.end()) {
            const EvalSummary& s = it->second;
            out << s.min << "," << s.p25 << "," << s.median << "," << s.mean << ","
                << s.p75 << "," << s.max << "," << s.mean_low_data;
        } else {
            out << ",,,,,,";
        }
        out << "," << ok << "," << failed << "\n";
    }
    return out.str();
}

std::string AblationGrid::to_markdown() const {
    std::ostringstream out;
    out << "| strategy | min | p25 | median | mean | p75 | max | mean_low_data |\n";
    out << "|---|---|---|---|---|---|---|---|\n";
    auto avg = averaged_summaries(*this);
    std::set<std::string> cells;
    for (const auto& run : runs) cells.insert(run.cell);
    for (const auto& cell : cells) {
        auto it = avg.find(cell);
        out << "| " << cell << " | ";
        if (it != avg.end()) {
            const EvalSummary& s = it->second;
            out << s.min << " | " << s.p25 << " | " << s.median << " | " << s.mean
                << " | " << s.p75 << " | " << s.max << " | " << s.mean_low_data;
        } else {
            out << "failed | | | | | | ";
        }
        out << " |\n";
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Paired studies

std::string PairedReport::to_csv() const {
    std::ostringstream out;
    out << "task," << label_a << "," << label_b << "\n";
    std::set<TaskId> tasks;
    for (const auto& [t, s] : a.per_task) tasks.insert(t);
    for (const auto& [t, s] : b.per_task) tasks.insert(t);
    auto rate = [](const EvalReport& r, const TaskId& t) -> std::string {
        auto it = r.per_task.find(t);
        return it == r.per_task.end() ? "" : std::to_string(it->second.rate);
    };
    for (const auto& t : tasks)
        out << t << "," << rate(a, t) << "," << rate(b, t) << "\n";
    out << "mean," << a.summary.mean << "," << b.summary.mean << "\n";
    return out.str();
}

std::string PairedReport::to_markdown() const {
    std::ostringstream out;
    out << "| task | " << label_a << " | " << label_b << " |\n|---|---|---|\n";
    std::set<TaskId> tasks;
    for (const auto& [t, s] : a.per_task) tasks.insert(t);
    for (const auto& [t, s] : b.per_task) tasks.insert(t);
    auto rate = [](const EvalReport& r, const TaskId& t) -> std::string {
        auto it = r.per_task.find(t);
        return it == r.per_task.end() ? "-" : std::to_string(it->second.rate);
    };
    for (const auto& t : tasks)
        out << "| " << t << " | " << rate(a, t) << " | " << rate(b, t) << " |\n";
    out << "| mean | " << a.summary.mean << " | " << b.summary.mean << " |\n";
    return out.str();
}

PairedReport run_param_sharing_ablation(const std::filesystem::path& dataset,
                                        const PipelineConfig& base,
                                        const SuccessDetector& sd, const SimConfig& sim,
                                        const SceneSpec& scene,
                                        const EvalOptions& eval_opts,
                                        const std::vector<TaskId>& eval_tasks) {
    PipelineConfig full = base;
    full.datasets = {dataset};
    full.batch.active_tasks = base.registry.all_task_ids();

    PipelineConfig pair = base;
    pair.datasets = {dataset};
    pair.batch.active_tasks = {"lift-any", "place-any"};

    TrainingResult res_full = run_training(full, sd);
    TrainingResult res_pair = run_training(pair, sd);

    std::vector<TaskId> tasks =
        eval_tasks.empty() ? std::vector<TaskId>{"lift-any", "place-any"} : eval_tasks;
    PairedReport out;
    out.label_a = "12-task";
    out.label_b = "2-task";
    out.a = evaluate(res_full.q, base.registry, tasks, sim, scene, eval_opts);
    out.b = evaluate(res_pair.q, base.registry, tasks, sim, scene, eval_opts);
    return out;
}

BootstrapResult run_bootstrap_study(const std::filesystem::path& dataset,
                                    const TaskId& rare_task, const PipelineConfig& base,
                                    const SuccessDetector& sd, const SimConfig& sim,
                                    const SceneSpec& scene,
                                    const EvalOptions& eval_opts) {
    BootstrapResult out;

    // (a) single-task baseline: native rare-task episodes plus impersonated
    // successes only -- no foreign failures ever reach its buffers.
    PipelineConfig cfg_a = base;
    cfg_a.datasets = {dataset};
    cfg_a.batch.active_tasks = {rare_task};
    cfg_a.insert_filter = [rare_task](const LabeledEpisode& le) {
        if (le.train_as != rare_task) return false;
        return le.reward == 1 || le.base->collected_for == rare_task;
    };

    // (b) full MT-Opt: same data, impersonated failures included.
    PipelineConfig cfg_b = base;
    cfg_b.datasets = {dataset};
    cfg_b.batch.active_tasks = base.registry.all_task_ids();

    // Audit the rare-task failure routing of both configurations.
    {
        Impersonator imp(base.strategy, base.registry);
        SdFn fn = sd.as_fn();
        scan_dataset(dataset, {}, [&](std::shared_ptr<const Episode> e) {
            for (const auto& le : imp.impersonate(e, fn)) {
                if (le.train_as != rare_task || le.reward != 0) continue;
                if (le.base->collected_for == rare_task) continue;
                ++out.mtopt_foreign_failures;
                if (cfg_a.insert_filter(le)) ++out.baseline_foreign_failures;
            }
        });
    }

    TrainingResult res_a = run_training(cfg_a, sd);
    TrainingResult res_b = run_training(cfg_b, sd);

    out.report.label_a = "successes-only single-task";
    out.report.label_b = "MT-Opt";
    out.report.a = evaluate(res_a.q, base.registry, {rare_task}, sim, scene, eval_opts);
    out.report.b = evaluate(res_b.q, base.registry, {rare_task}, sim, scene, eval_opts);
    return out;
}

PairedReport run_arch_comparison(const std::filesystem::path& dataset,
                                 const PipelineConfig& base, const SuccessDetector& sd,
                                 const SimConfig& sim, const SceneSpec& scene,
                                 const EvalOptions& eval_opts) {
    PipelineConfig single = base;
    single.datasets = {dataset};
    single.arch = QArch::SingleHeaded;

    PipelineConfig multi = base;
    multi.datasets = {dataset};
    multi.arch = QArch::MultiHeaded;

    TrainingResult res_s = run_training(single, sd);
    TrainingResult res_m = run_training(multi, sd);

    PairedReport out;
    out.label_a = "single-headed";
    out.label_b = "multi-headed";
    out.a = evaluate(res_s.q, base.registry, base.registry.all_task_ids(), sim, scene,
                     eval_opts);
    out.b = evaluate(res_m.q, base.registry, base.registry.all_task_ids(), sim, scene,
                     eval_opts);
    return out;
}

}  // namespace mtopt
