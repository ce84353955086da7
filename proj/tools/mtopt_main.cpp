// mtopt command-line harness: collection, SD fitting, training, evaluation
// and the ablation studies, all driving the library API.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "mtopt/bench.hpp"
#include "mtopt/impersonate.hpp"
#include "mtopt/pipeline.hpp"
#include "mtopt/success.hpp"

using namespace mtopt;

namespace {

ImpersonationStrategy parse_strategy(const std::string& name, double p_s, double p_f,
                                     uint64_t seed) {
    if (name == "f_orig") return ImpersonationStrategy::orig();
    if (name == "f_all") return ImpersonationStrategy::all();
    if (name == "f_skill") return ImpersonationStrategy::skill();
    if (name == "f_skill_stochastic")
        return ImpersonationStrategy::skill_stochastic(p_s, p_f, seed);
    throw CLI::ValidationError("strategy", "unknown strategy " + name);
}

SceneSpec load_scene(const std::string& path) {
    return path.empty() ? SceneSpec::standard_eval_scene() : SceneSpec::load(path);
}

void write_or_print(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text;
    } else {
        std::ofstream out(path);
        out << text;
    }
}

int fail_check(const std::string& what) {
    std::cerr << "CHECK FAILED: " << what << "\n";
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MT-Opt desk-scale benchmark harness"};
    app.require_subcommand(1);

    // ---- collect ----
    auto* collect_cmd = app.add_subcommand("collect", "Collect episodes into a dataset");
    std::string c_out, c_task = "lift-any", c_scene, c_chain;
    int c_episodes = 100;
    uint64_t c_seed = 0;
    double c_noise = 0.15, c_scale = 1.0;
    bool c_target_object = false, c_benchmark = false;
    collect_cmd->add_option("--out", c_out, "Dataset directory")->required();
    collect_cmd->add_option("--task", c_task, "Task to collect for");
    collect_cmd->add_option("--episodes", c_episodes, "Episode count");
    collect_cmd->add_option("--seed", c_seed, "Collection seed");
    collect_cmd->add_option("--scene", c_scene, "Scene spec file");
    collect_cmd->add_option("--noise", c_noise, "Scripted action noise");
    collect_cmd->add_option("--chain", c_chain, "Follow-up task after each episode");
    collect_cmd->add_flag("--target-object", c_target_object,
                          "Scripted picks descend onto a known object");
    collect_cmd->add_flag("--benchmark", c_benchmark,
                          "Generate the full imbalanced benchmark dataset");
    collect_cmd->add_option("--scale", c_scale, "Benchmark size multiplier");

    // ---- sd-fit ----
    auto* sdfit_cmd = app.add_subcommand("sd-fit", "Fit the learned success detector");
    std::string s_dataset, s_out, s_csv;
    double s_holdout = 0.3, s_flip = 0.0;
    int s_epochs = 40;
    uint64_t s_seed = 0;
    bool s_check = false;
    sdfit_cmd->add_option("--dataset", s_dataset, "Input dataset")->required();
    sdfit_cmd->add_option("--out", s_out, "Detector output file");
    sdfit_cmd->add_option("--csv", s_csv, "Holdout report CSV path (default stdout)");
    sdfit_cmd->add_option("--holdout-fraction", s_holdout, "Seed-range holdout share");
    sdfit_cmd->add_option("--flip-noise", s_flip, "Synthetic label flip probability");
    sdfit_cmd->add_option("--epochs", s_epochs, "Training epochs");
    sdfit_cmd->add_option("--seed", s_seed, "Fit seed");
    sdfit_cmd->add_flag("--check", s_check, "Exit nonzero unless FP/FN <= 10%");

    // ---- train ----
    auto* train_cmd = app.add_subcommand("train", "Run the training pipeline");
    std::string t_config, t_out = "checkpoint.qnet", t_strategy, t_progress, t_arch;
    std::vector<std::string> t_datasets;
    int t_steps = -1;
    int64_t t_seed = -1;
    bool t_deterministic = false, t_uniform = false;
    train_cmd->add_option("--config", t_config, "Pipeline config JSON");
    train_cmd->add_option("--dataset", t_datasets, "Dataset directory (repeatable)");
    train_cmd->add_option("--out", t_out, "Checkpoint output path");
    train_cmd->add_option("--steps", t_steps, "Trainer steps");
    train_cmd->add_option("--seed", t_seed, "Training seed");
    train_cmd->add_option("--strategy", t_strategy,
                          "Impersonation: f_orig|f_all|f_skill|f_skill_stochastic");
    train_cmd->add_option("--arch", t_arch, "single|multi");
    train_cmd->add_option("--progress", t_progress, "Progress log path");
    train_cmd->add_flag("--deterministic", t_deterministic, "Single-thread mode");
    train_cmd->add_flag("--uniform", t_uniform, "Uniform (non-re-balanced) sampling");

    // ---- eval ----
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
    std::string e_ckpt, e_scene, e_dataset, e_csv, e_md;
    int e_episodes = 20;
    uint64_t e_seed = 0;
    eval_cmd->add_option("--checkpoint", e_ckpt, "Checkpoint path")->required();
    eval_cmd->add_option("--episodes", e_episodes, "Episodes per task");
    eval_cmd->add_option("--seed", e_seed, "Evaluation seed");
    eval_cmd->add_option("--scene", e_scene, "Scene spec file");
    eval_cmd->add_option("--dataset", e_dataset,
                         "Dataset used to compute the low-data task subset");
    eval_cmd->add_option("--csv", e_csv, "CSV output path");
    eval_cmd->add_option("--md", e_md, "Markdown output path");

    // ---- ablate ----
    auto* ablate_cmd = app.add_subcommand("ablate", "Run an ablation study");
    std::string a_dataset, a_study = "grid", a_rare = "lift-cat6", a_csv, a_md;
    int a_steps = 3000, a_episodes = 20, a_nseeds = 3;
    uint64_t a_seed = 0;
    bool a_check = false;
    ablate_cmd->add_option("--dataset", a_dataset, "Shared offline dataset")->required();
    ablate_cmd
        ->add_option("--study", a_study, "grid|param-sharing|bootstrap|arch")
        ->check(CLI::IsMember({"grid", "param-sharing", "bootstrap", "arch"}));
    ablate_cmd->add_option("--steps", a_steps, "Train budget per cell");
    ablate_cmd->add_option("--episodes", a_episodes, "Eval episodes per task");
    ablate_cmd->add_option("--seeds", a_nseeds, "Seeds per cell");
    ablate_cmd->add_option("--seed", a_seed, "Base seed");
    ablate_cmd->add_option("--rare-task", a_rare, "Bootstrap study rare task");
    ablate_cmd->add_option("--csv", a_csv, "CSV output path");
    ablate_cmd->add_option("--md", a_md, "Markdown output path");
    ablate_cmd->add_flag("--check", a_check, "Exit nonzero on failed ordering gates");

    // ---- finetune ----
    auto* ft_cmd = app.add_subcommand("finetune", "Extend a checkpoint to new tasks");
    std::string f_ckpt, f_out = "finetuned.qnet";
    std::vector<std::string> f_datasets;
    int f_steps = 2000;
    uint64_t f_seed = 0;
    ft_cmd->add_option("--checkpoint", f_ckpt, "Base 12-task checkpoint")->required();
    ft_cmd->add_option("--dataset", f_datasets, "Union datasets (repeatable)")
        ->required();
    ft_cmd->add_option("--out", f_out, "Output checkpoint");
    ft_cmd->add_option("--steps", f_steps, "Fine-tune steps");
    ft_cmd->add_option("--seed", f_seed, "Seed");

    // ---- inspect ----
    auto* ins_cmd = app.add_subcommand("inspect", "Dataset / impersonation statistics");
    std::string i_dataset, i_strategy = "f_skill", i_csv, i_md;
    double i_ps = 1.0, i_pf = 1.0;
    ins_cmd->add_option("--dataset", i_dataset, "Dataset directory")->required();
    ins_cmd->add_option("--strategy", i_strategy, "Impersonation strategy");
    ins_cmd->add_option("--p_s", i_ps, "Stochastic success retention");
    ins_cmd->add_option("--p_f", i_pf, "Stochastic failure retention");
    ins_cmd->add_option("--csv", i_csv, "CSV output path");
    ins_cmd->add_option("--md", i_md, "Markdown output path");

    CLI11_PARSE(app, argc, argv);

    try {
        SimConfig sim;

        if (collect_cmd->parsed()) {
            TaskRegistry registry = TaskRegistry::default_catalog();
            if (c_benchmark) {
                BenchmarkDatasetConfig cfg;
                cfg.scale = c_scale;
                cfg.seed = c_seed;
                auto stats = generate_benchmark_dataset(c_out, registry, sim, cfg);
                std::cout << "task,episodes,successes\n";
                for (const auto& [task, st] : stats)
                    std::cout << task << "," << st.episode_count << ","
                              << st.success_count << "\n";
                return 0;
            }
            if (!registry.has_task(c_task)) {
                registry = TaskRegistry::extended_catalog();
                if (!registry.has_task(c_task))
                    throw std::runtime_error("unknown task: " + c_task);
            }
            DatasetWriter writer(c_out);
            TaskMixture mixture = TaskMixture::single(c_task);
            if (!c_chain.empty()) mixture.chains[c_task] = {c_chain};
            PolicySource source =
                PolicySource::scripted_source({c_noise, c_target_object});
            auto report = collect(registry, sim, load_scene(c_scene), source, mixture,
                                  c_episodes, writer, c_seed, "cli-scripted");
            std::cout << "episodes_written," << report.episodes_written << "\n"
                      << "chained_episodes," << report.chained_episodes << "\n"
                      << "discarded," << report.discarded << "\n";
            for (const auto& [task, n] : report.successes)
                std::cout << "successes." << task << "," << n << "\n";
            return 0;
        }

        if (sdfit_cmd->parsed()) {
            TaskRegistry registry = TaskRegistry::default_catalog();
            std::map<TaskId, double> noise;
            if (s_flip > 0.0)
                for (const auto& info : registry.tasks())
                    noise[info.task_id] = s_flip;
            auto outcomes = outcomes_from_dataset(s_dataset, registry, noise, s_seed);
            auto [train_set, holdout] = split_by_seed(outcomes, s_holdout);
            SdFitConfig cfg;
            cfg.epochs = s_epochs;
            cfg.seed = s_seed;
            cfg.holdout = &holdout;
            auto fit = fit_classifier(train_set, registry, cfg);
            auto rows = sd_holdout_report(fit.sd, holdout);
            write_or_print(s_csv, holdout_report_csv(rows));
            if (!s_out.empty()) fit.sd.save(s_out);
            if (s_check) {
                for (const auto& row : rows) {
                    if (row.false_positive_rate > 0.10 || row.false_negative_rate > 0.10)
                        return fail_check("SD " + row.task + " FP/FN above 10%");
                }
            }
            return 0;
        }

        if (train_cmd->parsed()) {
            PipelineConfig cfg = t_config.empty()
                                     ? PipelineConfig{}
                                     : PipelineConfig::from_json_file(t_config);
            for (const auto& d : t_datasets) cfg.datasets.emplace_back(d);
            if (cfg.datasets.empty())
                throw std::runtime_error("train: no datasets given");
            if (t_steps >= 0) cfg.train_steps = t_steps;
            if (t_seed >= 0) cfg.seed = static_cast<uint64_t>(t_seed);
            if (!t_strategy.empty())
                cfg.strategy = parse_strategy(t_strategy, 1.0, 0.15, cfg.seed + 1);
            if (!t_arch.empty())
                cfg.arch = t_arch == "multi" ? QArch::MultiHeaded : QArch::SingleHeaded;
            if (!t_progress.empty()) cfg.progress_log = t_progress;
            if (t_deterministic) cfg.deterministic = true;
            if (t_uniform) cfg.uniform_sampling = true;
            SuccessDetector sd = SuccessDetector::oracle(cfg.registry);
            TrainingResult res = run_training(cfg, sd);
            res.q.save(t_out, cfg.registry);
            std::cout << "steps," << res.loss_trace.size() << "\n"
                      << "episodes_scanned," << res.episodes_scanned << "\n"
                      << "labeled_inserted," << res.labeled_inserted << "\n"
                      << "final_loss,"
                      << (res.loss_trace.empty() ? 0.0 : res.loss_trace.back()) << "\n"
                      << "checkpoint," << t_out << "\n";
            return 0;
        }

        if (eval_cmd->parsed()) {
            auto [q, registry] = QFunction::load(e_ckpt);
            EvalOptions opts;
            opts.episodes_per_task = e_episodes;
            opts.seed = e_seed;
            if (!e_dataset.empty())
                opts.low_data_tasks = low_data_tasks(e_dataset, registry, 6);
            EvalReport report = evaluate(q, registry, registry.all_task_ids(), sim,
                                         load_scene(e_scene), opts);
            write_or_print(e_csv, report.to_csv());
            if (!e_md.empty() || e_csv.empty()) write_or_print(e_md, report.to_markdown());
            return 0;
        }

        if (ablate_cmd->parsed()) {
            PipelineConfig base;
            base.train_steps = a_steps;
            base.deterministic = true;
            SuccessDetector sd = SuccessDetector::oracle(base.registry);
            SceneSpec scene = SceneSpec::standard_eval_scene();
            EvalOptions eo;
            eo.episodes_per_task = a_episodes;
            eo.seed = a_seed + 900;
            eo.low_data_tasks = low_data_tasks(a_dataset, base.registry, 6);

            if (a_study == "grid") {
                std::vector<uint64_t> seeds;
                for (int i = 0; i < a_nseeds; ++i) seeds.push_back(a_seed + i);
                AblationGrid grid = run_ablation_grid(a_dataset, base, sd,
                                                      table5_cells(), seeds, sim,
                                                      scene, eo);
                write_or_print(a_csv, grid.to_csv());
                write_or_print(a_md, grid.to_markdown());
                if (a_check) {
                    double orig_u = grid.mean_low_data_by_cell.at("f_orig, uniform");
                    double skill_r =
                        grid.mean_low_data_by_cell.at("f_skill(1, 1), re-balanced");
                    if (skill_r < 1.5 * orig_u)
                        return fail_check("mean_low_data ratio below 1.5");
                    double all_u = grid.mean_by_cell.at("f_all, uniform");
                    for (const auto& [cell, mean] : grid.mean_by_cell)
                        if (cell != "f_all, uniform" && mean < all_u)
                            return fail_check("f_all+uniform mean is not the lowest");
                }
                return 0;
            }
            if (a_study == "param-sharing") {
                auto paired = run_param_sharing_ablation(a_dataset, base, sd, sim,
                                                         scene, eo, {});
                write_or_print(a_csv, paired.to_csv());
                write_or_print(a_md, paired.to_markdown());
                if (a_check) {
                    for (const TaskId& t : {std::string("lift-any"),
                                            std::string("place-any")}) {
                        if (paired.a.per_task.at(t).rate <
                            paired.b.per_task.at(t).rate - 0.05)
                            return fail_check("12-task model inferior on " + t);
                    }
                }
                return 0;
            }
            if (a_study == "bootstrap") {
                auto res = run_bootstrap_study(a_dataset, a_rare, base, sd, sim, scene,
                                               eo);
                write_or_print(a_csv, res.report.to_csv());
                write_or_print(a_md, res.report.to_markdown());
                std::cout << "baseline_foreign_failures," << res.baseline_foreign_failures
                          << "\nmtopt_foreign_failures," << res.mtopt_foreign_failures
                          << "\n";
                if (a_check && res.report.b.per_task.at(a_rare).rate <=
                                   res.report.a.per_task.at(a_rare).rate)
                    return fail_check("MT-Opt does not beat successes-only baseline");
                return 0;
            }
            // arch comparison: reported, never gated.
            auto paired = run_arch_comparison(a_dataset, base, sd, sim, scene, eo);
            write_or_print(a_csv, paired.to_csv());
            write_or_print(a_md, paired.to_markdown());
            return 0;
        }

        if (ft_cmd->parsed()) {
            auto [base_q, base_registry] = QFunction::load(f_ckpt);
            PipelineConfig cfg;
            cfg.registry = TaskRegistry::extended_catalog();
            for (const auto& d : f_datasets) cfg.datasets.emplace_back(d);
            cfg.train_steps = f_steps;
            cfg.seed = f_seed;
            cfg.deterministic = true;
            SuccessDetector sd = SuccessDetector::oracle(cfg.registry);
            TrainingResult res = finetune(base_q, base_registry, cfg, sd);
            res.q.save(f_out, cfg.registry);
            std::cout << "tasks," << cfg.registry.num_tasks() << "\ncheckpoint," << f_out
                      << "\n";
            return 0;
        }

        if (ins_cmd->parsed()) {
            TaskRegistry registry = TaskRegistry::default_catalog();
            SuccessDetector sd = SuccessDetector::oracle(registry);
            auto strategy = parse_strategy(i_strategy, i_ps, i_pf, 0);
            auto stats = impersonation_stats(i_dataset, sd.as_fn(), strategy, registry);
            write_or_print(i_csv, impersonation_stats_csv(stats));
            write_or_print(i_md, impersonation_stats_markdown(stats));
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
