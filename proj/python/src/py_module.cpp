// Python bindings for the mtopt core library. The surface is the subset a
// notebook user needs to run the full loop: build scenes, collect scripted
// data, train with run_training, and evaluate greedy policies.
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mtopt/bench.hpp"
#include "mtopt/pipeline.hpp"
#include "mtopt/qlearn.hpp"
#include "mtopt/success.hpp"

namespace py = pybind11;
using namespace mtopt;

PYBIND11_MODULE(_mtopt, m) {
    m.doc() = "Desk-scale MT-Opt: simulator, data collection, Q-training, eval";

    // ---- simulator -------------------------------------------------------
    py::class_<SimConfig>(m, "SimConfig")
        .def(py::init<>())
        .def_readwrite("max_steps", &SimConfig::max_steps)
        .def_readwrite("max_disp", &SimConfig::max_disp)
        .def_readwrite("grasp_radius", &SimConfig::grasp_radius)
        .def_readwrite("grasp_height", &SimConfig::grasp_height)
        .def_readwrite("lift_height", &SimConfig::lift_height)
        .def_readwrite("fixture_radius", &SimConfig::fixture_radius)
        .def_readwrite("region_offset", &SimConfig::region_offset)
        .def_readwrite("region_radius", &SimConfig::region_radius)
        .def_readwrite("zone_lo", &SimConfig::zone_lo)
        .def_readwrite("zone_hi", &SimConfig::zone_hi)
        .def_readwrite("zone_category", &SimConfig::zone_category)
        .def_readwrite("pixel_size", &SimConfig::pixel_size);

    py::enum_<GripperCmd>(m, "GripperCmd")
        .value("NONE", GripperCmd::None)
        .value("OPEN", GripperCmd::Open)
        .value("CLOSE", GripperCmd::Close);

    py::enum_<ObsMode>(m, "ObsMode")
        .value("FEATURES", ObsMode::Features)
        .value("PIXELS", ObsMode::Pixels);

    py::class_<Action>(m, "Action")
        .def(py::init<>())
        .def_readwrite("dx", &Action::dx)
        .def_readwrite("dy", &Action::dy)
        .def_readwrite("dz", &Action::dz)
        .def_readwrite("gripper_cmd", &Action::gripper_cmd)
        .def_readwrite("terminate", &Action::terminate)
        .def("__repr__", [](const Action& a) {
            return "Action(dx=" + std::to_string(a.dx) + ", dy=" + std::to_string(a.dy) +
                   ", dz=" + std::to_string(a.dz) +
                   ", cmd=" + std::to_string(static_cast<int>(a.gripper_cmd)) +
                   ", terminate=" + std::to_string(a.terminate) + ")";
        });

    py::class_<OutcomeSummary>(m, "OutcomeSummary")
        .def_readonly("held_category", &OutcomeSummary::held_category)
        .def_readonly("lifted", &OutcomeSummary::lifted)
        .def_readonly("any_in_fixture", &OutcomeSummary::any_in_fixture)
        .def_readonly("in_region", &OutcomeSummary::in_region)
        .def_readonly("zone_category_mask", &OutcomeSummary::zone_category_mask);

    py::class_<Observation>(m, "Observation")
        .def_readonly("mode", &Observation::mode)
        .def_readonly("features", &Observation::features)
        .def_readonly("pixels", &Observation::pixels)
        .def_readonly("summary", &Observation::summary)
        .def("as_input", &Observation::as_input);

    py::class_<SceneSpec>(m, "SceneSpec")
        .def(py::init<>())
        .def_readwrite("name", &SceneSpec::name)
        .def_readwrite("capacity", &SceneSpec::capacity)
        .def_readwrite("object_categories", &SceneSpec::object_categories)
        .def_readwrite("random_extras", &SceneSpec::random_extras)
        .def_readwrite("start_held", &SceneSpec::start_held)
        .def_readwrite("obs_mode", &SceneSpec::obs_mode)
        .def_static("standard_eval_scene", &SceneSpec::standard_eval_scene)
        .def_static("load", &SceneSpec::load)
        .def("save", &SceneSpec::save)
        .def("to_json", &SceneSpec::to_json)
        .def_static("from_json", &SceneSpec::from_json);

    m.def("feature_dim", &feature_dim, py::arg("capacity"));
    m.def("task_predicate", &task_predicate, py::arg("summary"), py::arg("task"));

    py::class_<TabletopEnv>(m, "TabletopEnv")
        .def(py::init<SimConfig>(), py::arg("config") = SimConfig{})
        .def("reset", &TabletopEnv::reset, py::arg("seed"), py::arg("spec"))
        .def("begin_chained_episode", &TabletopEnv::begin_chained_episode)
        .def("step", &TabletopEnv::step, py::arg("action"))
        .def("task_feasible", &TabletopEnv::task_feasible, py::arg("task"))
        .def("observe", &TabletopEnv::observe);

    // ---- tasks -----------------------------------------------------------
    py::class_<TaskRegistry>(m, "TaskRegistry")
        .def(py::init<>())
        .def("register_task", &TaskRegistry::register_task, py::arg("task"),
             py::arg("skill"))
        .def("has_task", &TaskRegistry::has_task)
        .def("num_tasks", &TaskRegistry::num_tasks)
        .def("skill_of", &TaskRegistry::skill_of)
        .def("onehot_index", &TaskRegistry::onehot_index)
        .def("all_task_ids", &TaskRegistry::all_task_ids)
        .def_static("default_catalog", &TaskRegistry::default_catalog)
        .def_static("extended_catalog", &TaskRegistry::extended_catalog);

    // ---- collection ------------------------------------------------------
    py::class_<ScriptedConfig>(m, "ScriptedConfig")
        .def(py::init<>())
        .def(py::init([](double noise, bool target_object, double explore) {
                 return ScriptedConfig{noise, target_object, explore};
             }),
             py::arg("noise") = 0.10, py::arg("target_object") = false,
             py::arg("explore") = 0.05)
        .def_readwrite("noise", &ScriptedConfig::noise)
        .def_readwrite("target_object", &ScriptedConfig::target_object)
        .def_readwrite("explore", &ScriptedConfig::explore);

    py::class_<PolicySource>(m, "PolicySource")
        .def_static("scripted", &PolicySource::scripted_source,
                    py::arg("config") = ScriptedConfig{});

    py::class_<TaskMixture>(m, "TaskMixture")
        .def(py::init<>())
        .def_readwrite("weights", &TaskMixture::weights)
        .def_readwrite("chains", &TaskMixture::chains)
        .def_static("single", &TaskMixture::single);

    py::class_<CollectionReport>(m, "CollectionReport")
        .def_readonly("episodes_written", &CollectionReport::episodes_written)
        .def_readonly("chained_episodes", &CollectionReport::chained_episodes)
        .def_readonly("discarded", &CollectionReport::discarded)
        .def_readonly("successes", &CollectionReport::successes);

    // DatasetWriter is kept internal; the python-facing collect() opens a
    // writer for the call so callers only pass a directory.
    m.def(
        "collect",
        [](const TaskRegistry& registry, const SimConfig& sim, const SceneSpec& scene,
           const PolicySource& source, const TaskMixture& mixture, int n_episodes,
           const std::filesystem::path& dataset, uint64_t seed,
           const std::string& policy_id) {
            DatasetWriter writer(dataset);
            return collect(registry, sim, scene, source, mixture, n_episodes, writer,
                           seed, policy_id);
        },
        py::arg("registry"), py::arg("sim"), py::arg("scene"), py::arg("source"),
        py::arg("mixture"), py::arg("n_episodes"), py::arg("dataset"), py::arg("seed"),
        py::arg("policy_id"));

    py::class_<TaskDataStats>(m, "TaskDataStats")
        .def_readonly("episode_count", &TaskDataStats::episode_count)
        .def_readonly("success_count", &TaskDataStats::success_count);

    m.def(
        "dataset_stats",
        [](const std::filesystem::path& dir, const SuccessDetector& sd,
           const TaskRegistry& registry) { return dataset_stats(dir, sd.as_fn(), registry); },
        py::arg("dataset"), py::arg("sd"), py::arg("registry"));

    // ---- success detection ----------------------------------------------
    py::class_<SuccessDetector>(m, "SuccessDetector")
        .def_static("oracle", &SuccessDetector::oracle, py::arg("registry"),
                    py::arg("flip_noise") = std::map<TaskId, double>{},
                    py::arg("noise_seed") = 0)
        .def("evaluate", &SuccessDetector::evaluate, py::arg("terminal_obs"),
             py::arg("task"));

    // ---- Q-function & training ------------------------------------------
    py::class_<CemConfig>(m, "CemConfig")
        .def(py::init<>())
        .def(py::init([](int iterations, int samples_per_iter, int elites) {
                 CemConfig c;
                 c.iterations = iterations;
                 c.samples_per_iter = samples_per_iter;
                 c.elites = elites;
                 return c;
             }),
             py::arg("iterations") = 3, py::arg("samples_per_iter") = 64,
             py::arg("elites") = 6)
        .def_readwrite("iterations", &CemConfig::iterations)
        .def_readwrite("samples_per_iter", &CemConfig::samples_per_iter)
        .def_readwrite("elites", &CemConfig::elites);

    py::enum_<QArch>(m, "QArch")
        .value("SINGLE_HEADED", QArch::SingleHeaded)
        .value("MULTI_HEADED", QArch::MultiHeaded);

    py::enum_<QOptimizer::Kind>(m, "Optimizer")
        .value("SGD_MOMENTUM", QOptimizer::Kind::SgdMomentum)
        .value("ADAM", QOptimizer::Kind::Adam);

    py::class_<QFunction>(m, "QFunction")
        .def("obs_dim", &QFunction::obs_dim)
        .def("arch", &QFunction::arch)
        .def(
            "value",
            [](const QFunction& q, const std::vector<float>& obs, const Action& a,
               int task) { return q.forward(obs, action_to_vec(a), task); },
            py::arg("obs_input"), py::arg("action"), py::arg("task"))
        .def("save", &QFunction::save, py::arg("path"), py::arg("registry"))
        .def_static("load", &QFunction::load, py::arg("path"));

    m.def(
        "policy_act",
        [](const QFunction& q, const std::vector<float>& obs, int task,
           const CemConfig& cem, double epsilon, uint64_t seed) {
            Rng rng(seed);
            return policy_act(q, obs, task, cem, epsilon, rng);
        },
        py::arg("q"), py::arg("obs_input"), py::arg("task"), py::arg("cem") = CemConfig{},
        py::arg("epsilon") = 0.0, py::arg("seed") = 0);

    py::enum_<ImpersonationKind>(m, "ImpersonationKind")
        .value("ORIG", ImpersonationKind::Orig)
        .value("ALL", ImpersonationKind::All)
        .value("SKILL", ImpersonationKind::Skill)
        .value("SKILL_STOCHASTIC", ImpersonationKind::SkillStochastic);

    py::class_<ImpersonationStrategy>(m, "ImpersonationStrategy")
        .def_static("orig", &ImpersonationStrategy::orig)
        .def_static("all", &ImpersonationStrategy::all)
        .def_static("skill", &ImpersonationStrategy::skill)
        .def_static("skill_stochastic", &ImpersonationStrategy::skill_stochastic,
                    py::arg("p_s"), py::arg("p_f"), py::arg("seed") = 0);

    py::class_<PipelineConfig>(m, "PipelineConfig")
        .def(py::init<>())
        .def_readwrite("datasets", &PipelineConfig::datasets)
        .def_readwrite("registry", &PipelineConfig::registry)
        .def_readwrite("strategy", &PipelineConfig::strategy)
        .def_readwrite("uniform_sampling", &PipelineConfig::uniform_sampling)
        .def_readwrite("gamma", &PipelineConfig::gamma)
        .def_readwrite("cem", &PipelineConfig::cem)
        .def_readwrite("optimizer", &PipelineConfig::optimizer)
        .def_readwrite("learning_rate", &PipelineConfig::learning_rate)
        .def_readwrite("momentum", &PipelineConfig::momentum)
        .def_readwrite("train_steps", &PipelineConfig::train_steps)
        .def_readwrite("target_refresh", &PipelineConfig::target_refresh)
        .def_readwrite("deterministic", &PipelineConfig::deterministic)
        .def_readwrite("seed", &PipelineConfig::seed)
        .def_readwrite("arch", &PipelineConfig::arch)
        .def_property(
            "batch_size", [](const PipelineConfig& c) { return c.batch.batch_size; },
            [](PipelineConfig& c, int v) { c.batch.batch_size = v; })
        .def_static("from_json_file", &PipelineConfig::from_json_file);

    py::class_<TrainingResult>(m, "TrainingResult")
        .def_readonly("q", &TrainingResult::q)
        .def_readonly("loss_trace", &TrainingResult::loss_trace)
        .def_readonly("episodes_scanned", &TrainingResult::episodes_scanned)
        .def_readonly("labeled_inserted", &TrainingResult::labeled_inserted)
        .def_readonly("transitions_inserted", &TrainingResult::transitions_inserted);

    m.def("run_training", &run_training, py::arg("config"), py::arg("sd"),
          py::call_guard<py::gil_scoped_release>());
    m.def("finetune", &finetune, py::arg("base"), py::arg("base_registry"),
          py::arg("config"), py::arg("sd"), py::call_guard<py::gil_scoped_release>());

    // ---- evaluation ------------------------------------------------------
    py::class_<TaskEvalStats>(m, "TaskEvalStats")
        .def_readonly("episodes", &TaskEvalStats::episodes)
        .def_readonly("successes", &TaskEvalStats::successes)
        .def_readonly("rate", &TaskEvalStats::rate)
        .def_readonly("feasibility_warning", &TaskEvalStats::feasibility_warning);

    py::class_<EvalSummary>(m, "EvalSummary")
        .def_readonly("min", &EvalSummary::min)
        .def_readonly("p25", &EvalSummary::p25)
        .def_readonly("median", &EvalSummary::median)
        .def_readonly("mean", &EvalSummary::mean)
        .def_readonly("p75", &EvalSummary::p75)
        .def_readonly("max", &EvalSummary::max)
        .def_readonly("mean_low_data", &EvalSummary::mean_low_data);

    py::class_<EvalOptions>(m, "EvalOptions")
        .def(py::init<>())
        .def_readwrite("episodes_per_task", &EvalOptions::episodes_per_task)
        .def_readwrite("seed", &EvalOptions::seed)
        .def_readwrite("cem", &EvalOptions::cem)
        .def_readwrite("low_data_tasks", &EvalOptions::low_data_tasks);

    py::class_<EvalReport>(m, "EvalReport")
        .def_readonly("per_task", &EvalReport::per_task)
        .def_readonly("summary", &EvalReport::summary)
        .def_readonly("low_data_tasks", &EvalReport::low_data_tasks)
        .def("to_csv", &EvalReport::to_csv)
        .def("to_markdown", &EvalReport::to_markdown);

    m.def("evaluate", &evaluate, py::arg("q"), py::arg("registry"), py::arg("tasks"),
          py::arg("sim"), py::arg("scene"), py::arg("options") = EvalOptions{},
          py::call_guard<py::gil_scoped_release>());
}
