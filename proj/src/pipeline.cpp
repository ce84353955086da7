#include "mtopt/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace mtopt {

namespace {

constexpr int kSlotBase = 16;
constexpr int kSlotStride = 11;

double clamp1(double v) { return std::max(-1.0, std::min(1.0, v)); }

}  // namespace

bool obs_gripper_closed(const Observation& obs) {
    return obs.features.at(2) > 0.5f;
}

bool obs_holding(const Observation& obs) {
    return obs.features.at(3) > 0.5f;
}

std::optional<Vec2> obs_nearest_object(const Observation& obs, int capacity) {
    double gx = obs.features.at(0), gy = obs.features.at(1);
    std::optional<Vec2> best;
    double best_d2 = 1e18;
    for (int s = 0; s < capacity; ++s) {
        int base = kSlotBase + s * kSlotStride;
        if (obs.features[base] < 0.5f) continue;
        double rx = obs.features[base + 9], ry = obs.features[base + 10];
        double d2 = rx * rx + ry * ry;
        if (d2 < best_d2) {
            best_d2 = d2;
            best = Vec2{gx + rx, gy + ry};
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Scripted pick

void ScriptedPickPolicy::reset(const Observation& obs, Rng& rng) {
    phase_ = Phase::Move;
    if (cfg_.target_object) {
        int capacity = (static_cast<int>(obs.features.size()) - kSlotBase) / kSlotStride;
        auto target = obs_nearest_object(obs, capacity);
        if (target) {
            tx_ = target->x;
            ty_ = target->y;
            return;
        }
    }
    tx_ = rng.uniform(0.05, 0.95);
    ty_ = rng.uniform(0.05, 0.95);
}

namespace {

Action random_explore_action(Rng& rng) {
    Action a;
    // Canonical terminate: stop without moving, mirroring vec_to_action, so
    // the logged terminate rows all sit on the single action point CEM can
    // propose.
    if (rng.uniform() < 0.08) {
        a.terminate = true;
        return a;
    }
    a.dx = rng.uniform(-1.0, 1.0);
    a.dy = rng.uniform(-1.0, 1.0);
    a.dz = rng.uniform(-1.0, 1.0);
    switch (rng.uniform_index(3)) {
        case 0: a.gripper_cmd = GripperCmd::None; break;
        case 1: a.gripper_cmd = GripperCmd::Open; break;
        case 2: a.gripper_cmd = GripperCmd::Close; break;
    }
    return a;
}

}  // namespace

Action ScriptedPickPolicy::act(const Observation& obs, Rng& rng) {
    if (cfg_.explore > 0.0 && rng.uniform() < cfg_.explore)
        return random_explore_action(rng);
    double gx = obs.features.at(0), gy = obs.features.at(1);
    double gz = obs.features.at(5);
    Action a;
    switch (phase_) {
        case Phase::Move: {
            if (std::abs(tx_ - gx) <= 0.02 && std::abs(ty_ - gy) <= 0.02) {
                phase_ = Phase::Descend;
                return act(obs, rng);
            }
            a.dx = clamp1((tx_ - gx) / sim_.max_disp + cfg_.noise * rng.uniform(-1.0, 1.0));
            a.dy = clamp1((ty_ - gy) / sim_.max_disp + cfg_.noise * rng.uniform(-1.0, 1.0));
            return a;
        }
        case Phase::Descend: {
            if (gz <= sim_.grasp_height) {
                phase_ = Phase::Close;
                return act(obs, rng);
            }
            a.dz = -1.0;
            a.dx = clamp1(cfg_.noise * rng.uniform(-1.0, 1.0));
            a.dy = clamp1(cfg_.noise * rng.uniform(-1.0, 1.0));
            return a;
        }
        case Phase::Close:
            a.gripper_cmd = GripperCmd::Close;
            phase_ = Phase::Lift;
            return a;
        case Phase::Lift: {
            if (gz > sim_.lift_height) {
                phase_ = Phase::Terminate;
                return act(obs, rng);
            }
            a.dz = 1.0;
            return a;
        }
        case Phase::Terminate:
            a.terminate = true;
            return a;
    }
    throw std::logic_error("unreachable");
}

// ---------------------------------------------------------------------------
// Scripted place

void ScriptedPlacePolicy::reset(const Observation& obs, Rng& rng) {
    phase_ = Phase::Move;
    Vec2 center;
    if (target_override_) {
        center = *target_override_;
    } else {
        int region = static_cast<int>(rng.uniform_index(3));
        center = {obs.features.at(10 + 2 * region), obs.features.at(11 + 2 * region)};
    }
    tx_ = center.x + target_noise_ * rng.uniform(-1.0, 1.0);
    ty_ = center.y + target_noise_ * rng.uniform(-1.0, 1.0);
}

Action ScriptedPlacePolicy::act(const Observation& obs, Rng& rng) {
    Action a;
    if (explore_ > 0.0 && obs_holding(obs) && rng.uniform() < explore_)
        return random_explore_action(rng);
    if (!obs_holding(obs)) {
        a.terminate = true;
        return a;
    }
    double gx = obs.features.at(0), gy = obs.features.at(1);
    double gz = obs.features.at(5);
    switch (phase_) {
        case Phase::Move: {
            if (std::abs(tx_ - gx) <= 0.02 && std::abs(ty_ - gy) <= 0.02) {
                phase_ = Phase::Descend;
                return act(obs, rng);
            }
            a.dx = clamp1((tx_ - gx) / sim_.max_disp);
            a.dy = clamp1((ty_ - gy) / sim_.max_disp);
            return a;
        }
        case Phase::Descend: {
            if (gz <= 0.25) {
                phase_ = Phase::Open;
                return act(obs, rng);
            }
            a.dz = -1.0;
            return a;
        }
        case Phase::Open:
            a.gripper_cmd = GripperCmd::Open;
            phase_ = Phase::Retract;
            return a;
        case Phase::Retract:
            a.dz = 1.0;
            phase_ = Phase::Terminate;
            return a;
        case Phase::Terminate:
            a.terminate = true;
            return a;
    }
    throw std::logic_error("unreachable");
}

// ---------------------------------------------------------------------------
// Collection

TaskId TaskMixture::sample(Rng& rng) const {
    if (weights.empty()) throw std::invalid_argument("TaskMixture: empty");
    double total = 0.0;
    for (const auto& [task, w] : weights) total += w;
    double r = rng.uniform() * total;
    for (const auto& [task, w] : weights) {
        r -= w;
        if (r <= 0.0) return task;
    }
    return weights.rbegin()->first;
}

TaskMixture TaskMixture::single(const TaskId& task) {
    TaskMixture m;
    m.weights[task] = 1.0;
    return m;
}

namespace {

struct Rollout {
    std::vector<Observation> observations;
    std::vector<Action> actions;
};

Rollout run_rollout(TabletopEnv& env, const Observation& first,
                    const TaskRegistry& registry, const SimConfig& sim,
                    const PolicySource& source, const TaskId& task, Rng& rng) {
    Rollout r;
    r.observations.push_back(first);

    ScriptedPickPolicy pick(sim, source.scripted);
    ScriptedPlacePolicy place(sim);
    bool use_place = false;
    if (source.kind == PolicySourceKind::Scripted) {
        use_place = registry.skill_of(task) == kSkillManip;
        if (task == "push-to-zone")
            place.set_target({(sim.zone_lo + sim.zone_hi) / 2.0,
                              (sim.zone_lo + sim.zone_hi) / 2.0});
        if (use_place)
            place.reset(first, rng);
        else
            pick.reset(first, rng);
    }
    int task_index = registry.onehot_index(task);

    bool done = false;
    while (!done) {
        const Observation& obs = r.observations.back();
        Action a;
        switch (source.kind) {
            case PolicySourceKind::Scripted:
                a = use_place ? place.act(obs, rng) : pick.act(obs, rng);
                break;
            case PolicySourceKind::EpsGreedy:
                a = policy_act(*source.q, obs.as_input(), task_index, source.cem,
                               source.epsilon, rng);
                break;
            case PolicySourceKind::OnPolicy:
                a = policy_act(*source.q, obs.as_input(), task_index, source.cem, 0.0,
                               rng);
                break;
        }
        auto [next_obs, is_done] = env.step(a);
        // An episode ended by the step limit must not carry a terminal flag
        // mid-record semantics; the env already strips nothing, so only
        // record the action as issued.
        r.actions.push_back(a);
        r.observations.push_back(next_obs);
        done = is_done;
    }
    return r;
}

}  // namespace

CollectionReport collect(const TaskRegistry& registry, const SimConfig& sim,
                         const SceneSpec& scene, const PolicySource& source,
                         const TaskMixture& mixture, int n_episodes,
                         DatasetWriter& dataset, uint64_t seed,
                         const std::string& policy_id) {
    CollectionReport report;
    // Fold the policy id into the policy-noise stream so collection runs that
    // share a seed base but target different tasks do not emit clone episodes.
    // Scene seeds stay `seed + i` so split_by_seed keeps its meaning.
    uint64_t stream = 0xcbf29ce484222325ULL;
    for (unsigned char ch : policy_id) stream = (stream ^ ch) * 0x100000001b3ULL;
    Rng rng(seed ^ stream);
    TabletopEnv env(sim);
    int64_t next_index = 0;

    auto write_rollout = [&](Rollout&& roll, const TaskId& task, uint64_t ep_seed) {
        Episode e;
        e.episode_id = policy_id + "-" + std::to_string(seed) + "-" +
                       std::to_string(next_index);
        e.collected_for = task;
        e.policy_id = policy_id;
        e.seed = ep_seed;
        e.created_at_us = next_index;  // logical clock: keeps bytes reproducible
        e.observations = std::move(roll.observations);
        e.actions = std::move(roll.actions);
        ++next_index;
        if (!e.validate(sim.max_steps).empty()) {
            ++report.discarded;
            return;
        }
        if (task_predicate(e.terminal_obs().summary, task)) ++report.successes[task];
        else report.successes.try_emplace(task, 0);
        dataset.append(e);
        ++report.episodes_written;
    };

    for (int i = 0; i < n_episodes; ++i) {
        TaskId task = mixture.sample(rng);
        uint64_t ep_seed = seed + static_cast<uint64_t>(i);

        SceneSpec ep_scene = scene;
        if (source.kind == PolicySourceKind::Scripted && ep_scene.start_held == -2 &&
            registry.skill_of(task) == kSkillManip) {
            // MANIP bootstrap episodes begin holding something, mirroring the
            // post-lift stage of a chained run.
            ep_scene.start_held = task == "push-to-zone" ? sim.zone_category : -1;
        }
        Observation first = env.reset(ep_seed, ep_scene);
        write_rollout(run_rollout(env, first, registry, sim, source, task, rng), task,
                      ep_seed);

        auto chain_it = mixture.chains.find(task);
        if (chain_it != mixture.chains.end() && !chain_it->second.empty()) {
            const auto& follow_ups = chain_it->second;
            TaskId follow = follow_ups[rng.uniform_index(follow_ups.size())];
            Observation chained_first = env.begin_chained_episode();
            write_rollout(
                run_rollout(env, chained_first, registry, sim, source, follow, rng),
                follow, ep_seed);
            ++report.chained_episodes;
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Config

PipelineConfig PipelineConfig::from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path.string());
    nlohmann::json j = nlohmann::json::parse(in);

    PipelineConfig c;
    for (const auto& d : j.value("datasets", std::vector<std::string>{}))
        c.datasets.emplace_back(d);
    if (j.value("catalog", std::string("default")) == "extended")
        c.registry = TaskRegistry::extended_catalog();

    if (j.contains("impersonation")) {
        const auto& ji = j["impersonation"];
        std::string kind = ji.value("kind", "f_skill");
        if (kind == "f_orig") c.strategy = ImpersonationStrategy::orig();
        else if (kind == "f_all") c.strategy = ImpersonationStrategy::all();
        else if (kind == "f_skill") c.strategy = ImpersonationStrategy::skill();
        else if (kind == "f_skill_stochastic")
            c.strategy = ImpersonationStrategy::skill_stochastic(
                ji.value("p_s", 1.0), ji.value("p_f", 1.0), ji.value("seed", 0));
        else throw std::runtime_error("unknown impersonation kind: " + kind);
    }

    c.batch.batch_size = j.value("batch_size", c.batch.batch_size);
    c.batch.success_ratio = j.value("success_ratio", c.batch.success_ratio);
    c.uniform_sampling = j.value("uniform_sampling", c.uniform_sampling);
    c.gamma = j.value("gamma", c.gamma);
    c.cem.iterations = j.value("cem_iterations", c.cem.iterations);
    c.cem.samples_per_iter = j.value("cem_samples", c.cem.samples_per_iter);
    c.cem.elites = j.value("cem_elites", c.cem.elites);
    std::string opt = j.value("optimizer", "sgd");
    if (opt == "adam") c.optimizer = QOptimizer::Kind::Adam;
    else if (opt != "sgd") throw std::runtime_error("unknown optimizer: " + opt);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.momentum = j.value("momentum", c.momentum);
    c.train_steps = j.value("train_steps", c.train_steps);
    c.target_refresh = j.value("target_refresh", c.target_refresh);
    c.queue_capacity = j.value("queue_capacity", c.queue_capacity);
    c.logreplay_workers = j.value("logreplay_workers", c.logreplay_workers);
    c.bellman_workers = j.value("bellman_workers", c.bellman_workers);
    c.deterministic = j.value("deterministic", c.deterministic);
    c.replay_capacity = j.value("replay_capacity", c.replay_capacity);
    c.seed = j.value("seed", c.seed);
    std::string arch = j.value("arch", "single");
    if (arch == "multi") c.arch = QArch::MultiHeaded;
    else if (arch != "single") throw std::runtime_error("unknown arch: " + arch);
    c.trunk_hidden = j.value("trunk_hidden", c.trunk_hidden);
    c.head_hidden = j.value("head_hidden", c.head_hidden);
    c.obs_dim = j.value("obs_dim", c.obs_dim);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    if (j.contains("checkpoint_dir"))
        c.checkpoint_dir = j["checkpoint_dir"].get<std::string>();
    if (j.contains("progress_log")) c.progress_log = j["progress_log"].get<std::string>();
    c.log_every = j.value("log_every", c.log_every);
    return c;
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct TrainItem {
    Matrix Obs;
    Matrix Act;
    std::vector<int> tasks;
    Vector targets;
    uint64_t target_version = 0;
};

struct ProgressLogger {
    std::ofstream out;

    explicit ProgressLogger(const std::filesystem::path& path) {
        if (!path.empty()) {
            out.open(path);
            if (!out) throw std::runtime_error("cannot open progress log: " + path.string());
        }
    }

    void log(int step, double loss, const ReplayCatalog& catalog,
             uint64_t snapshot_version, int64_t episodes_scanned) {
        if (!out.is_open()) return;
        nlohmann::json j;
        j["step"] = step;
        j["loss"] = loss;
        nlohmann::json buffers = nlohmann::json::object();
        for (const auto& [key, s] : catalog.stats()) {
            buffers[key.first + (key.second == Outcome::Success ? "/success"
                                                                : "/failure")] = s.size;
        }
        j["buffers"] = buffers;
        j["snapshot_version"] = snapshot_version;
        j["episodes_routed"] = episodes_scanned;
        out << j.dump() << "\n";
        out.flush();
    }
};

TrainItem make_item(const std::vector<SampleRow>& rows, const TaskRegistry& registry,
                    const QFunction& target_q, double gamma, const CemConfig& cem,
                    Rng& rng, uint64_t target_version) {
    int B = static_cast<int>(rows.size());
    TrainItem item;
    item.target_version = target_version;
    item.tasks.reserve(B);
    for (const auto& row : rows) item.tasks.push_back(registry.onehot_index(row.task));

    int obs_dim = static_cast<int>(rows[0].obs().as_input().size());
    item.Obs.resize(B, obs_dim);
    item.Act.resize(B, kActionDim);
    for (int i = 0; i < B; ++i) {
        const auto& in = rows[i].obs().as_input();
        for (int d = 0; d < obs_dim; ++d) item.Obs(i, d) = in[d];
        item.Act.row(i) = action_to_vec(rows[i].action()).transpose();
    }

    auto targets = bellman_targets_batch(rows, item.tasks, target_q, gamma, cem, rng);
    item.targets.resize(B);
    for (int i = 0; i < B; ++i) item.targets[i] = targets[i].value;
    return item;
}

int infer_obs_dim(const std::vector<std::filesystem::path>& datasets) {
    for (const auto& dir : datasets) {
        int dim = -1;
        scan_dataset(dir, {}, [&](std::shared_ptr<const Episode> e) {
            if (dim < 0) dim = static_cast<int>(e->observations[0].as_input().size());
        });
        if (dim > 0) return dim;
    }
    throw std::runtime_error("cannot infer obs_dim: no episodes in datasets");
}

}  // namespace

TrainingResult run_training(const PipelineConfig& config, const SuccessDetector& sd) {
    TrainingResult result;
    const TaskRegistry& registry = config.registry;

    BatchSpec spec = config.batch;
    if (spec.active_tasks.empty()) spec.active_tasks = registry.all_task_ids();

    int obs_dim = config.obs_dim > 0 ? config.obs_dim : infer_obs_dim(config.datasets);

    Rng init_rng(config.seed * 0x9e3779b97f4a7c15ULL + 0xd1b54a32d192ed03ULL);
    QFunction q = config.init_q
                      ? *config.init_q
                      : QFunction::make(config.arch, obs_dim, registry.num_tasks(),
                                        init_rng, config.trunk_hidden,
                                        config.head_hidden);
    if (q.obs_dim() != obs_dim)
        throw std::runtime_error("init_q obs_dim mismatch with dataset");
    if (q.num_tasks() != registry.num_tasks())
        throw std::runtime_error("init_q task count mismatch with catalog");

    QOptimizer opt(config.optimizer, config.learning_rate, config.momentum);
    SdFn sd_fn = sd.as_fn();
    ReplayCatalog catalog(config.replay_capacity, config.seed + 1);
    ProgressLogger progress(config.progress_log);

    auto maybe_checkpoint = [&](int step) {
        if (config.checkpoint_every <= 0 || config.checkpoint_dir.empty()) return;
        if (step % config.checkpoint_every != 0) return;
        std::filesystem::create_directories(config.checkpoint_dir);
        q.save((config.checkpoint_dir / ("ckpt-" + std::to_string(step) + ".qnet"))
                   .string(),
               registry);
    };

    if (config.deterministic || config.bellman_workers <= 0) {
        // Round-robin reference schedule: full log replay, then alternating
        // target computation / SGD on one thread.
        ImpersonationStrategy strat = config.strategy;
        if (strat.kind == ImpersonationKind::SkillStochastic && strat.rng_seed == 0)
            strat.rng_seed = config.seed + 2;
        Impersonator imp(strat, registry);
        std::atomic<int64_t> scanned{0};
        for (const auto& dir : config.datasets) {
            scan_dataset(dir, {}, [&](std::shared_ptr<const Episode> e) {
                auto labeled = imp.impersonate(e, sd_fn);
                for (const auto& le : labeled) {
                    if (config.insert_filter && !config.insert_filter(le)) continue;
                    catalog.insert(le);
                    ++result.labeled_inserted;
                    result.transitions_inserted += le.base->num_steps();
                }
                ++scanned;
            });
        }
        result.episodes_scanned = scanned;

        QFunction target_q = q;
        Rng bellman_rng(config.seed + 3);
        uint64_t version = 1;
        for (int step = 0; step < config.train_steps; ++step) {
            auto rows = config.uniform_sampling
                            ? catalog.sample_uniform(spec.batch_size)
                            : catalog.sample_batch(spec);
            TrainItem item = make_item(rows, registry, target_q, config.gamma,
                                       config.cem, bellman_rng, version);
            auto [loss, grads] = q.loss_and_grad(item.Obs, item.Act, item.tasks,
                                                 item.targets);
            opt.step(q, grads);
            result.loss_trace.push_back(loss);
            ++version;
            if ((step + 1) % config.target_refresh == 0) target_q = q;
            if (config.log_every > 0 &&
                (step % config.log_every == 0 || step + 1 == config.train_steps))
                progress.log(step, loss, catalog, version, result.episodes_scanned);
            maybe_checkpoint(step + 1);
        }
        result.final_snapshot_version = version;
        result.q = std::move(q);
        return result;
    }

    // Asynchronous Fig.-9 layout: LogReplay workers fill the catalog,
    // Bellman workers turn sampled batches into targets against the latest
    // published target snapshot, the trainer consumes the bounded queue.
    struct Snapshots {
        std::mutex m;
        std::shared_ptr<const QFunction> target;
        uint64_t target_version = 1;
    } snaps;
    snaps.target = std::make_shared<QFunction>(q);

    std::atomic<bool> stop{false};
    std::atomic<int64_t> scanned{0}, labeled{0}, transitions{0};
    BoundedQueue<TrainItem> queue(config.queue_capacity);

    std::vector<std::thread> workers;
    int n_log = std::max(1, config.logreplay_workers);
    for (int w = 0; w < n_log; ++w) {
        workers.emplace_back([&, w] {
            ImpersonationStrategy strat = config.strategy;
            strat.rng_seed = config.seed + 100 + static_cast<uint64_t>(w);
            Impersonator imp(strat, registry);
            int64_t index = 0;
            for (const auto& dir : config.datasets) {
                scan_dataset(dir, {}, [&](std::shared_ptr<const Episode> e) {
                    if (index++ % n_log != w) return;
                    auto labeled_eps = imp.impersonate(e, sd_fn);
                    for (const auto& le : labeled_eps) {
                        if (config.insert_filter && !config.insert_filter(le)) continue;
                        catalog.insert(le);
                        ++labeled;
                        transitions += le.base->num_steps();
                    }
                    ++scanned;
                });
            }
        });
    }

    for (int w = 0; w < config.bellman_workers; ++w) {
        workers.emplace_back([&, w] {
            Rng rng(config.seed + 200 + static_cast<uint64_t>(w));
            while (!stop.load()) {
                std::vector<SampleRow> rows;
                try {
                    rows = config.uniform_sampling
                               ? catalog.sample_uniform(spec.batch_size)
                               : catalog.sample_batch(spec);
                } catch (const std::exception&) {
                    std::this_thread::sleep_for(std::chrono::milliseconds(2));
                    continue;
                }
                std::shared_ptr<const QFunction> target;
                uint64_t target_version;
                {
                    std::lock_guard<std::mutex> lock(snaps.m);
                    target = snaps.target;
                    target_version = snaps.target_version;
                }
                TrainItem item = make_item(rows, registry, *target, config.gamma,
                                           config.cem, rng, target_version);
                if (!queue.push(std::move(item))) return;
            }
        });
    }

    uint64_t version = 1;
    for (int step = 0; step < config.train_steps; ++step) {
        auto item = queue.pop();
        if (!item) break;
        auto [loss, grads] = q.loss_and_grad(item->Obs, item->Act, item->tasks,
                                             item->targets);
        opt.step(q, grads);
        result.loss_trace.push_back(loss);
        ++version;
        if ((step + 1) % config.target_refresh == 0) {
            std::lock_guard<std::mutex> lock(snaps.m);
            snaps.target = std::make_shared<QFunction>(q);
            snaps.target_version = version;
        }
        if (config.log_every > 0 &&
            (step % config.log_every == 0 || step + 1 == config.train_steps))
            progress.log(step, loss, catalog, version, scanned.load());
        maybe_checkpoint(step + 1);
    }

    stop.store(true);
    queue.close();
    for (auto& t : workers) t.join();

    result.episodes_scanned = scanned;
    result.labeled_inserted = labeled;
    result.transitions_inserted = transitions;
    result.final_snapshot_version = version;
    result.q = std::move(q);
    return result;
}

TrainingResult finetune(const QFunction& base, const TaskRegistry& base_registry,
                        PipelineConfig config, const SuccessDetector& sd) {
    const TaskRegistry& ext = config.registry;
    if (ext.num_tasks() < base_registry.num_tasks())
        throw std::invalid_argument("finetune: catalog shrank");
    for (int i = 0; i < base_registry.num_tasks(); ++i) {
        if (ext.task_at(i) != base_registry.task_at(i))
            throw std::invalid_argument("finetune: catalog does not extend the base "
                                        "(task index collision at " +
                                        std::to_string(i) + ")");
    }
    QFunction q = base;
    Rng rng(config.seed + 7);
    q.extend_tasks(ext.num_tasks(), rng);
    config.init_q = std::move(q);
    return run_training(config, sd);
}

}  // namespace mtopt
