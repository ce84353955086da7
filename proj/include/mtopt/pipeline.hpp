#pragma once

#include <condition_variable>
#include <deque>
#include <filesystem>
#include <mutex>
#include <optional>
#include <thread>

#include "mtopt/dataset.hpp"
#include "mtopt/impersonate.hpp"
#include "mtopt/qlearn.hpp"
#include "mtopt/replay.hpp"
#include "mtopt/sim.hpp"
#include "mtopt/success.hpp"

namespace mtopt {

// ---------------------------------------------------------------------------
// Scripted bootstrap policies

struct ScriptedConfig {
    double noise = 0.10;        // uniform action noise injected into moves
    bool target_object = false; // descend onto a known object instead of a random spot
    // Per-step probability of replacing the scripted action with a random
    // one (random move + random gripper command, no terminate). Keeps the
    // logged action distribution dense enough that off-policy maximization
    // cannot hide in unvisited actions.
    double explore = 0.05;
};

// Phase machine: pick a descend target, move over it, descend, close, lift,
// terminate.
class ScriptedPickPolicy {
public:
    ScriptedPickPolicy(const SimConfig& sim, ScriptedConfig cfg = {})
        : sim_(sim), cfg_(cfg) {}
    void reset(const Observation& obs, Rng& rng);
    Action act(const Observation& obs, Rng& rng);

private:
    enum class Phase { Move, Descend, Close, Lift, Terminate };
    SimConfig sim_;
    ScriptedConfig cfg_;
    Phase phase_ = Phase::Move;
    double tx_ = 0.5, ty_ = 0.5;
};

// Move above a noisy fixture-region target, descend, open, retract,
// terminate. Fails immediately when nothing is held.
class ScriptedPlacePolicy {
public:
    ScriptedPlacePolicy(const SimConfig& sim, double target_noise = 0.14)
        : sim_(sim), target_noise_(target_noise) {}
    // Drop near an explicit spot instead of a sampled fixture region
    // (e.g. the push-to-zone center).
    void set_target(Vec2 t) { target_override_ = t; }
    void reset(const Observation& obs, Rng& rng);
    Action act(const Observation& obs, Rng& rng);

private:
    enum class Phase { Move, Descend, Open, Retract, Terminate };
    SimConfig sim_;
    double target_noise_;
    double explore_ = 0.05;
    std::optional<Vec2> target_override_;
    Phase phase_ = Phase::Move;
    double tx_ = 0.5, ty_ = 0.5;
};

// Observation decoding helpers shared by scripted policies and tests.
bool obs_gripper_closed(const Observation& obs);
bool obs_holding(const Observation& obs);
std::optional<Vec2> obs_nearest_object(const Observation& obs, int capacity);

// ---------------------------------------------------------------------------
// Collection

enum class PolicySourceKind { Scripted, EpsGreedy, OnPolicy };

struct PolicySource {
    PolicySourceKind kind = PolicySourceKind::Scripted;
    const QFunction* q = nullptr;  // EpsGreedy / OnPolicy
    double epsilon = 0.1;
    CemConfig cem;
    ScriptedConfig scripted;

    static PolicySource scripted_source(ScriptedConfig cfg = {}) {
        PolicySource s;
        s.scripted = cfg;
        return s;
    }
    static PolicySource eps_greedy(const QFunction& q, double epsilon,
                                   CemConfig cem = {}) {
        return {PolicySourceKind::EpsGreedy, &q, epsilon, cem, {}};
    }
    static PolicySource on_policy(const QFunction& q, CemConfig cem = {}) {
        return {PolicySourceKind::OnPolicy, &q, 0.0, cem, {}};
    }
};

struct TaskMixture {
    std::map<TaskId, double> weights;  // must sum to 1
    // After an episode for `first`, run a follow-up episode for a uniformly
    // sampled task from `second` on the resulting world state.
    std::map<TaskId, std::vector<TaskId>> chains;

    TaskId sample(Rng& rng) const;
    static TaskMixture single(const TaskId& task);
};

struct CollectionReport {
    int64_t episodes_written = 0;
    int64_t chained_episodes = 0;
    int64_t discarded = 0;
    std::map<TaskId, int64_t> successes;  // judged by the oracle predicate
};

// Sequentially collects n_episodes (plus chained follow-ups) into `dataset`.
// Fully deterministic for a fixed seed; created_at timestamps are logical.
CollectionReport collect(const TaskRegistry& registry, const SimConfig& sim,
                         const SceneSpec& scene, const PolicySource& source,
                         const TaskMixture& mixture, int n_episodes,
                         DatasetWriter& dataset, uint64_t seed,
                         const std::string& policy_id);

// ---------------------------------------------------------------------------
// Training pipeline

struct PipelineConfig {
    std::vector<std::filesystem::path> datasets;
    TaskRegistry registry = TaskRegistry::default_catalog();
    ImpersonationStrategy strategy = ImpersonationStrategy::skill();
    BatchSpec batch;                 // active_tasks defaults to the registry
    bool uniform_sampling = false;   // ablation: drop re-balancing entirely
    double gamma = 0.9;
    CemConfig cem;
    QOptimizer::Kind optimizer = QOptimizer::Kind::SgdMomentum;
    double learning_rate = 1e-3;
    double momentum = 0.9;
    int train_steps = 2000;
    int target_refresh = 500;
    size_t queue_capacity = 8;
    int logreplay_workers = 2;
    int bellman_workers = 2;
    bool deterministic = false;  // forces single-threaded round-robin execution
    size_t replay_capacity = 50000;
    uint64_t seed = 0;
    QArch arch = QArch::SingleHeaded;
    std::vector<int> trunk_hidden = {64, 64};
    std::vector<int> head_hidden = {32, 32};
    int obs_dim = 0;  // inferred from the first episode when 0
    std::optional<QFunction> init_q;  // resume / fine-tune from these params
    // When set, labeled episodes failing the filter never reach the catalog
    // (e.g. the successes-only baseline of the bootstrap study). API-only.
    std::function<bool(const LabeledEpisode&)> insert_filter;
    int checkpoint_every = 0;
    std::filesystem::path checkpoint_dir;
    std::filesystem::path progress_log;
    int log_every = 10;

    static PipelineConfig from_json_file(const std::filesystem::path& path);
};

struct TrainingResult {
    QFunction q;
    std::vector<double> loss_trace;
    int64_t episodes_scanned = 0;
    int64_t labeled_inserted = 0;  // after stochastic retention
    int64_t transitions_inserted = 0;
    uint64_t final_snapshot_version = 0;
};

TrainingResult run_training(const PipelineConfig& config, const SuccessDetector& sd);

// Extends the base params to the new catalog (zero-initialized one-hot
// columns / fresh heads) and resumes training under `config`, whose registry
// must extend the base registry in place.
TrainingResult finetune(const QFunction& base, const TaskRegistry& base_registry,
                        PipelineConfig config, const SuccessDetector& sd);

// ---------------------------------------------------------------------------
// Bounded FIFO queue with blocking push (back-pressure) and pop.

template <typename T>
class BoundedQueue {
public:
    explicit BoundedQueue(size_t capacity) : capacity_(capacity) {}

    bool push(T item) {
        std::unique_lock<std::mutex> lock(mutex_);
        not_full_.wait(lock, [&] { return queue_.size() < capacity_ || closed_; });
        if (closed_) return false;
        queue_.push_back(std::move(item));
        not_empty_.notify_one();
        return true;
    }

    std::optional<T> pop() {
        std::unique_lock<std::mutex> lock(mutex_);
        not_empty_.wait(lock, [&] { return !queue_.empty() || closed_; });
        if (queue_.empty()) return std::nullopt;
        T item = std::move(queue_.front());
        queue_.pop_front();
        not_full_.notify_one();
        return item;
    }

    void close() {
        std::lock_guard<std::mutex> lock(mutex_);
        closed_ = true;
        not_empty_.notify_all();
        not_full_.notify_all();
    }

private:
    size_t capacity_;
    std::mutex mutex_;
    std::condition_variable not_full_, not_empty_;
    std::deque<T> queue_;
    bool closed_ = false;
};

}  // namespace mtopt
