#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mtopt/net.hpp"
#include "mtopt/replay.hpp"
#include "mtopt/sim.hpp"
#include "mtopt/task.hpp"

namespace mtopt {

// Continuous action coordinates seen by the Q-function and searched by CEM:
// dx, dy, dz in [-1,1]; grip in [-1,1] (> 1/3 close, < -1/3 open);
// terminate in [0,1], thresholded at 0.5.
inline constexpr int kActionDim = 5;

Vector action_to_vec(const Action& a);
Action vec_to_action(const Vector& v);
Vector action_lower_bounds();
Vector action_upper_bounds();

enum class QArch { SingleHeaded, MultiHeaded };

struct CemConfig {
    int iterations = 3;
    int samples_per_iter = 64;
    int elites = 6;
    Vector init_mean;    // defaults to mid-range when empty
    Vector init_stddev;  // defaults to 0.5 when empty
    double stddev_floor = 0.01;
};

struct BellmanTarget {
    double value = 0.0;  // clip(r + gamma * v_next, 0, 1); r at terminal steps
    double r = 0.0;
    double gamma = 0.0;
    double v_next = 0.0;
    bool terminal = false;
};

struct QGrads {
    MlpGrads trunk;
    std::vector<MlpGrads> heads;
};

// Task-conditioned Q-function, sigmoid-gated so Q is always in (0,1).
// single_headed: one net over obs ++ action ++ task one-hot.
// multi_headed: shared trunk over obs ++ action, tanh output, and one
// 3-layer head per task.
class QFunction {
public:
    QFunction() = default;
    static QFunction make(QArch arch, int obs_dim, int n_tasks, Rng& rng,
                          std::vector<int> trunk_hidden = {64, 64},
                          std::vector<int> head_hidden = {32, 32});

    QArch arch() const { return arch_; }
    int obs_dim() const { return obs_dim_; }
    int num_tasks() const { return n_tasks_; }

    // q in (0,1); multi_headed reads the head indexed by task.
    double forward(const std::vector<float>& obs_input, const Vector& action_vec,
                   int task) const;
    // Obs: (B, obs_dim), Act: (B, kActionDim)
    Vector forward_batch(const Matrix& Obs, const Matrix& Act,
                         const std::vector<int>& tasks) const;

    // Mean binary cross-entropy against targets in [0,1] plus exact grads.
    std::pair<double, QGrads> loss_and_grad(const Matrix& Obs, const Matrix& Act,
                                            const std::vector<int>& tasks,
                                            const Vector& targets) const;

    // Zero-initialized task inputs / freshly initialized heads for the new
    // tasks, leaving existing task outputs unchanged.
    void extend_tasks(int new_n_tasks, Rng& rng);

    Vector flat_params() const;
    void set_flat_params(const Vector& p);
    int num_params() const;

    Mlp& trunk() { return trunk_; }
    const Mlp& trunk() const { return trunk_; }
    std::vector<Mlp>& heads() { return heads_; }
    const std::vector<Mlp>& heads() const { return heads_; }

    void save(const std::string& path, const TaskRegistry& registry) const;
    static std::pair<QFunction, TaskRegistry> load(const std::string& path);

private:
    QArch arch_ = QArch::SingleHeaded;
    int obs_dim_ = 0;
    int n_tasks_ = 0;
    Mlp trunk_;
    std::vector<Mlp> heads_;
};

class QOptimizer {
public:
    enum class Kind { SgdMomentum, Adam };
    QOptimizer(Kind kind, double lr, double momentum = 0.9);
    void step(QFunction& q, const QGrads& grads);

private:
    Kind kind_;
    double lr_, momentum_;
    std::vector<SgdMomentum> sgd_;
    std::vector<Adam> adam_;
};

// Scores a matrix of candidate action vectors (rows) for one fixed state.
using ActionScorer = std::function<Vector(const Matrix& actions)>;

// Iterative sample / elite-refit Gaussian search over the action box.
// Returns the best action seen and its score.
std::pair<Vector, double> cem_maximize(const ActionScorer& score, const CemConfig& cfg,
                                       Rng& rng);

// One CEM search per row of Obs, batched through the Q-network.
std::pair<Matrix, Vector> cem_maximize_batch(const QFunction& q, const Matrix& Obs,
                                             const std::vector<int>& tasks,
                                             const CemConfig& cfg, Rng& rng);

std::pair<Vector, double> cem_maximize_q(const QFunction& q,
                                         const std::vector<float>& obs_input, int task,
                                         const CemConfig& cfg, Rng& rng);

BellmanTarget bellman_target(const SampleRow& row, int task_index,
                             const QFunction& target_q, double gamma,
                             const CemConfig& cfg, Rng& rng);

// Targets for a whole batch; CEM over the nonterminal rows is batched.
std::vector<BellmanTarget> bellman_targets_batch(const std::vector<SampleRow>& rows,
                                                 const std::vector<int>& task_indices,
                                                 const QFunction& target_q, double gamma,
                                                 const CemConfig& cfg, Rng& rng);

// epsilon-greedy CEM policy.
Action policy_act(const QFunction& q, const std::vector<float>& obs_input, int task,
                  const CemConfig& cfg, double epsilon, Rng& rng);

}  // namespace mtopt
