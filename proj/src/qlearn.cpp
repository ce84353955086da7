#include "mtopt/qlearn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace mtopt {

Vector action_to_vec(const Action& a) {
    Vector v(kActionDim);
    v << a.dx, a.dy, a.dz,
        a.gripper_cmd == GripperCmd::Close ? 1.0
            : (a.gripper_cmd == GripperCmd::Open ? -1.0 : 0.0),
        a.terminate ? 1.0 : 0.0;
    return v;
}

Action vec_to_action(const Vector& v) {
    if (v.size() != kActionDim) throw std::invalid_argument("bad action vector size");
    Action a;
    a.terminate = v(4) >= 0.5;
    // TERMINATE is canonical "stop now": no concurrent motion or gripper
    // command, so every terminate query lands on the same well-supported
    // action point.
    if (a.terminate) return a;
    a.dx = std::clamp(v(0), -1.0, 1.0);
    a.dy = std::clamp(v(1), -1.0, 1.0);
    a.dz = std::clamp(v(2), -1.0, 1.0);
    double g = v(3);
    a.gripper_cmd = g > 1.0 / 3.0 ? GripperCmd::Close
                    : (g < -1.0 / 3.0 ? GripperCmd::Open : GripperCmd::None);
    return a;
}

Vector action_lower_bounds() {
    Vector lo(kActionDim);
    lo << -1, -1, -1, -1, 0;
    return lo;
}

Vector action_upper_bounds() {
    Vector hi(kActionDim);
    hi << 1, 1, 1, 1, 1;
    return hi;
}

QFunction QFunction::make(QArch arch, int obs_dim, int n_tasks, Rng& rng,
                          std::vector<int> trunk_hidden, std::vector<int> head_hidden) {
    QFunction q;
    q.arch_ = arch;
    q.obs_dim_ = obs_dim;
    q.n_tasks_ = n_tasks;
    if (arch == QArch::SingleHeaded) {
        std::vector<int> dims;
        dims.push_back(obs_dim + kActionDim + n_tasks);
        for (int h : trunk_hidden) dims.push_back(h);
        dims.push_back(1);
        q.trunk_ = Mlp(dims, rng);
    } else {
        std::vector<int> dims;
        dims.push_back(obs_dim + kActionDim);
        for (int h : trunk_hidden) dims.push_back(h);
        q.trunk_ = Mlp(dims, rng);  // output passed through tanh before the heads
        std::vector<int> hdims;
        hdims.push_back(trunk_hidden.back());
        for (int h : head_hidden) hdims.push_back(h);
        hdims.push_back(1);
        for (int t = 0; t < n_tasks; ++t) q.heads_.emplace_back(hdims, rng);
    }
    return q;
}

namespace {

Matrix assemble_single_input(const QFunction& q, const Matrix& Obs, const Matrix& Act,
                             const std::vector<int>& tasks) {
    int B = static_cast<int>(Obs.rows());
    Matrix X = Matrix::Zero(B, q.obs_dim() + kActionDim + q.num_tasks());
    X.leftCols(q.obs_dim()) = Obs;
    X.middleCols(q.obs_dim(), kActionDim) = Act;
    for (int r = 0; r < B; ++r) {
        int t = tasks[r];
        if (t < 0 || t >= q.num_tasks())
            throw std::out_of_range("task index out of range");
        X(r, q.obs_dim() + kActionDim + t) = 1.0;
    }
    return X;
}

Matrix obs_to_matrix_row(const std::vector<float>& obs) {
    Matrix Obs(1, static_cast<int>(obs.size()));
    for (size_t i = 0; i < obs.size(); ++i) Obs(0, i) = obs[i];
    return Obs;
}

}  // namespace

Vector QFunction::forward_batch(const Matrix& Obs, const Matrix& Act,
                                const std::vector<int>& tasks) const {
    if (Obs.cols() != obs_dim_)
        throw std::invalid_argument("observation dim mismatch");
    if (Act.cols() != kActionDim || Act.rows() != Obs.rows())
        throw std::invalid_argument("action matrix shape mismatch");
    if (static_cast<int>(tasks.size()) != Obs.rows())
        throw std::invalid_argument("task vector length mismatch");
    int B = static_cast<int>(Obs.rows());
    Vector q(B);
    if (arch_ == QArch::SingleHeaded) {
        Matrix X = assemble_single_input(*this, Obs, Act, tasks);
        Matrix z = trunk_.forward(X);
        for (int r = 0; r < B; ++r) q(r) = sigmoid(z(r, 0));
        return q;
    }
    Matrix X(B, obs_dim_ + kActionDim);
    X.leftCols(obs_dim_) = Obs;
    X.rightCols(kActionDim) = Act;
    Matrix H = trunk_.forward(X).array().tanh().matrix();
    // route rows per task head
    std::vector<std::vector<int>> by_task(n_tasks_);
    for (int r = 0; r < B; ++r) {
        if (tasks[r] < 0 || tasks[r] >= n_tasks_)
            throw std::out_of_range("task index out of range");
        by_task[tasks[r]].push_back(r);
    }
    for (int t = 0; t < n_tasks_; ++t) {
        if (by_task[t].empty()) continue;
        Matrix Ht(static_cast<int>(by_task[t].size()), H.cols());
        for (size_t i = 0; i < by_task[t].size(); ++i) Ht.row(i) = H.row(by_task[t][i]);
        Matrix z = heads_[t].forward(Ht);
        for (size_t i = 0; i < by_task[t].size(); ++i)
            q(by_task[t][i]) = sigmoid(z(static_cast<int>(i), 0));
    }
    return q;
}

double QFunction::forward(const std::vector<float>& obs_input, const Vector& action_vec,
                          int task) const {
    Matrix Act(1, kActionDim);
    Act.row(0) = action_vec.transpose();
    return forward_batch(obs_to_matrix_row(obs_input), Act, {task})(0);
}

std::pair<double, QGrads> QFunction::loss_and_grad(const Matrix& Obs, const Matrix& Act,
                                                   const std::vector<int>& tasks,
                                                   const Vector& targets) const {
    int B = static_cast<int>(Obs.rows());
    for (int r = 0; r < B; ++r)
        if (targets(r) < 0.0 || targets(r) > 1.0)
            throw std::invalid_argument("Bellman target outside [0,1]");

    QGrads grads;
    double loss = 0.0;
    auto bce = [](double q, double y) {
        double p = std::clamp(q, 1e-12, 1.0 - 1e-12);
        return -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
    };

    if (arch_ == QArch::SingleHeaded) {
        Matrix X = assemble_single_input(*this, Obs, Act, tasks);
        Mlp::Cache cache;
        Matrix z = trunk_.forward(X, cache);
        Matrix dZ(B, 1);
        for (int r = 0; r < B; ++r) {
            double q = sigmoid(z(r, 0));
            loss += bce(q, targets(r));
            dZ(r, 0) = (q - targets(r)) / B;  // d(BCE o sigmoid)/dz
        }
        grads.trunk = trunk_.backward(cache, dZ);
        return {loss / B, grads};
    }

    Matrix X(B, obs_dim_ + kActionDim);
    X.leftCols(obs_dim_) = Obs;
    X.rightCols(kActionDim) = Act;
    Mlp::Cache trunk_cache;
    Matrix Zt = trunk_.forward(X, trunk_cache);
    Matrix H = Zt.array().tanh().matrix();

    std::vector<std::vector<int>> by_task(n_tasks_);
    for (int r = 0; r < B; ++r) by_task[tasks[r]].push_back(r);

    Matrix dH = Matrix::Zero(B, H.cols());
    grads.heads.resize(n_tasks_);
    for (int t = 0; t < n_tasks_; ++t) {
        grads.heads[t] = zero_grads_like(heads_[t]);
        if (by_task[t].empty()) continue;
        int n = static_cast<int>(by_task[t].size());
        Matrix Ht(n, H.cols());
        for (int i = 0; i < n; ++i) Ht.row(i) = H.row(by_task[t][i]);
        Mlp::Cache head_cache;
        Matrix z = heads_[t].forward(Ht, head_cache);
        Matrix dZ(n, 1);
        for (int i = 0; i < n; ++i) {
            int r = by_task[t][i];
            double q = sigmoid(z(i, 0));
            loss += bce(q, targets(r));
            dZ(i, 0) = (q - targets(r)) / B;
        }
        Matrix dHt;
        grads.heads[t] = heads_[t].backward(head_cache, dZ, &dHt);
        for (int i = 0; i < n; ++i) dH.row(by_task[t][i]) = dHt.row(i);
    }
    Matrix dZt = (dH.array() * (1.0 - H.array().square())).matrix();
    grads.trunk = trunk_.backward(trunk_cache, dZt);
    return {loss / B, grads};
}

void QFunction::extend_tasks(int new_n_tasks, Rng& rng) {
    if (new_n_tasks < n_tasks_)
        throw std::invalid_argument("extend_tasks cannot shrink the catalog");
    if (new_n_tasks == n_tasks_) return;
    int extra = new_n_tasks - n_tasks_;
    if (arch_ == QArch::SingleHeaded) {
        // Task one-hot occupies the trailing input columns; new rows start at
        // zero so existing task outputs are untouched.
        Linear& l0 = trunk_.layers().front();
        Matrix W(l0.W.rows() + extra, l0.W.cols());
        W.topRows(l0.W.rows()) = l0.W;
        W.bottomRows(extra).setZero();
        l0.W = std::move(W);
    } else {
        std::vector<int> hdims = heads_.front().dims();
        for (int i = 0; i < extra; ++i) heads_.emplace_back(hdims, rng);
    }
    n_tasks_ = new_n_tasks;
}

Vector QFunction::flat_params() const {
    Vector p(num_params());
    Eigen::Index off = 0;
    Vector t = trunk_.flat_params();
    p.segment(off, t.size()) = t;
    off += t.size();
    for (const auto& h : heads_) {
        Vector hp = h.flat_params();
        p.segment(off, hp.size()) = hp;
        off += hp.size();
    }
    return p;
}

void QFunction::set_flat_params(const Vector& p) {
    Eigen::Index off = 0;
    Vector t = p.segment(off, trunk_.num_params());
    trunk_.set_flat_params(t);
    off += t.size();
    for (auto& h : heads_) {
        h.set_flat_params(p.segment(off, h.num_params()));
        off += h.num_params();
    }
}

int QFunction::num_params() const {
    int n = trunk_.num_params();
    for (const auto& h : heads_) n += h.num_params();
    return n;
}

QOptimizer::QOptimizer(Kind kind, double lr, double momentum)
    : kind_(kind), lr_(lr), momentum_(momentum) {}

void QOptimizer::step(QFunction& q, const QGrads& grads) {
    size_t n = 1 + q.heads().size();
    if (kind_ == Kind::SgdMomentum) {
        while (sgd_.size() < n) sgd_.emplace_back(lr_, momentum_);
        sgd_[0].step(q.trunk(), grads.trunk);
        for (size_t i = 0; i < q.heads().size(); ++i)
            sgd_[i + 1].step(q.heads()[i], grads.heads[i]);
    } else {
        while (adam_.size() < n) adam_.emplace_back(lr_);
        adam_[0].step(q.trunk(), grads.trunk);
        for (size_t i = 0; i < q.heads().size(); ++i)
            adam_[i + 1].step(q.heads()[i], grads.heads[i]);
    }
}

namespace {

void default_cem_init(const CemConfig& cfg, Vector& mean, Vector& stddev) {
    Vector lo = action_lower_bounds(), hi = action_upper_bounds();
    mean = cfg.init_mean.size() == kActionDim ? cfg.init_mean : (lo + hi) / 2.0;
    if (cfg.init_stddev.size() == kActionDim) {
        stddev = cfg.init_stddev;
    } else {
        stddev = Vector::Constant(kActionDim, 0.5);
    }
}

}  // namespace

std::pair<Vector, double> cem_maximize(const ActionScorer& score, const CemConfig& cfg,
                                       Rng& rng) {
    if (cfg.elites > cfg.samples_per_iter)
        throw std::invalid_argument("CEM elites exceed samples_per_iter");
    Vector lo = action_lower_bounds(), hi = action_upper_bounds();
    Vector mean, stddev;
    default_cem_init(cfg, mean, stddev);

    Vector best_action = mean;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < cfg.iterations; ++iter) {
        Matrix samples(cfg.samples_per_iter, kActionDim);
        for (int s = 0; s < cfg.samples_per_iter; ++s)
            for (int d = 0; d < kActionDim; ++d)
                samples(s, d) =
                    std::clamp(rng.normal(mean(d), stddev(d)), lo(d), hi(d));
        Vector scores = score(samples);
        std::vector<int> order(cfg.samples_per_iter);
        std::iota(order.begin(), order.end(), 0);
        std::partial_sort(order.begin(), order.begin() + cfg.elites, order.end(),
                          [&](int a, int b) { return scores(a) > scores(b); });
        if (scores(order[0]) > best_score) {
            best_score = scores(order[0]);
            best_action = samples.row(order[0]).transpose();
        }
        for (int d = 0; d < kActionDim; ++d) {
            double m = 0.0;
            for (int e = 0; e < cfg.elites; ++e) m += samples(order[e], d);
            m /= cfg.elites;
            double var = 0.0;
            for (int e = 0; e < cfg.elites; ++e) {
                double diff = samples(order[e], d) - m;
                var += diff * diff;
            }
            mean(d) = m;
            stddev(d) = std::max(std::sqrt(var / cfg.elites), cfg.stddev_floor);
        }
    }
    return {best_action, best_score};
}

std::pair<Matrix, Vector> cem_maximize_batch(const QFunction& q, const Matrix& Obs,
                                             const std::vector<int>& tasks,
                                             const CemConfig& cfg, Rng& rng) {
    int B = static_cast<int>(Obs.rows());
    int N = cfg.samples_per_iter;
    Vector lo = action_lower_bounds(), hi = action_upper_bounds();
    Vector mean0, stddev0;
    default_cem_init(cfg, mean0, stddev0);

    Matrix means = mean0.transpose().replicate(B, 1);
    Matrix stddevs = stddev0.transpose().replicate(B, 1);
    Matrix best_actions = means;
    Vector best_scores = Vector::Constant(B, -std::numeric_limits<double>::infinity());

    Matrix big_obs(B * N, Obs.cols());
    std::vector<int> big_tasks(B * N);
    for (int r = 0; r < B; ++r) {
        big_obs.middleRows(r * N, N) = Obs.row(r).replicate(N, 1);
        std::fill(big_tasks.begin() + r * N, big_tasks.begin() + (r + 1) * N, tasks[r]);
    }

    Matrix samples(B * N, kActionDim);
    for (int iter = 0; iter < cfg.iterations; ++iter) {
        for (int r = 0; r < B; ++r)
            for (int s = 0; s < N; ++s)
                for (int d = 0; d < kActionDim; ++d)
                    samples(r * N + s, d) = std::clamp(
                        rng.normal(means(r, d), stddevs(r, d)), lo(d), hi(d));
        // Logged actions only ever carry thresholded gripper / terminate
        // values, so score (and return) the snapped candidates; leaving
        // them continuous lets the search exploit Q in action subspace the
        // data never visits.
        for (int i = 0; i < B * N; ++i) {
            double g = samples(i, 3);
            samples(i, 3) = g > 1.0 / 3.0 ? 1.0 : (g < -1.0 / 3.0 ? -1.0 : 0.0);
            if (samples(i, 4) >= 0.5) {
                // canonical terminate: stop without moving
                samples(i, 0) = samples(i, 1) = samples(i, 2) = samples(i, 3) = 0.0;
                samples(i, 4) = 1.0;
            } else {
                samples(i, 4) = 0.0;
            }
        }
        Vector scores = q.forward_batch(big_obs, samples, big_tasks);
        for (int r = 0; r < B; ++r) {
            std::vector<int> order(N);
            std::iota(order.begin(), order.end(), 0);
            std::partial_sort(order.begin(), order.begin() + cfg.elites, order.end(),
                              [&](int a, int b) {
                                  return scores(r * N + a) > scores(r * N + b);
                              });
            if (scores(r * N + order[0]) > best_scores(r)) {
                best_scores(r) = scores(r * N + order[0]);
                best_actions.row(r) = samples.row(r * N + order[0]);
            }
            for (int d = 0; d < kActionDim; ++d) {
                double m = 0.0;
                for (int e = 0; e < cfg.elites; ++e)
                    m += samples(r * N + order[e], d);
                m /= cfg.elites;
                double var = 0.0;
                for (int e = 0; e < cfg.elites; ++e) {
                    double diff = samples(r * N + order[e], d) - m;
                    var += diff * diff;
                }
                means(r, d) = m;
                stddevs(r, d) = std::max(std::sqrt(var / cfg.elites), cfg.stddev_floor);
            }
        }
    }
    return {best_actions, best_scores};
}

std::pair<Vector, double> cem_maximize_q(const QFunction& q,
                                         const std::vector<float>& obs_input, int task,
                                         const CemConfig& cfg, Rng& rng) {
    Matrix Obs = obs_to_matrix_row(obs_input);
    auto [actions, scores] = cem_maximize_batch(q, Obs, {task}, cfg, rng);
    return {actions.row(0).transpose(), scores(0)};
}

BellmanTarget bellman_target(const SampleRow& row, int task_index,
                             const QFunction& target_q, double gamma,
                             const CemConfig& cfg, Rng& rng) {
    std::vector<SampleRow> rows{row};
    return bellman_targets_batch(rows, {task_index}, target_q, gamma, cfg, rng)[0];
}

std::vector<BellmanTarget> bellman_targets_batch(const std::vector<SampleRow>& rows,
                                                 const std::vector<int>& task_indices,
                                                 const QFunction& target_q, double gamma,
                                                 const CemConfig& cfg, Rng& rng) {
    std::vector<BellmanTarget> targets(rows.size());
    std::vector<int> nonterminal;
    for (size_t i = 0; i < rows.size(); ++i) {
        targets[i].r = rows[i].reward;
        targets[i].gamma = gamma;
        targets[i].terminal = rows[i].is_terminal;
        if (targets[i].terminal) {
            targets[i].v_next = 0.0;
            targets[i].value = rows[i].reward;
        } else {
            nonterminal.push_back(static_cast<int>(i));
        }
    }
    if (!nonterminal.empty()) {
        Matrix Obs(static_cast<int>(nonterminal.size()), target_q.obs_dim());
        std::vector<int> tasks(nonterminal.size());
        for (size_t k = 0; k < nonterminal.size(); ++k) {
            const auto& input = rows[nonterminal[k]].next_obs().as_input();
            for (size_t c = 0; c < input.size(); ++c)
                Obs(static_cast<int>(k), static_cast<int>(c)) = input[c];
            tasks[k] = task_indices[nonterminal[k]];
        }
        auto [actions, values] = cem_maximize_batch(target_q, Obs, tasks, cfg, rng);
        for (size_t k = 0; k < nonterminal.size(); ++k) {
            auto& t = targets[nonterminal[k]];
            t.v_next = values(static_cast<int>(k));
            t.value = std::clamp(t.r + gamma * t.v_next, 0.0, 1.0);
        }
    }
    return targets;
}

Action policy_act(const QFunction& q, const std::vector<float>& obs_input, int task,
                  const CemConfig& cfg, double epsilon, Rng& rng) {
    if (epsilon < 0.0 || epsilon > 1.0)
        throw std::invalid_argument("epsilon must be in [0,1]");
    if (epsilon > 0.0 && rng.bernoulli(epsilon)) {
        Vector lo = action_lower_bounds(), hi = action_upper_bounds();
        Vector v(kActionDim);
        for (int d = 0; d < kActionDim; ++d) v(d) = rng.uniform(lo(d), hi(d));
        return vec_to_action(v);
    }
    auto [a, v] = cem_maximize_q(q, obs_input, task, cfg, rng);
    return vec_to_action(a);
}

void QFunction::save(const std::string& path, const TaskRegistry& registry) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    nlohmann::json header;
    header["magic"] = "mtopt-q";
    header["version"] = 1;
    header["arch"] = arch_ == QArch::SingleHeaded ? "single_headed" : "multi_headed";
    header["obs_dim"] = obs_dim_;
    header["n_tasks"] = n_tasks_;
    header["trunk_dims"] = trunk_.dims();
    if (!heads_.empty()) header["head_dims"] = heads_.front().dims();
    auto tasks = nlohmann::json::array();
    for (const auto& t : registry.tasks())
        tasks.push_back({{"id", t.task_id}, {"skill", t.skill_id}});
    header["tasks"] = tasks;
    out << header.dump() << "\n";
    Vector p = flat_params();
    out.write(reinterpret_cast<const char*>(p.data()),
              static_cast<std::streamsize>(p.size() * sizeof(double)));
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

std::pair<QFunction, TaskRegistry> QFunction::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    std::string line;
    std::getline(in, line);
    nlohmann::json header = nlohmann::json::parse(line);
    if (header.value("magic", std::string()) != "mtopt-q" ||
        header.value("version", 0) != 1)
        throw std::runtime_error("unrecognized checkpoint file: " + path);

    QFunction q;
    q.arch_ = header.at("arch").get<std::string>() == "single_headed"
                  ? QArch::SingleHeaded
                  : QArch::MultiHeaded;
    q.obs_dim_ = header.at("obs_dim").get<int>();
    q.n_tasks_ = header.at("n_tasks").get<int>();
    Rng rng(0);
    q.trunk_ = Mlp(header.at("trunk_dims").get<std::vector<int>>(), rng);
    if (q.arch_ == QArch::MultiHeaded) {
        auto hdims = header.at("head_dims").get<std::vector<int>>();
        for (int t = 0; t < q.n_tasks_; ++t) q.heads_.emplace_back(hdims, rng);
    }
    Vector p(q.num_params());
    in.read(reinterpret_cast<char*>(p.data()),
            static_cast<std::streamsize>(p.size() * sizeof(double)));
    if (!in) throw std::runtime_error("truncated checkpoint: " + path);
    q.set_flat_params(p);

    TaskRegistry registry;
    for (const auto& t : header.at("tasks"))
        registry.register_task(t.at("id").get<std::string>(),
                               t.at("skill").get<std::string>());
    return {std::move(q), std::move(registry)};
}

}  // namespace mtopt
