#include "mtopt/success.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"

namespace mtopt {

namespace {

std::vector<TaskId> semantic_lifts(const TaskRegistry& registry) {
    std::vector<TaskId> out;
    for (const auto& t : registry.tasks())
        if (t.task_id.rfind("lift-cat", 0) == 0) out.push_back(t.task_id);
    return out;
}

std::vector<TaskId> region_places(const TaskRegistry& registry) {
    std::vector<TaskId> out;
    for (const auto& t : registry.tasks())
        if (t.task_id == "place-A" || t.task_id == "place-B" || t.task_id == "place-C")
            out.push_back(t.task_id);
    return out;
}

Matrix classifier_input(const Observation& obs, int task_index, int n_tasks) {
    const auto& feats = obs.as_input();
    Matrix X(1, static_cast<int>(feats.size()) + n_tasks);
    for (size_t i = 0; i < feats.size(); ++i) X(0, i) = feats[i];
    for (int t = 0; t < n_tasks; ++t)
        X(0, feats.size() + t) = (t == task_index) ? 1.0 : 0.0;
    return X;
}

}  // namespace

SuccessDetector SuccessDetector::oracle(const TaskRegistry& registry,
                                        std::map<TaskId, double> flip_noise,
                                        uint64_t noise_seed) {
    SuccessDetector sd(Kind::Oracle, registry);
    sd.flip_noise_ = std::move(flip_noise);
    if (!sd.flip_noise_.empty()) {
        sd.noise_rng_ = std::make_shared<std::pair<std::mutex, Rng>>();
        sd.noise_rng_->second = Rng(noise_seed);
    }
    return sd;
}

SuccessDetector SuccessDetector::learned(const TaskRegistry& registry, Mlp net) {
    SuccessDetector sd(Kind::Learned, registry);
    sd.net_ = std::make_shared<Mlp>(std::move(net));
    return sd;
}

double SuccessDetector::evaluate(const Observation& terminal_obs, const TaskId& task) const {
    if (!registry_.has_task(task))
        throw std::out_of_range("success detector has no task: " + task);
    if (kind_ == Kind::Oracle) {
        double p = task_predicate(terminal_obs.summary, task) ? 1.0 : 0.0;
        auto it = flip_noise_.find(task);
        if (it != flip_noise_.end() && it->second > 0.0 && noise_rng_) {
            std::lock_guard<std::mutex> lock(noise_rng_->first);
            if (noise_rng_->second.bernoulli(it->second)) p = 1.0 - p;
        }
        return p;
    }
    Matrix X = classifier_input(terminal_obs, registry_.onehot_index(task),
                                registry_.num_tasks());
    return sigmoid(net_->forward(X)(0, 0));
}

SdFn SuccessDetector::as_fn() const {
    return [sd = *this](const Observation& obs, const TaskId& task) {
        return sd.evaluate(obs, task);
    };
}

std::map<TaskId, int> expand_labels(const std::map<TaskId, int>& partial,
                                    const TaskRegistry& registry) {
    if (partial.empty()) throw std::invalid_argument("expand_labels: no labels given");
    for (const auto& [task, v] : partial) {
        if (!registry.has_task(task))
            throw std::out_of_range("expand_labels: unknown task " + task);
        if (v != 0 && v != 1)
            throw std::invalid_argument("expand_labels: labels must be 0/1");
    }
    std::map<TaskId, int> labels = partial;
    auto assign = [&](const TaskId& task, int v) -> bool {
        auto [it, inserted] = labels.emplace(task, v);
        if (!inserted && it->second != v)
            throw std::invalid_argument("contradictory labels for task " + task);
        return inserted;
    };

    const auto lifts = semantic_lifts(registry);
    const auto places = region_places(registry);
    bool lift_any = registry.has_task("lift-any");
    bool place_any = registry.has_task("place-any");

    bool changed = true;
    while (changed) {
        changed = false;
        for (const auto& k : lifts) {
            auto it = labels.find(k);
            if (it == labels.end() || it->second != 1) continue;
            if (lift_any) changed |= assign("lift-any", 1);
            for (const auto& j : lifts)
                if (j != k) changed |= assign(j, 0);
        }
        if (lift_any) {
            auto it = labels.find("lift-any");
            if (it != labels.end() && it->second == 0)
                for (const auto& k : lifts) changed |= assign(k, 0);
        }
        for (const auto& r : places) {
            auto it = labels.find(r);
            if (it == labels.end() || it->second != 1) continue;
            if (place_any) changed |= assign("place-any", 1);
            for (const auto& q : places)
                if (q != r) changed |= assign(q, 0);
        }
        if (place_any) {
            auto it = labels.find("place-any");
            if (it != labels.end() && it->second == 0)
                for (const auto& r : places) changed |= assign(r, 0);
        }
    }
    return labels;
}

SdFitResult fit_classifier(const std::vector<LabeledOutcome>& outcomes,
                           const TaskRegistry& registry, const SdFitConfig& config) {
    if (outcomes.empty()) throw std::invalid_argument("fit_classifier: no outcomes");
    int n_tasks = registry.num_tasks();
    int obs_dim = static_cast<int>(outcomes.front().terminal_obs.as_input().size());

    // index outcomes per (task, class)
    std::map<TaskId, std::array<std::vector<int>, 2>> index;
    for (size_t i = 0; i < outcomes.size(); ++i) {
        for (const auto& [task, label] : outcomes[i].labels) {
            if (!registry.has_task(task)) continue;
            index[task][label == 1 ? 1 : 0].push_back(static_cast<int>(i));
        }
    }
    std::vector<TaskId> included;
    std::vector<TaskId> excluded;
    for (const auto& t : registry.tasks()) {
        auto it = index.find(t.task_id);
        if (it != index.end() && !it->second[0].empty() && !it->second[1].empty()) {
            included.push_back(t.task_id);
        } else {
            excluded.push_back(t.task_id);
            std::cerr << "warning: task " << t.task_id
                      << " has a single outcome class; excluded from SD training\n";
        }
    }
    if (included.empty())
        throw std::invalid_argument("fit_classifier: no task has both outcome classes");

    Rng rng(config.seed);
    std::vector<int> dims;
    dims.push_back(obs_dim + n_tasks);
    for (int h : config.hidden) dims.push_back(h);
    dims.push_back(1);
    Mlp net(dims, rng);
    Adam opt(config.learning_rate);

    auto batch_input = [&](const std::vector<std::pair<int, int>>& rows, Matrix& X,
                           Vector& y) {
        X.resize(static_cast<int>(rows.size()), obs_dim + n_tasks);
        y.resize(static_cast<int>(rows.size()));
        X.setZero();
        for (size_t r = 0; r < rows.size(); ++r) {
            const auto& o = outcomes[rows[r].first];
            const auto& feats = o.terminal_obs.as_input();
            for (int c = 0; c < obs_dim; ++c) X(r, c) = feats[c];
            X(r, obs_dim + rows[r].second) = 1.0;
            y(r) = o.labels.at(registry.task_at(rows[r].second));
        }
    };

    SdFitResult result{SuccessDetector::oracle(registry), excluded, {}};
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (int step = 0; step < config.steps_per_epoch; ++step) {
            std::vector<std::pair<int, int>> rows;  // (outcome index, task onehot)
            rows.reserve(config.batch_size);
            for (int b = 0; b < config.batch_size; ++b) {
                const TaskId& task = included[rng.uniform_index(included.size())];
                int cls = rng.bernoulli(0.5) ? 1 : 0;
                const auto& pool = index[task][cls];
                rows.emplace_back(pool[rng.uniform_index(pool.size())],
                                  registry.onehot_index(task));
            }
            Matrix X;
            Vector y;
            batch_input(rows, X, y);
            Mlp::Cache cache;
            Matrix z = net.forward(X, cache);
            Matrix dZ(z.rows(), 1);
            for (Eigen::Index r = 0; r < z.rows(); ++r)
                dZ(r, 0) = (sigmoid(z(r, 0)) - y(r)) / static_cast<double>(z.rows());
            opt.step(net, net.backward(cache, dZ));
        }
        if (config.holdout) {
            double loss = 0.0;
            int64_t count = 0;
            for (const auto& o : *config.holdout) {
                for (const auto& task : included) {
                    auto it = o.labels.find(task);
                    if (it == o.labels.end()) continue;
                    Matrix X = classifier_input(o.terminal_obs,
                                                registry.onehot_index(task), n_tasks);
                    double p = sigmoid(net.forward(X)(0, 0));
                    p = std::clamp(p, 1e-12, 1.0 - 1e-12);
                    loss += it->second ? -std::log(p) : -std::log(1.0 - p);
                    ++count;
                }
            }
            result.holdout_loss.push_back(count ? loss / count : 0.0);
        }
    }
    result.sd = SuccessDetector::learned(registry, std::move(net));
    return result;
}

std::vector<SdHoldoutRow> sd_holdout_report(const SuccessDetector& sd,
                                            const std::vector<LabeledOutcome>& holdout) {
    std::vector<SdHoldoutRow> rows;
    for (const auto& t : sd.registry().tasks()) {
        SdHoldoutRow row;
        row.task = t.task_id;
        int64_t own_fp = 0, own_fn = 0, own_pos = 0, own_neg = 0;
        int64_t oth_fp = 0, oth_fn = 0, oth_pos = 0, oth_neg = 0;
        for (const auto& o : holdout) {
            auto it = o.labels.find(t.task_id);
            if (it == o.labels.end()) continue;
            bool positive = it->second == 1;
            bool predicted = sd.evaluate(o.terminal_obs, t.task_id) >= 0.5;
            bool own = o.source_task == t.task_id;
            if (own) {
                ++row.total_count;
                if (positive) {
                    ++row.success_count;
                    ++own_pos;
                    if (!predicted) ++own_fn;
                } else {
                    ++row.failure_count;
                    ++own_neg;
                    if (predicted) ++own_fp;
                }
            } else {
                if (positive) {
                    ++oth_pos;
                    if (!predicted) ++oth_fn;
                } else {
                    ++oth_neg;
                    if (predicted) ++oth_fp;
                }
            }
        }
        row.success_rate =
            row.total_count ? static_cast<double>(row.success_count) / row.total_count : 0.0;
        row.false_negative_rate = own_pos ? static_cast<double>(own_fn) / own_pos : 0.0;
        row.false_positive_rate = own_neg ? static_cast<double>(own_fp) / own_neg : 0.0;
        row.other_task_false_negative_rate =
            oth_pos ? static_cast<double>(oth_fn) / oth_pos : 0.0;
        row.other_task_false_positive_rate =
            oth_neg ? static_cast<double>(oth_fp) / oth_neg : 0.0;
        rows.push_back(row);
    }
    return rows;
}

std::string holdout_report_csv(const std::vector<SdHoldoutRow>& rows) {
    std::ostringstream out;
    out << "Primary Success Detector Name,Total Count,Success Count,Failure Count,"
           "Success Rate,False Negative Rate,False Positive Rate,"
           "Other Task False Negative Rate,Other Task False Positive Rate\n";
    for (const auto& r : rows) {
        out << r.task << ',' << r.total_count << ',' << r.success_count << ','
            << r.failure_count << ',' << r.success_rate << ',' << r.false_negative_rate
            << ',' << r.false_positive_rate << ',' << r.other_task_false_negative_rate
            << ',' << r.other_task_false_positive_rate << '\n';
    }
    return out.str();
}

std::vector<LabeledOutcome> outcomes_from_dataset(const std::filesystem::path& dir,
                                                  const TaskRegistry& registry,
                                                  std::map<TaskId, double> flip_noise,
                                                  uint64_t noise_seed) {
    Rng rng(noise_seed);
    std::vector<LabeledOutcome> out;
    scan_dataset(dir, {}, [&](std::shared_ptr<const Episode> e) {
        LabeledOutcome o;
        o.terminal_obs = e->terminal_obs();
        o.source_task = e->collected_for;
        o.source_seed = e->seed;
        for (const auto& t : registry.tasks()) {
            int label = task_predicate(o.terminal_obs.summary, t.task_id) ? 1 : 0;
            auto it = flip_noise.find(t.task_id);
            if (it != flip_noise.end() && rng.bernoulli(it->second)) label = 1 - label;
            o.labels[t.task_id] = label;
        }
        out.push_back(std::move(o));
    });
    return out;
}

std::pair<std::vector<LabeledOutcome>, std::vector<LabeledOutcome>> split_by_seed(
    const std::vector<LabeledOutcome>& outcomes, double holdout_fraction) {
    if (outcomes.empty()) return {};
    uint64_t lo = outcomes.front().source_seed, hi = lo;
    for (const auto& o : outcomes) {
        lo = std::min(lo, o.source_seed);
        hi = std::max(hi, o.source_seed);
    }
    uint64_t threshold =
        lo + static_cast<uint64_t>((hi - lo + 1) * (1.0 - holdout_fraction));
    std::pair<std::vector<LabeledOutcome>, std::vector<LabeledOutcome>> split;
    for (const auto& o : outcomes) {
        if (o.source_seed >= threshold)
            split.second.push_back(o);
        else
            split.first.push_back(o);
    }
    return split;
}

void SuccessDetector::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write SD file: " + path);
    nlohmann::json header;
    header["magic"] = "mtopt-sd";
    header["version"] = 1;
    header["kind"] = kind_ == Kind::Oracle ? "oracle" : "learned";
    auto tasks = nlohmann::json::array();
    for (const auto& t : registry_.tasks())
        tasks.push_back({{"id", t.task_id}, {"skill", t.skill_id}});
    header["tasks"] = tasks;
    header["noise"] = flip_noise_;
    if (kind_ == Kind::Learned) header["dims"] = net_->dims();
    out << header.dump() << "\n";
    if (kind_ == Kind::Learned) {
        Vector p = net_->flat_params();
        out.write(reinterpret_cast<const char*>(p.data()),
                  static_cast<std::streamsize>(p.size() * sizeof(double)));
    }
}

SuccessDetector SuccessDetector::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open SD file: " + path);
    std::string line;
    std::getline(in, line);
    nlohmann::json header = nlohmann::json::parse(line);
    if (header.value("magic", std::string()) != "mtopt-sd" || header.value("version", 0) != 1)
        throw std::runtime_error("unrecognized SD file: " + path);
    TaskRegistry registry;
    for (const auto& t : header.at("tasks"))
        registry.register_task(t.at("id").get<std::string>(),
                               t.at("skill").get<std::string>());
    if (header.at("kind").get<std::string>() == "oracle") {
        return SuccessDetector::oracle(
            registry, header.value("noise", std::map<TaskId, double>{}));
    }
    auto dims = header.at("dims").get<std::vector<int>>();
    Rng rng(0);
    Mlp net(dims, rng);
    Vector p(net.num_params());
    in.read(reinterpret_cast<char*>(p.data()),
            static_cast<std::streamsize>(p.size() * sizeof(double)));
    if (!in) throw std::runtime_error("truncated SD file: " + path);
    net.set_flat_params(p);
    return SuccessDetector::learned(registry, std::move(net));
}

}  // namespace mtopt
