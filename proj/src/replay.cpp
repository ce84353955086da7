#include "mtopt/replay.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mtopt {

void ReplayCatalog::insert(const LabeledEpisode& labeled) {
    if (!labeled.base) throw std::invalid_argument("insert: null episode");
    Outcome outcome = labeled.reward ? Outcome::Success : Outcome::Failure;
    std::lock_guard<std::mutex> lock(mutex_);
    Buffer& buf = buffers_[{labeled.train_as, outcome}];
    int steps = labeled.base->num_steps();
    for (int i = 0; i < steps; ++i) {
        Entry e{labeled.base, i, i + 1 == steps ? static_cast<double>(labeled.reward) : 0.0};
        if (buf.ring.size() < capacity_) {
            buf.ring.push_back(std::move(e));
        } else {
            buf.ring[buf.head] = std::move(e);
            buf.head = (buf.head + 1) % capacity_;
            ++buf.evicted;
        }
    }
}

SampleRow ReplayCatalog::row_from(const Buffer& buf, size_t i, const TaskId& task) const {
    // Ring order: oldest entry sits at `head` once the buffer wrapped, but
    // sampling is uniform so the physical index is fine.
    const Entry& e = buf.ring[i];
    SampleRow row;
    row.episode = e.episode;
    row.step = e.step;
    row.task = task;
    row.reward = e.reward;
    row.is_terminal = e.step + 1 == e.episode->num_steps();
    return row;
}

std::vector<SampleRow> ReplayCatalog::sample_batch(const BatchSpec& spec) {
    std::lock_guard<std::mutex> lock(mutex_);
    if (spec.active_tasks.empty())
        throw std::invalid_argument("sample_batch: no active tasks");
    if (spec.batch_size < static_cast<int>(spec.active_tasks.size()))
        throw std::invalid_argument("sample_batch: batch smaller than task count");

    std::vector<TaskId> tasks;
    for (const auto& t : spec.active_tasks) {
        auto s = buffers_.find({t, Outcome::Success});
        auto f = buffers_.find({t, Outcome::Failure});
        bool has_s = s != buffers_.end() && !s->second.ring.empty();
        bool has_f = f != buffers_.end() && !f->second.ring.empty();
        if (has_s || has_f) {
            tasks.push_back(t);
        } else {
            ++dropped_tasks_;
        }
    }
    if (tasks.empty()) throw std::runtime_error("sample_batch: all active tasks empty");

    int k = static_cast<int>(tasks.size());
    int base = spec.batch_size / k;
    int rem = spec.batch_size % k;
    uint64_t rot = rotation_++;

    std::vector<SampleRow> batch;
    batch.reserve(spec.batch_size);
    for (int ti = 0; ti < k; ++ti) {
        const TaskId& task = tasks[ti];
        int quota = base + ((static_cast<uint64_t>(ti) + rot) % k < static_cast<uint64_t>(rem) ? 1 : 0);
        auto s_it = buffers_.find({task, Outcome::Success});
        auto f_it = buffers_.find({task, Outcome::Failure});
        const Buffer* succ = (s_it != buffers_.end() && !s_it->second.ring.empty())
                                 ? &s_it->second
                                 : nullptr;
        const Buffer* fail = (f_it != buffers_.end() && !f_it->second.ring.empty())
                                 ? &f_it->second
                                 : nullptr;
        int n_succ;
        if (succ && fail) {
            n_succ = static_cast<int>(std::lround(spec.success_ratio * quota));
        } else if (succ) {
            n_succ = quota;  // fallback: single nonempty buffer fills the quota
        } else {
            n_succ = 0;
        }
        for (int i = 0; i < quota; ++i) {
            const Buffer* buf = i < n_succ ? succ : fail;
            batch.push_back(row_from(*buf, rng_.uniform_index(buf->ring.size()), task));
        }
    }
    return batch;
}

std::vector<SampleRow> ReplayCatalog::sample_uniform(int batch_size) {
    std::lock_guard<std::mutex> lock(mutex_);
    std::vector<std::pair<const std::pair<TaskId, Outcome>*, const Buffer*>> nonempty;
    size_t total = 0;
    for (const auto& [key, buf] : buffers_) {
        if (!buf.ring.empty()) {
            nonempty.emplace_back(&key, &buf);
            total += buf.ring.size();
        }
    }
    if (total == 0) throw std::runtime_error("sample_uniform: catalog is empty");
    std::vector<SampleRow> batch;
    batch.reserve(batch_size);
    for (int i = 0; i < batch_size; ++i) {
        size_t pick = rng_.uniform_index(total);
        for (const auto& [key, buf] : nonempty) {
            if (pick < buf->ring.size()) {
                batch.push_back(row_from(*buf, pick, key->first));
                break;
            }
            pick -= buf->ring.size();
        }
    }
    return batch;
}

std::map<std::pair<TaskId, Outcome>, BufferKeyStats> ReplayCatalog::stats() const {
    std::lock_guard<std::mutex> lock(mutex_);
    std::map<std::pair<TaskId, Outcome>, BufferKeyStats> out;
    for (const auto& [key, buf] : buffers_)
        out[key] = {buf.ring.size(), buf.evicted};
    return out;
}

size_t ReplayCatalog::total_transitions() const {
    std::lock_guard<std::mutex> lock(mutex_);
    size_t total = 0;
    for (const auto& [key, buf] : buffers_) total += buf.ring.size();
    return total;
}

}  // namespace mtopt
