#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "mtopt/episode.hpp"
#include "mtopt/rng.hpp"
#include "mtopt/task.hpp"

namespace mtopt {

enum class Outcome { Failure = 0, Success = 1 };

// One sampled training row: a transition plus its task label and the reward
// attached to it (terminal transitions carry the episode label, others 0).
struct SampleRow {
    std::shared_ptr<const Episode> episode;
    int step = 0;
    TaskId task;
    double reward = 0.0;
    bool is_terminal = false;

    const Observation& obs() const { return episode->observations[step]; }
    const Action& action() const { return episode->actions[step]; }
    const Observation& next_obs() const { return episode->observations[step + 1]; }
};

struct BatchSpec {
    int batch_size = 32;
    std::vector<TaskId> active_tasks;
    double success_ratio = 0.5;  // rho: within-task share of success transitions
};

struct BufferKeyStats {
    size_t size = 0;
    int64_t evicted = 0;
};

// Per-(task, outcome) transition buffers with FIFO eviction, feeding the
// exact two-level re-balanced batches: equal per-task shares (difference at
// most 1) and a fixed success/failure split within each task.
class ReplayCatalog {
public:
    explicit ReplayCatalog(size_t capacity_per_buffer = 50000, uint64_t rng_seed = 0)
        : capacity_(capacity_per_buffer), rng_(rng_seed) {}

    void insert(const LabeledEpisode& labeled);

    // Exact re-balanced batch. Active tasks with both buffers empty are
    // dropped for this batch (counted) and their share redistributed.
    std::vector<SampleRow> sample_batch(const BatchSpec& spec);

    // Proportional-to-size sampling ignoring task/outcome structure.
    std::vector<SampleRow> sample_uniform(int batch_size);

    std::map<std::pair<TaskId, Outcome>, BufferKeyStats> stats() const;
    size_t total_transitions() const;
    int64_t dropped_task_count() const { return dropped_tasks_; }

private:
    struct Entry {
        std::shared_ptr<const Episode> episode;
        int step;
        double reward;
    };
    struct Buffer {
        std::vector<Entry> ring;
        size_t head = 0;  // next eviction slot once full
        int64_t evicted = 0;

        size_t size() const { return ring.size(); }
    };

    SampleRow row_from(const Buffer& buf, size_t i, const TaskId& task) const;

    size_t capacity_;
    mutable std::mutex mutex_;
    Rng rng_;
    std::map<std::pair<TaskId, Outcome>, Buffer> buffers_;
    uint64_t rotation_ = 0;  // rotates which tasks absorb the batch remainder
    int64_t dropped_tasks_ = 0;
};

}  // namespace mtopt
