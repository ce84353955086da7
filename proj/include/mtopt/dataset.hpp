#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mtopt/episode.hpp"
#include "mtopt/task.hpp"

namespace mtopt {

// Success-detector hook: probability that `task` succeeded at `terminal_obs`.
using SdFn = std::function<double(const Observation&, const TaskId&)>;

// Append-only newline-delimited episode store: a directory of shard files
// `episodes-{shard:05}.ndrec`. One writer per dataset, any number of
// concurrent readers; whole lines are flushed so readers never see a
// partial record.
class DatasetWriter {
public:
    explicit DatasetWriter(const std::filesystem::path& dir,
                           int episodes_per_shard = 1000);
    ~DatasetWriter();

    // Validates the episode and rejects duplicates; the dataset is unchanged
    // on rejection.
    void append(const Episode& episode);

    int64_t episode_count() const { return static_cast<int64_t>(seen_ids_.size()); }

private:
    void open_shard();

    std::filesystem::path dir_;
    int episodes_per_shard_;
    int shard_index_ = 0;
    int in_shard_ = 0;
    std::ofstream out_;
    std::set<std::string> seen_ids_;
};

struct ScanFilter {
    std::optional<TaskId> collected_for;
    std::optional<std::string> policy_id;
    std::optional<int64_t> created_after_us;
    std::optional<int64_t> created_before_us;

    bool matches(const Episode& e) const;
};

struct ScanResult {
    int64_t episodes = 0;
    int64_t corrupt_records = 0;
};

// Yields episodes in append order; corrupt records are skipped and counted.
ScanResult scan_dataset(const std::filesystem::path& dir, const ScanFilter& filter,
                        const std::function<void(std::shared_ptr<const Episode>)>& fn);

std::vector<std::shared_ptr<const Episode>> read_dataset(
    const std::filesystem::path& dir, const ScanFilter& filter = {});

struct TaskDataStats {
    int64_t episode_count = 0;
    int64_t success_count = 0;
};

// Per-task counts under impersonation-free labeling: each episode counts
// only toward its collected_for task.
std::map<TaskId, TaskDataStats> dataset_stats(const std::filesystem::path& dir,
                                              const SdFn& sd,
                                              const TaskRegistry& registry);

}  // namespace mtopt
