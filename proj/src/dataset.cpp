#include "mtopt/dataset.hpp"

#include <algorithm>
#include <stdexcept>

#include "json.hpp"

namespace fs = std::filesystem;

namespace mtopt {

namespace {

std::string shard_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "episodes-%05d.ndrec", index);
    return buf;
}

std::vector<fs::path> shard_files(const fs::path& dir) {
    std::vector<fs::path> files;
    if (!fs::exists(dir)) return files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (name.rfind("episodes-", 0) == 0 && entry.path().extension() == ".ndrec")
            files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

}  // namespace

DatasetWriter::DatasetWriter(const fs::path& dir, int episodes_per_shard)
    : dir_(dir), episodes_per_shard_(episodes_per_shard) {
    fs::create_directories(dir_);
    // Resume after the last existing shard; collect ids for duplicate checks.
    auto files = shard_files(dir_);
    for (const auto& f : files) {
        std::ifstream in(f);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            try {
                auto j = nlohmann::json::parse(line);
                seen_ids_.insert(j.at("episode_id").get<std::string>());
            } catch (const nlohmann::json::exception&) {
            }
        }
    }
    shard_index_ = static_cast<int>(files.size());
    open_shard();
}

DatasetWriter::~DatasetWriter() = default;

void DatasetWriter::open_shard() {
    out_.close();
    out_.open(dir_ / shard_name(shard_index_), std::ios::app);
    if (!out_) throw std::runtime_error("cannot open dataset shard in " + dir_.string());
    in_shard_ = 0;
}

void DatasetWriter::append(const Episode& episode) {
    std::string err = episode.validate();
    if (!err.empty())
        throw std::invalid_argument("episode rejected: " + err);
    if (seen_ids_.count(episode.episode_id))
        throw std::invalid_argument("duplicate episode_id: " + episode.episode_id);
    if (in_shard_ >= episodes_per_shard_) {
        ++shard_index_;
        open_shard();
    }
    out_ << serialize_episode(episode) << "\n";
    out_.flush();
    if (!out_) throw std::runtime_error("dataset append failed");
    seen_ids_.insert(episode.episode_id);
    ++in_shard_;
}

bool ScanFilter::matches(const Episode& e) const {
    if (collected_for && e.collected_for != *collected_for) return false;
    if (policy_id && e.policy_id != *policy_id) return false;
    if (created_after_us && e.created_at_us < *created_after_us) return false;
    if (created_before_us && e.created_at_us > *created_before_us) return false;
    return true;
}

ScanResult scan_dataset(const fs::path& dir, const ScanFilter& filter,
                        const std::function<void(std::shared_ptr<const Episode>)>& fn) {
    ScanResult result;
    for (const auto& f : shard_files(dir)) {
        std::ifstream in(f);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::shared_ptr<Episode> e;
            try {
                e = std::make_shared<Episode>(parse_episode(line));
                if (!e->validate().empty()) throw std::runtime_error("invalid record");
            } catch (const std::exception&) {
                ++result.corrupt_records;
                continue;
            }
            if (filter.matches(*e)) {
                ++result.episodes;
                fn(std::move(e));
            }
        }
    }
    return result;
}

std::vector<std::shared_ptr<const Episode>> read_dataset(const fs::path& dir,
                                                         const ScanFilter& filter) {
    std::vector<std::shared_ptr<const Episode>> out;
    scan_dataset(dir, filter, [&](std::shared_ptr<const Episode> e) {
        out.push_back(std::move(e));
    });
    return out;
}

std::map<TaskId, TaskDataStats> dataset_stats(const fs::path& dir, const SdFn& sd,
                                              const TaskRegistry& registry) {
    std::map<TaskId, TaskDataStats> stats;
    for (const auto& t : registry.tasks()) stats[t.task_id] = {};
    scan_dataset(dir, {}, [&](std::shared_ptr<const Episode> e) {
        auto& s = stats[e->collected_for];
        ++s.episode_count;
        if (sd(e->terminal_obs(), e->collected_for) >= 0.5) ++s.success_count;
    });
    return stats;
}

}  // namespace mtopt
