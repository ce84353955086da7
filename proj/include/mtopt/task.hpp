#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace mtopt {

using TaskId = std::string;
using SkillId = std::string;

struct TaskInfo {
    TaskId task_id;
    std::string name;
    SkillId skill_id;
    int onehot_index = -1;
};

// The n-task catalog: one-hot indices plus the task->skill partition that
// drives skill-scoped data sharing.
class TaskRegistry {
public:
    TaskRegistry() = default;

    void register_task(const TaskId& id, const SkillId& skill);

    const TaskInfo& info(const TaskId& id) const;
    bool has_task(const TaskId& id) const { return index_.count(id) > 0; }
    int onehot_index(const TaskId& id) const { return info(id).onehot_index; }
    const TaskId& task_at(int onehot_index) const;

    int num_tasks() const { return static_cast<int>(tasks_.size()); }
    const std::vector<TaskInfo>& tasks() const { return tasks_; }

    const SkillId& skill_of(const TaskId& id) const { return info(id).skill_id; }
    std::vector<TaskId> tasks_in_skill(const SkillId& skill) const;
    std::vector<TaskId> all_task_ids() const;

    // The 12-task benchmark catalog: skill ACQ = {lift-any, lift-cat0..6},
    // skill MANIP = {place-any, place-A, place-B, place-C}.
    static TaskRegistry default_catalog();
    // default catalog extended with the held-out tasks lift-cat7 (ACQ) and
    // push-to-zone (MANIP), used only by fine-tuning runs.
    static TaskRegistry extended_catalog();

private:
    std::vector<TaskInfo> tasks_;
    std::map<TaskId, int> index_;
};

inline const SkillId kSkillAcq = "ACQ";
inline const SkillId kSkillManip = "MANIP";

}  // namespace mtopt
