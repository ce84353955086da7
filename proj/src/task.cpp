#include "mtopt/task.hpp"

namespace mtopt {

void TaskRegistry::register_task(const TaskId& id, const SkillId& skill) {
    if (index_.count(id))
        throw std::invalid_argument("task already registered: " + id);
    TaskInfo t;
    t.task_id = id;
    t.name = id;
    t.skill_id = skill;
    t.onehot_index = static_cast<int>(tasks_.size());
    index_[id] = t.onehot_index;
    tasks_.push_back(std::move(t));
}

const TaskInfo& TaskRegistry::info(const TaskId& id) const {
    auto it = index_.find(id);
    if (it == index_.end())
        throw std::out_of_range("unknown task: " + id);
    return tasks_[it->second];
}

const TaskId& TaskRegistry::task_at(int onehot_index) const {
    if (onehot_index < 0 || onehot_index >= num_tasks())
        throw std::out_of_range("task index out of range");
    return tasks_[onehot_index].task_id;
}

std::vector<TaskId> TaskRegistry::tasks_in_skill(const SkillId& skill) const {
    std::vector<TaskId> out;
    for (const auto& t : tasks_)
        if (t.skill_id == skill) out.push_back(t.task_id);
    return out;
}

std::vector<TaskId> TaskRegistry::all_task_ids() const {
    std::vector<TaskId> out;
    out.reserve(tasks_.size());
    for (const auto& t : tasks_) out.push_back(t.task_id);
    return out;
}

TaskRegistry TaskRegistry::default_catalog() {
    TaskRegistry r;
    r.register_task("lift-any", kSkillAcq);
    for (int k = 0; k < 7; ++k)
        r.register_task("lift-cat" + std::to_string(k), kSkillAcq);
    r.register_task("place-any", kSkillManip);
    r.register_task("place-A", kSkillManip);
    r.register_task("place-B", kSkillManip);
    r.register_task("place-C", kSkillManip);
    return r;
}

TaskRegistry TaskRegistry::extended_catalog() {
    TaskRegistry r = default_catalog();
    r.register_task("lift-cat7", kSkillAcq);
    r.register_task("push-to-zone", kSkillManip);
    return r;
}

}  // namespace mtopt
