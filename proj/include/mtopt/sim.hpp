#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mtopt/rng.hpp"
#include "mtopt/task.hpp"

namespace mtopt {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

struct ObjectState {
    int category = 0;  // 0..7
    Vec2 pos;
    bool held = false;
    bool lifted = false;  // raised above lift height while held; cleared on release
};

struct GripperState {
    Vec2 pos;
    double height = 0.6;
    bool closed = false;
};

struct FixtureState {
    Vec2 center;
    double rotation = 0.0;  // radians
};

struct WorldState {
    std::vector<ObjectState> objects;
    GripperState gripper;
    FixtureState fixture;
    uint64_t rng_seed = 0;
    int step_count = 0;
    bool done = false;
};

struct SimConfig {
    int max_steps = 15;
    double max_disp = 0.3;       // per-step displacement scale for dx/dy/dz
    double grasp_radius = 0.06;  // r_g
    double grasp_height = 0.1;   // z_grasp
    double lift_height = 0.5;    // z_lift
    double fixture_radius = 0.14;
    double region_offset = 0.08;  // region centers sit this far from the fixture center
    double region_radius = 0.05;
    // push-to-zone: fixed rectangle and the designated object category
    double zone_lo = 0.65, zone_hi = 0.95;
    int zone_category = 7;
    int pixel_size = 16;
};

enum class GripperCmd { None, Open, Close };

struct Action {
    double dx = 0.0, dy = 0.0, dz = 0.0;  // in [-1,1], scaled by max_disp
    GripperCmd gripper_cmd = GripperCmd::None;
    bool terminate = false;

    bool operator==(const Action&) const = default;
};

enum class ObsMode { Features, Pixels };

// Terminal-state facts the oracle success detectors read. Stored alongside
// the observation so episodes can be relabeled long after the world state
// is gone.
struct OutcomeSummary {
    int held_category = -1;  // -1 when nothing held
    bool lifted = false;
    bool any_in_fixture = false;
    std::array<bool, 3> in_region = {false, false, false};
    uint32_t zone_category_mask = 0;  // categories of at-rest objects inside the zone

    bool operator==(const OutcomeSummary&) const = default;
};

struct Observation {
    ObsMode mode = ObsMode::Features;
    std::vector<float> features;
    std::vector<float> pixels;  // 3 x P x P flattened, channel-major; empty in features mode
    OutcomeSummary summary;

    // What the policy / Q-network consumes under the active mode.
    const std::vector<float>& as_input() const {
        return mode == ObsMode::Pixels ? pixels : features;
    }

    bool operator==(const Observation&) const = default;
};

struct SceneSpec {
    std::string name = "scene";
    int capacity = 9;
    std::vector<int> object_categories;  // fixed objects
    int random_extras = 0;               // extra objects with seed-sampled categories 0..7
    std::optional<Vec2> fixture_center;  // absent -> sampled per reset
    // -2: start with gripper empty; -1: start holding an arbitrary object;
    // >=0: start holding an object of that category
    int start_held = -2;
    ObsMode obs_mode = ObsMode::Features;

    static SceneSpec standard_eval_scene();
    static SceneSpec load(const std::string& path);
    void save(const std::string& path) const;
    std::string to_json() const;
    static SceneSpec from_json(const std::string& text);
};

int feature_dim(int capacity);
int pixel_dim(const SimConfig& cfg);

// Region center R under the current fixture pose, world coordinates.
Vec2 region_center(const SimConfig& cfg, const FixtureState& fixture, int region);

OutcomeSummary summarize(const SimConfig& cfg, const WorldState& world);

// Ground-truth predicate for one task over a terminal summary. Understands
// the lift-any / lift-catK / place-any / place-{A,B,C} / push-to-zone naming.
bool task_predicate(const OutcomeSummary& summary, const TaskId& task);

class TabletopEnv {
public:
    explicit TabletopEnv(SimConfig cfg = {}) : cfg_(cfg) {}

    Observation reset(uint64_t seed, const SceneSpec& spec);
    // Keep the current world (e.g. after a successful lift) but restart the
    // episode clock; used for sequential task chaining.
    Observation begin_chained_episode();

    std::pair<Observation, bool> step(const Action& action);

    std::map<TaskId, bool> terminal_predicates(const TaskRegistry& registry) const;
    bool task_feasible(const TaskId& task) const;

    const WorldState& world() const { return world_; }
    const SimConfig& config() const { return cfg_; }
    Observation observe() const;

private:
    SimConfig cfg_;
    SceneSpec spec_;
    WorldState world_;
};

Action clamp_action(const Action& a);

}  // namespace mtopt
