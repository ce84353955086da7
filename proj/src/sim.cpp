#include "mtopt/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace mtopt {

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

double dist2(const Vec2& a, const Vec2& b) {
    double dx = a.x - b.x, dy = a.y - b.y;
    return dx * dx + dy * dy;
}

}  // namespace

int feature_dim(int capacity) { return 36 + 11 * capacity; }

int pixel_dim(const SimConfig& cfg) { return 3 * cfg.pixel_size * cfg.pixel_size; }

Vec2 region_center(const SimConfig& cfg, const FixtureState& fixture, int region) {
    double angle = fixture.rotation + region * (2.0 * M_PI / 3.0);
    return {fixture.center.x + cfg.region_offset * std::cos(angle),
            fixture.center.y + cfg.region_offset * std::sin(angle)};
}

OutcomeSummary summarize(const SimConfig& cfg, const WorldState& world) {
    OutcomeSummary s;
    for (const auto& obj : world.objects) {
        if (obj.held) {
            s.held_category = obj.category;
            s.lifted = obj.lifted;
            continue;
        }
        if (dist2(obj.pos, world.fixture.center) <= cfg.fixture_radius * cfg.fixture_radius)
            s.any_in_fixture = true;
        for (int r = 0; r < 3; ++r) {
            Vec2 rc = region_center(cfg, world.fixture, r);
            if (dist2(obj.pos, rc) <= cfg.region_radius * cfg.region_radius)
                s.in_region[r] = true;
        }
        if (obj.pos.x >= cfg.zone_lo && obj.pos.x <= cfg.zone_hi &&
            obj.pos.y >= cfg.zone_lo && obj.pos.y <= cfg.zone_hi)
            s.zone_category_mask |= (1u << obj.category);
    }
    return s;
}

bool task_predicate(const OutcomeSummary& s, const TaskId& task) {
    if (task == "lift-any") return s.held_category >= 0 && s.lifted;
    if (task.rfind("lift-cat", 0) == 0) {
        int k = std::stoi(task.substr(8));
        return s.held_category == k && s.lifted;
    }
    if (task == "place-any") return s.any_in_fixture;
    if (task == "place-A") return s.in_region[0];
    if (task == "place-B") return s.in_region[1];
    if (task == "place-C") return s.in_region[2];
    if (task == "push-to-zone") return s.zone_category_mask != 0;
    throw std::invalid_argument("no predicate for task: " + task);
}

SceneSpec SceneSpec::standard_eval_scene() {
    SceneSpec s;
    s.name = "standard_eval_scene";
    s.capacity = 9;
    s.object_categories = {0, 1, 2, 3, 4, 5, 6};
    s.random_extras = 2;
    return s;
}

std::string SceneSpec::to_json() const {
    nlohmann::json j;
    j["name"] = name;
    j["capacity"] = capacity;
    j["objects"] = object_categories;
    j["random_extras"] = random_extras;
    if (fixture_center)
        j["fixture_center"] = {fixture_center->x, fixture_center->y};
    j["start_held"] = start_held;
    j["obs_mode"] = obs_mode == ObsMode::Pixels ? "pixels" : "features";
    return j.dump(2);
}

SceneSpec SceneSpec::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    SceneSpec s;
    s.name = j.value("name", std::string("scene"));
    s.capacity = j.value("capacity", 9);
    s.object_categories = j.value("objects", std::vector<int>{});
    s.random_extras = j.value("random_extras", 0);
    if (j.contains("fixture_center")) {
        s.fixture_center = Vec2{j["fixture_center"][0].get<double>(),
                                j["fixture_center"][1].get<double>()};
    }
    s.start_held = j.value("start_held", -2);
    s.obs_mode = j.value("obs_mode", std::string("features")) == "pixels"
                     ? ObsMode::Pixels
                     : ObsMode::Features;
    for (int c : s.object_categories)
        if (c < 0 || c > 7) throw std::invalid_argument("object category out of range");
    return s;
}

SceneSpec SceneSpec::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scene spec: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

void SceneSpec::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write scene spec: " + path);
    out << to_json() << "\n";
}

Action clamp_action(const Action& a) {
    Action c = a;
    c.dx = std::clamp(a.dx, -1.0, 1.0);
    c.dy = std::clamp(a.dy, -1.0, 1.0);
    c.dz = std::clamp(a.dz, -1.0, 1.0);
    return c;
}

Observation TabletopEnv::reset(uint64_t seed, const SceneSpec& spec) {
    int total_objects = static_cast<int>(spec.object_categories.size()) + spec.random_extras;
    if (total_objects > spec.capacity)
        throw std::invalid_argument("scene spec exceeds capacity: " +
                                    std::to_string(total_objects) + " objects, capacity " +
                                    std::to_string(spec.capacity));
    spec_ = spec;
    world_ = WorldState{};
    world_.rng_seed = seed;
    Rng rng(seed);

    if (spec.fixture_center) {
        world_.fixture.center = *spec.fixture_center;
    } else {
        world_.fixture.center = {rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8)};
    }
    world_.fixture.rotation = rng.uniform(0.0, 2.0 * M_PI);

    // Objects spawn clear of the fixture so place tasks never start solved.
    double clear2 = (cfg_.fixture_radius + cfg_.region_radius) *
                    (cfg_.fixture_radius + cfg_.region_radius);
    auto sample_pos = [&]() {
        Vec2 p;
        for (int tries = 0; tries < 32; ++tries) {
            p = {rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95)};
            bool in_zone = p.x >= cfg_.zone_lo && p.x <= cfg_.zone_hi &&
                           p.y >= cfg_.zone_lo && p.y <= cfg_.zone_hi;
            if (!in_zone && dist2(p, world_.fixture.center) > clear2) break;
        }
        return p;
    };
    for (int c : spec.object_categories) {
        ObjectState o;
        o.category = c;
        o.pos = sample_pos();
        world_.objects.push_back(o);
    }
    for (int i = 0; i < spec.random_extras; ++i) {
        ObjectState o;
        o.category = static_cast<int>(rng.uniform_index(8));
        o.pos = sample_pos();
        world_.objects.push_back(o);
    }

    world_.gripper.pos = {rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)};
    world_.gripper.height = 0.6;
    world_.gripper.closed = false;

    if (spec.start_held != -2) {
        auto it = std::find_if(world_.objects.begin(), world_.objects.end(),
                               [&](const ObjectState& o) {
                                   return spec.start_held == -1 || o.category == spec.start_held;
                               });
        if (it == world_.objects.end())
            throw std::invalid_argument("start_held object not present in scene");
        it->held = true;
        it->lifted = true;
        it->pos = world_.gripper.pos;
        world_.gripper.closed = true;
    }
    return observe();
}

Observation TabletopEnv::begin_chained_episode() {
    world_.step_count = 0;
    world_.done = false;
    return observe();
}

std::pair<Observation, bool> TabletopEnv::step(const Action& action) {
    if (world_.done)
        throw std::logic_error("step() called on a finished episode");
    Action a = clamp_action(action);

    auto& g = world_.gripper;
    g.pos.x = clamp01(g.pos.x + a.dx * cfg_.max_disp);
    g.pos.y = clamp01(g.pos.y + a.dy * cfg_.max_disp);
    g.height = clamp01(g.height + a.dz * cfg_.max_disp);

    auto held = std::find_if(world_.objects.begin(), world_.objects.end(),
                             [](const ObjectState& o) { return o.held; });
    if (held != world_.objects.end()) held->pos = g.pos;

    if (a.gripper_cmd == GripperCmd::Close) {
        g.closed = true;
        if (held == world_.objects.end() && g.height <= cfg_.grasp_height) {
            ObjectState* nearest = nullptr;
            double best = cfg_.grasp_radius * cfg_.grasp_radius;
            for (auto& o : world_.objects) {
                double d2 = dist2(o.pos, g.pos);
                if (d2 <= best) {
                    best = d2;
                    nearest = &o;
                }
            }
            if (nearest) {
                nearest->held = true;
                nearest->lifted = false;
                nearest->pos = g.pos;
                held = world_.objects.begin() + (nearest - world_.objects.data());
            }
        }
    } else if (a.gripper_cmd == GripperCmd::Open) {
        g.closed = false;
        if (held != world_.objects.end()) {
            held->held = false;
            held->lifted = false;  // dropped at the gripper's (x,y)
            held = world_.objects.end();
        }
    }

    if (held != world_.objects.end() && g.height > cfg_.lift_height)
        held->lifted = true;

    ++world_.step_count;
    world_.done = a.terminate || world_.step_count >= cfg_.max_steps;
    return {observe(), world_.done};
}

std::map<TaskId, bool> TabletopEnv::terminal_predicates(const TaskRegistry& registry) const {
    OutcomeSummary s = summarize(cfg_, world_);
    std::map<TaskId, bool> out;
    for (const auto& t : registry.tasks())
        out[t.task_id] = task_predicate(s, t.task_id);
    return out;
}

bool TabletopEnv::task_feasible(const TaskId& task) const {
    if (task == "lift-any" || task == "place-any" || task == "place-A" ||
        task == "place-B" || task == "place-C")
        return !world_.objects.empty();
    if (task.rfind("lift-cat", 0) == 0) {
        int k = std::stoi(task.substr(8));
        for (const auto& o : world_.objects)
            if (o.category == k) return true;
        return false;
    }
    if (task == "push-to-zone") {
        for (const auto& o : world_.objects)
            if (o.category == cfg_.zone_category) return true;
        return false;
    }
    return false;
}

Observation TabletopEnv::observe() const {
    Observation obs;
    obs.mode = spec_.obs_mode;
    obs.summary = summarize(cfg_, world_);

    const auto& g = world_.gripper;
    obs.features.reserve(feature_dim(spec_.capacity));
    obs.features.push_back(static_cast<float>(g.pos.x));
    obs.features.push_back(static_cast<float>(g.pos.y));
    obs.features.push_back(g.closed ? 1.0f : 0.0f);
    // Explicit grasp status: "held" and the sticky "lifted" flag are part of
    // the world state and not recoverable from the other features, so the
    // observation would not be Markov without them.
    bool any_held = false, any_lifted = false;
    for (const auto& o : world_.objects) {
        any_held = any_held || o.held;
        any_lifted = any_lifted || (o.held && o.lifted);
    }
    obs.features.push_back(any_held ? 1.0f : 0.0f);
    obs.features.push_back(any_lifted ? 1.0f : 0.0f);
    obs.features.push_back(static_cast<float>(g.height));
    obs.features.push_back(static_cast<float>(world_.fixture.center.x));
    obs.features.push_back(static_cast<float>(world_.fixture.center.y));
    obs.features.push_back(static_cast<float>(std::cos(world_.fixture.rotation)));
    obs.features.push_back(static_cast<float>(std::sin(world_.fixture.rotation)));
    for (int r = 0; r < 3; ++r) {
        Vec2 rc = region_center(cfg_, world_.fixture, r);
        obs.features.push_back(static_cast<float>(rc.x));
        obs.features.push_back(static_cast<float>(rc.y));
    }
    for (int i = 0; i < spec_.capacity; ++i) {
        if (i < static_cast<int>(world_.objects.size())) {
            const auto& o = world_.objects[i];
            obs.features.push_back(1.0f);
            for (int c = 0; c < 8; ++c)
                obs.features.push_back(o.category == c ? 1.0f : 0.0f);
            obs.features.push_back(static_cast<float>(o.pos.x - g.pos.x));
            obs.features.push_back(static_cast<float>(o.pos.y - g.pos.y));
        } else {
            for (int k = 0; k < 11; ++k) obs.features.push_back(0.0f);
        }
    }
    // Derived outcome-summary block, appended as a trailing block so the slot
    // layout above keeps its indices: held-and-lifted category one-hot (8),
    // any-object-in-fixture, the three region flags, and the zone category
    // mask (8 bits). Every task predicate is linear in these, which is what
    // lets the learned success detector recover the oracle labels from a
    // modest number of episodes.
    for (int c = 0; c < 8; ++c)
        obs.features.push_back(
            obs.summary.lifted && obs.summary.held_category == c ? 1.0f : 0.0f);
    obs.features.push_back(obs.summary.any_in_fixture ? 1.0f : 0.0f);
    for (int r = 0; r < 3; ++r)
        obs.features.push_back(obs.summary.in_region[r] ? 1.0f : 0.0f);
    for (int c = 0; c < 8; ++c)
        obs.features.push_back((obs.summary.zone_category_mask >> c) & 1u ? 1.0f : 0.0f);

    if (spec_.obs_mode == ObsMode::Pixels) {
        int P = cfg_.pixel_size;
        obs.pixels.assign(3 * P * P, 0.0f);
        auto cell = [&](double v) {
            return std::clamp(static_cast<int>(v * P), 0, P - 1);
        };
        // channel 0: objects (intensity encodes category); 1: gripper; 2: fixture
        for (const auto& o : world_.objects) {
            int ix = cell(o.pos.x), iy = cell(o.pos.y);
            float v = static_cast<float>(o.category + 1) / 8.0f;
            obs.pixels[iy * P + ix] = std::max(obs.pixels[iy * P + ix], v);
        }
        int gx = cell(g.pos.x), gy = cell(g.pos.y);
        obs.pixels[P * P + gy * P + gx] =
            static_cast<float>(clamp01(1.0 - g.height)) * (g.closed ? 1.0f : 0.5f);
        for (int r = 0; r < 3; ++r) {
            Vec2 rc = region_center(cfg_, world_.fixture, r);
            int fx = cell(rc.x), fy = cell(rc.y);
            obs.pixels[2 * P * P + fy * P + fx] = static_cast<float>(r + 1) / 3.0f;
        }
        int fx = cell(world_.fixture.center.x), fy = cell(world_.fixture.center.y);
        obs.pixels[2 * P * P + fy * P + fx] = 1.0f;
    }
    return obs;
}

}  // namespace mtopt
