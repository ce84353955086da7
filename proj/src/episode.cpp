#include "mtopt/episode.hpp"

#include <stdexcept>

#include "json.hpp"

namespace mtopt {

std::string Episode::validate(int max_steps) const {
    if (episode_id.empty()) return "episode_id is empty";
    if (collected_for.empty()) return "collected_for is empty";
    if (actions.empty()) return "episode has no transitions";
    if (observations.size() != actions.size() + 1)
        return "observation count must be action count + 1";
    if (max_steps > 0 && num_steps() > max_steps)
        return "episode longer than max_steps";
    size_t fdim = observations.front().features.size();
    for (const auto& o : observations) {
        if (o.features.size() != fdim) return "inconsistent feature dims";
        for (float v : o.pixels)
            if (v < 0.0f || v > 1.0f) return "pixel value out of [0,1]";
    }
    // A TERMINATE action ends the episode; seeing one mid-sequence means the
    // trajectory continued past its terminal transition.
    for (size_t i = 0; i + 1 < actions.size(); ++i)
        if (actions[i].terminate) return "terminate action mid-sequence";
    return "";
}

namespace {

nlohmann::json summary_to_json(const OutcomeSummary& s) {
    return nlohmann::json::array({s.held_category, s.lifted ? 1 : 0,
                                  s.any_in_fixture ? 1 : 0, s.in_region[0] ? 1 : 0,
                                  s.in_region[1] ? 1 : 0, s.in_region[2] ? 1 : 0,
                                  s.zone_category_mask});
}

OutcomeSummary summary_from_json(const nlohmann::json& j) {
    OutcomeSummary s;
    s.held_category = j.at(0).get<int>();
    s.lifted = j.at(1).get<int>() != 0;
    s.any_in_fixture = j.at(2).get<int>() != 0;
    for (int r = 0; r < 3; ++r) s.in_region[r] = j.at(3 + r).get<int>() != 0;
    s.zone_category_mask = j.at(6).get<uint32_t>();
    return s;
}

int cmd_to_int(GripperCmd c) {
    switch (c) {
        case GripperCmd::None: return 0;
        case GripperCmd::Open: return 1;
        case GripperCmd::Close: return 2;
    }
    return 0;
}

GripperCmd cmd_from_int(int v) {
    switch (v) {
        case 0: return GripperCmd::None;
        case 1: return GripperCmd::Open;
        case 2: return GripperCmd::Close;
    }
    throw std::invalid_argument("bad gripper_cmd code");
}

}  // namespace

std::string serialize_episode(const Episode& e) {
    nlohmann::json j;
    j["format_version"] = kEpisodeFormatVersion;
    j["episode_id"] = e.episode_id;
    j["collected_for"] = e.collected_for;
    j["policy_id"] = e.policy_id;
    j["seed"] = e.seed;
    j["created_at_us"] = e.created_at_us;
    bool pixels = !e.observations.empty() && e.observations.front().mode == ObsMode::Pixels;
    j["mode"] = pixels ? "pixels" : "features";
    j["obs_dims"] = {
        {"features", e.observations.empty() ? 0 : e.observations.front().features.size()},
        {"pixels", e.observations.empty() ? 0 : e.observations.front().pixels.size()}};
    auto obs_arr = nlohmann::json::array();
    auto pix_arr = nlohmann::json::array();
    auto sum_arr = nlohmann::json::array();
    for (const auto& o : e.observations) {
        obs_arr.push_back(o.features);
        if (pixels) pix_arr.push_back(o.pixels);
        sum_arr.push_back(summary_to_json(o.summary));
    }
    j["observations"] = std::move(obs_arr);
    if (pixels) j["pixel_obs"] = std::move(pix_arr);
    j["summaries"] = std::move(sum_arr);
    auto act_arr = nlohmann::json::array();
    for (const auto& a : e.actions)
        act_arr.push_back(nlohmann::json::array(
            {a.dx, a.dy, a.dz, cmd_to_int(a.gripper_cmd), a.terminate ? 1 : 0}));
    j["actions"] = std::move(act_arr);
    return j.dump();
}

Episode parse_episode(const std::string& line) {
    nlohmann::json j = nlohmann::json::parse(line);
    int version = j.at("format_version").get<int>();
    if (version != kEpisodeFormatVersion)
        throw std::runtime_error("unsupported episode format_version " +
                                 std::to_string(version));
    Episode e;
    e.episode_id = j.at("episode_id").get<std::string>();
    e.collected_for = j.at("collected_for").get<std::string>();
    e.policy_id = j.value("policy_id", std::string());
    e.seed = j.value("seed", uint64_t{0});
    e.created_at_us = j.value("created_at_us", int64_t{0});
    bool pixels = j.value("mode", std::string("features")) == "pixels";
    const auto& obs_arr = j.at("observations");
    const auto& sum_arr = j.at("summaries");
    for (size_t i = 0; i < obs_arr.size(); ++i) {
        Observation o;
        o.mode = pixels ? ObsMode::Pixels : ObsMode::Features;
        o.features = obs_arr[i].get<std::vector<float>>();
        if (pixels) o.pixels = j.at("pixel_obs")[i].get<std::vector<float>>();
        o.summary = summary_from_json(sum_arr.at(i));
        e.observations.push_back(std::move(o));
    }
    for (const auto& a : j.at("actions")) {
        Action act;
        act.dx = a.at(0).get<double>();
        act.dy = a.at(1).get<double>();
        act.dz = a.at(2).get<double>();
        act.gripper_cmd = cmd_from_int(a.at(3).get<int>());
        act.terminate = a.at(4).get<int>() != 0;
        e.actions.push_back(act);
    }
    return e;
}

}  // namespace mtopt
