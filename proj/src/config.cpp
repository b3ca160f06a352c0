#include "dqjl/config.hpp"

#include <json.hpp>

#include <fstream>

#include "dqjl/errors.hpp"

namespace dqjl {
namespace {

constexpr int kConfigVersion = 1;

using nlohmann::json;

template <typename T>
void maybe_get(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void AppConfig::validate() const {
  road.validate();
  idm.validate();
  behavior.validate(road.dt);
  reward.validate();
  train.validate();
  sweep.validate();
}

AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw parse_error("config " + path.string() + ": " + e.what());
  }
  if (j.value("version", -1) != kConfigVersion) {
    throw version_error("unsupported config version in " + path.string());
  }

  AppConfig cfg;
  if (j.contains("road")) {
    const json& r = j.at("road");
    maybe_get(r, "segment_length", cfg.road.segment_length);
    maybe_get(r, "min_gap", cfg.road.min_gap);
    maybe_get(r, "dt", cfg.road.dt);
    maybe_get(r, "hv_reaction_distance", cfg.road.hv_reaction_distance);
    maybe_get(r, "v0_non_emv", cfg.road.v0_non_emv);
    maybe_get(r, "v0_emv", cfg.road.v0_emv);
    maybe_get(r, "vmax_emv", cfg.road.vmax_emv);
    maybe_get(r, "vmax_non_emv", cfg.road.vmax_non_emv);
    maybe_get(r, "max_steps", cfg.road.max_steps);
  }
  if (j.contains("idm")) {
    const json& r = j.at("idm");
    maybe_get(r, "accel", cfg.idm.accel);
    maybe_get(r, "decel", cfg.idm.decel);
    maybe_get(r, "desired_speed", cfg.idm.desired_speed);
    maybe_get(r, "headway", cfg.idm.headway);
  }
  if (j.contains("behavior")) {
    const json& r = j.at("behavior");
    maybe_get(r, "reaction_mean", cfg.behavior.reaction_mean);
    maybe_get(r, "reaction_std", cfg.behavior.reaction_std);
    maybe_get(r, "decel_noise_std", cfg.behavior.decel_noise_std);
    maybe_get(r, "lane_change_time", cfg.behavior.lane_change_time);
  }
  if (j.contains("reward")) {
    const json& r = j.at("reward");
    maybe_get(r, "collision_penalty", cfg.reward.collision_penalty);
    maybe_get(r, "priority_constant", cfg.reward.priority_constant);
    maybe_get(r, "priority_epsilon", cfg.reward.priority_epsilon);
  }
  if (j.contains("train")) {
    const json& r = j.at("train");
    maybe_get(r, "gamma", cfg.train.gamma);
    maybe_get(r, "lr_actor", cfg.train.lr_actor);
    maybe_get(r, "lr_critic", cfg.train.lr_critic);
    maybe_get(r, "minibatch", cfg.train.minibatch);
    maybe_get(r, "replay_capacity", cfg.train.replay_capacity);
    maybe_get(r, "tau", cfg.train.tau);
    maybe_get(r, "eps0", cfg.train.eps0);
    maybe_get(r, "eps_decay", cfg.train.eps_decay);
    maybe_get(r, "eps_floor", cfg.train.eps_floor);
    maybe_get(r, "agent_slots", cfg.train.agent_slots);
    maybe_get(r, "episodes", cfg.train.episodes);
    maybe_get(r, "gumbel_temperature", cfg.train.gumbel_temperature);
    maybe_get(r, "seed", cfg.train.seed);
    maybe_get(r, "threads", cfg.train.threads);
  }
  if (j.contains("sweep")) {
    const json& r = j.at("sweep");
    maybe_get(r, "densities", cfg.sweep.densities);
    maybe_get(r, "penetrations", cfg.sweep.penetrations);
    maybe_get(r, "replications", cfg.sweep.replications);
    maybe_get(r, "seed", cfg.sweep.seed);
  }
  cfg.validate();
  return cfg;
}

void save_config(const AppConfig& cfg, const std::filesystem::path& path) {
  json j{
      {"version", kConfigVersion},
      {"road",
       {{"segment_length", cfg.road.segment_length},
        {"min_gap", cfg.road.min_gap},
        {"dt", cfg.road.dt},
        {"hv_reaction_distance", cfg.road.hv_reaction_distance},
        {"v0_non_emv", cfg.road.v0_non_emv},
        {"v0_emv", cfg.road.v0_emv},
        {"vmax_emv", cfg.road.vmax_emv},
        {"vmax_non_emv", cfg.road.vmax_non_emv},
        {"max_steps", cfg.road.max_steps}}},
      {"idm",
       {{"accel", cfg.idm.accel},
        {"decel", cfg.idm.decel},
        {"desired_speed", cfg.idm.desired_speed},
        {"headway", cfg.idm.headway}}},
      {"behavior",
       {{"reaction_mean", cfg.behavior.reaction_mean},
        {"reaction_std", cfg.behavior.reaction_std},
        {"decel_noise_std", cfg.behavior.decel_noise_std},
        {"lane_change_time", cfg.behavior.lane_change_time}}},
      {"reward",
       {{"collision_penalty", cfg.reward.collision_penalty},
        {"priority_constant", cfg.reward.priority_constant},
        {"priority_epsilon", cfg.reward.priority_epsilon}}},
      {"train",
       {{"gamma", cfg.train.gamma},
        {"lr_actor", cfg.train.lr_actor},
        {"lr_critic", cfg.train.lr_critic},
        {"minibatch", cfg.train.minibatch},
        {"replay_capacity", cfg.train.replay_capacity},
        {"tau", cfg.train.tau},
        {"eps0", cfg.train.eps0},
        {"eps_decay", cfg.train.eps_decay},
        {"eps_floor", cfg.train.eps_floor},
        {"agent_slots", cfg.train.agent_slots},
        {"episodes", cfg.train.episodes},
        {"gumbel_temperature", cfg.train.gumbel_temperature},
        {"seed", cfg.train.seed},
        {"threads", cfg.train.threads}}},
      {"sweep",
       {{"densities", cfg.sweep.densities},
        {"penetrations", cfg.sweep.penetrations},
        {"replications", cfg.sweep.replications},
        {"seed", cfg.sweep.seed}}}};
  std::ofstream out(path);
  if (!out) throw io_error("cannot write config " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw io_error("write failure on " + path.string());
}

}  // namespace dqjl
