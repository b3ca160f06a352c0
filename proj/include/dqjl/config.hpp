#pragma once

#include <filesystem>

#include "dqjl/eval.hpp"
#include "dqjl/reward.hpp"
#include "dqjl/sim.hpp"
#include "dqjl/train.hpp"

namespace dqjl {

// Everything a run needs; defaults are the published table values.
struct AppConfig {
  RoadConfig road;
  IdmParams idm;
  BehaviorParams behavior;
  RewardConfig reward;
  TrainConfig train;
  SweepConfig sweep;

  void validate() const;
};

// Versioned JSON; fields absent from the file keep their defaults.
AppConfig load_config(const std::filesystem::path& path);
void save_config(const AppConfig& cfg, const std::filesystem::path& path);

}  // namespace dqjl
