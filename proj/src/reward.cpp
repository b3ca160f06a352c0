#include "dqjl/reward.hpp"

#include <algorithm>

#include "dqjl/errors.hpp"

namespace dqjl {

void RewardConfig::validate() const {
  if (collision_penalty >= 0) throw config_error("collision_penalty must be < 0");
  if (priority_constant <= 0) throw config_error("priority_constant must be > 0");
  if (priority_epsilon <= 0) throw config_error("priority_epsilon must be > 0");
}

double reward_collision(const WorldState& world, const RewardConfig& cfg) {
  return collision_pairs(world).empty() ? 0.0 : cfg.collision_penalty;
}

double reward_elapsed(const WorldState& world) {
  return world.emv.rear() < world.road.segment_length ? -1.0 : 0.0;
}

double reward_priority(const WorldState& world, const RewardConfig& cfg) {
  double total = 0.0;
  for (const Vehicle& veh : world.non_emvs) {
    if (!veh.is_real() || veh.y != 0) continue;
    if (veh.x > world.road.segment_length || veh.x <= world.emv.x) continue;
    double distance = std::max(veh.x - world.emv.x, cfg.priority_epsilon);
    total -= cfg.priority_constant / distance;
  }
  return total;
}

double team_reward(const WorldState& world, const RewardConfig& cfg) {
  return reward_collision(world, cfg) + reward_elapsed(world) +
         reward_priority(world, cfg);
}

}  // namespace dqjl
