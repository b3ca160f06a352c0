#pragma once

#include "dqjl/sim.hpp"

namespace dqjl {

struct RewardConfig {
  double collision_penalty = -1000.0;  // P_collision
  double priority_constant = 0.5;      // P_priority
  double priority_epsilon = 1.0;       // denominator guard (m)

  void validate() const;
};

// One penalty per step when any pair violates the clearance predicate.
double reward_collision(const WorldState& world, const RewardConfig& cfg);

// -1 while the EMV rear bump is still inside the segment.
double reward_elapsed(const WorldState& world);

// Urgency term over passing-lane vehicles downstream of the EMV.
double reward_priority(const WorldState& world, const RewardConfig& cfg);

// Shared team scalar: sum of the three terms, broadcast to every agent.
double team_reward(const WorldState& world, const RewardConfig& cfg);

}  // namespace dqjl
