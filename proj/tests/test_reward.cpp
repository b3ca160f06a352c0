#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dqjl/errors.hpp"
#include "dqjl/reward.hpp"
#include "dqjl/scenario.hpp"

using namespace dqjl;

namespace {

Vehicle vehicle_at(double x, int lane, VehicleKind kind = VehicleKind::Cv,
                   double length = 4.5) {
  Vehicle veh;
  veh.x = x;
  veh.y = lane;
  veh.v = 5.0;
  veh.length = length;
  veh.b_star = 2.0;
  veh.kind = kind;
  return veh;
}

WorldState world_with(std::vector<Vehicle> vehicles, std::size_t slots,
                      double emv_x = 0.0) {
  WorldState world;
  world.emv = vehicle_at(emv_x, 0, VehicleKind::Emv);
  world.emv.v = 8.0;
  world.non_emvs = std::move(vehicles);
  world.non_emvs.resize(slots);
  world.coop_decel_for.assign(slots, -1);
  return world;
}

}  // namespace

TEST_CASE("collision reward: one penalty per step, not per pair") {
  RewardConfig cfg;

  WorldState one = world_with({vehicle_at(49.8, 0), vehicle_at(54.5, 0)}, 4, 20);
  CHECK(reward_collision(one, cfg) == -1000.0);

  WorldState none = world_with({vehicle_at(40, 0), vehicle_at(80, 0)}, 4, 5);
  CHECK(reward_collision(none, cfg) == 0.0);

  // three overlapping consecutive pairs still cost a single penalty
  WorldState pileup = world_with({vehicle_at(50, 0), vehicle_at(51, 0),
                                  vehicle_at(52, 0), vehicle_at(53, 0)},
                                 6, 20);
  CHECK(collision_pairs(pileup).size() == 3);
  CHECK(reward_collision(pileup, cfg) == -1000.0);
}

TEST_CASE("elapsed reward: -1 until the EMV rear bump clears the segment") {
  WorldState world = world_with({}, 2, 154.5);  // rear at 150
  CHECK(reward_elapsed(world) == -1.0);
  world.emv.x = 204.5;  // rear exactly at L = 200
  CHECK(reward_elapsed(world) == 0.0);
  world.emv.x = 254.5;
  CHECK(reward_elapsed(world) == 0.0);
}

TEST_CASE("priority reward: downstream passing-lane blockers only") {
  RewardConfig cfg;  // P = 0.5, epsilon = 1m

  WorldState world = world_with({vehicle_at(100, 0)}, 3, 50.0);
  CHECK(reward_priority(world, cfg) == doctest::Approx(-0.01).epsilon(1e-12));

  // the (1 - y) factor: neighboring-lane vehicles contribute nothing
  WorldState lane1 = world_with({vehicle_at(100, 1)}, 3, 50.0);
  CHECK(reward_priority(lane1, cfg) == 0.0);

  // nothing downstream on the passing lane
  WorldState upstream = world_with({vehicle_at(30, 0)}, 3, 50.0);
  CHECK(reward_priority(upstream, cfg) == 0.0);

  // beyond-segment vehicles are out of scope
  WorldState past = world_with({vehicle_at(205, 0)}, 3, 50.0);
  CHECK(reward_priority(past, cfg) == 0.0);

  // denominator guard prevents blow-up bumper to bumper
  WorldState close = world_with({vehicle_at(50.5, 0)}, 3, 50.0);
  CHECK(reward_priority(close, cfg) == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("team reward: sum of terms and collision dominance") {
  RewardConfig cfg;

  // cleared EMV, empty passing lane downstream, no collision
  WorldState done = world_with({}, 2, 204.5);
  CHECK(team_reward(done, cfg) == 0.0);

  // mid-episode with one blocker 50 m ahead
  WorldState mid = world_with({vehicle_at(100, 0)}, 3, 50.0);
  CHECK(team_reward(mid, cfg) == doctest::Approx(-1.01).epsilon(1e-12));

  // any collision pushes the reward to the penalty scale
  WorldState crash = world_with({vehicle_at(49.8, 0), vehicle_at(54.5, 0)}, 4, 20);
  CHECK(team_reward(crash, cfg) <= -1000.0);
}

TEST_CASE("reward is never positive and vanishes only when the job is done") {
  RewardConfig cfg;
  RoadConfig road;
  Rng rng(31);
  std::uniform_int_distribution<int> coin(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    ScenarioSpec spec =
        generate_scenario(6, 0.5, road, static_cast<std::uint64_t>(50 + trial));
    WorldState world = build_world(spec, 8, IdmParams{}, BehaviorParams{});
    for (int t = 0; t < 60; ++t) {
      std::vector<int> actions(8);
      for (int& a : actions) a = coin(rng);
      StepEvents events = step(world, actions);
      double r = team_reward(world, cfg);
      CHECK(r <= 0.0);
      if (r == 0.0) {
        CHECK(world.emv.rear() >= road.segment_length);
        CHECK(collision_pairs(world).empty());
      }
      if (events.done || events.collided()) break;
    }
  }
}

TEST_CASE("lane shielding: moving a downstream blocker aside never hurts") {
  RewardConfig cfg;
  for (double x : {55.0, 80.0, 120.0, 199.0}) {
    WorldState blocked = world_with({vehicle_at(x, 0)}, 3, 50.0);
    WorldState shielded = world_with({vehicle_at(x, 1)}, 3, 50.0);
    CHECK(team_reward(shielded, cfg) >= team_reward(blocked, cfg));
  }
}

TEST_CASE("reward config validation") {
  RewardConfig bad;
  bad.collision_penalty = 10.0;
  CHECK_THROWS_AS(bad.validate(), config_error);
  bad = RewardConfig{};
  bad.priority_constant = 0.0;
  CHECK_THROWS_AS(bad.validate(), config_error);
  bad = RewardConfig{};
  bad.priority_epsilon = -1.0;
  CHECK_THROWS_AS(bad.validate(), config_error);
}
