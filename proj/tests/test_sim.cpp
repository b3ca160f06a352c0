#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "dqjl/errors.hpp"
#include "dqjl/scenario.hpp"
#include "dqjl/sim.hpp"

using namespace dqjl;

namespace {

Vehicle make_vehicle(double x, int lane, double v, VehicleKind kind,
                     double length = 4.5, double b_star = 2.0,
                     int reaction_steps = 0) {
  Vehicle veh;
  veh.x = x;
  veh.y = lane;
  veh.v = v;
  veh.length = length;
  veh.b_star = b_star;
  veh.kind = kind;
  veh.reaction_steps_left = reaction_steps;
  return veh;
}

WorldState make_world(std::vector<Vehicle> vehicles, std::size_t slots,
                      std::uint64_t seed = 1) {
  WorldState world;
  world.emv = make_vehicle(0.0, 0, 8.0, VehicleKind::Emv);
  world.non_emvs = std::move(vehicles);
  world.non_emvs.resize(slots);
  world.coop_decel_for.assign(slots, -1);
  world.rng = sub_rng(seed, stream::kWorld);
  return world;
}

}  // namespace

TEST_CASE("idm acceleration: free-flow equilibrium, standstill, frozen example") {
  IdmParams idm;  // u0 3, b0 2, v* 10, T0 1.5

  // at desired speed on an open road both bracket terms vanish
  CHECK(std::abs(idm_acceleration(10.0, 10.0, kNoLeaderGap, idm, 0.5)) < 1e-9);

  // standstill on a free road accelerates at ~u0
  CHECK(idm_acceleration(0.0, 0.0, kNoLeaderGap, idm, 0.5) ==
        doctest::Approx(3.0).epsilon(1e-9));

  // frozen value computed from the closed form:
  // s* = 0.5 + 4.5*1.5 = 7.25, u = 3*(1 - 0.45^4 - (7.25/30)^2) = 2.70178...
  double u = idm_acceleration(4.5, 4.5, 30.0, idm, 0.5);
  CHECK(u == doctest::Approx(2.70178).epsilon(1e-4));

  CHECK_THROWS_AS(idm_acceleration(4.5, 4.5, 0.0, idm, 0.5), contract_error);
  CHECK_THROWS_AS(idm_acceleration(4.5, 4.5, -3.0, idm, 0.5), contract_error);
  CHECK_THROWS_AS(idm_acceleration(std::nan(""), 4.5, 10.0, idm, 0.5),
                  contract_error);
  CHECK_THROWS_AS(idm_acceleration(-1.0, 4.5, 10.0, idm, 0.5), contract_error);
}

TEST_CASE("idm acceleration clamps into [-kMaxBrake, u0]") {
  IdmParams idm;
  // bumper-to-bumper at speed: braking demand far above the clamp
  CHECK(idm_acceleration(10.0, 0.0, 0.5, idm, 0.5) == -kMaxBrake);
  // below standstill equilibrium nothing exceeds u0
  for (double v : {0.0, 2.0, 5.0, 9.0}) {
    double u = idm_acceleration(v, v, kNoLeaderGap, idm, 0.5);
    CHECK(u <= idm.accel);
    CHECK(u >= -kMaxBrake);
  }
}

TEST_CASE("braking deceleration: reaction window, exact and noisy baselines") {
  BehaviorParams behavior;
  Rng rng(3);

  Vehicle veh = make_vehicle(50, 0, 10.0, VehicleKind::Cv, 4.5, 2.0, 3);
  veh.xi = 1;
  CHECK(braking_deceleration(veh, behavior, 0.5, rng) == 0.0);
  CHECK(veh.reaction_steps_left == 2);

  // zero noise: exactly the baseline magnitude
  veh.reaction_steps_left = 0;
  BehaviorParams quiet = behavior;
  quiet.decel_noise_std = 0.0;
  CHECK(braking_deceleration(veh, quiet, 0.5, rng) == 2.0);

  // Monte-Carlo oracle on the white-noise sampler
  double sum = 0.0;
  const int trials = 100000;
  for (int k = 0; k < trials; ++k) {
    Vehicle v2 = veh;
    sum += braking_deceleration(v2, behavior, 0.5, rng);
  }
  CHECK(sum / trials == doctest::Approx(2.0).epsilon(0.005));

  Vehicle idle = make_vehicle(50, 0, 10.0, VehicleKind::Cv);
  CHECK_THROWS_AS(braking_deceleration(idle, behavior, 0.5, rng),
                  contract_error);
}

TEST_CASE("braking never drives velocity negative") {
  BehaviorParams behavior;
  Rng rng(4);
  Vehicle slow = make_vehicle(50, 0, 0.3, VehicleKind::Cv, 4.5, 2.0, 0);
  slow.xi = 1;
  for (int k = 0; k < 1000; ++k) {
    Vehicle v2 = slow;
    double b = braking_deceleration(v2, behavior, 0.5, rng);
    CHECK(slow.v - b * 0.5 >= 0.0);
    CHECK(b >= 0.0);
  }
}

TEST_CASE("hv rule: distance threshold with >= boundary") {
  Vehicle emv = make_vehicle(20, 0, 8, VehicleKind::Emv);
  Vehicle hv = make_vehicle(180, 0, 4.5, VehicleKind::Hv);
  CHECK(hv_action(hv, emv, 75.0) == 0);
  hv.x = 70.0;
  CHECK(hv_action(hv, emv, 75.0) == 1);
  hv.x = 95.0;  // distance exactly 75
  CHECK(hv_action(hv, emv, 75.0) == 0);

  Vehicle cv = make_vehicle(100, 0, 4.5, VehicleKind::Cv);
  CHECK_THROWS_AS(hv_action(cv, emv, 75.0), contract_error);
}

TEST_CASE("yielding update is absorbing") {
  CHECK(yielding_update(0, 1) == 1);
  CHECK(yielding_update(1, 0) == 1);
  CHECK(yielding_update(0, 0) == 0);
  CHECK(yielding_update(1, 1) == 1);
  CHECK_THROWS_AS(yielding_update(2, 0), contract_error);
  CHECK_THROWS_AS(yielding_update(0, -1), contract_error);

  // absorbing along any action sequence
  Rng rng(5);
  std::uniform_int_distribution<int> coin(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    int xi = 0;
    bool seen_one = false;
    for (int t = 0; t < 50; ++t) {
      xi = yielding_update(xi, coin(rng));
      if (seen_one) CHECK(xi == 1);
      if (xi == 1) seen_one = true;
    }
  }
}

TEST_CASE("lane change: success probability dt/t_lc and geometric mean") {
  BehaviorParams behavior;  // t_lc = 3.0
  Rng rng(6);
  Vehicle veh = make_vehicle(50, 0, 5, VehicleKind::Cv, 4.5, 2.0, 0);
  veh.xi = 1;

  // reaction window active: no attempt
  Vehicle waiting = veh;
  waiting.reaction_steps_left = 2;
  for (int k = 0; k < 200; ++k) CHECK(lane_change_sample(waiting, 0.5, behavior, rng) == 0);

  // mean steps-to-success ~ t_lc/dt = 6 (Monte-Carlo oracle of the geometric mean)
  const int trials = 100000;
  long long total_steps = 0;
  for (int k = 0; k < trials; ++k) {
    int steps = 1;
    while (lane_change_sample(veh, 0.5, behavior, rng) == 0) ++steps;
    total_steps += steps;
  }
  double mean = static_cast<double>(total_steps) / trials;
  CHECK(mean == doctest::Approx(6.0).epsilon(0.02));
  // completion delay in seconds = t_lc within 5%
  CHECK(mean * 0.5 == doctest::Approx(3.0).epsilon(0.05));

  BehaviorParams bad = behavior;
  bad.lane_change_time = 0.2;  // p > 1
  CHECK_THROWS_AS(lane_change_sample(veh, 0.5, bad, rng), config_error);

  Vehicle wrong_lane = veh;
  wrong_lane.y = 1;
  CHECK_THROWS_AS(lane_change_sample(wrong_lane, 0.5, behavior, rng),
                  contract_error);
}

TEST_CASE("local observation: padding rows, neighbor pick, fixed shape") {
  RoadConfig road;

  // single vehicle on an empty road: rows 3-6 all trivial
  WorldState world = make_world({make_vehicle(50, 0, 5, VehicleKind::Cv)}, 4);
  world.road = road;
  ObservationMatrix obs = local_observation(world, 0);
  std::array<double, 7> zero_row{};
  for (std::size_t r = 2; r < 6; ++r) CHECK(obs.rows[r] == zero_row);
  CHECK(obs.rows[0][6] == doctest::Approx(1.0));        // EMV code 3/3
  CHECK(obs.rows[1][0] == doctest::Approx(50.0 / 200)); // ego x/L

  // two same-lane vehicles: A sees B as leader, trivial follower
  WorldState two = make_world({make_vehicle(50, 0, 5, VehicleKind::Cv),
                               make_vehicle(80, 0, 5, VehicleKind::Cv)},
                              5);
  ObservationMatrix obs_a = local_observation(two, 0);
  CHECK(obs_a.rows[2][0] == doctest::Approx(80.0 / 200));
  CHECK(obs_a.rows[3] == zero_row);
  ObservationMatrix obs_b = local_observation(two, 1);
  CHECK(obs_b.rows[3][0] == doctest::Approx(50.0 / 200));
  CHECK(obs_b.rows[2] == zero_row);

  // flattened dimension is always 6*7
  ScenarioSpec spec = generate_scenario(10, 0.5, road, 99);
  WorldState ten = build_world(spec, 12, IdmParams{}, BehaviorParams{});
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(local_observation(ten, i).flattened().size() == 42);
  }

  CHECK_THROWS_AS(local_observation(world, 99), contract_error);
}

TEST_CASE("local observation matches a brute-force neighbor search") {
  RoadConfig road;
  Rng rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    ScenarioSpec spec =
        generate_scenario(8, 0.5, road, static_cast<std::uint64_t>(trial + 1));
    WorldState world = build_world(spec, 10, IdmParams{}, BehaviorParams{});
    for (std::size_t i = 0; i < 8; ++i) {
      const Vehicle& ego = world.non_emvs[i];
      auto pick = [&](int lane, bool leader) {
        int best = -1;
        for (std::size_t j = 0; j < world.slots(); ++j) {
          if (j == i || !world.non_emvs[j].is_real()) continue;
          const Vehicle& cand = world.non_emvs[j];
          if (cand.y != lane) continue;
          bool ahead = cand.x >= ego.x;
          if (leader != ahead) continue;
          if (best < 0) {
            best = static_cast<int>(j);
            continue;
          }
          const Vehicle& cur = world.non_emvs[static_cast<std::size_t>(best)];
          if (leader ? cand.x < cur.x : cand.x > cur.x) {
            best = static_cast<int>(j);
          }
        }
        return best;
      };
      ObservationMatrix obs = local_observation(world, i);
      std::array<std::pair<int, bool>, 4> wanted = {
          std::pair{ego.y, true}, {ego.y, false}, {1 - ego.y, true},
          {1 - ego.y, false}};
      for (std::size_t k = 0; k < 4; ++k) {
        int idx = pick(wanted[k].first, wanted[k].second);
        std::array<double, 7> expect{};
        if (idx >= 0) {
          expect = normalized_row(world.non_emvs[static_cast<std::size_t>(idx)],
                                  world.road);
        }
        CHECK(obs.rows[2 + k] == expect);
      }
    }
  }
}

TEST_CASE("observation locality: mutating a non-neighbor changes nothing") {
  // lane 0: ego at 100, leader 120, follower 80, far vehicle 160
  // lane 1: leader 130, follower 60, far vehicle 10
  WorldState world = make_world(
      {make_vehicle(100, 0, 5, VehicleKind::Cv), make_vehicle(120, 0, 5, VehicleKind::Cv),
       make_vehicle(80, 0, 5, VehicleKind::Hv), make_vehicle(160, 0, 5, VehicleKind::Cv),
       make_vehicle(130, 1, 5, VehicleKind::Hv), make_vehicle(60, 1, 5, VehicleKind::Cv),
       make_vehicle(10, 1, 5, VehicleKind::Hv)},
      8);
  ObservationMatrix before = local_observation(world, 0);

  world.non_emvs[3].v = 9.0;  // beyond the same-lane leader
  world.non_emvs[3].length = 6.0;
  world.non_emvs[6].x = 5.0;  // still behind the neighbor-lane follower
  world.non_emvs[6].b_star = 3.5;
  ObservationMatrix after = local_observation(world, 0);
  CHECK(before.rows == after.rows);
}

TEST_CASE("collision pairs: clearance predicate on consecutive same-lane pairs") {
  // follower front bump 49.8, leader rear bump 50.0 -> clearance 0.2 < 0.5
  WorldState world = make_world({make_vehicle(49.8, 0, 5, VehicleKind::Cv),
                                 make_vehicle(54.5, 0, 5, VehicleKind::Cv, 4.5)},
                                4);
  auto pairs = collision_pairs(world);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0] == std::pair<int, int>{0, 1});

  // clearance exactly d: not reported (strict inequality)
  WorldState at_gap = make_world({make_vehicle(49.5, 0, 5, VehicleKind::Cv),
                                  make_vehicle(54.5, 0, 5, VehicleKind::Cv, 4.5)},
                                 4);
  CHECK(collision_pairs(at_gap).empty());

  // different lanes never collide
  WorldState lanes = make_world({make_vehicle(49.8, 0, 5, VehicleKind::Cv),
                                 make_vehicle(54.5, 1, 5, VehicleKind::Cv, 4.5)},
                                4);
  CHECK(collision_pairs(lanes).empty());

  // EMV participates on the passing lane
  WorldState emv_close = make_world({make_vehicle(4.6, 0, 5, VehicleKind::Cv, 4.5)}, 2);
  auto emv_pairs = collision_pairs(emv_close);  // EMV front 0, leader rear 0.1
  REQUIRE(emv_pairs.size() == 1);
  CHECK(emv_pairs[0] == std::pair<int, int>{kEmvIndex, 0});
}

TEST_CASE("episode done: cleared boundary, timeout, fresh world") {
  WorldState world = make_world({}, 2);
  world.emv.x = 204.5;  // rear bump exactly at L
  CHECK(episode_done(world).done);
  CHECK(episode_done(world).cause == DoneCause::Cleared);

  WorldState timeout = make_world({}, 2);
  timeout.emv.x = 100;
  timeout.step = timeout.road.max_steps;
  CHECK(episode_done(timeout).done);
  CHECK(episode_done(timeout).cause == DoneCause::Timeout);

  WorldState fresh = make_world({}, 2);
  CHECK_FALSE(episode_done(fresh).done);
}

TEST_CASE("step: trivial padding is inert and the EMV advances in free flow") {
  WorldState world = make_world({}, 6);
  std::vector<int> actions(6, 1);  // ignored for trivial slots
  double prev_x = world.emv.x;
  for (int t = 0; t < 10; ++t) {
    step(world, actions);
    CHECK(world.emv.x > prev_x);
    prev_x = world.emv.x;
    for (const Vehicle& veh : world.non_emvs) {
      CHECK(veh == Vehicle{});  // padding never moves
    }
  }
}

TEST_CASE("step: EMV saturates at its maximum allowable velocity") {
  WorldState world = make_world({}, 2);
  std::vector<int> actions(2, 0);
  for (int t = 0; t < 60; ++t) {
    step(world, actions);
    CHECK(world.emv.v <= world.road.vmax_emv + 1e-12);
  }
  CHECK(world.emv.v == doctest::Approx(12.0).epsilon(1e-4));
}

TEST_CASE("step: zero-noise configuration is deterministic across seeds") {
  BehaviorParams quiet;
  quiet.reaction_std = 0.0;
  quiet.decel_noise_std = 0.0;
  quiet.lane_change_time = 0.5;  // p = 1

  auto run = [&](std::uint64_t seed) {
    WorldState world =
        make_world({make_vehicle(40, 0, 4.5, VehicleKind::Cv, 4.5, 2.0, 2),
                    make_vehicle(90, 0, 4.5, VehicleKind::Cv, 4.0, 2.5, 2),
                    make_vehicle(60, 1, 4.5, VehicleKind::Hv, 5.0, 1.5, 2)},
                   4, seed);
    world.behavior = quiet;
    std::vector<std::vector<Vehicle>> history;
    std::vector<int> actions = {1, 0, 0, 0};
    for (int t = 0; t < 30; ++t) {
      step(world, actions);
      history.push_back(world.non_emvs);
      history.back().push_back(world.emv);
    }
    return history;
  };
  CHECK(run(1) == run(999));  // bitwise identical trajectories
}

TEST_CASE("step: malformed joint action length is rejected") {
  WorldState world = make_world({make_vehicle(40, 0, 4.5, VehicleKind::Cv)}, 4);
  std::vector<int> wrong(3, 0);
  CHECK_THROWS_AS(step(world, wrong), contract_error);
}

TEST_CASE("dynamics invariants over random rollouts") {
  RoadConfig road;
  Rng action_rng(8);
  std::uniform_int_distribution<int> coin(0, 1);
  for (int trial = 0; trial < 12; ++trial) {
    ScenarioSpec spec = generate_scenario(
        6, 0.5, road, static_cast<std::uint64_t>(1000 + trial));
    WorldState world = build_world(spec, 8, IdmParams{}, BehaviorParams{});
    std::vector<double> prev_x(8), prev_emv_x{0.0};
    std::vector<int> prev_xi(8, 0);
    for (std::size_t i = 0; i < 8; ++i) prev_x[i] = world.non_emvs[i].x;
    double emv_prev = world.emv.x;

    for (int t = 0; t < 80; ++t) {
      std::vector<int> actions(8);
      for (int& a : actions) a = coin(action_rng);
      StepEvents events = step(world, actions);
      for (std::size_t i = 0; i < 8; ++i) {
        const Vehicle& veh = world.non_emvs[i];
        CHECK(veh.x >= prev_x[i]);              // no reversing
        CHECK(veh.v >= 0.0);
        CHECK(veh.v <= world.road.vmax_non_emv + 1e-12);
        CHECK(veh.xi >= prev_xi[i]);            // absorbing yielding
        prev_x[i] = veh.x;
        prev_xi[i] = veh.xi;
      }
      CHECK(world.emv.x >= emv_prev);
      CHECK(world.emv.v <= world.road.vmax_emv + 1e-12);
      emv_prev = world.emv.x;
      if (events.done) break;
    }
  }
}

TEST_CASE("padding inertness: extra trivial slots leave real trajectories bitwise intact") {
  RoadConfig road;
  ScenarioSpec spec = generate_scenario(5, 0.6, road, 4242);
  WorldState small = build_world(spec, 5, IdmParams{}, BehaviorParams{});
  WorldState big = build_world(spec, 9, IdmParams{}, BehaviorParams{});

  Rng action_rng(9);
  std::uniform_int_distribution<int> coin(0, 1);
  for (int t = 0; t < 60; ++t) {
    std::vector<int> actions(5);
    for (int& a : actions) a = coin(action_rng);
    std::vector<int> padded = actions;
    padded.resize(9, 0);
    step(small, actions);
    step(big, padded);
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(small.non_emvs[i] == big.non_emvs[i]);
    }
    CHECK(small.emv == big.emv);
  }
}

TEST_CASE("seed determinism: identical world, seed and actions give identical trajectories") {
  RoadConfig road;
  ScenarioSpec spec = generate_scenario(6, 0.5, road, 777);
  WorldState a = build_world(spec, 8, IdmParams{}, BehaviorParams{});
  WorldState b = build_world(spec, 8, IdmParams{}, BehaviorParams{});

  Rng action_rng(10);
  std::uniform_int_distribution<int> coin(0, 1);
  for (int t = 0; t < 80; ++t) {
    std::vector<int> actions(8);
    for (int& a2 : actions) a2 = coin(action_rng);
    step(a, actions);
    step(b, actions);
    CHECK(a.non_emvs == b.non_emvs);
    CHECK(a.emv == b.emv);
  }
}

TEST_CASE("cooperative deceleration slows the nearest lane-1 follower on a merge") {
  BehaviorParams quiet;
  quiet.reaction_std = 0.0;
  quiet.decel_noise_std = 0.0;
  quiet.lane_change_time = 0.5;  // merge succeeds on the first eligible step

  // merger at 100 on lane 0 (no reaction delay), follower at 90 on lane 1
  WorldState world =
      make_world({make_vehicle(100, 0, 6, VehicleKind::Cv, 4.5, 2.0, 0),
                  make_vehicle(90, 1, 6, VehicleKind::Cv, 4.5, 2.0, 0)},
                 3);
  world.behavior = quiet;
  std::vector<int> actions = {1, 0, 0};
  double follower_v_before = world.non_emvs[1].v;
  step(world, actions);
  CHECK(world.non_emvs[0].y == 1);  // merged this step
  CHECK(world.coop_decel_for[1] == 0);
  // follower applied the baseline comfortable deceleration b0 = 2 for dt = 0.5
  CHECK(world.non_emvs[1].v ==
        doctest::Approx(follower_v_before - 2.0 * 0.5).epsilon(1e-12));
  // the merger sits strictly ahead now, so the flag clears and the follower is
  // back on the car-following law (which brakes hard against the cut-in,
  // not at the flat b0 rate)
  double v_after_merge = world.non_emvs[1].v;
  step(world, actions);
  CHECK(world.coop_decel_for[1] == -1);
  CHECK(world.non_emvs[1].v !=
        doctest::Approx(v_after_merge - 2.0 * 0.5).epsilon(1e-9));
}
