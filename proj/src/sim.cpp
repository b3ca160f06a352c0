#include "dqjl/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dqjl/errors.hpp"

namespace dqjl {

void RoadConfig::validate() const {
  if (segment_length <= 0) throw config_error("segment_length must be > 0");
  if (min_gap <= 0) throw config_error("min_gap must be > 0");
  if (dt <= 0) throw config_error("dt must be > 0");
  if (hv_reaction_distance <= 0) throw config_error("hv_reaction_distance must be > 0");
  if (v0_non_emv <= 0 || v0_emv <= 0) throw config_error("start speeds must be > 0");
  if (vmax_emv <= 0 || vmax_non_emv <= 0) throw config_error("max speeds must be > 0");
  if (max_steps <= 0) throw config_error("max_steps must be > 0");
}

void IdmParams::validate() const {
  if (accel <= 0 || decel <= 0 || desired_speed <= 0 || headway <= 0) {
    throw config_error("IDM parameters must be strictly positive");
  }
}

void BehaviorParams::validate(double dt) const {
  if (reaction_mean <= 0) throw config_error("reaction_mean must be > 0");
  if (reaction_std < 0) throw config_error("reaction_std must be >= 0");
  if (decel_noise_std < 0) throw config_error("decel_noise_std must be >= 0");
  if (lane_change_time < dt) {
    throw config_error("lane_change_time must be >= dt (p = dt/t_lc <= 1)");
  }
}

std::array<double, 7> normalized_row(const Vehicle& vehicle, const RoadConfig& road) {
  return {vehicle.x / road.segment_length,
          static_cast<double>(vehicle.y),
          vehicle.v / road.vmax_emv,
          static_cast<double>(vehicle.xi),
          vehicle.length / 10.0,
          vehicle.b_star / 5.0,
          kind_code(vehicle.kind) / 3.0};
}

std::array<double, ObservationMatrix::kRows * ObservationMatrix::kCols>
ObservationMatrix::flattened() const {
  std::array<double, kRows * kCols> flat{};
  std::size_t k = 0;
  for (const auto& row : rows) {
    for (double v : row) flat[k++] = v;
  }
  return flat;
}

double idm_acceleration(double ego_v, double leader_v, double gap,
                        const IdmParams& idm, double min_gap) {
  if (!std::isfinite(ego_v) || !std::isfinite(leader_v) || !std::isfinite(gap)) {
    throw contract_error("idm_acceleration requires finite inputs");
  }
  if (gap <= 0.0) throw contract_error("idm_acceleration requires gap > 0");
  if (ego_v < 0.0) throw contract_error("idm_acceleration requires ego_v >= 0");
  double s_star = min_gap + ego_v * idm.headway +
                  ego_v * (ego_v - leader_v) /
                      (2.0 * std::sqrt(idm.accel * idm.decel));
  double ratio_v = ego_v / idm.desired_speed;
  double ratio_s = s_star / gap;
  double u = idm.accel * (1.0 - ratio_v * ratio_v * ratio_v * ratio_v -
                          ratio_s * ratio_s);
  return std::clamp(u, -kMaxBrake, idm.accel);
}

double braking_deceleration(Vehicle& vehicle, const BehaviorParams& behavior,
                            double dt, Rng& rng) {
  if (vehicle.xi != 1) {
    throw contract_error("braking_deceleration requires a yielding vehicle");
  }
  if (vehicle.reaction_steps_left > 0) {
    vehicle.reaction_steps_left -= 1;
    return 0.0;
  }
  double b = vehicle.b_star;
  if (behavior.decel_noise_std > 0.0) {
    std::normal_distribution<double> noise(0.0, behavior.decel_noise_std);
    b += noise(rng);
  }
  return std::clamp(b, 0.0, vehicle.v / dt);
}

int hv_action(const Vehicle& hv, const Vehicle& emv, double reaction_distance) {
  if (hv.kind != VehicleKind::Hv) {
    throw contract_error("hv_action requires an HV");
  }
  return (hv.x - emv.x >= reaction_distance) ? 0 : 1;
}

int yielding_update(int xi, int action) {
  if ((xi != 0 && xi != 1) || (action != 0 && action != 1)) {
    throw contract_error("yielding_update inputs must be 0 or 1");
  }
  return (action == 1 || xi == 1) ? 1 : 0;
}

int lane_change_sample(const Vehicle& vehicle, double dt,
                       const BehaviorParams& behavior, Rng& rng) {
  double p = dt / behavior.lane_change_time;
  if (p <= 0.0 || p > 1.0) {
    throw config_error("lane-change probability dt/t_lc must be in (0, 1]");
  }
  if (vehicle.xi != 1 || vehicle.y != 0) {
    throw contract_error("lane_change_sample requires a yielding passing-lane vehicle");
  }
  if (vehicle.reaction_steps_left > 0) return 0;
  if (p >= 1.0) return 1;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  return unit(rng) < p ? 1 : 0;
}

namespace {

struct LeaderInfo {
  bool exists = false;
  double v = 0.0;
  double gap = kNoLeaderGap;
};

// Nearest vehicle ahead of (x) on `lane` among real non-EMVs (and optionally
// the EMV), excluding slot `skip`.
LeaderInfo find_leader(const std::vector<Vehicle>& fleet, const Vehicle& emv,
                       bool include_emv, int lane, double x, int skip) {
  LeaderInfo best;
  double best_x = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < fleet.size(); ++j) {
    const Vehicle& cand = fleet[j];
    if (!cand.is_real() || static_cast<int>(j) == skip) continue;
    if (cand.y != lane || cand.x < x) continue;
    if (cand.x < best_x) {
      best_x = cand.x;
      best.exists = true;
      best.v = cand.v;
      best.gap = cand.rear() - x;
    }
  }
  if (include_emv && emv.y == lane && emv.x >= x && emv.x < best_x) {
    best.exists = true;
    best.v = emv.v;
    best.gap = emv.rear() - x;
  }
  return best;
}

double idm_velocity_update(const Vehicle& ego, const LeaderInfo& leader,
                           const IdmParams& idm, const RoadConfig& road,
                           double vmax, double& u_out) {
  double gap = leader.exists ? std::max(leader.gap, 1e-3) : kNoLeaderGap;
  double leader_v = leader.exists ? leader.v : ego.v;
  double u = idm_acceleration(ego.v, leader_v, gap, idm, road.min_gap);
  u_out = u;
  return std::clamp(ego.v + u * road.dt, 0.0, vmax);
}

}  // namespace

ObservationMatrix local_observation(const WorldState& world, std::size_t i) {
  if (i >= world.slots()) {
    throw contract_error("local_observation index out of range");
  }
  const Vehicle& ego = world.non_emvs[i];
  ObservationMatrix obs;
  obs.rows[0] = normalized_row(world.emv, world.road);
  obs.rows[1] = normalized_row(ego, world.road);

  auto fill_neighbors = [&](int lane, std::size_t leader_row, std::size_t follower_row) {
    int leader = -1, follower = -1;
    double leader_x = std::numeric_limits<double>::infinity();
    double follower_x = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < world.slots(); ++j) {
      if (j == i || !world.non_emvs[j].is_real()) continue;
      const Vehicle& cand = world.non_emvs[j];
      if (cand.y != lane) continue;
      if (cand.x >= ego.x && cand.x < leader_x) {
        leader_x = cand.x;
        leader = static_cast<int>(j);
      }
      if (cand.x < ego.x && cand.x > follower_x) {
        follower_x = cand.x;
        follower = static_cast<int>(j);
      }
    }
    if (leader >= 0) {
      obs.rows[leader_row] = normalized_row(world.non_emvs[leader], world.road);
    }
    if (follower >= 0) {
      obs.rows[follower_row] = normalized_row(world.non_emvs[follower], world.road);
    }
  };

  fill_neighbors(ego.y, 2, 3);
  fill_neighbors(1 - ego.y, 4, 5);
  return obs;
}

std::vector<std::pair<int, int>> collision_pairs(const WorldState& world) {
  std::vector<std::pair<int, int>> pairs;
  for (int lane = 0; lane <= 1; ++lane) {
    // (slot index, front bump, length); EMV rides the passing lane.
    std::vector<std::tuple<int, double, double>> order;
    if (world.emv.y == lane) {
      order.emplace_back(kEmvIndex, world.emv.x, world.emv.length);
    }
    for (std::size_t j = 0; j < world.slots(); ++j) {
      const Vehicle& veh = world.non_emvs[j];
      if (veh.is_real() && veh.y == lane) {
        order.emplace_back(static_cast<int>(j), veh.x, veh.length);
      }
    }
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
      return std::get<1>(a) < std::get<1>(b);
    });
    for (std::size_t k = 0; k + 1 < order.size(); ++k) {
      const auto& [fi, fx, fl] = order[k];
      const auto& [li, lx, ll] = order[k + 1];
      double clearance = (lx - ll) - fx;
      if (clearance < world.road.min_gap) pairs.emplace_back(fi, li);
    }
  }
  return pairs;
}

DoneStatus episode_done(const WorldState& world) {
  if (world.emv.rear() >= world.road.segment_length) {
    return {true, DoneCause::Cleared};
  }
  if (world.step >= world.road.max_steps) {
    return {true, DoneCause::Timeout};
  }
  return {false, DoneCause::None};
}

StepEvents step(WorldState& world, std::span<const int> joint_action) {
  const std::size_t slots = world.slots();
  if (joint_action.size() != slots) {
    throw contract_error("step joint action length must equal slot count");
  }
  if (world.coop_decel_for.size() != slots) {
    world.coop_decel_for.assign(slots, -1);
  }
  const RoadConfig& road = world.road;
  const std::vector<Vehicle> prev = world.non_emvs;
  const Vehicle prev_emv = world.emv;

  // Yielding-status update; HV actions come from the distance rule.
  for (std::size_t i = 0; i < slots; ++i) {
    if (!prev[i].is_real()) continue;
    int action = prev[i].kind == VehicleKind::Hv
                     ? hv_action(prev[i], prev_emv, road.hv_reaction_distance)
                     : joint_action[i];
    int xi_new = yielding_update(prev[i].xi, action);
    if (xi_new == 1 && prev[i].xi == 0) {
      world.non_emvs[i].yield_issued_step = world.step;
    }
    world.non_emvs[i].xi = xi_new;
  }

  // Pull-over outcomes, drawn before any reaction counters tick this step.
  std::vector<bool> merged(slots, false);
  for (std::size_t i = 0; i < slots; ++i) {
    const Vehicle& veh = world.non_emvs[i];
    if (veh.is_real() && veh.xi == 1 && veh.y == 0) {
      merged[i] = lane_change_sample(veh, road.dt, world.behavior, world.rng) == 1;
    }
  }

  // Cooperative-deceleration flags: clear once the merger is strictly ahead,
  // then register this step's mergers with their nearest lane-1 follower.
  for (std::size_t i = 0; i < slots; ++i) {
    int m = world.coop_decel_for[i];
    if (m >= 0 && prev[static_cast<std::size_t>(m)].x > prev[i].x) {
      world.coop_decel_for[i] = -1;
    }
  }
  for (std::size_t m = 0; m < slots; ++m) {
    if (!merged[m]) continue;
    int follower = -1;
    double follower_x = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < slots; ++j) {
      const Vehicle& cand = prev[j];
      if (j == m || !cand.is_real() || cand.y != 1) continue;
      if (cand.x <= prev[m].x && cand.x > follower_x) {
        follower_x = cand.x;
        follower = static_cast<int>(j);
      }
    }
    if (follower >= 0) world.coop_decel_for[follower] = static_cast<int>(m);
  }

  // Kinematic updates, synchronous against the pre-step state.
  for (std::size_t i = 0; i < slots; ++i) {
    if (!prev[i].is_real()) continue;
    Vehicle& veh = world.non_emvs[i];
    double u_applied = 0.0;
    if (veh.xi == 1) {
      double b = braking_deceleration(veh, world.behavior, road.dt, world.rng);
      veh.v = std::max(0.0, prev[i].v - b * road.dt);
      u_applied = -b;
    } else if (world.coop_decel_for[i] >= 0 && veh.y == 1) {
      double b = std::min(world.idm.decel, prev[i].v / road.dt);
      veh.v = prev[i].v - b * road.dt;
      u_applied = -b;
    } else {
      LeaderInfo leader = find_leader(prev, prev_emv, /*include_emv=*/true,
                                      prev[i].y, prev[i].x, static_cast<int>(i));
      veh.v = idm_velocity_update(prev[i], leader, world.idm, road,
                                  road.vmax_non_emv, u_applied);
    }
    double dx = prev[i].v * road.dt + 0.5 * u_applied * road.dt * road.dt;
    veh.x = prev[i].x + std::max(0.0, dx);
    if (merged[i]) veh.y = 1;
  }

  // EMV: car-following against its nearest passing-lane leader, desired speed
  // lifted to its own allowance.
  {
    LeaderInfo leader = find_leader(prev, prev_emv, /*include_emv=*/false,
                                    prev_emv.y, prev_emv.x, -2);
    IdmParams emv_idm = world.idm;
    emv_idm.desired_speed = road.vmax_emv;
    double u_applied = 0.0;
    world.emv.v = idm_velocity_update(prev_emv, leader, emv_idm, road,
                                      road.vmax_emv, u_applied);
    double dx = prev_emv.v * road.dt + 0.5 * u_applied * road.dt * road.dt;
    world.emv.x = prev_emv.x + std::max(0.0, dx);
  }

  world.step += 1;

  StepEvents events;
  events.collisions = collision_pairs(world);
  DoneStatus done = episode_done(world);
  events.done = done.done;
  events.cause = done.cause;
  return events;
}

}  // namespace dqjl
