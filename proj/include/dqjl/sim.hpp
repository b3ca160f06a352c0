#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "dqjl/rng.hpp"

namespace dqjl {

// φ codes used in observations: EMV 3, CV 2, HV 1, trivial 0.
enum class VehicleKind : int { Trivial = 0, Hv = 1, Cv = 2, Emv = 3 };

inline double kind_code(VehicleKind k) { return static_cast<double>(k); }

// Index used for the EMV in collision pairs (non-EMVs use their slot index).
constexpr int kEmvIndex = -1;

struct Vehicle {
  double x = 0.0;       // front bump position (m)
  int y = 0;            // lane: 0 passing, 1 neighboring
  double v = 0.0;       // m/s, never negative
  int xi = 0;           // yielding status, absorbing within an episode
  double length = 0.0;  // m
  double b_star = 0.0;  // baseline deceleration magnitude (m/s²)
  VehicleKind kind = VehicleKind::Trivial;
  int reaction_steps_left = 0;
  std::optional<int> yield_issued_step;

  bool operator==(const Vehicle&) const = default;
  bool is_real() const { return kind != VehicleKind::Trivial; }
  double rear() const { return x - length; }
};

struct RoadConfig {
  double segment_length = 200.0;       // L
  double min_gap = 0.5;                // d
  double dt = 0.5;                     // s
  double hv_reaction_distance = 75.0;  // L_HV
  double v0_non_emv = 4.5;
  double v0_emv = 8.0;
  double vmax_emv = 12.0;
  double vmax_non_emv = 10.0;
  int max_steps = 240;

  bool operator==(const RoadConfig&) const = default;
  void validate() const;  // throws config_error
};

struct IdmParams {
  double accel = 3.0;          // u0, magnitude
  double decel = 2.0;          // b0, magnitude
  double desired_speed = 10.0; // v*
  double headway = 1.5;        // T0, s

  bool operator==(const IdmParams&) const = default;
  void validate() const;
};

struct BehaviorParams {
  double reaction_mean = 2.25;   // t_r mean, s
  double reaction_std = 0.5;     // t_r std, s
  double decel_noise_std = 0.5;  // m/s²
  double lane_change_time = 3.0; // t_lc mean, s

  bool operator==(const BehaviorParams&) const = default;
  void validate(double dt) const;  // p = dt/t_lc must land in (0,1]
};

// Hard cap on braking produced by the car-following law (m/s²).
constexpr double kMaxBrake = 8.0;
// Gap fed to the car-following law when no leader exists (m).
constexpr double kNoLeaderGap = 1e6;

struct WorldState {
  Vehicle emv;
  std::vector<Vehicle> non_emvs;  // exactly M slots, real vehicles first
  int step = 0;
  Rng rng;
  // Slot index of the merging vehicle a neighboring-lane follower is making
  // room for; -1 when clear. Part of the transition state.
  std::vector<int> coop_decel_for;

  RoadConfig road;
  IdmParams idm;
  BehaviorParams behavior;

  std::size_t slots() const { return non_emvs.size(); }
};

// Rows: EMV, ego, same-lane leader/follower, neighbor-lane leader/follower.
// Features per row: x/L, y, v/vmax_emv, ξ, l/10, b*/5, φ/3.
struct ObservationMatrix {
  static constexpr std::size_t kRows = 6;
  static constexpr std::size_t kCols = 7;
  std::array<std::array<double, kCols>, kRows> rows{};

  std::array<double, kRows * kCols> flattened() const;
};

std::array<double, 7> normalized_row(const Vehicle& vehicle, const RoadConfig& road);

// Car-following acceleration; result clamped to [-kMaxBrake, idm.accel].
double idm_acceleration(double ego_v, double leader_v, double gap,
                        const IdmParams& idm, double min_gap);

// Deceleration magnitude for a yielding vehicle. Zero during the
// perception-reaction window (decrements the counter), afterwards
// b* + noise clamped to [0, v/dt] so velocity never goes negative.
double braking_deceleration(Vehicle& vehicle, const BehaviorParams& behavior,
                            double dt, Rng& rng);

// Distance-triggered rule: keep driving (0) while the EMV is at least
// reaction_distance behind, else yield (1).
int hv_action(const Vehicle& hv, const Vehicle& emv, double reaction_distance);

// Absorbing yielding-status tracker.
int yielding_update(int xi, int action);

// Next lane of a yielding passing-lane vehicle: 1 with probability dt/t_lc
// once the reaction window has elapsed, else 0.
int lane_change_sample(const Vehicle& vehicle, double dt,
                       const BehaviorParams& behavior, Rng& rng);

ObservationMatrix local_observation(const WorldState& world, std::size_t i);

// Same-lane consecutive pairs (follower, leader) closer than min_gap; the EMV
// participates on the passing lane as kEmvIndex.
std::vector<std::pair<int, int>> collision_pairs(const WorldState& world);

enum class DoneCause { None, Cleared, Timeout };

struct DoneStatus {
  bool done = false;
  DoneCause cause = DoneCause::None;
};

DoneStatus episode_done(const WorldState& world);

struct StepEvents {
  std::vector<std::pair<int, int>> collisions;
  bool done = false;
  DoneCause cause = DoneCause::None;

  bool collided() const { return !collisions.empty(); }
};

// Advances the world one step. Actions for HVs are recomputed internally from
// the distance rule; trivial slots ignore their action.
StepEvents step(WorldState& world, std::span<const int> joint_action);

}  // namespace dqjl
