#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dqjl/sim.hpp"

namespace dqjl {

// The EMV's own features do not influence learning; fixed nominal values.
constexpr double kEmvLength = 4.5;
constexpr double kEmvBaselineDecel = 2.0;

struct VehicleSpec {
  double x0 = 0.0;
  int lane0 = 0;
  double length = 4.5;
  double b_star = 2.0;
  VehicleKind kind = VehicleKind::Hv;
  double reaction_time = 2.25;  // t_r, s

  bool operator==(const VehicleSpec&) const = default;
};

struct ScenarioSpec {
  std::uint64_t seed = 0;
  int n_real = 0;
  double penetration = 0.0;
  std::vector<VehicleSpec> vehicles;
  RoadConfig road;

  bool operator==(const ScenarioSpec&) const = default;
};

// Samples starting conditions: lengths N(4.5,1²)→[2.5,8], deceleration
// magnitudes N(2,1²)→[0.5,4], reaction times N(2.25,0.5²)→[0.5,4], uniform
// two-lane placement with clearance ≥ d+2. Kind labels come from a separate
// stream keyed by (seed, kind) so kinematics are penetration-invariant.
ScenarioSpec generate_scenario(int n_real, double penetration,
                               const RoadConfig& road, std::uint64_t seed);

WorldState build_world(const ScenarioSpec& spec, int agent_slots,
                       const IdmParams& idm, const BehaviorParams& behavior);

// Line-delimited JSON with a version header line; exact round-trip.
void save_dataset(const std::vector<ScenarioSpec>& specs,
                  const std::filesystem::path& path);
std::vector<ScenarioSpec> load_dataset(const std::filesystem::path& path);

}  // namespace dqjl
