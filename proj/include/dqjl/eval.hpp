#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "dqjl/train.hpp"

namespace dqjl {

struct SweepConfig {
  std::vector<int> densities{4, 6, 8, 10};
  std::vector<double> penetrations{0.0, 0.33, 0.67, 1.0};
  int replications = 30;
  std::uint64_t seed = 7;

  void validate() const;
};

struct EpisodeResult {
  int density = 0;
  double penetration = 0.0;
  std::uint64_t seed = 0;  // replication scenario seed
  std::optional<double> passing_time;
  bool collided = false;
  bool timed_out = false;
  int steps = 0;

  bool operator==(const EpisodeResult&) const = default;
};

enum class RolloutMode { Policy, Baseline };

// Greedy rollout (eps 0, argmax actions) until the episode ends; baseline
// mode runs every vehicle on the HV distance rule and needs no ensemble.
EpisodeResult run_episode_greedy(const AgentEnsemble* ensemble,
                                 WorldState world, RolloutMode mode);

// Matched penetration sweep: within one (density, replication) cell every
// penetration reuses the same scenario seed, so kinematics agree and only
// kind labels differ. Null ensemble runs the all-HV baseline everywhere.
std::vector<EpisodeResult> sweep(const SweepConfig& cfg,
                                 const AgentEnsemble* ensemble,
                                 const RoadConfig& road, const IdmParams& idm,
                                 const BehaviorParams& behavior);

struct CellAggregate {
  int density = 0;
  double penetration = 0.0;
  double mean_passing_time = 0.0;  // over cleared episodes
  double std_passing_time = 0.0;
  double stderr_passing_time = 0.0;
  int n_cleared = 0;
  int n_total = 0;
  double collision_rate = 0.0;
  double timeout_rate = 0.0;
};

std::vector<CellAggregate> aggregate(const std::vector<EpisodeResult>& results);

struct LatencyStats {
  int trials = 0;
  double mean_ms = 0.0;
  double p95_ms = 0.0;
};

// Wall-clock cost of one agent's greedy decision, observation assembly
// included.
LatencyStats measure_decision_latency(const AgentEnsemble& ensemble,
                                      int trials);

// Writes episodes.csv (raw) and aggregate.csv under `dir`.
void report(const std::vector<EpisodeResult>& results,
            const std::filesystem::path& dir);

}  // namespace dqjl
