#include "dqjl/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>

#include "dqjl/errors.hpp"

namespace dqjl {

void SweepConfig::validate() const {
  if (densities.empty() || penetrations.empty()) {
    throw config_error("sweep needs at least one density and one penetration");
  }
  if (replications <= 0) throw config_error("replications must be > 0");
  for (double p : penetrations) {
    if (p < 0.0 || p > 1.0) throw config_error("penetration must lie in [0, 1]");
  }
  for (int d : densities) {
    if (d < 0) throw config_error("density must be >= 0");
  }
}

EpisodeResult run_episode_greedy(const AgentEnsemble* ensemble,
                                 WorldState world, RolloutMode mode) {
  if (mode == RolloutMode::Policy && ensemble == nullptr) {
    throw config_error("policy rollout requires a checkpointed ensemble");
  }
  if (mode == RolloutMode::Baseline) {
    for (Vehicle& veh : world.non_emvs) {
      if (veh.is_real()) veh.kind = VehicleKind::Hv;
    }
  }

  EpisodeResult result;
  std::vector<Carry> carries(world.slots());
  Rng unused_rng;  // greedy selection draws nothing
  std::vector<int> zeros(world.slots(), 0);

  for (int t = 0; t < world.road.max_steps; ++t) {
    StepEvents events;
    if (mode == RolloutMode::Policy) {
      std::vector<int> actions = select_actions(*ensemble, world, carries, 0.0,
                                                1.0, unused_rng, /*greedy=*/true);
      events = step(world, actions);
    } else {
      events = step(world, zeros);  // HV actions come from the rule inside step
    }
    if (events.collided()) {
      result.collided = true;
      result.steps = world.step;
      return result;
    }
    if (events.done) {
      result.steps = world.step;
      if (events.cause == DoneCause::Cleared) {
        result.passing_time = world.step * world.road.dt;
      } else {
        result.timed_out = true;
      }
      return result;
    }
  }
  result.steps = world.step;
  result.timed_out = true;
  return result;
}

std::vector<EpisodeResult> sweep(const SweepConfig& cfg,
                                 const AgentEnsemble* ensemble,
                                 const RoadConfig& road, const IdmParams& idm,
                                 const BehaviorParams& behavior) {
  cfg.validate();
  RolloutMode mode =
      ensemble == nullptr ? RolloutMode::Baseline : RolloutMode::Policy;
  std::vector<EpisodeResult> results;
  for (int density : cfg.densities) {
    for (int rep = 0; rep < cfg.replications; ++rep) {
      std::uint64_t scenario_seed =
          mix_u64(cfg.seed, static_cast<std::uint64_t>(density),
                  static_cast<std::uint64_t>(rep));
      for (double penetration : cfg.penetrations) {
        ScenarioSpec spec =
            generate_scenario(density, penetration, road, scenario_seed);
        int slots = ensemble != nullptr ? ensemble->agent_slots
                                        : std::max(density, 1);
        WorldState world = build_world(spec, slots, idm, behavior);
        EpisodeResult r = run_episode_greedy(ensemble, std::move(world), mode);
        r.density = density;
        r.penetration = penetration;
        r.seed = scenario_seed;
        results.push_back(r);
      }
    }
  }
  return results;
}

std::vector<CellAggregate> aggregate(const std::vector<EpisodeResult>& results) {
  std::map<std::pair<int, double>, std::vector<const EpisodeResult*>> cells;
  for (const EpisodeResult& r : results) {
    cells[{r.density, r.penetration}].push_back(&r);
  }
  std::vector<CellAggregate> out;
  for (const auto& [key, rows] : cells) {
    CellAggregate cell;
    cell.density = key.first;
    cell.penetration = key.second;
    cell.n_total = static_cast<int>(rows.size());
    double sum = 0.0, sum_sq = 0.0;
    int collided = 0, timed_out = 0;
    for (const EpisodeResult* r : rows) {
      if (r->collided) ++collided;
      if (r->timed_out) ++timed_out;
      if (r->passing_time) {
        sum += *r->passing_time;
        sum_sq += *r->passing_time * *r->passing_time;
        ++cell.n_cleared;
      }
    }
    if (cell.n_cleared > 0) {
      double n = cell.n_cleared;
      cell.mean_passing_time = sum / n;
      double var = std::max(0.0, sum_sq / n - cell.mean_passing_time *
                                                  cell.mean_passing_time);
      cell.std_passing_time = std::sqrt(var);
      cell.stderr_passing_time = cell.std_passing_time / std::sqrt(n);
    }
    cell.collision_rate = static_cast<double>(collided) / cell.n_total;
    cell.timeout_rate = static_cast<double>(timed_out) / cell.n_total;
    out.push_back(cell);
  }
  return out;
}

LatencyStats measure_decision_latency(const AgentEnsemble& ensemble,
                                      int trials) {
  LatencyStats stats;
  if (trials <= 0) return stats;
  stats.trials = trials;

  RoadConfig road;
  ScenarioSpec spec = generate_scenario(
      std::min(ensemble.agent_slots, 6), 1.0, road, /*seed=*/42);
  WorldState world = build_world(spec, ensemble.agent_slots, IdmParams{},
                                 BehaviorParams{});
  Carry carry;
  std::vector<double> samples_ms;
  samples_ms.reserve(static_cast<std::size_t>(trials));
  for (int k = 0; k < trials; ++k) {
    auto t0 = std::chrono::steady_clock::now();
    auto obs = local_observation(world, 0).flattened();
    PolicyStepOut out = policy_forward(ensemble.agents[0].actor, obs, carry);
    auto t1 = std::chrono::steady_clock::now();
    carry = std::move(out.carry);
    samples_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  double sum = 0.0;
  for (double s : samples_ms) sum += s;
  stats.mean_ms = sum / static_cast<double>(trials);
  std::sort(samples_ms.begin(), samples_ms.end());
  std::size_t idx = static_cast<std::size_t>(
      std::min<double>(samples_ms.size() - 1.0,
                       std::ceil(0.95 * samples_ms.size()) - 1.0));
  stats.p95_ms = samples_ms[idx];
  return stats;
}

namespace {

void write_csv_double(std::ofstream& out, double v) {
  out.precision(17);
  out << v;
}

}  // namespace

void report(const std::vector<EpisodeResult>& results,
            const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);

  std::vector<EpisodeResult> sorted = results;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return std::tie(a.density, a.penetration, a.seed) <
           std::tie(b.density, b.penetration, b.seed);
  });

  {
    std::ofstream out(dir / "episodes.csv");
    if (!out) throw io_error("cannot write " + (dir / "episodes.csv").string());
    out << "density,penetration,seed,passing_time_s,collided,timed_out,steps\n";
    for (const EpisodeResult& r : sorted) {
      out << r.density << ',';
      write_csv_double(out, r.penetration);
      out << ',' << r.seed << ',';
      if (r.passing_time) write_csv_double(out, *r.passing_time);
      out << ',' << (r.collided ? 1 : 0) << ',' << (r.timed_out ? 1 : 0) << ','
          << r.steps << '\n';
    }
    if (!out) throw io_error("write failure in " + dir.string());
  }
  {
    std::ofstream out(dir / "aggregate.csv");
    if (!out) throw io_error("cannot write " + (dir / "aggregate.csv").string());
    out << "density,penetration,mean_passing_time_s,std_s,n,collision_rate,"
           "timeout_rate\n";
    for (const CellAggregate& cell : aggregate(sorted)) {
      out << cell.density << ',';
      write_csv_double(out, cell.penetration);
      out << ',';
      write_csv_double(out, cell.mean_passing_time);
      out << ',';
      write_csv_double(out, cell.std_passing_time);
      out << ',' << cell.n_cleared << ',';
      write_csv_double(out, cell.collision_rate);
      out << ',';
      write_csv_double(out, cell.timeout_rate);
      out << '\n';
    }
    if (!out) throw io_error("write failure in " + dir.string());
  }
}

}  // namespace dqjl
