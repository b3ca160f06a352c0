#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "dqjl/neural.hpp"
#include "dqjl/reward.hpp"
#include "dqjl/scenario.hpp"
#include "dqjl/sim.hpp"

namespace dqjl {

// One replay element. States are the normalized non-EMV rows (slots×7,
// flattened); the EMV rows ride along so fixed-rule next actions can be
// recomputed. Carries are stored only for slots that ran an actor (CVs).
struct Transition {
  std::vector<double> state, next_state;
  std::array<double, 7> emv_row{}, next_emv_row{};
  std::vector<std::array<double, 42>> obs, next_obs;
  std::vector<double> actions;
  double reward = 0.0;
  bool done = false;
  std::vector<Carry> carries_pre, carries_post;
  std::vector<VehicleKind> kinds;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void insert(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& operator[](std::size_t i) const { return items_[i]; }

  // Uniform indices; requires size() >= batch.
  std::vector<std::size_t> sample_indices(std::size_t batch, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> items_;
};

struct TrainConfig {
  double gamma = 0.99;
  double lr_actor = 1e-4;
  double lr_critic = 1e-3;
  std::size_t minibatch = 64;
  std::size_t replay_capacity = 10000;
  double tau = 0.01;
  double eps0 = 0.99;
  double eps_decay = 1e-3;
  double eps_floor = 0.05;
  int agent_slots = 12;  // M
  int episodes = 5000;
  double gumbel_temperature = 1.0;
  std::uint64_t seed = 1;
  int threads = 0;  // 0 = runtime default

  void validate() const;
};

struct Agent {
  PolicyNet actor, actor_target;
  ValueNet critic, critic_target;
  AdamState actor_opt, critic_opt;
};

// M disjoint parameter sets; no sharing between agents.
struct AgentEnsemble {
  int agent_slots = 0;
  std::vector<Agent> agents;

  AgentEnsemble() = default;
  AgentEnsemble(int agent_slots, double lr_actor, double lr_critic, Rng& rng);

  std::size_t critic_input_dim() const {
    return 8 * static_cast<std::size_t>(agent_slots);
  }
};

std::vector<VehicleKind> slot_kinds(const WorldState& world);
std::vector<double> joint_state_rows(const WorldState& world);

// CV actions are eps-mixed hard Gumbel-softmax samples (argmax when greedy),
// HVs follow the distance rule, trivial slots hold 0. Advances every CV
// actor's recurrent carry.
std::vector<int> select_actions(const AgentEnsemble& ensemble,
                                const WorldState& world,
                                std::vector<Carry>& carries, double eps,
                                double temperature, Rng& rng,
                                bool greedy = false);

// Eq.-7 targets: team reward plus discounted target-critic value at the joint
// next action (target actors for CVs, fixed rules for HVs/trivials); no
// bootstrap on done rows.
std::vector<double> td_target(const AgentEnsemble& ensemble,
                              const ReplayBuffer& buffer,
                              std::span<const std::size_t> batch, int agent,
                              double gamma, const RoadConfig& road);

// One Adam step on agent `i`'s critic against the TD targets; returns the
// pre-step loss ½·mean((Q−y)²).
double critic_update(AgentEnsemble& ensemble, const ReplayBuffer& buffer,
                     std::span<const std::size_t> batch, int agent,
                     VehicleKind slot_kind, const TrainConfig& cfg,
                     const RoadConfig& road);

// Mean centralized Q with agent `i`'s action re-sampled through the soft
// Gumbel path (per-row noise). Accumulates dJ/dθ_i into the actor grads when
// requested; rows where slot i is trivial are skipped.
double actor_objective(AgentEnsemble& ensemble, const ReplayBuffer& buffer,
                       std::span<const std::size_t> batch, int agent,
                       const TrainConfig& cfg, const Matrix& noise,
                       bool with_grads);

// One ascent step on agent `i`'s actor; returns the pre-step mean Q.
double actor_update(AgentEnsemble& ensemble, const ReplayBuffer& buffer,
                    std::span<const std::size_t> batch, int agent,
                    VehicleKind slot_kind, const TrainConfig& cfg, Rng& rng);

struct EpisodeRecord {
  int episode = 0;
  double episode_return = 0.0;
  int steps = 0;
  double eps = 0.0;
  bool collided = false;
  std::optional<double> passing_time;
};

using ScenarioProvider = std::function<ScenarioSpec(int episode, Rng& rng)>;

struct TrainOptions {
  std::filesystem::path log_path;         // empty: keep the log in memory only
  std::filesystem::path checkpoint_path;  // empty: no checkpoint
  // Called after every episode; return true to stop early.
  std::function<bool(const EpisodeRecord&, AgentEnsemble&)> after_episode;
};

// Algorithm-1 loop: roll episodes, store transitions, per-step minibatch
// updates for every non-trivial slot (actors only for CVs), soft target
// updates, additive epsilon decay per episode.
std::vector<EpisodeRecord> train(const ScenarioProvider& provider,
                                 AgentEnsemble& ensemble,
                                 const TrainConfig& cfg, const IdmParams& idm,
                                 const BehaviorParams& behavior,
                                 const RewardConfig& reward_cfg,
                                 const TrainOptions& options = {});

struct CheckpointMeta {
  int episode = 0;
  double eps = 0.0;
  std::uint64_t train_seed = 0;
};

void save_checkpoint(const AgentEnsemble& ensemble, const CheckpointMeta& meta,
                     const std::filesystem::path& path);
AgentEnsemble load_checkpoint(const std::filesystem::path& path,
                              CheckpointMeta* meta = nullptr);

void write_episode_log(const std::vector<EpisodeRecord>& log,
                       const std::filesystem::path& path);

}  // namespace dqjl
