#include "dqjl/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <utility>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "dqjl/errors.hpp"

namespace dqjl {
namespace {

constexpr char kCheckpointMagic[8] = {'D', 'Q', 'J', 'L', 'C', 'K', 'P', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;

void fill_carry_rows(Matrix& h, Matrix& c, const std::vector<const Carry*>& rows) {
  const std::size_t hidden = PolicyNet::kHidden2;
  h = Matrix(rows.size(), hidden);
  c = Matrix(rows.size(), hidden);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] == nullptr || rows[r]->empty()) continue;
    if (rows[r]->h.size() != hidden || rows[r]->c.size() != hidden) {
      throw contract_error("stored carry has wrong width");
    }
    std::copy(rows[r]->h.begin(), rows[r]->h.end(), h.data() + r * hidden);
    std::copy(rows[r]->c.begin(), rows[r]->c.end(), c.data() + r * hidden);
  }
}

int argmax2(double a0, double a1) { return a1 > a0 ? 1 : 0; }

std::vector<const Matrix*> const_params(const ValueNet& net) { return net.params(); }
std::vector<const Matrix*> const_params(const PolicyNet& net) { return net.params(); }

}  // namespace

// ---------------------------------------------------------------------------
// Replay buffer

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw contract_error("replay capacity must be > 0");
  items_.reserve(capacity);
}

void ReplayBuffer::insert(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
  } else {
    items_[next_] = std::move(t);
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch,
                                                      Rng& rng) const {
  if (items_.size() < batch) {
    throw contract_error("replay buffer smaller than requested minibatch");
  }
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  std::vector<std::size_t> out(batch);
  for (std::size_t k = 0; k < batch; ++k) out[k] = pick(rng);
  return out;
}

// ---------------------------------------------------------------------------
// Config / ensemble

void TrainConfig::validate() const {
  if (gamma <= 0.0 || gamma >= 1.0) throw config_error("gamma must lie in (0, 1)");
  if (lr_actor <= 0.0 || lr_critic <= 0.0) throw config_error("learning rates must be > 0");
  if (minibatch == 0 || replay_capacity < minibatch) {
    throw config_error("replay capacity must cover the minibatch size");
  }
  if (tau <= 0.0 || tau > 1.0) throw config_error("tau must lie in (0, 1]");
  if (eps0 < 0.0 || eps0 > 1.0 || eps_floor < 0.0 || eps_floor > 1.0 ||
      eps_decay < 0.0) {
    throw config_error("epsilon schedule out of range");
  }
  if (agent_slots <= 0) throw config_error("agent_slots must be > 0");
  if (episodes < 0) throw config_error("episodes must be >= 0");
  if (gumbel_temperature <= 0.0) throw config_error("gumbel_temperature must be > 0");
}

AgentEnsemble::AgentEnsemble(int slots, double lr_actor, double lr_critic,
                             Rng& rng)
    : agent_slots(slots) {
  if (slots <= 0) throw contract_error("agent_slots must be > 0");
  agents.resize(static_cast<std::size_t>(slots));
  for (Agent& agent : agents) {
    agent.actor.init(rng);
    agent.critic = ValueNet(static_cast<std::size_t>(slots));
    agent.critic.init(rng);
    agent.actor_target = agent.actor;
    agent.critic_target = agent.critic;
    agent.actor_opt = make_adam(lr_actor, agent.actor.params());
    agent.critic_opt = make_adam(lr_critic, agent.critic.params());
  }
}

std::vector<VehicleKind> slot_kinds(const WorldState& world) {
  std::vector<VehicleKind> kinds(world.slots());
  for (std::size_t i = 0; i < world.slots(); ++i) kinds[i] = world.non_emvs[i].kind;
  return kinds;
}

std::vector<double> joint_state_rows(const WorldState& world) {
  std::vector<double> rows(world.slots() * 7);
  for (std::size_t i = 0; i < world.slots(); ++i) {
    auto row = normalized_row(world.non_emvs[i], world.road);
    std::copy(row.begin(), row.end(), rows.begin() + static_cast<long>(i * 7));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Action selection

std::vector<int> select_actions(const AgentEnsemble& ensemble,
                                const WorldState& world,
                                std::vector<Carry>& carries, double eps,
                                double temperature, Rng& rng, bool greedy) {
  const std::size_t slots = world.slots();
  if (static_cast<int>(slots) != ensemble.agent_slots) {
    throw contract_error("world slot count does not match ensemble");
  }
  if (carries.size() != slots) throw contract_error("carry vector size mismatch");

  std::vector<int> actions(slots, 0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> coin(0, 1);
  for (std::size_t i = 0; i < slots; ++i) {
    const Vehicle& veh = world.non_emvs[i];
    switch (veh.kind) {
      case VehicleKind::Trivial:
        break;
      case VehicleKind::Hv:
        actions[i] = hv_action(veh, world.emv, world.road.hv_reaction_distance);
        break;
      case VehicleKind::Cv: {
        auto obs = local_observation(world, i).flattened();
        PolicyStepOut out =
            policy_forward(ensemble.agents[i].actor, obs, carries[i]);
        carries[i] = std::move(out.carry);
        if (greedy) {
          actions[i] = argmax2(out.probs[0], out.probs[1]);
        } else if (unit(rng) < eps) {
          actions[i] = coin(rng);
        } else {
          Matrix logits(1, 2);
          logits(0, 0) = out.logits[0];
          logits(0, 1) = out.logits[1];
          Matrix one_hot = gumbel_softmax(logits, temperature, rng, /*hard=*/true);
          actions[i] = argmax2(one_hot(0, 0), one_hot(0, 1));
        }
        break;
      }
      case VehicleKind::Emv:
        throw contract_error("EMV cannot occupy an agent slot");
    }
  }
  return actions;
}

// ---------------------------------------------------------------------------
// Updates

std::vector<double> td_target(const AgentEnsemble& ensemble,
                              const ReplayBuffer& buffer,
                              std::span<const std::size_t> batch, int agent,
                              double gamma, const RoadConfig& road) {
  const std::size_t B = batch.size();
  const int M = ensemble.agent_slots;
  if (agent < 0 || agent >= M) throw contract_error("td_target agent index");

  Matrix next_actions(B, static_cast<std::size_t>(M));
  for (int j = 0; j < M; ++j) {
    std::vector<std::size_t> cv_rows;
    for (std::size_t b = 0; b < B; ++b) {
      const Transition& tr = buffer[batch[b]];
      switch (tr.kinds[static_cast<std::size_t>(j)]) {
        case VehicleKind::Cv:
          cv_rows.push_back(b);
          break;
        case VehicleKind::Hv: {
          double x_hv = tr.next_state[static_cast<std::size_t>(j) * 7] *
                        road.segment_length;
          double x_emv = tr.next_emv_row[0] * road.segment_length;
          next_actions(b, static_cast<std::size_t>(j)) =
              (x_hv - x_emv >= road.hv_reaction_distance) ? 0.0 : 1.0;
          break;
        }
        default:
          break;  // trivial slots act 0
      }
    }
    if (cv_rows.empty()) continue;
    Matrix x(cv_rows.size(), PolicyNet::kObsDim);
    std::vector<const Carry*> carry_rows(cv_rows.size());
    for (std::size_t r = 0; r < cv_rows.size(); ++r) {
      const Transition& tr = buffer[batch[cv_rows[r]]];
      const auto& obs = tr.next_obs[static_cast<std::size_t>(j)];
      std::copy(obs.begin(), obs.end(), x.data() + r * PolicyNet::kObsDim);
      carry_rows[r] = &tr.carries_post[static_cast<std::size_t>(j)];
    }
    Matrix h, c;
    fill_carry_rows(h, c, carry_rows);
    Matrix h_out, c_out;
    PolicyNet::Cache cache;
    Matrix logits = ensemble.agents[static_cast<std::size_t>(j)]
                        .actor_target.forward(x, h, c, h_out, c_out, cache);
    for (std::size_t r = 0; r < cv_rows.size(); ++r) {
      next_actions(cv_rows[r], static_cast<std::size_t>(j)) =
          argmax2(logits(r, 0), logits(r, 1));
    }
  }

  const std::size_t state_width = static_cast<std::size_t>(M) * 7;
  Matrix x_next(B, ensemble.agents[static_cast<std::size_t>(agent)]
                       .critic_target.input_dim());
  for (std::size_t b = 0; b < B; ++b) {
    const Transition& tr = buffer[batch[b]];
    std::copy(tr.next_state.begin(), tr.next_state.end(),
              x_next.data() + b * x_next.cols());
    for (int j = 0; j < M; ++j) {
      x_next(b, state_width + static_cast<std::size_t>(j)) =
          next_actions(b, static_cast<std::size_t>(j));
    }
  }
  ValueNet::Cache cache;
  Matrix q_next = ensemble.agents[static_cast<std::size_t>(agent)]
                      .critic_target.forward(x_next, cache);

  std::vector<double> targets(B);
  for (std::size_t b = 0; b < B; ++b) {
    const Transition& tr = buffer[batch[b]];
    targets[b] = tr.reward + (tr.done ? 0.0 : gamma * q_next(b, 0));
  }
  return targets;
}

double critic_update(AgentEnsemble& ensemble, const ReplayBuffer& buffer,
                     std::span<const std::size_t> batch, int agent,
                     VehicleKind slot_kind, const TrainConfig& cfg,
                     const RoadConfig& road) {
  if (slot_kind == VehicleKind::Trivial) {
    throw contract_error("critic_update requested for a trivial slot");
  }
  if (agent < 0 || agent >= ensemble.agent_slots) {
    throw contract_error("critic_update agent index");
  }
  Agent& ag = ensemble.agents[static_cast<std::size_t>(agent)];
  const std::size_t B = batch.size();
  const std::size_t state_width = static_cast<std::size_t>(ensemble.agent_slots) * 7;

  std::vector<double> targets =
      td_target(ensemble, buffer, batch, agent, cfg.gamma, road);

  Matrix x(B, ag.critic.input_dim());
  for (std::size_t b = 0; b < B; ++b) {
    const Transition& tr = buffer[batch[b]];
    std::copy(tr.state.begin(), tr.state.end(), x.data() + b * x.cols());
    std::copy(tr.actions.begin(), tr.actions.end(),
              x.data() + b * x.cols() + state_width);
  }

  ag.critic.zero_grad();
  ValueNet::Cache cache;
  Matrix q = ag.critic.forward(x, cache);
  double loss = 0.0;
  Matrix gq(B, 1);
  for (std::size_t b = 0; b < B; ++b) {
    double diff = q(b, 0) - targets[b];
    loss += diff * diff;
    gq(b, 0) = diff / static_cast<double>(B);
  }
  loss = 0.5 * loss / static_cast<double>(B);
  ag.critic.backward(cache, gq);
  adam_step(ag.critic_opt, ag.critic.params(), ag.critic.grads());
  return loss;
}

double actor_objective(AgentEnsemble& ensemble, const ReplayBuffer& buffer,
                       std::span<const std::size_t> batch, int agent,
                       const TrainConfig& cfg, const Matrix& noise,
                       bool with_grads) {
  if (agent < 0 || agent >= ensemble.agent_slots) {
    throw contract_error("actor_objective agent index");
  }
  if (noise.rows() != batch.size() || noise.cols() != PolicyNet::kActions) {
    throw contract_error("actor_objective noise shape");
  }
  Agent& ag = ensemble.agents[static_cast<std::size_t>(agent)];
  const std::size_t state_width = static_cast<std::size_t>(ensemble.agent_slots) * 7;

  // Rows where this slot held a real vehicle; trivial rows carry no signal.
  std::vector<std::size_t> rows;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (buffer[batch[b]].kinds[static_cast<std::size_t>(agent)] !=
        VehicleKind::Trivial) {
      rows.push_back(b);
    }
  }
  if (rows.empty()) return 0.0;
  const std::size_t n = rows.size();

  Matrix x_obs(n, PolicyNet::kObsDim);
  Matrix noise_rows(n, PolicyNet::kActions);
  std::vector<const Carry*> carry_rows(n);
  for (std::size_t r = 0; r < n; ++r) {
    const Transition& tr = buffer[batch[rows[r]]];
    const auto& obs = tr.obs[static_cast<std::size_t>(agent)];
    std::copy(obs.begin(), obs.end(), x_obs.data() + r * PolicyNet::kObsDim);
    carry_rows[r] = &tr.carries_pre[static_cast<std::size_t>(agent)];
    noise_rows(r, 0) = noise(rows[r], 0);
    noise_rows(r, 1) = noise(rows[r], 1);
  }
  Matrix h, c;
  fill_carry_rows(h, c, carry_rows);

  Matrix h_out, c_out;
  PolicyNet::Cache pc;
  Matrix logits = ag.actor.forward(x_obs, h, c, h_out, c_out, pc);
  Matrix soft = gumbel_softmax_with_noise(logits, noise_rows,
                                          cfg.gumbel_temperature, /*hard=*/false);

  Matrix xq(n, ag.critic.input_dim());
  for (std::size_t r = 0; r < n; ++r) {
    const Transition& tr = buffer[batch[rows[r]]];
    std::copy(tr.state.begin(), tr.state.end(), xq.data() + r * xq.cols());
    std::copy(tr.actions.begin(), tr.actions.end(),
              xq.data() + r * xq.cols() + state_width);
    xq(r, state_width + static_cast<std::size_t>(agent)) = soft(r, 1);
  }

  ValueNet::Cache vc;
  Matrix q = ag.critic.forward(xq, vc);
  double mean_q = 0.0;
  for (std::size_t r = 0; r < n; ++r) mean_q += q(r, 0);
  mean_q /= static_cast<double>(n);

  if (with_grads) {
    ag.critic.zero_grad();
    Matrix gq(n, 1, 1.0 / static_cast<double>(n));
    Matrix gx = ag.critic.backward(vc, gq);
    ag.critic.zero_grad();  // critic parameters are frozen in the actor step
    Matrix g_soft(n, PolicyNet::kActions);
    for (std::size_t r = 0; r < n; ++r) {
      g_soft(r, 1) = gx(r, state_width + static_cast<std::size_t>(agent));
    }
    Matrix g_logits =
        gumbel_softmax_backward(soft, g_soft, cfg.gumbel_temperature);
    ag.actor.zero_grad();
    Matrix gh_prev, gc_prev;
    ag.actor.backward(pc, g_logits, Matrix(), Matrix(), gh_prev, gc_prev);
  }
  return mean_q;
}

double actor_update(AgentEnsemble& ensemble, const ReplayBuffer& buffer,
                    std::span<const std::size_t> batch, int agent,
                    VehicleKind slot_kind, const TrainConfig& cfg, Rng& rng) {
  if (slot_kind != VehicleKind::Cv) {
    throw contract_error("actor_update requires a CV slot");
  }
  Agent& ag = ensemble.agents[static_cast<std::size_t>(agent)];
  Matrix noise = sample_gumbel_noise(batch.size(), PolicyNet::kActions, rng);
  double mean_q =
      actor_objective(ensemble, buffer, batch, agent, cfg, noise, true);
  for (Matrix* g : ag.actor.grads()) {  // ascend the objective
    for (std::size_t k = 0; k < g->size(); ++k) (*g)[k] = -(*g)[k];
  }
  adam_step(ag.actor_opt, ag.actor.params(), ag.actor.grads());
  return mean_q;
}

// ---------------------------------------------------------------------------
// Training loop

std::vector<EpisodeRecord> train(const ScenarioProvider& provider,
                                 AgentEnsemble& ensemble,
                                 const TrainConfig& cfg, const IdmParams& idm,
                                 const BehaviorParams& behavior,
                                 const RewardConfig& reward_cfg,
                                 const TrainOptions& options) {
  cfg.validate();
  reward_cfg.validate();
  if (ensemble.agent_slots != cfg.agent_slots) {
    throw contract_error("ensemble size does not match TrainConfig");
  }
#ifdef _OPENMP
  if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
#endif

  ReplayBuffer buffer(cfg.replay_capacity);
  Rng action_rng = sub_rng(cfg.seed, stream::kTrain);
  Rng scenario_rng = sub_rng(cfg.seed, mix_u64(stream::kTrain, 0x5ce9a));
  double eps = cfg.eps0;
  const int slots = cfg.agent_slots;

  std::vector<EpisodeRecord> log;
  log.reserve(static_cast<std::size_t>(cfg.episodes));

  for (int ep = 0; ep < cfg.episodes; ++ep) {
    ScenarioSpec spec = provider(ep, scenario_rng);
    WorldState world = build_world(spec, slots, idm, behavior);
    const std::vector<VehicleKind> kinds = slot_kinds(world);
    std::vector<Carry> carries(static_cast<std::size_t>(slots));

    EpisodeRecord record;
    record.episode = ep;
    record.eps = eps;

    for (int t = 0; t < world.road.max_steps; ++t) {
      Transition tr;
      tr.kinds = kinds;
      tr.state = joint_state_rows(world);
      tr.emv_row = normalized_row(world.emv, world.road);
      tr.obs.resize(static_cast<std::size_t>(slots));
      for (int i = 0; i < slots; ++i) {
        tr.obs[static_cast<std::size_t>(i)] =
            local_observation(world, static_cast<std::size_t>(i)).flattened();
      }
      tr.carries_pre = carries;

      std::vector<int> actions =
          select_actions(ensemble, world, carries, eps, cfg.gumbel_temperature,
                         action_rng, /*greedy=*/false);
      StepEvents events = step(world, actions);
      double reward = team_reward(world, reward_cfg);
      bool done = events.done || events.collided();

      tr.actions.assign(actions.begin(), actions.end());
      tr.next_state = joint_state_rows(world);
      tr.next_emv_row = normalized_row(world.emv, world.road);
      tr.next_obs.resize(static_cast<std::size_t>(slots));
      for (int i = 0; i < slots; ++i) {
        tr.next_obs[static_cast<std::size_t>(i)] =
            local_observation(world, static_cast<std::size_t>(i)).flattened();
      }
      tr.carries_post = carries;
      tr.reward = reward;
      tr.done = done;
      buffer.insert(std::move(tr));

      record.episode_return += reward;
      record.steps = t + 1;

      if (buffer.size() >= cfg.minibatch) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (int i = 0; i < slots; ++i) {
          if (kinds[static_cast<std::size_t>(i)] == VehicleKind::Trivial) continue;
          Rng agent_rng =
              sub_rng(cfg.seed, mix_u64(static_cast<std::uint64_t>(ep),
                                        static_cast<std::uint64_t>(t),
                                        static_cast<std::uint64_t>(i)));
          auto batch = buffer.sample_indices(cfg.minibatch, agent_rng);
          critic_update(ensemble, buffer, batch, i,
                        kinds[static_cast<std::size_t>(i)], cfg, world.road);
          if (kinds[static_cast<std::size_t>(i)] == VehicleKind::Cv) {
            actor_update(ensemble, buffer, batch, i,
                         kinds[static_cast<std::size_t>(i)], cfg, agent_rng);
          }
        }
        for (int i = 0; i < slots; ++i) {
          VehicleKind kind = kinds[static_cast<std::size_t>(i)];
          if (kind == VehicleKind::Trivial) continue;
          Agent& ag = ensemble.agents[static_cast<std::size_t>(i)];
          soft_update(ag.critic_target.params(),
                      const_params(std::as_const(ag.critic)), cfg.tau);
          if (kind == VehicleKind::Cv) {
            soft_update(ag.actor_target.params(),
                        const_params(std::as_const(ag.actor)), cfg.tau);
          }
        }
      }

      if (done) {
        record.collided = events.collided();
        if (events.cause == DoneCause::Cleared && !record.collided) {
          record.passing_time = world.step * world.road.dt;
        }
        break;
      }
    }

    log.push_back(record);
    eps = std::max(eps - cfg.eps_decay, cfg.eps_floor);
    if (options.after_episode && options.after_episode(record, ensemble)) break;
  }

  if (!options.log_path.empty()) write_episode_log(log, options.log_path);
  if (!options.checkpoint_path.empty()) {
    CheckpointMeta meta;
    meta.episode = log.empty() ? 0 : log.back().episode + 1;
    meta.eps = eps;
    meta.train_seed = cfg.seed;
    save_checkpoint(ensemble, meta, options.checkpoint_path);
  }
  return log;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

void write_param_block(std::ostream& out, const std::vector<const Matrix*>& params) {
  std::uint32_t count = static_cast<std::uint32_t>(params.size());
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (const Matrix* p : params) write_matrix(out, *p);
}

void write_param_block(std::ostream& out, const std::vector<Matrix>& params) {
  std::uint32_t count = static_cast<std::uint32_t>(params.size());
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (const Matrix& p : params) write_matrix(out, p);
}

void read_param_block(std::istream& in, const std::vector<Matrix*>& params) {
  std::uint32_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  if (!in || count != params.size()) {
    throw parse_error("checkpoint parameter block count mismatch");
  }
  for (Matrix* p : params) {
    Matrix m = read_matrix(in);
    if (!m.same_shape(*p)) throw parse_error("checkpoint matrix shape mismatch");
    *p = std::move(m);
  }
}

std::vector<Matrix> read_matrix_list(std::istream& in) {
  std::uint32_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  if (!in) throw parse_error("truncated checkpoint");
  std::vector<Matrix> out;
  out.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) out.push_back(read_matrix(in));
  return out;
}

void write_adam(std::ostream& out, const AdamState& state) {
  out.write(reinterpret_cast<const char*>(&state.lr), sizeof(state.lr));
  out.write(reinterpret_cast<const char*>(&state.beta1), sizeof(state.beta1));
  out.write(reinterpret_cast<const char*>(&state.beta2), sizeof(state.beta2));
  out.write(reinterpret_cast<const char*>(&state.epsilon), sizeof(state.epsilon));
  std::int64_t steps = state.step_count;
  out.write(reinterpret_cast<const char*>(&steps), sizeof(steps));
  write_param_block(out, state.m);
  write_param_block(out, state.v);
}

AdamState read_adam(std::istream& in) {
  AdamState state;
  in.read(reinterpret_cast<char*>(&state.lr), sizeof(state.lr));
  in.read(reinterpret_cast<char*>(&state.beta1), sizeof(state.beta1));
  in.read(reinterpret_cast<char*>(&state.beta2), sizeof(state.beta2));
  in.read(reinterpret_cast<char*>(&state.epsilon), sizeof(state.epsilon));
  std::int64_t steps = 0;
  in.read(reinterpret_cast<char*>(&steps), sizeof(steps));
  if (!in) throw parse_error("truncated checkpoint optimizer state");
  state.step_count = steps;
  state.m = read_matrix_list(in);
  state.v = read_matrix_list(in);
  return state;
}

}  // namespace

void save_checkpoint(const AgentEnsemble& ensemble, const CheckpointMeta& meta,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open " + path.string() + " for writing");
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  out.write(reinterpret_cast<const char*>(&kCheckpointVersion),
            sizeof(kCheckpointVersion));
  std::uint32_t slots = static_cast<std::uint32_t>(ensemble.agent_slots);
  out.write(reinterpret_cast<const char*>(&slots), sizeof(slots));
  std::int64_t episode = meta.episode;
  out.write(reinterpret_cast<const char*>(&episode), sizeof(episode));
  out.write(reinterpret_cast<const char*>(&meta.eps), sizeof(meta.eps));
  out.write(reinterpret_cast<const char*>(&meta.train_seed),
            sizeof(meta.train_seed));
  for (const Agent& agent : ensemble.agents) {
    write_param_block(out, agent.actor.params());
    write_param_block(out, agent.critic.params());
    write_param_block(out, agent.actor_target.params());
    write_param_block(out, agent.critic_target.params());
    write_adam(out, agent.actor_opt);
    write_adam(out, agent.critic_opt);
  }
  if (!out) throw io_error("write failure on " + path.string());
}

AgentEnsemble load_checkpoint(const std::filesystem::path& path,
                              CheckpointMeta* meta) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  char magic[8] = {};
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw parse_error("not a dqjl checkpoint: " + path.string());
  }
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (version != kCheckpointVersion) {
    throw version_error("unsupported checkpoint version " +
                        std::to_string(version));
  }
  std::uint32_t slots = 0;
  in.read(reinterpret_cast<char*>(&slots), sizeof(slots));
  std::int64_t episode = 0;
  double eps = 0.0;
  std::uint64_t train_seed = 0;
  in.read(reinterpret_cast<char*>(&episode), sizeof(episode));
  in.read(reinterpret_cast<char*>(&eps), sizeof(eps));
  in.read(reinterpret_cast<char*>(&train_seed), sizeof(train_seed));
  if (!in || slots == 0) throw parse_error("truncated checkpoint header");

  AgentEnsemble ensemble;
  ensemble.agent_slots = static_cast<int>(slots);
  ensemble.agents.resize(slots);
  for (Agent& agent : ensemble.agents) {
    agent.critic = ValueNet(slots);
    agent.critic_target = ValueNet(slots);
    read_param_block(in, agent.actor.params());
    read_param_block(in, agent.critic.params());
    read_param_block(in, agent.actor_target.params());
    read_param_block(in, agent.critic_target.params());
    agent.actor_opt = read_adam(in);
    agent.critic_opt = read_adam(in);
  }
  if (meta != nullptr) {
    meta->episode = static_cast<int>(episode);
    meta->eps = eps;
    meta->train_seed = train_seed;
  }
  return ensemble;
}

void write_episode_log(const std::vector<EpisodeRecord>& log,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open " + path.string() + " for writing");
  out << "episode,return,steps,eps,collision,passing_time\n";
  out.precision(17);
  for (const EpisodeRecord& r : log) {
    out << r.episode << ',' << r.episode_return << ',' << r.steps << ','
        << r.eps << ',' << (r.collided ? 1 : 0) << ',';
    if (r.passing_time) out << *r.passing_time;
    out << '\n';
  }
  if (!out) throw io_error("write failure on " + path.string());
}

}  // namespace dqjl
