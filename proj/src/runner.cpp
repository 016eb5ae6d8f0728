#include "hippo/runner.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "hippo/expert.hpp"

namespace hippo {

namespace {

EpisodeLog new_log(const RunConfig& cfg, const std::string& canonical, const std::string& hash,
                   const Environment& env, std::size_t episode, std::string mode,
                   std::string policy) {
  EpisodeLog log;
  log.version = 1;
  log.config_hash = hash;
  log.config = canonical;
  log.seed = cfg.seed;
  log.episode = episode;
  log.mode = std::move(mode);
  log.policy = std::move(policy);
  for (const auto& s : env.model.segments()) log.segments.push_back(s.name);
  log.step_period_s = cfg.step_period_s;
  log.start = initial_scope(env.model, env.motion).tip_position;
  return log;
}

StepRecord make_record(std::size_t t, const EnvStep& st, Action executed, Action agent,
                       const std::array<double, kActionCount>& logits, double value,
                       const Arbitration& arb, double base, double reward) {
  StepRecord r;
  r.step = t;
  r.position = st.attempted.tip_position;
  r.depth = st.attempted.insertion_depth;
  r.segment = st.segment;
  r.action = to_index(executed);
  r.agent_action = to_index(agent);
  if (arb.expert_action) r.expert_action = to_index(*arb.expert_action);
  r.intervened = arb.flag;
  r.logits = logits;
  r.value = value;
  r.base_reward = base;
  r.reward = reward;
  r.wall_distance = st.proximity.wall_distance;
  r.below_threshold = st.proximity.below_threshold;
  r.collided = st.collided;
  r.path_error = st.path_error;
  return r;
}

std::string termination_of(const EnvStep& st) {
  if (st.reached_goal) return "goal";
  if (st.done) return "collision";
  return "step_cap";
}

// Runs one episode without learning or interventions. `choose` maps the
// observation to (action, logits, value).
template <class Choose>
EpisodeLog run_episode(const Environment& env, EpisodeLog log, Choose&& choose) {
  ScopeState scope = initial_scope(env.model, env.motion);
  const Arbitration none{};
  for (std::size_t t = 0; t < env.step_cap; ++t) {
    const Observation obs = observe(env.model, scope, env.observation);
    const auto [action, logits, value] = choose(obs, scope);
    const EnvStep st = env_step(env, scope, action);
    const double base = st.reward.total();
    log.steps.push_back(make_record(t, st, action, action, logits, value, none, base, base));
    scope = st.next;
    if (st.done || t + 1 == env.step_cap) {
      log.termination = termination_of(st);
      log.reached_goal = st.reached_goal;
      break;
    }
  }
  return log;
}

}  // namespace

Environment make_environment(const RunConfig& cfg) {
  const auto segs = active_segments(cfg);
  Environment env{build_colon(segs, cfg.colon.seed, cfg.colon.options),
                  cfg.motion,
                  cfg.observation,
                  cfg.reward,
                  cfg.episode_step_cap,
                  cfg.collision_terminates};
  return env;
}

EnvStep env_step(const Environment& env, const ScopeState& scope, Action a) {
  StepOutcome o = apply_action(env.model, scope, a, env.motion);
  EnvStep st;
  st.proximity = o.proximity;
  st.reward = reward_terms(env.model, scope, o.scope, env.reward);
  st.path_error = env.model.project(o.scope.tip_position).distance;
  st.segment = env.model.segment_at(o.scope.insertion_depth);
  st.collided = o.proximity.collided;
  st.reached_goal = !st.collided && o.scope.insertion_depth >= env.model.total_length();
  st.done = st.reached_goal || (st.collided && env.collision_terminates);
  st.next = st.collided && !env.collision_terminates ? scope : o.scope;
  st.attempted = std::move(o.scope);
  return st;
}

std::uint64_t stream_seed(std::uint64_t seed, std::string_view purpose) {
  return mix_seed(seed ^ hash_string(purpose));
}

std::string format_train_stats_csv(const TrainStats& stats) {
  std::ostringstream out;
  out.precision(10);
  out << "update,env_steps,episodes,mean_return,mean_length,goal_rate,intervened_steps,policy,"
         "value,entropy,bc,approx_kl,clip_fraction\n";
  for (std::size_t i = 0; i < stats.history.size(); ++i) {
    const auto& h = stats.history[i];
    out << i + 1 << ',' << h.env_steps << ',' << h.episodes << ',' << h.mean_return << ','
        << h.mean_length << ',' << h.goal_rate << ',' << h.intervened_steps << ','
        << h.stats.policy << ',' << h.stats.value << ',' << h.stats.entropy << ',' << h.stats.bc
        << ',' << h.stats.approx_kl << ',' << h.stats.clip_fraction << "\n";
  }
  return out.str();
}

TrainResult train(const RunConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  const Environment env = make_environment(cfg);
  const std::string canonical = canonical_json(cfg);
  const std::string hash = sha256_hex(canonical);
  const bool hi = cfg.algorithm == Algorithm::HiPpo;
  const int obs_size = static_cast<int>(Observation::feature_size(cfg.observation.rays));

  PolicyParams params = init_policy(obs_size, cfg.network, stream_seed(cfg.seed, "init"));
  Adam adam(params, AdamConfig{cfg.ppo.learning_rate});
  Rng action_rng(stream_seed(cfg.seed, "act"));
  Rng update_rng(stream_seed(cfg.seed, "update"));
  RolloutBuffer buffer(static_cast<std::size_t>(cfg.ppo.buffer_size));
  UpdateConfig ucfg;
  ucfg.epochs = cfg.ppo.epochs;
  ucfg.minibatch_size = cfg.ppo.minibatch_size;
  ucfg.loss = LossConfig{cfg.ppo.epsilon, cfg.ppo.beta, cfg.ppo.value_coef};
  ucfg.bc_weight = hi ? cfg.hi.bc_weight : 0.0;

  std::unique_ptr<InterventionSource> owned;
  InterventionSource* source = nullptr;
  if (hi) {
    if (hooks.source) {
      source = hooks.source;
    } else if (cfg.intervention == InterventionMode::Scripted) {
      owned = std::make_unique<ScriptedExpertSource>(cfg.hi, cfg.expert);
      source = owned.get();
    } else if (cfg.intervention == InterventionMode::Remote) {
      throw Error("remote interventions need a live session (use serve)");
    }
  }

  TrainResult result;
  TrainStats& stats = result.stats;
  auto checkpoint = [&] {
    return Checkpoint{hash, canonical, stats.env_steps, stats.updates, params};
  };

  UpdateRecord window;
  double window_return = 0.0;
  std::size_t window_length = 0, window_goals = 0, window_episodes = 0;

  for (std::size_t episode = 0; stats.env_steps < cfg.total_steps && !result.aborted; ++episode) {
    EpisodeLog log = new_log(cfg, canonical, hash, env, episode, "train",
                             std::string(to_string(cfg.algorithm)));
    ScopeState scope = initial_scope(env.model, env.motion);
    ProgressWindow progress(cfg.hi.stuck_window);
    progress.reset(scope.insertion_depth);
    if (source) source->reset_episode(episode);
    Observation obs = observe(env.model, scope, env.observation);
    int prev_flag = 0;
    double episode_return = 0.0;

    for (std::size_t t = 0;; ++t) {
      const std::vector<double> features = obs.features();
      const PolicyOutput out = forward(params, features);
      const auto probs = softmax(out.logits);
      const Action agent = action_from_index(action_rng.categorical(probs));

      Arbitration arb{agent, 0, std::nullopt};
      if (source) {
        const auto history = progress.samples();
        const StepContext ctx{env.model, scope, obs, history, t};
        InterventionState iv = source->begin_step(ctx);
        iv.prev_flag = prev_flag;
        arb = arbitrate(agent, iv);
      }

      const EnvStep st = env_step(env, scope, arb.executed);
      const double base = st.reward.total();
      const double reward = hi ? adjust_reward(base, arb.flag, prev_flag, cfg.hi.penalty) : base;
      const bool done = st.done || t + 1 >= env.step_cap;

      Transition tr;
      tr.obs = features;
      tr.executed_action = to_index(arb.executed);
      tr.agent_logits = out.logits;
      tr.logprob_old = log_softmax(out.logits)[static_cast<std::size_t>(tr.executed_action)];
      if (arb.expert_action) tr.expert_action = to_index(*arb.expert_action);
      tr.intervened = arb.flag;
      tr.reward = reward;
      tr.value = out.value;
      tr.done = done;
      buffer.add(std::move(tr));

      log.steps.push_back(
          make_record(t, st, arb.executed, agent, out.logits, out.value, arb, base, reward));
      ++stats.env_steps;
      stats.collisions += st.collided ? 1 : 0;
      stats.intervened_steps += static_cast<std::uint64_t>(arb.flag);
      stats.intervention_edges += arb.flag == 1 && prev_flag == 0 ? 1 : 0;
      window.intervened_steps += static_cast<std::size_t>(arb.flag);
      episode_return += reward;

      progress.push({st.next.insertion_depth, st.collided});
      scope = st.next;
      std::optional<Observation> next_obs;
      if (!done) next_obs = observe(env.model, scope, env.observation);
      if (source) {
        const auto history = progress.samples();
        const StepContext ctx{env.model, scope, next_obs ? *next_obs : obs, history, t + 1};
        source->end_step(ctx, arb);
      }
      if (hooks.on_step) {
        hooks.on_step(StepEvent{episode, log.steps.back(), scope,
                                next_obs ? &*next_obs : nullptr, env});
      }
      prev_flag = arb.flag;

      if (buffer.full()) {
        const double bootstrap = done ? 0.0 : forward(params, next_obs->features()).value;
        buffer.compute_advantages(bootstrap, cfg.ppo.gamma, cfg.ppo.lambda,
                                  cfg.ppo.normalize_advantages);
        try {
          window.stats = update(params, adam, buffer, ucfg, update_rng);
          ++stats.updates;
          window.env_steps = stats.env_steps;
          window.episodes = stats.episodes;
          window.mean_return = window_episodes ? window_return / window_episodes : 0.0;
          window.mean_length =
              window_episodes ? static_cast<double>(window_length) / window_episodes : 0.0;
          window.goal_rate =
              window_episodes ? static_cast<double>(window_goals) / window_episodes : 0.0;
          stats.history.push_back(window);
          window = UpdateRecord{};
          window_return = 0.0;
          window_length = window_goals = window_episodes = 0;
          if (cfg.checkpoint_interval > 0 && hooks.on_checkpoint &&
              stats.updates % static_cast<std::uint64_t>(cfg.checkpoint_interval) == 0) {
            hooks.on_checkpoint(checkpoint());
          }
        } catch (const NumericError& e) {
          result.aborted = true;
          result.abort_reason = e.what();
        }
        buffer.clear();
      }

      if (done) {
        log.termination = termination_of(st);
        log.reached_goal = st.reached_goal;
        break;
      }
      if (result.aborted || stats.env_steps >= cfg.total_steps) {
        log.termination = result.aborted ? "aborted" : "budget";
        break;
      }
      obs = std::move(*next_obs);
    }

    ++stats.episodes;
    stats.goals += log.reached_goal ? 1 : 0;
    window_return += episode_return;
    window_length += log.steps.size();
    window_goals += log.reached_goal ? 1 : 0;
    ++window_episodes;
    if (hooks.on_episode) {
      hooks.on_episode(std::move(log));
    } else if (cfg.log_training) {
      result.logs.push_back(std::move(log));
    }
  }

  result.checkpoint = checkpoint();
  return result;
}

std::vector<EpisodeLog> evaluate(const Checkpoint& ckpt, const EvaluateOptions& opts) {
  if (sha256_hex(ckpt.config) != ckpt.config_hash) {
    throw Error("checkpoint/config mismatch: embedded configuration hashes to " +
                sha256_hex(ckpt.config) + ", checkpoint records " + ckpt.config_hash);
  }
  RunConfig base;
  try {
    base = run_config_from_json(nlohmann::json::parse(ckpt.config));
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("checkpoint: embedded configuration is not JSON: ") + e.what());
  }
  const auto expected = static_cast<int>(Observation::feature_size(base.observation.rays));
  if (ckpt.params.observation_size() != expected) {
    throw Error("checkpoint/config mismatch: network input size " +
                std::to_string(ckpt.params.observation_size()) + " but the configuration needs " +
                std::to_string(expected));
  }
  base.intervention = InterventionMode::None;
  base.seed = opts.seed;

  std::vector<std::vector<std::string>> groups;
  if (opts.segments.empty()) {
    groups.push_back(base.segments);
  } else {
    for (const auto& s : opts.segments) groups.push_back({s});
  }

  std::vector<EpisodeLog> logs;
  for (const auto& group : groups) {
    RunConfig cfg = base;
    cfg.segments = group;
    cfg.validate();
    const Environment env = make_environment(cfg);
    const std::string canonical = canonical_json(cfg);
    const std::string hash = sha256_hex(canonical);
    Rng rng(stream_seed(opts.seed, "evaluate"));
    for (std::size_t ep = 0; ep < opts.episodes; ++ep) {
      EpisodeLog log = new_log(cfg, canonical, hash, env, ep, "evaluate",
                               std::string(to_string(cfg.algorithm)));
      logs.push_back(run_episode(env, std::move(log), [&](const Observation& obs,
                                                          const ScopeState&) {
        const PolicyOutput out = forward(ckpt.params, obs.features());
        const int a = opts.deterministic ? argmax(out.logits)
                                         : rng.categorical(softmax(out.logits));
        return std::tuple{action_from_index(a), out.logits, out.value};
      }));
    }
  }
  return logs;
}

EpisodeLog run_expert_episode(const RunConfig& cfg) {
  cfg.validate();
  const Environment env = make_environment(cfg);
  const std::string canonical = canonical_json(cfg);
  EpisodeLog log = new_log(cfg, canonical, sha256_hex(canonical), env, 0, "expert", "expert");
  ExpertMemory memory;
  return run_episode(env, std::move(log), [&](const Observation& obs, const ScopeState& scope) {
    const Action a = expert_step(env.model, scope, obs, memory, cfg.expert);
    return std::tuple{a, std::array<double, kActionCount>{}, 0.0};
  });
}

ReplayReport replay(const EpisodeLog& log, const std::optional<std::string>& expected_hash,
                    double tolerance) {
  ReplayReport r;
  r.tolerance = tolerance;
  const std::string actual = sha256_hex(log.config);
  if (actual != log.config_hash) {
    r.message = "refused: embedded configuration hashes to " + actual + " but the log records " +
                log.config_hash;
    return r;
  }
  if (expected_hash && *expected_hash != log.config_hash) {
    r.message = "refused: log config hash " + log.config_hash + " differs from expected " +
                *expected_hash;
    return r;
  }
  RunConfig cfg;
  try {
    cfg = run_config_from_json(nlohmann::json::parse(log.config));
  } catch (const std::exception& e) {
    r.message = std::string("refused: embedded configuration is invalid: ") + e.what();
    return r;
  }
  if (canonical_json(cfg) != log.config) {
    r.message = "refused: embedded configuration is not in canonical form";
    return r;
  }
  r.hash_ok = true;

  const Environment env = make_environment(cfg);
  const bool hi = cfg.algorithm == Algorithm::HiPpo;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  auto scalar = [&](std::size_t step, const char* field, double expected, double logged) {
    const double err = std::abs(expected - logged);
    if (!(err <= tolerance)) r.divergences.push_back({step, field, expected, logged, err});
  };

  ScopeState scope = initial_scope(env.model, env.motion);
  {
    const double err = (scope.tip_position - log.start).norm();
    if (!(err <= tolerance)) r.divergences.push_back({0, "start", nan, nan, err});
  }
  int prev_flag = 0;
  bool ended = false;
  bool reached_goal = false;
  for (const auto& rec : log.steps) {
    const std::size_t i = rec.step;
    if (ended) {
      r.divergences.push_back({i, "after_terminal", nan, nan, 0.0});
      break;
    }
    if (rec.action < 0 || rec.action >= kActionCount) {
      r.divergences.push_back({i, "action", nan, static_cast<double>(rec.action), 0.0});
      break;
    }
    if (rec.intervened != 0 && rec.intervened != 1) {
      r.divergences.push_back({i, "m", nan, static_cast<double>(rec.intervened), 0.0});
    }
    if (rec.intervened == 1 && (!rec.expert_action || *rec.expert_action != rec.action)) {
      r.divergences.push_back({i, "expert_action", static_cast<double>(rec.action),
                               rec.expert_action ? *rec.expert_action : nan, 0.0});
    }
    const EnvStep st = env_step(env, scope, action_from_index(rec.action));
    const double pos_err = (st.attempted.tip_position - rec.position).norm();
    if (!(pos_err <= tolerance)) r.divergences.push_back({i, "position", nan, nan, pos_err});
    scalar(i, "depth", st.attempted.insertion_depth, rec.depth);
    scalar(i, "wall_distance", st.proximity.wall_distance, rec.wall_distance);
    scalar(i, "path_error", st.path_error, rec.path_error);
    const double base = st.reward.total();
    scalar(i, "base_reward", base, rec.base_reward);
    const double reward = hi ? adjust_reward(base, rec.intervened, prev_flag, cfg.hi.penalty) : base;
    scalar(i, "reward", reward, rec.reward);
    scalar(i, "collided", st.collided ? 1.0 : 0.0, rec.collided ? 1.0 : 0.0);
    scalar(i, "below_threshold", st.proximity.below_threshold ? 1.0 : 0.0,
           rec.below_threshold ? 1.0 : 0.0);
    if (st.segment != rec.segment) r.divergences.push_back({i, "segment", nan, nan, 0.0});
    ++r.steps_checked;
    prev_flag = rec.intervened;
    reached_goal = st.reached_goal;
    ended = st.done;
    scope = st.next;
  }
  if (reached_goal != log.reached_goal) {
    r.divergences.push_back({log.steps.empty() ? 0 : log.steps.size() - 1, "reached_goal",
                             reached_goal ? 1.0 : 0.0, log.reached_goal ? 1.0 : 0.0, 1.0});
  }
  return r;
}

std::string format_replay_report(const ReplayReport& r) {
  std::ostringstream out;
  out.precision(12);
  if (!r.hash_ok) {
    out << r.message << "\n";
    return out.str();
  }
  out << "checked " << r.steps_checked << " steps, " << r.divergences.size()
      << " divergence(s) at tolerance " << r.tolerance << "\n";
  if (const Divergence* d = r.first()) {
    out << "first divergence: step " << d->step << " field " << d->field;
    if (!std::isnan(d->expected)) out << " recomputed " << d->expected;
    if (!std::isnan(d->logged)) out << " logged " << d->logged;
    out << " error " << d->error << "\n";
  }
  return out.str();
}

}  // namespace hippo
