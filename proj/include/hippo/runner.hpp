#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hippo/checkpoint.hpp"
#include "hippo/config.hpp"
#include "hippo/metrics.hpp"

namespace hippo {

struct Environment {
  ColonModel model;
  MotionConfig motion;
  ObservationConfig observation;
  RewardConfig reward;
  std::size_t step_cap = 3000;
  bool collision_terminates = true;
};

// Colon built from the configuration's segment restriction.
Environment make_environment(const RunConfig& cfg);

struct EnvStep {
  ScopeState attempted;  // state produced by the action
  ScopeState next;       // state the episode continues from
  ProximityReport proximity;
  RewardTerms reward;
  double path_error = 0.0;
  std::string segment;
  bool collided = false;
  bool reached_goal = false;
  bool done = false;  // goal, or a collision when collisions terminate
};

// One environment transition. A collision either ends the episode or, when
// collisions do not terminate, leaves the scope where it was.
EnvStep env_step(const Environment& env, const ScopeState& scope, Action a);

// Independent RNG stream per purpose, derived from the run seed.
std::uint64_t stream_seed(std::uint64_t seed, std::string_view purpose);

struct UpdateRecord {
  std::uint64_t env_steps = 0;
  std::uint64_t episodes = 0;
  UpdateStats stats;
  double mean_return = 0.0;  // over episodes finished since the previous update
  double mean_length = 0.0;
  double goal_rate = 0.0;
  std::size_t intervened_steps = 0;
};

struct TrainStats {
  std::uint64_t env_steps = 0;
  std::uint64_t episodes = 0;
  std::uint64_t updates = 0;
  std::uint64_t goals = 0;
  std::uint64_t collisions = 0;
  std::uint64_t intervened_steps = 0;
  std::uint64_t intervention_edges = 0;
  std::vector<UpdateRecord> history;
};

std::string format_train_stats_csv(const TrainStats& stats);

// Per-step notification for observers such as the live session server.
struct StepEvent {
  std::size_t episode = 0;
  const StepRecord& record;
  const ScopeState& scope;
  const Observation* observation = nullptr;  // at the new state, when there is one
  const Environment& env;
};

struct TrainHooks {
  // Replaces the configured intervention source (hi-ppo only).
  InterventionSource* source = nullptr;
  std::function<void(const StepEvent&)> on_step;
  // Receives each finished episode; logs are kept in the result when unset.
  std::function<void(EpisodeLog&&)> on_episode;
  std::function<void(const Checkpoint&)> on_checkpoint;  // periodic checkpoints
};

struct TrainResult {
  Checkpoint checkpoint;  // last good parameters
  std::vector<EpisodeLog> logs;
  TrainStats stats;
  bool aborted = false;
  std::string abort_reason;
};

// Deterministic in (cfg, scripted source). A non-finite loss aborts training
// and returns the last good checkpoint with `aborted` set.
TrainResult train(const RunConfig& cfg, const TrainHooks& hooks = {});

struct EvaluateOptions {
  std::vector<std::string> segments;  // empty: the checkpoint's own environment
  std::size_t episodes = 1;
  bool deterministic = true;
  std::uint64_t seed = 0;  // stochastic action sampling only
};

// One log per (segment, episode). Throws Error when the checkpoint's embedded
// configuration does not hash to its recorded hash.
std::vector<EpisodeLog> evaluate(const Checkpoint& ckpt, const EvaluateOptions& opts);

// Farthest-point controller run on the configured environment.
EpisodeLog run_expert_episode(const RunConfig& cfg);

struct Divergence {
  std::size_t step = 0;
  std::string field;
  double expected = 0.0;  // recomputed; NaN for vector fields
  double logged = 0.0;
  double error = 0.0;  // absolute difference, or distance for vectors
};

struct ReplayReport {
  bool hash_ok = false;
  std::string message;  // reason when refused
  std::size_t steps_checked = 0;
  std::vector<Divergence> divergences;
  double tolerance = 1e-9;

  bool ok() const { return hash_ok && divergences.empty(); }
  const Divergence* first() const { return divergences.empty() ? nullptr : &divergences.front(); }
};

// Re-executes the logged actions from the embedded configuration and compares
// positions, wall distances, rewards and derived fields. Refuses logs whose
// embedded configuration does not hash to the recorded hash, or differs from
// `expected_hash` when given.
ReplayReport replay(const EpisodeLog& log, const std::optional<std::string>& expected_hash = {},
                    double tolerance = 1e-9);

std::string format_replay_report(const ReplayReport& r);

}  // namespace hippo
