#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "hippo/colon.hpp"
#include "hippo/env.hpp"
#include "hippo/expert.hpp"
#include "hippo/hi.hpp"
#include "hippo/network.hpp"
#include "hippo/scope.hpp"

namespace hippo {

enum class Algorithm { Ppo, HiPpo };
std::string_view to_string(Algorithm a);
Algorithm parse_algorithm(std::string_view s);

enum class InterventionMode { None, Scripted, Remote };
std::string_view to_string(InterventionMode m);
InterventionMode parse_intervention_mode(std::string_view s);

struct PpoHyper {
  int buffer_size = 2048;
  int minibatch_size = 64;  // the "batch size" column
  int epochs = 3;
  double learning_rate = 3e-4;
  double beta = 5e-3;  // entropy coefficient
  double epsilon = 0.2;
  double value_coef = 0.5;
  double gamma = 0.99;
  double lambda = 0.95;
  bool normalize_advantages = true;
};

// Column of the hyperparameter table for the algorithm.
PpoHyper default_hyper(Algorithm a);

struct ServeConfig {
  double state_rate_hz = 20.0;
  int step_deadline_ms = 200;
};

struct RunConfig {
  Algorithm algorithm = Algorithm::HiPpo;
  ColonSpecFile colon{default_colon_segments(), 7, {}};  // the shipped colon_paper.cfg
  std::vector<std::string> segments;  // empty: the whole colon
  std::uint64_t seed = 0;
  std::uint64_t total_steps = 200000;
  std::size_t episode_step_cap = 3000;
  bool collision_terminates = true;
  double step_period_s = 0.1;  // simulated seconds per step
  InterventionMode intervention = InterventionMode::Scripted;
  int checkpoint_interval = 0;  // updates between checkpoints; 0 keeps only the final one
  bool log_training = true;
  MotionConfig motion;
  ObservationConfig observation;
  RewardConfig reward;
  ExpertConfig expert;
  PpoHyper ppo;
  NetworkConfig network;
  HIConfig hi;
  ServeConfig serve;

  // Throws Error naming the first out-of-range field.
  void validate() const;
};

nlohmann::json to_json(const RunConfig& cfg);

// Missing keys take defaults (hyperparameters from the algorithm's column);
// unknown keys are rejected. "colon" is either a path, resolved against
// `base_dir`, or an embedded colon object.
RunConfig run_config_from_json(const nlohmann::json& j,
                               const std::filesystem::path& base_dir = {});

RunConfig load_run_config(const std::filesystem::path& path);

// Sorted keys, no whitespace, shortest round-trip numbers.
std::string canonical_json(const RunConfig& cfg);

// Hex SHA-256 of canonical_json.
std::string config_hash(const RunConfig& cfg);
std::string sha256_hex(const std::string& data);

// Segment specs after applying the segment restriction.
std::vector<SegmentSpec> active_segments(const RunConfig& cfg);

}  // namespace hippo
