#include "hippo/config.hpp"

#include <openssl/sha.h>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace hippo {

using nlohmann::json;

namespace {

// Reads keys from one JSON object and rejects the ones nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw Error(where_ + ": expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw Error(where_ + "." + key + ": " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string path(const char* key) const { return where_ + "." + key; }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw Error(where_ + ": unknown key '" + item.key() + "'");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw Error("config: " + what);
}

json colon_to_json(const ColonSpecFile& c) {
  json segs = json::array();
  for (const auto& s : c.segments) {
    json turns = json::array();
    for (const auto& t : s.turns) {
      turns.push_back({{"at", t.at_fraction},
                       {"direction", std::string(to_string(t.direction))},
                       {"angle_deg", t.angle_deg}});
    }
    segs.push_back({{"name", s.name},
                    {"length", s.length},
                    {"radius_min", s.radius_min},
                    {"radius_max", s.radius_max},
                    {"bend_radius", s.bend_radius},
                    {"turns", turns}});
  }
  return {{"seed", c.seed},
          {"options",
           {{"waypoint_spacing", c.options.waypoint_spacing},
            {"sample_step", c.options.sample_step},
            {"radius_knot_spacing", c.options.radius_knot_spacing},
            {"min_waypoint_gap", c.options.min_waypoint_gap}}},
          {"segments", segs}};
}

ColonSpecFile colon_from_json(const json& j) {
  ColonSpecFile c;
  ObjectReader r(j, "colon");
  r.get("seed", c.seed);
  if (const json* o = r.child("options")) {
    ObjectReader ro(*o, "colon.options");
    ro.get("waypoint_spacing", c.options.waypoint_spacing);
    ro.get("sample_step", c.options.sample_step);
    ro.get("radius_knot_spacing", c.options.radius_knot_spacing);
    ro.get("min_waypoint_gap", c.options.min_waypoint_gap);
    ro.finish();
  }
  const json* segs = r.child("segments");
  if (!segs || !segs->is_array()) throw Error("colon.segments: expected an array");
  for (const auto& js : *segs) {
    SegmentSpec s;
    ObjectReader rs(js, "colon.segments[]");
    rs.get("name", s.name);
    rs.get("length", s.length);
    rs.get("radius_min", s.radius_min);
    rs.get("radius_max", s.radius_max);
    rs.get("bend_radius", s.bend_radius);
    if (const json* turns = rs.child("turns")) {
      for (const auto& jt : *turns) {
        Turn t;
        std::string dir = "right";
        ObjectReader rt(jt, "colon.segments[].turns[]");
        rt.get("at", t.at_fraction);
        rt.get("direction", dir);
        rt.get("angle_deg", t.angle_deg);
        rt.finish();
        t.direction = parse_turn_direction(dir);
        s.turns.push_back(t);
      }
    }
    rs.finish();
    c.segments.push_back(std::move(s));
  }
  r.finish();
  validate_colon_spec(c.segments);
  return c;
}

}  // namespace

std::string_view to_string(Algorithm a) { return a == Algorithm::Ppo ? "ppo" : "hi-ppo"; }

Algorithm parse_algorithm(std::string_view s) {
  if (s == "ppo") return Algorithm::Ppo;
  if (s == "hi-ppo") return Algorithm::HiPpo;
  throw Error("unknown algorithm '" + std::string(s) + "' (expected ppo or hi-ppo)");
}

std::string_view to_string(InterventionMode m) {
  switch (m) {
    case InterventionMode::None: return "none";
    case InterventionMode::Scripted: return "scripted";
    case InterventionMode::Remote: return "remote";
  }
  return "?";
}

InterventionMode parse_intervention_mode(std::string_view s) {
  if (s == "none") return InterventionMode::None;
  if (s == "scripted") return InterventionMode::Scripted;
  if (s == "remote") return InterventionMode::Remote;
  throw Error("unknown intervention source '" + std::string(s) + "'");
}

PpoHyper default_hyper(Algorithm a) {
  PpoHyper h;
  if (a == Algorithm::Ppo) {
    h.minibatch_size = 1024;
    h.beta = 5e-4;
  }
  return h;
}

void RunConfig::validate() const {
  validate_colon_spec(colon.segments);
  (void)restrict_segments(colon.segments, segments);
  require(total_steps >= 1, "total_steps must be >= 1");
  require(episode_step_cap >= 1, "episode_step_cap must be >= 1");
  require(step_period_s > 0.0, "step_period_s must be positive");
  require(checkpoint_interval >= 0, "checkpoint_interval must be >= 0");
  require(motion.bend_step_deg > 0.0 && motion.bend_step_deg <= 90.0,
          "motion.bend_step_deg must lie in (0, 90]");
  require(motion.bones >= 1, "motion.bones must be >= 1");
  require(motion.max_bend_deg > 0.0 && motion.max_bend_deg <= 180.0,
          "motion.max_bend_deg must lie in (0, 180]");
  require(motion.step_scale > 0.0, "motion.step_scale must be positive");
  require(motion.proximity_threshold > 0.0, "motion.proximity_threshold must be positive");
  require(observation.rays >= 1, "observation.rays must be >= 1");
  require(observation.cone_half_angle_deg > 0.0 && observation.cone_half_angle_deg < 90.0,
          "observation.cone_half_angle_deg must lie in (0, 90)");
  require(observation.max_range > 0.0, "observation.max_range must be positive");
  require(observation.waypoint_range > 0.0, "observation.waypoint_range must be positive");
  require(std::isfinite(reward.position_weight) && std::isfinite(reward.orientation_weight) &&
              std::isfinite(reward.waypoint_bonus),
          "reward weights must be finite");
  require(expert.depth_threshold >= 0.0 && expert.depth_threshold <= 1.0,
          "expert.depth_threshold must lie in [0, 1]");
  require(ppo.buffer_size >= 1, "ppo.buffer_size must be >= 1");
  require(ppo.minibatch_size >= 1, "ppo.minibatch_size must be >= 1");
  require(ppo.epochs >= 1, "ppo.epochs must be >= 1");
  require(ppo.learning_rate > 0.0 && ppo.learning_rate < 1.0,
          "ppo.learning_rate must lie in (0, 1)");
  require(ppo.beta >= 0.0, "ppo.beta must be non-negative");
  require(ppo.epsilon > 0.0 && ppo.epsilon < 1.0, "ppo.epsilon must lie in (0, 1)");
  require(ppo.value_coef >= 0.0, "ppo.value_coef must be non-negative");
  require(ppo.gamma >= 0.0 && ppo.gamma <= 1.0, "ppo.gamma must lie in [0, 1]");
  require(ppo.lambda >= 0.0 && ppo.lambda <= 1.0, "ppo.lambda must lie in [0, 1]");
  require(network.hidden_layers >= 1, "network.hidden_layers must be >= 1");
  require(network.hidden_units >= 1, "network.hidden_units must be >= 1");
  require(network.normalize_clip > 0.0, "network.normalize_clip must be positive");
  hi.validate();
  require(serve.state_rate_hz > 0.0, "serve.state_rate_hz must be positive");
  require(serve.step_deadline_ms >= 0, "serve.step_deadline_ms must be >= 0");
}

json to_json(const RunConfig& c) {
  json segments = c.segments;
  return {
      {"algorithm", std::string(to_string(c.algorithm))},
      {"colon", colon_to_json(c.colon)},
      {"segments", segments},
      {"seed", c.seed},
      {"total_steps", c.total_steps},
      {"episode_step_cap", c.episode_step_cap},
      {"collision_terminates", c.collision_terminates},
      {"step_period_s", c.step_period_s},
      {"intervention", std::string(to_string(c.intervention))},
      {"checkpoint_interval", c.checkpoint_interval},
      {"log_training", c.log_training},
      {"motion",
       {{"bend_step_deg", c.motion.bend_step_deg},
        {"bones", c.motion.bones},
        {"max_bend_deg", c.motion.max_bend_deg},
        {"step_scale", c.motion.step_scale},
        {"proximity_threshold", c.motion.proximity_threshold},
        {"trail_length", c.motion.trail_length}}},
      {"observation",
       {{"rays", c.observation.rays},
        {"cone_half_angle_deg", c.observation.cone_half_angle_deg},
        {"max_range", c.observation.max_range},
        {"waypoint_range", c.observation.waypoint_range}}},
      {"reward",
       {{"position_weight", c.reward.position_weight},
        {"orientation_weight", c.reward.orientation_weight},
        {"waypoint_bonus", c.reward.waypoint_bonus}}},
      {"expert", {{"depth_threshold", c.expert.depth_threshold}}},
      {"ppo",
       {{"buffer_size", c.ppo.buffer_size},
        {"minibatch_size", c.ppo.minibatch_size},
        {"epochs", c.ppo.epochs},
        {"learning_rate", c.ppo.learning_rate},
        {"beta", c.ppo.beta},
        {"epsilon", c.ppo.epsilon},
        {"value_coef", c.ppo.value_coef},
        {"gamma", c.ppo.gamma},
        {"lambda", c.ppo.lambda},
        {"normalize_advantages", c.ppo.normalize_advantages}}},
      {"network",
       {{"hidden_layers", c.network.hidden_layers},
        {"hidden_units", c.network.hidden_units},
        {"normalize", c.network.normalize},
        {"normalize_clip", c.network.normalize_clip}}},
      {"hi",
       {{"penalty", c.hi.penalty},
        {"bc_weight", c.hi.bc_weight},
        {"stuck_window", c.hi.stuck_window},
        {"stuck_progress_eps", c.hi.stuck_progress_eps},
        {"human_hold_steps", c.hi.human_hold_steps}}},
      {"serve",
       {{"state_rate_hz", c.serve.state_rate_hz},
        {"step_deadline_ms", c.serve.step_deadline_ms}}},
  };
}

RunConfig run_config_from_json(const json& j, const std::filesystem::path& base_dir) {
  RunConfig c;
  ObjectReader r(j, "config");
  std::string algorithm = "hi-ppo";
  r.get("algorithm", algorithm);
  c.algorithm = parse_algorithm(algorithm);
  c.ppo = default_hyper(c.algorithm);

  const json* colon = r.child("colon");
  if (!colon) throw Error("config: missing 'colon' (path to a colon spec or an embedded object)");
  if (colon->is_string()) {
    std::filesystem::path p = colon->get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    if (!std::filesystem::exists(p)) throw Error("config: colon spec not found: " + p.string());
    c.colon = load_colon_spec(p);
  } else {
    c.colon = colon_from_json(*colon);
  }

  r.get("segments", c.segments);
  r.get("seed", c.seed);
  r.get("total_steps", c.total_steps);
  r.get("episode_step_cap", c.episode_step_cap);
  r.get("collision_terminates", c.collision_terminates);
  r.get("step_period_s", c.step_period_s);
  std::string intervention(to_string(c.intervention));
  r.get("intervention", intervention);
  c.intervention = parse_intervention_mode(intervention);
  r.get("checkpoint_interval", c.checkpoint_interval);
  r.get("log_training", c.log_training);

  if (const json* m = r.child("motion")) {
    ObjectReader o(*m, r.path("motion"));
    o.get("bend_step_deg", c.motion.bend_step_deg);
    o.get("bones", c.motion.bones);
    o.get("max_bend_deg", c.motion.max_bend_deg);
    o.get("step_scale", c.motion.step_scale);
    o.get("proximity_threshold", c.motion.proximity_threshold);
    o.get("trail_length", c.motion.trail_length);
    o.finish();
  }
  if (const json* m = r.child("observation")) {
    ObjectReader o(*m, r.path("observation"));
    o.get("rays", c.observation.rays);
    o.get("cone_half_angle_deg", c.observation.cone_half_angle_deg);
    o.get("max_range", c.observation.max_range);
    o.get("waypoint_range", c.observation.waypoint_range);
    o.finish();
  }
  if (const json* m = r.child("reward")) {
    ObjectReader o(*m, r.path("reward"));
    o.get("position_weight", c.reward.position_weight);
    o.get("orientation_weight", c.reward.orientation_weight);
    o.get("waypoint_bonus", c.reward.waypoint_bonus);
    o.finish();
  }
  if (const json* m = r.child("expert")) {
    ObjectReader o(*m, r.path("expert"));
    o.get("depth_threshold", c.expert.depth_threshold);
    o.finish();
  }
  if (const json* m = r.child("ppo")) {
    ObjectReader o(*m, r.path("ppo"));
    o.get("buffer_size", c.ppo.buffer_size);
    o.get("minibatch_size", c.ppo.minibatch_size);
    o.get("epochs", c.ppo.epochs);
    o.get("learning_rate", c.ppo.learning_rate);
    o.get("beta", c.ppo.beta);
    o.get("epsilon", c.ppo.epsilon);
    o.get("value_coef", c.ppo.value_coef);
    o.get("gamma", c.ppo.gamma);
    o.get("lambda", c.ppo.lambda);
    o.get("normalize_advantages", c.ppo.normalize_advantages);
    o.finish();
  }
  if (const json* m = r.child("network")) {
    ObjectReader o(*m, r.path("network"));
    o.get("hidden_layers", c.network.hidden_layers);
    o.get("hidden_units", c.network.hidden_units);
    o.get("normalize", c.network.normalize);
    o.get("normalize_clip", c.network.normalize_clip);
    o.finish();
  }
  if (const json* m = r.child("hi")) {
    ObjectReader o(*m, r.path("hi"));
    o.get("penalty", c.hi.penalty);
    o.get("bc_weight", c.hi.bc_weight);
    o.get("stuck_window", c.hi.stuck_window);
    o.get("stuck_progress_eps", c.hi.stuck_progress_eps);
    o.get("human_hold_steps", c.hi.human_hold_steps);
    o.finish();
  }
  if (const json* m = r.child("serve")) {
    ObjectReader o(*m, r.path("serve"));
    o.get("state_rate_hz", c.serve.state_rate_hz);
    o.get("step_deadline_ms", c.serve.step_deadline_ms);
    o.finish();
  }
  r.finish();

  // Single sources of truth for values several modules need.
  c.observation.max_bend_deg = c.motion.max_bend_deg;
  c.expert.bend_step_deg = c.motion.bend_step_deg;
  c.expert.max_bend_deg = c.motion.max_bend_deg;
  c.reward.step_scale = c.motion.step_scale;

  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error("config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j, path.parent_path());
}

std::string canonical_json(const RunConfig& cfg) { return to_json(cfg).dump(); }

std::string sha256_hex(const std::string& data) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), digest);
  std::ostringstream out;
  for (unsigned char b : digest) out << std::hex << std::setw(2) << std::setfill('0') << int{b};
  return out.str();
}

std::string config_hash(const RunConfig& cfg) { return sha256_hex(canonical_json(cfg)); }

std::vector<SegmentSpec> active_segments(const RunConfig& cfg) {
  if (cfg.segments.empty()) return cfg.colon.segments;
  return restrict_segments(cfg.colon.segments, cfg.segments);
}

}  // namespace hippo
