#include "hippo/episode_log.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace hippo {

using nlohmann::json;

namespace {

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw Error("episode log: expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json header_json(const EpisodeLog& log) {
  json config;
  try {
    config = json::parse(log.config);
  } catch (const json::parse_error&) {
    throw Error("episode log: embedded config is not JSON");
  }
  return {{"kind", "header"},
          {"format", "hippo-episode-log"},
          {"version", log.version},
          {"config_hash", log.config_hash},
          {"seed", log.seed},
          {"episode", log.episode},
          {"mode", log.mode},
          {"policy", log.policy},
          {"segments", log.segments},
          {"step_period_s", log.step_period_s},
          {"start", vec_json(log.start)},
          {"config", config}};
}

json step_json(const StepRecord& s) {
  return {{"kind", "step"},
          {"step", s.step},
          {"pos", vec_json(s.position)},
          {"depth", s.depth},
          {"segment", s.segment},
          {"action", s.action},
          {"agent_action", s.agent_action},
          {"expert_action", s.expert_action ? json(*s.expert_action) : json(nullptr)},
          {"m", s.intervened},
          {"logits", s.logits},
          {"value", s.value},
          {"base_reward", s.base_reward},
          {"reward", s.reward},
          {"wall_distance", s.wall_distance},
          {"below_threshold", s.below_threshold},
          {"collided", s.collided},
          {"path_error", s.path_error}};
}

}  // namespace

std::string format_episode_log(const EpisodeLog& log) {
  std::string out = header_json(log).dump();
  out += '\n';
  std::size_t collisions = 0, proximity = 0, interventions = 0;
  for (const auto& s : log.steps) {
    out += step_json(s).dump();
    out += '\n';
    collisions += s.collided ? 1 : 0;
    proximity += s.below_threshold ? 1 : 0;
    interventions += static_cast<std::size_t>(s.intervened);
  }
  const json summary = {{"kind", "summary"},
                        {"steps", log.steps.size()},
                        {"termination", log.termination},
                        {"reached_goal", log.reached_goal},
                        {"collisions", collisions},
                        {"proximity_events", proximity},
                        {"intervened_steps", interventions},
                        {"sim_time_s", log.sim_time_s()}};
  out += summary.dump();
  out += '\n';
  return out;
}

void write_episode_log(const EpisodeLog& log, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write episode log " + path.string());
  out << format_episode_log(log);
  if (!out) throw Error("failed writing episode log " + path.string());
}

EpisodeLog parse_episode_log(std::istream& in) {
  EpisodeLog log;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  bool have_summary = false;
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      if (have_summary) throw Error("content after the summary line");
      const json j = json::parse(line);
      const std::string kind = j.at("kind").get<std::string>();
      if (kind == "header") {
        if (have_header) throw Error("duplicate header");
        have_header = true;
        if (j.at("format").get<std::string>() != "hippo-episode-log") {
          throw Error("not an episode log");
        }
        log.version = j.at("version").get<int>();
        if (log.version != kEpisodeLogVersion) {
          throw Error("unsupported version " + std::to_string(log.version));
        }
        log.config_hash = j.at("config_hash").get<std::string>();
        log.seed = j.at("seed").get<std::uint64_t>();
        log.episode = j.at("episode").get<std::size_t>();
        log.mode = j.at("mode").get<std::string>();
        log.policy = j.at("policy").get<std::string>();
        log.segments = j.at("segments").get<std::vector<std::string>>();
        log.step_period_s = j.at("step_period_s").get<double>();
        log.start = vec_from(j.at("start"));
        log.config = j.at("config").dump();
      } else if (kind == "step") {
        if (!have_header) throw Error("step before header");
        StepRecord s;
        s.step = j.at("step").get<std::size_t>();
        if (s.step != log.steps.size()) {
          throw Error("step index " + std::to_string(s.step) + " is not contiguous");
        }
        s.position = vec_from(j.at("pos"));
        if (!s.position.allFinite()) throw Error("non-finite position");
        s.depth = j.at("depth").get<double>();
        s.segment = j.at("segment").get<std::string>();
        s.action = j.at("action").get<int>();
        s.agent_action = j.at("agent_action").get<int>();
        if (!j.at("expert_action").is_null()) s.expert_action = j.at("expert_action").get<int>();
        s.intervened = j.at("m").get<int>();
        s.logits = j.at("logits").get<std::array<double, kActionCount>>();
        s.value = j.at("value").get<double>();
        s.base_reward = j.at("base_reward").get<double>();
        s.reward = j.at("reward").get<double>();
        s.wall_distance = j.at("wall_distance").get<double>();
        s.below_threshold = j.at("below_threshold").get<bool>();
        s.collided = j.at("collided").get<bool>();
        s.path_error = j.at("path_error").get<double>();
        log.steps.push_back(std::move(s));
      } else if (kind == "summary") {
        if (!have_header) throw Error("summary before header");
        have_summary = true;
        log.termination = j.at("termination").get<std::string>();
        log.reached_goal = j.at("reached_goal").get<bool>();
        if (j.at("steps").get<std::size_t>() != log.steps.size()) {
          throw Error("summary step count disagrees with the step lines");
        }
      } else {
        throw Error("unknown line kind '" + kind + "'");
      }
    }
  } catch (const json::exception& e) {
    throw Error("episode log line " + std::to_string(line_no) + ": " + e.what());
  } catch (const Error& e) {
    throw Error("episode log line " + std::to_string(line_no) + ": " + e.what());
  }
  if (!have_header) throw Error("episode log: missing header");
  if (!have_summary) throw Error("episode log: missing summary (truncated file?)");
  return log;
}

EpisodeLog read_episode_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open episode log " + path.string());
  try {
    return parse_episode_log(in);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

std::vector<std::filesystem::path> find_episode_logs(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  if (!std::filesystem::exists(dir)) throw Error("no such directory " + dir.string());
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".jsonl") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace hippo
