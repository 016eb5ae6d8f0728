#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <boost/algorithm/string.hpp>

#include "hippo/checkpoint.hpp"
#include "hippo/config.hpp"
#include "hippo/episode_log.hpp"
#include "hippo/runner.hpp"
#include "hippo/session.hpp"

namespace fs = std::filesystem;
using namespace hippo;

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  boost::split(out, s, boost::is_any_of(","));
  for (auto& x : out) boost::trim(x);
  std::erase_if(out, [](const std::string& x) { return x.empty(); });
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string log_name(const EpisodeLog& log) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "episode_%06zu.jsonl", log.episode);
  return buf;
}

std::string checkpoint_name(std::uint64_t updates) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "checkpoint_%06llu.bin", static_cast<unsigned long long>(updates));
  return buf;
}

void print_episode_summary(const std::vector<EpisodeLog>& logs) {
  for (const auto& log : logs) {
    const std::string seg = log.segments.empty() ? "all" : boost::join(log.segments, "+");
    std::vector<double> errors;
    for (const auto& s : log.steps) errors.push_back(s.path_error);
    std::printf("%-14s episode %zu: %s after %zu steps, ATE %.3f mm, security %.4f\n",
                seg.c_str(), log.episode, log.termination.c_str(), log.steps.size(),
                errors.empty() ? 0.0 : mean_std(errors).mean,
                log.steps.empty() ? 1.0 : security(log));
  }
}

struct TrainArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> steps;
  std::string out;
};

int run_train(const TrainArgs& a) {
  RunConfig cfg = load_run_config(a.config);
  if (a.seed) cfg.seed = *a.seed;
  if (a.steps) cfg.total_steps = *a.steps;
  cfg.validate();
  const fs::path out(a.out);
  fs::create_directories(out);
  write_text(out / "config.json", to_json(cfg).dump(2) + "\n");

  TrainHooks hooks;
  std::size_t written = 0;
  if (cfg.log_training) {
    hooks.on_episode = [&](EpisodeLog&& log) {
      write_episode_log(log, out / "logs" / log_name(log));
      ++written;
    };
  } else {
    hooks.on_episode = [](EpisodeLog&&) {};
  }
  hooks.on_checkpoint = [&](const Checkpoint& c) {
    save_checkpoint(c, out / "checkpoints" / checkpoint_name(c.updates));
  };
  const TrainResult r = train(cfg, hooks);
  save_checkpoint(r.checkpoint, out / "checkpoint.bin");
  write_text(out / "train_stats.csv", format_train_stats_csv(r.stats));
  std::printf("config %s\n", r.checkpoint.config_hash.c_str());
  std::printf("%llu env steps, %llu episodes, %llu updates, %llu goals, %llu collisions, "
              "%llu intervened steps; %zu logs in %s\n",
              static_cast<unsigned long long>(r.stats.env_steps),
              static_cast<unsigned long long>(r.stats.episodes),
              static_cast<unsigned long long>(r.stats.updates),
              static_cast<unsigned long long>(r.stats.goals),
              static_cast<unsigned long long>(r.stats.collisions),
              static_cast<unsigned long long>(r.stats.intervened_steps), written,
              (out / "logs").string().c_str());
  if (r.aborted) {
    std::fprintf(stderr, "training aborted: %s (last good checkpoint saved)\n",
                 r.abort_reason.c_str());
    return 3;
  }
  return 0;
}

struct EvalArgs {
  std::string checkpoint;
  std::string segments;
  std::size_t episodes = 1;
  bool stochastic = false;
  std::uint64_t seed = 0;
  std::string out;
};

int run_evaluate(const EvalArgs& a) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  EvaluateOptions opts;
  opts.segments = split_list(a.segments);
  opts.episodes = a.episodes;
  opts.deterministic = !a.stochastic;
  opts.seed = a.seed;
  const auto logs = evaluate(ckpt, opts);
  const fs::path out = a.out.empty() ? fs::path(a.checkpoint).parent_path() / "eval" : fs::path(a.out);
  for (const auto& log : logs) {
    const std::string seg = log.segments.empty() ? "all" : boost::join(log.segments, "+");
    write_episode_log(log, out / seg / log_name(log));
  }
  print_episode_summary(logs);
  std::printf("%zu logs in %s\n", logs.size(), out.string().c_str());
  return 0;
}

struct ReportArgs {
  std::vector<std::string> logs;
  std::string baseline = "ppo";
  std::string candidate = "hi-ppo";
  std::string csv;
  std::string svg_dir;
};

int run_report(const ReportArgs& a) {
  std::vector<EpisodeLog> logs;
  for (const auto& dir : a.logs) {
    const auto files = fs::is_directory(dir) ? find_episode_logs(dir) : std::vector<fs::path>{dir};
    for (const auto& f : files) logs.push_back(read_episode_log(f));
  }
  if (logs.empty()) throw Error("no episode logs found");
  ReportOptions opts;
  opts.baseline = a.baseline;
  opts.candidate = a.candidate;
  const ComparisonReport report = compare_report(logs, opts);
  std::cout << format_report(report);
  if (!a.csv.empty()) write_text(a.csv, format_report_csv(report));
  if (!a.svg_dir.empty()) {
    std::size_t i = 0;
    for (const auto& log : logs) {
      const RunConfig cfg = run_config_from_json(nlohmann::json::parse(log.config));
      const Environment env = make_environment(cfg);
      std::vector<Vec3> traj{log.start};
      for (const auto& s : log.steps) traj.push_back(s.position);
      const std::string seg = log.segments.empty() ? "all" : boost::join(log.segments, "+");
      char name[128];
      std::snprintf(name, sizeof name, "%03zu_%s_%s_ep%zu.svg", i++, log.policy.c_str(),
                    seg.c_str(), log.episode);
      write_text(fs::path(a.svg_dir) / name, trajectory_svg(env.model, traj));
    }
  }
  return 0;
}

int run_replay(const std::string& path, const std::string& expected_hash, double tol) {
  const EpisodeLog log = read_episode_log(path);
  const ReplayReport r =
      replay(log, expected_hash.empty() ? std::nullopt : std::optional(expected_hash), tol);
  std::cout << format_replay_report(r);
  if (!r.hash_ok) return 2;
  return r.ok() ? 0 : 1;
}

int run_serve(const std::string& config, const std::string& listen,
              std::optional<std::uint64_t> seed, const std::string& out) {
  RunConfig cfg = load_run_config(config);
  if (seed) cfg.seed = *seed;
  const auto [host, port] = parse_listen_address(listen);
  ServeOptions opts;
  opts.address = host;
  opts.port = port;
  opts.on_listening = [](unsigned short p) {
    std::printf("listening on port %u\n", static_cast<unsigned>(p));
    std::fflush(stdout);
  };
  opts.on_episode = [&](EpisodeLog&& log) {
    if (!out.empty()) write_episode_log(log, fs::path(out) / "logs" / log_name(log));
    print_episode_summary({log});
    std::fflush(stdout);
  };
  const TrainResult r = serve(cfg, opts);
  if (!out.empty()) save_checkpoint(r.checkpoint, fs::path(out) / "checkpoint.bin");
  return r.aborted ? 3 : 0;
}

int run_expert(const std::string& config, const std::string& segments, const std::string& out) {
  RunConfig cfg = load_run_config(config);
  if (!segments.empty()) cfg.segments = split_list(segments);
  const EpisodeLog log = run_expert_episode(cfg);
  if (!out.empty()) write_episode_log(log, out);
  print_episode_summary({log});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Human-intervention PPO for robotic endoscope navigation"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "train a policy and write checkpoint and logs");
  train_cmd->add_option("--config", ta.config, "run configuration (JSON)")->required();
  train_cmd->add_option("--seed", ta.seed, "override the configured seed");
  train_cmd->add_option("--steps", ta.steps, "override the total environment steps");
  train_cmd->add_option("--out", ta.out, "output directory")->required();

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("evaluate", "run a checkpoint without learning");
  eval_cmd->add_option("--checkpoint", ea.checkpoint, "checkpoint file")->required();
  eval_cmd->add_option("--segments", ea.segments, "comma separated segment names");
  eval_cmd->add_option("--episodes", ea.episodes, "episodes per segment")->check(CLI::PositiveNumber);
  eval_cmd->add_flag("--stochastic", ea.stochastic, "sample actions instead of argmax");
  eval_cmd->add_option("--seed", ea.seed, "sampling seed for --stochastic");
  eval_cmd->add_option("--out", ea.out, "log directory (default: eval/ next to the checkpoint)");

  ReportArgs ra;
  auto* report_cmd = app.add_subcommand("report", "compare ATE and security across logs");
  report_cmd->add_option("--logs", ra.logs, "log directories or files")->required();
  report_cmd->add_option("--baseline", ra.baseline, "baseline policy label");
  report_cmd->add_option("--candidate", ra.candidate, "candidate policy label");
  report_cmd->add_option("--csv", ra.csv, "also write the table as CSV");
  report_cmd->add_option("--svg", ra.svg_dir, "write one trajectory plot per log here");

  std::string replay_log, replay_hash;
  double replay_tol = 1e-9;
  auto* replay_cmd = app.add_subcommand("replay", "re-execute a log and verify it");
  replay_cmd->add_option("--log", replay_log, "episode log")->required();
  replay_cmd->add_option("--expect-hash", replay_hash, "refuse logs from another configuration");
  replay_cmd->add_option("--tolerance", replay_tol, "absolute tolerance");

  std::string serve_config, serve_listen = "127.0.0.1:8765", serve_out;
  std::optional<std::uint64_t> serve_seed;
  auto* serve_cmd = app.add_subcommand("serve", "train while serving the operator session");
  serve_cmd->add_option("--config", serve_config, "run configuration (JSON)")->required();
  serve_cmd->add_option("--listen", serve_listen, "host:port");
  serve_cmd->add_option("--seed", serve_seed, "override the configured seed");
  serve_cmd->add_option("--out", serve_out, "write logs and the final checkpoint here");

  std::string expert_config, expert_segments, expert_out;
  auto* expert_cmd = app.add_subcommand("expert", "run the scripted expert for one episode");
  expert_cmd->add_option("--config", expert_config, "run configuration (JSON)")->required();
  expert_cmd->add_option("--segments", expert_segments, "comma separated segment names");
  expert_cmd->add_option("--out", expert_out, "episode log file");

  std::string defaults_out;
  auto* defaults_cmd = app.add_subcommand("defaults", "print the full default configuration");
  defaults_cmd->add_option("--out", defaults_out, "write to a file instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) return run_train(ta);
    if (*eval_cmd) return run_evaluate(ea);
    if (*report_cmd) return run_report(ra);
    if (*replay_cmd) return run_replay(replay_log, replay_hash, replay_tol);
    if (*serve_cmd) return run_serve(serve_config, serve_listen, serve_seed, serve_out);
    if (*expert_cmd) return run_expert(expert_config, expert_segments, expert_out);
    if (*defaults_cmd) {
      const std::string text = to_json(RunConfig{}).dump(2) + "\n";
      if (defaults_out.empty()) {
        std::cout << text;
      } else {
        write_text(defaults_out, text);
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
