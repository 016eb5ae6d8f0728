// Acceptance run: one PASS/FAIL line per primary criterion, details above it.
// Usage: hippo_acceptance [--out DIR] [--only N[,N...]]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "hippo/checkpoint.hpp"
#include "hippo/config.hpp"
#include "hippo/env.hpp"
#include "hippo/episode_log.hpp"
#include "hippo/expert.hpp"
#include "hippo/hi.hpp"
#include "hippo/metrics.hpp"
#include "hippo/ppo.hpp"
#include "hippo/runner.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace hippo;
namespace fs = std::filesystem;

namespace {

// Collects the failed checks of one criterion.
class Verdict {
 public:
  explicit Verdict(int number, std::string title) : number_(number), title_(std::move(title)) {}

  bool check(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
    return ok;
  }
  void note(const std::string& line) { std::cout << "  [" << number_ << "] " << line << "\n"; }
  bool passed() const { return failures_.empty(); }

  void print() const {
    for (const auto& f : failures_) std::cout << "  [" << number_ << "] failed: " << f << "\n";
    print_line();
  }
  void print_line() const {
    std::cout << "criterion " << number_ << " " << (passed() ? "PASS" : "FAIL") << ": " << title_
              << "\n"
              << std::flush;
  }

 private:
  int number_;
  std::string title_;
  std::vector<std::string> failures_;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(precision);
  s << v;
  return s.str();
}

std::string sci(double v) {
  std::ostringstream s;
  s.setf(std::ios::scientific);
  s.precision(2);
  s << v;
  return s.str();
}

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

Verdict gradients() {
  Verdict v(1, "analytic loss gradients match central differences on 20 instances");
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(1001);
  double worst = 0.0;
  std::size_t components = 0;
  for (int inst = 0; inst < 20; ++inst) {
    const PolicyParams p = oracle::small_policy(rng, 4 + static_cast<int>(rng.index(4)),
                                                4 + static_cast<int>(rng.index(5)));
    const Batch b = oracle::random_batch(rng, p, 2 + rng.index(10), 0.5);
    for (auto term : {oracle::Term::Policy, oracle::Term::Value, oracle::Term::Entropy,
                      oracle::Term::Bc, oracle::Term::Total}) {
      const auto r = oracle::check_term_gradient(p, b, term);
      worst = std::max(worst, r.worst_relative);
      components += r.components;
      v.check(r.ok, "instance " + std::to_string(inst) + " term " + oracle::to_string(term) +
                        " worst relative error " + std::to_string(r.worst_relative));
    }
    std::array<double, kActionCount> logits{};
    for (auto& l : logits) l = 3.0 * rng.normal();
    const auto r = oracle::check_bc_logit_gradient(logits, static_cast<int>(rng.index(kActionCount)));
    worst = std::max(worst, r.worst_relative);
    components += r.components;
    v.check(r.ok, "instance " + std::to_string(inst) + " bc logits");
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  v.note(std::to_string(components) + " gradient components, worst relative error " +
         sci(worst) + ", " + fmt(secs, 2) + " s");
  v.check(secs < 60.0, "runtime " + fmt(secs, 1) + " s exceeds one minute");
  return v;
}

Verdict gae_oracle() {
  Verdict v(2, "GAE equals the direct discounted sum on 100 random instances within 1e-10");
  Rng rng(1002);
  double worst = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t n = 1 + rng.index(20);
    std::vector<double> r(n), val(n);
    std::vector<bool> d(n);
    std::unique_ptr<bool[]> dones(new bool[n]);
    for (std::size_t t = 0; t < n; ++t) {
      r[t] = rng.normal();
      val[t] = rng.normal();
      d[t] = rng.uniform() < 0.15;
      dones[t] = d[t];
    }
    const double boot = rng.normal();
    const double gamma = rng.uniform(0.8, 1.0);
    const double lambda = rng.uniform(0.0, 1.0);
    const GaeResult got = gae(r, val, std::span<const bool>(dones.get(), n), boot, gamma, lambda);
    const auto want = oracle::gae_direct(r, val, d, boot, gamma, lambda);
    for (std::size_t t = 0; t < n; ++t) {
      const double err = std::abs(got.advantages[t] - want[t]);
      worst = std::max(worst, err);
      v.check(err < 1e-10, "instance " + std::to_string(inst) + " step " + std::to_string(t));
      v.check(std::abs(got.returns[t] - (want[t] + val[t])) < 1e-10,
              "returns, instance " + std::to_string(inst));
    }
  }
  v.note("worst absolute error " + sci(worst));
  return v;
}

Verdict mechanisms() {
  Verdict v(3, "arbitration, reward penalty and cloning examples; penalty sum identity");
  InterventionState off;
  const Arbitration a = arbitrate(Action::BendLeft, off);
  v.check(a.executed == Action::BendLeft && a.flag == 0 && !a.expert_action, "arbitrate m=0");
  InterventionState on;
  on.active = true;
  on.pending_human_action = Action::Advance;
  const Arbitration b = arbitrate(Action::BendLeft, on);
  v.check(b.executed == Action::Advance && b.flag == 1 && b.expert_action == Action::Advance,
          "arbitrate m=1");

  v.check(adjust_reward(0.5, 1, 0, -1.0) == -0.5, "adjust_reward rising edge");
  v.check(adjust_reward(0.5, 1, 1, -1.0) == 0.5, "adjust_reward held");
  v.check(adjust_reward(0.5, 0, 0, -1.0) == 0.5, "adjust_reward off");
  v.check(adjust_reward(0.5, 0, 1, -1.0) == 0.5, "adjust_reward falling edge");

  const std::array<double, kActionCount> uniform{};
  v.check(std::abs(bc_similarity(uniform, 3) - std::log(6.0)) < 1e-15, "bc uniform = ln 6");
  const std::array<double, kActionCount> peaked{50.0, 0, 0, 0, 0, 0};
  v.check(bc_similarity(peaked, 0) < 1e-20, "bc confident and correct is near 0");
  const std::array<double, kActionCount> two{2.0, 0, 0, 0, 0, 0};
  const double expected = std::log(std::exp(2.0) + 5.0) - 2.0;
  v.check(std::abs(bc_similarity(two, 0) - expected) < 1e-15, "bc logits [2,0,...]");
  v.note("bc_similarity([2,0,0,0,0,0], 0) = " + fmt(bc_similarity(two, 0), 6));

  Rng rng(1003);
  std::size_t total_edges = 0;
  for (int seq = 0; seq < 1000; ++seq) {
    const std::size_t n = 1 + rng.index(200);
    const double lambda = -rng.uniform(0.01, 5.0);
    const double p_on = rng.uniform();
    int prev = 0, edges = 0;
    double diff = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const int m = rng.uniform() < p_on ? 1 : 0;
      const double r = rng.normal();
      diff += adjust_reward(r, m, prev, lambda) - r;
      edges += (m == 1 && prev == 0) ? 1 : 0;
      prev = m;
    }
    total_edges += static_cast<std::size_t>(edges);
    v.check(std::abs(diff - lambda * edges) <= 1e-12 * std::max(1, edges),
            "sequence " + std::to_string(seq));
  }
  v.note("1000 sequences, " + std::to_string(total_edges) + " rising edges");
  return v;
}

Verdict decomposition() {
  Verdict v(4, "hi_ppo_loss(w) - hi_ppo_loss(0) = w * mean CE within 1e-12");
  Rng rng(1004);
  double worst = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    const PolicyParams p = oracle::small_policy(rng);
    const Batch b = oracle::random_batch(rng, p, 1 + rng.index(64), rng.uniform());
    const double w = rng.uniform(0.0, 2.0);
    HIConfig with;
    with.bc_weight = w;
    HIConfig without;
    without.bc_weight = 0.0;
    const double diff = hi_ppo_loss(p, b, {}, with).total - hi_ppo_loss(p, b, {}, without).total;
    const double err = std::abs(diff - w * oracle::mean_cross_entropy(p, b));
    worst = std::max(worst, err);
    v.check(err < 1e-12, "batch " + std::to_string(inst));
  }
  v.note("100 random batches, worst absolute error " + sci(worst));
  return v;
}

Verdict metrics_fixtures() {
  Verdict v(5, "ATE and security fixtures; Table II improvements and 38.63% trimmed mean");
  const ColonModel tube =
      build_colon(std::vector<SegmentSpec>{straight_segment("Tube", 200.0, 20.0)}, 1);
  std::vector<Vec3> on;
  for (double s = 0.0; s <= 200.0; s += 10.0) on.push_back(tube.position_at(s));
  const MeanStd zero = ate(on, tube);
  v.check(zero.mean == 0.0 && zero.std == 0.0, "ATE on the centerline is 0");
  std::vector<Vec3> off;
  for (double s = 10.0; s <= 190.0; s += 10.0) {
    const PathFrame f = tube.frame_at(s);
    const double phi = s / 30.0;
    off.push_back(tube.position_at(s) + 4.0 * (std::cos(phi) * f.right + std::sin(phi) * f.up));
  }
  const MeanStd four = ate(off, tube);
  v.check(std::abs(four.mean - 4.0) < 1e-9 && four.std < 1e-9, "ATE constant 4 mm offset");
  const std::vector<Vec3> two{tube.position_at(50.0) + 2.0 * tube.frame_at(50.0).up,
                              tube.position_at(120.0) + 6.0 * tube.frame_at(120.0).right};
  const MeanStd pair = ate(two, tube);
  v.check(std::abs(pair.mean - 4.0) < 1e-9 && std::abs(pair.std - 2.0) < 1e-9,
          "ATE offsets 2 and 6 give mean 4 std 2");

  v.check(security(SecurityCounts{10, 0, 0}) == 1.0, "security clean = 1");
  v.check(std::abs(security(SecurityCounts{10, 10, 10})) < 1e-15, "security all bad = 0");
  v.check(std::abs(security(SecurityCounts{100, 10, 2}) - 0.956) < 1e-15,
          "security N=100 f=10 C=2 = 0.956");

  std::vector<EpisodeLog> logs(2);
  logs[0].policy = "ppo";
  logs[1].policy = "hi-ppo";
  std::size_t i = 0;
  for (const auto& row : oracle::table_ii()) {
    for (int k = 0; k < 2; ++k) {
      StepRecord r;
      r.step = i;
      r.wall_distance = 10.0;
      r.segment = row.segment;
      r.path_error = k == 0 ? row.ppo_ate : row.hippo_ate;
      logs[static_cast<std::size_t>(k)].steps.push_back(r);
    }
    ++i;
  }
  const ComparisonReport rep = compare_report(logs);
  if (v.check(rep.improvement.has_value() && rep.improvement->segments.size() == 6,
              "six-segment improvement summary")) {
    const auto& imp = *rep.improvement;
    std::vector<double> expected, base;
    for (std::size_t k = 0; k < 6; ++k) {
      const auto& row = oracle::table_ii()[k];
      const double want = (row.ppo_ate - row.hippo_ate) / row.ppo_ate;
      expected.push_back(want);
      base.push_back(row.ppo_ate);
      v.check(imp.segments[k] == row.segment, "segment order");
      v.check(std::abs(imp.improvement[k] - want) < 1e-12, std::string("improvement ") + row.segment);
    }
    const double by_value = oracle::trimmed_mean(expected, expected);
    const double by_base = oracle::trimmed_mean(expected, base);
    v.check(std::abs(imp.trimmed_by_improvement - by_value) < 1e-12, "trim by improvement");
    v.check(std::abs(imp.trimmed_by_baseline_ate - by_base) < 1e-12, "trim by baseline ATE");
    v.note("trimmed by improvement value " + fmt(100.0 * imp.trimmed_by_improvement, 3) +
           "%, by baseline ATE " + fmt(100.0 * imp.trimmed_by_baseline_ate, 3) + "%");
    v.check(std::abs(100.0 * imp.trimmed_by_improvement - 38.63) <= 0.5 ||
                std::abs(100.0 * imp.trimmed_by_baseline_ate - 38.63) <= 0.5,
            "no trimming convention within 0.5 points of 38.63%");
  }
  return v;
}

struct Artifacts {
  std::vector<EpisodeLog> replay_queue;  // logs that must replay cleanly
  std::size_t replayed = 0;
  std::size_t replay_failures = 0;
  std::vector<std::string> replay_messages;

  void replay_now(const EpisodeLog& log, const std::string& label) {
    const ReplayReport r = replay(log);
    ++replayed;
    if (!r.ok()) {
      ++replay_failures;
      if (replay_messages.size() < 5) {
        replay_messages.push_back(label + " episode " + std::to_string(log.episode) + ": " +
                                  format_replay_report(r));
      }
    }
  }
};

Verdict expert_oracle(const fs::path& out, Artifacts& art) {
  Verdict v(6, "expert traverses the six-segment colon safely; straight tube in ceil(L/3) steps");
  const RunConfig cfg = load_run_config(test_path("configs/default.json"));
  const Environment env = make_environment(cfg);
  const auto& segs = env.model.segments();
  v.check(segs.size() == oracle::table_ii().size(), "six segments");
  for (std::size_t k = 0; k < std::min(segs.size(), oracle::table_ii().size()); ++k) {
    const auto& row = oracle::table_ii()[k];
    v.check(segs[k].name == row.segment && std::abs((segs[k].end - segs[k].begin) - row.length) < 1e-9,
            std::string("segment length ") + row.segment);
  }
  const EpisodeLog log = run_expert_episode(cfg);
  write_episode_log(log, out / "expert" / "episode_000000.jsonl");
  double furthest = 0.0;
  for (const auto& s : log.steps) furthest = std::max(furthest, s.depth);
  const auto counts = security_counts(log);
  const double sec = security(log);
  const std::size_t reached = waypoints_reached(env.model, furthest);
  v.note("steps " + std::to_string(log.steps.size()) + ", waypoints " + std::to_string(reached) +
         "/" + std::to_string(env.model.waypoints().size()) + ", collisions " +
         std::to_string(counts.collisions) + ", proximity " + std::to_string(counts.proximity) +
         ", security " + fmt(sec) + ", termination " + log.termination);
  v.check(log.reached_goal, "goal not reached");
  v.check(reached == env.model.waypoints().size(), "not every waypoint reached");
  v.check(counts.collisions == 0, "collisions");
  v.check(sec >= 0.90, "security below 0.90");
  art.replay_now(log, "expert");

  for (double length : {63.86, 100.0, 150.0, 301.5}) {
    RunConfig tube;
    tube.colon.segments = {straight_segment("Tube", length, 20.0)};
    const EpisodeLog t = run_expert_episode(tube);
    const auto want = static_cast<std::size_t>(std::ceil(length / tube.motion.step_scale));
    v.check(t.reached_goal && t.steps.size() == want,
            "straight tube " + fmt(length, 2) + " mm took " + std::to_string(t.steps.size()) +
                " steps, expected " + std::to_string(want));
    art.replay_now(t, "expert tube");
  }
  return v;
}

struct RunOutcome {
  std::string algorithm;
  std::string segment;
  std::uint64_t seed = 0;
  std::uint64_t env_steps = 0;
  double ate = 0.0;
  double security = 0.0;
  bool goal = false;
  std::string termination;
  std::string checkpoint_bytes_digest;
  std::string logs_digest;
};

RunOutcome train_and_evaluate(const RunConfig& cfg, const std::string& segment,
                              const EvaluateOptions& eval, const fs::path& dir, Artifacts& art) {
  RunOutcome o;
  o.algorithm = std::string(to_string(cfg.algorithm));
  o.segment = segment;
  o.seed = cfg.seed;
  std::string all_logs;
  std::size_t episodes = 0;
  TrainHooks hooks;
  hooks.on_episode = [&](EpisodeLog&& log) {
    all_logs += sha256_hex(format_episode_log(log));
    art.replay_now(log, o.algorithm + "/" + segment + " train");
    ++episodes;
  };
  const TrainResult r = train(cfg, hooks);
  o.env_steps = r.stats.env_steps;
  const std::string bytes = serialize_checkpoint(r.checkpoint);
  o.checkpoint_bytes_digest = sha256_hex(bytes);
  o.logs_digest = sha256_hex(all_logs);
  save_checkpoint(r.checkpoint, dir / "checkpoint.bin");
  {
    std::ofstream csv(dir / "train_stats.csv");
    csv << format_train_stats_csv(r.stats);
  }
  const auto logs = evaluate(r.checkpoint, eval);
  double ate_sum = 0.0, sec_sum = 0.0;
  for (const auto& log : logs) {
    write_episode_log(log, dir / "eval" / ("episode_" + std::to_string(log.episode) + ".jsonl"));
    std::vector<double> errors;
    for (const auto& s : log.steps) errors.push_back(s.path_error);
    ate_sum += mean_std(errors).mean;
    sec_sum += security(log);
    o.goal = log.reached_goal;
    o.termination = log.termination;
    art.replay_now(log, o.algorithm + "/" + segment + " eval");
  }
  o.ate = ate_sum / static_cast<double>(logs.size());
  o.security = sec_sum / static_cast<double>(logs.size());
  (void)episodes;
  return o;
}

struct Protocol {
  std::vector<std::uint64_t> seeds;
  struct Fixture {
    std::string segment, ppo, hippo;
  };
  std::vector<Fixture> fixtures;
  EvaluateOptions eval;
  std::uint64_t max_env_steps = 0;
  double max_cpu_seconds = 0.0;
};

Protocol load_protocol() {
  std::ifstream in(test_path("configs/acceptance/protocol.json"));
  if (!in) throw Error("missing configs/acceptance/protocol.json");
  const auto j = nlohmann::json::parse(in);
  Protocol p;
  p.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  for (const auto& f : j.at("fixtures")) {
    p.fixtures.push_back({f.at("segment"), f.at("ppo"), f.at("hi-ppo")});
  }
  p.eval.episodes = j.at("evaluation").at("episodes");
  p.eval.deterministic = j.at("evaluation").at("deterministic");
  p.eval.seed = j.at("evaluation").at("seed");
  p.max_env_steps = j.at("max_env_steps");
  p.max_cpu_seconds = j.at("max_cpu_seconds");
  return p;
}

RunConfig fixture_config(const std::string& file, std::uint64_t seed) {
  RunConfig cfg = load_run_config(test_path("configs/acceptance/" + file));
  cfg.seed = seed;
  cfg.log_training = false;
  return cfg;
}

Verdict directional(const fs::path& out, Artifacts& art, std::vector<RunOutcome>& runs) {
  Verdict v(7, "desk-scale HI-PPO vs PPO on Rectum and Descending (3 seeds, <= 200k steps, <= 2 h)");
  const Protocol p = load_protocol();
  const double cpu0 = cpu_seconds();
  v.check(p.seeds.size() == 3, "protocol must use 3 seeds");
  for (const auto& f : p.fixtures) {
    std::map<std::string, std::vector<RunOutcome>> by_algo;
    for (const auto& [algo, file] : {std::pair{std::string("ppo"), f.ppo},
                                     std::pair{std::string("hi-ppo"), f.hippo}}) {
      for (std::uint64_t seed : p.seeds) {
        const RunConfig cfg = fixture_config(file, seed);
        v.check(cfg.total_steps <= p.max_env_steps, file + " exceeds the step budget");
        v.check(cfg.segments == std::vector<std::string>{f.segment}, file + " fixture segment");
        v.check(std::string(to_string(cfg.algorithm)) == algo, file + " algorithm");
        const fs::path dir = out / "runs" / (algo + "_" + f.segment + "_seed" + std::to_string(seed));
        fs::create_directories(dir);
        const RunOutcome o = train_and_evaluate(cfg, f.segment, p.eval, dir, art);
        v.note(f.segment + " " + algo + " seed " + std::to_string(seed) + ": " +
               std::to_string(o.env_steps) + " steps, ATE " + fmt(o.ate) + " mm, security " +
               fmt(o.security) + ", " + o.termination);
        by_algo[algo].push_back(o);
        runs.push_back(o);
      }
    }
    auto mean = [](const std::vector<RunOutcome>& rs, double RunOutcome::*field) {
      double s = 0.0;
      for (const auto& r : rs) s += r.*field;
      return s / static_cast<double>(rs.size());
    };
    const double ppo_ate = mean(by_algo["ppo"], &RunOutcome::ate);
    const double hi_ate = mean(by_algo["hi-ppo"], &RunOutcome::ate);
    const double ppo_sec = mean(by_algo["ppo"], &RunOutcome::security);
    const double hi_sec = mean(by_algo["hi-ppo"], &RunOutcome::security);
    v.note(f.segment + " mean ATE ppo " + fmt(ppo_ate) + " hi-ppo " + fmt(hi_ate) +
           " | mean security ppo " + fmt(ppo_sec) + " hi-ppo " + fmt(hi_sec));
    v.check(hi_ate < ppo_ate, "(a) " + f.segment + ": HI-PPO mean ATE " + fmt(hi_ate) +
                                  " is not strictly lower than PPO " + fmt(ppo_ate));
    v.check(hi_sec >= ppo_sec, "(b) " + f.segment + ": HI-PPO mean security " + fmt(hi_sec) +
                                   " below PPO " + fmt(ppo_sec));
    if (f.segment == "Descending") {
      v.check(hi_sec >= 0.90, "(b) Descending: HI-PPO security " + fmt(hi_sec) + " below 0.90");
    }
  }
  const double cpu = cpu_seconds() - cpu0;
  v.note("CPU time " + fmt(cpu, 1) + " s (limit " + fmt(p.max_cpu_seconds, 0) + " s)");
  v.check(cpu <= p.max_cpu_seconds, "CPU budget exceeded");
  return v;
}

Verdict determinism(const fs::path& out, Artifacts& art, const std::vector<RunOutcome>& runs) {
  Verdict v(8, "repeated HI-PPO runs give byte-identical checkpoints and logs");
  const Protocol p = load_protocol();
  for (const auto& f : p.fixtures) {
    const std::uint64_t seed = p.seeds.front();
    const RunOutcome* first = nullptr;
    for (const auto& r : runs) {
      if (r.algorithm == "hi-ppo" && r.segment == f.segment && r.seed == seed) first = &r;
    }
    if (!v.check(first != nullptr, f.segment + ": criterion 7 run missing")) continue;
    const fs::path dir = out / "rerun" / ("hi-ppo_" + f.segment + "_seed" + std::to_string(seed));
    fs::create_directories(dir);
    const RunOutcome again = train_and_evaluate(fixture_config(f.hippo, seed), f.segment, p.eval, dir, art);
    v.note(f.segment + " checkpoint sha256 " + again.checkpoint_bytes_digest.substr(0, 16) +
           ", logs digest " + again.logs_digest.substr(0, 16));
    v.check(again.checkpoint_bytes_digest == first->checkpoint_bytes_digest,
            f.segment + ": checkpoint bytes differ");
    v.check(again.logs_digest == first->logs_digest, f.segment + ": training logs differ");
    const auto a = read_episode_log(out / "runs" / ("hi-ppo_" + f.segment + "_seed" + std::to_string(seed)) /
                                    "eval" / "episode_0.jsonl");
    const auto b = read_episode_log(dir / "eval" / "episode_0.jsonl");
    v.check(format_episode_log(a) == format_episode_log(b), f.segment + ": evaluation logs differ");
  }
  return v;
}

Verdict replay_closure(const Artifacts& art) {
  Verdict v(9, "every episode log from criteria 6 and 7 replays with zero divergences");
  v.note(std::to_string(art.replayed) + " logs replayed, " + std::to_string(art.replay_failures) +
         " with divergences");
  v.check(art.replayed > 0, "no logs replayed");
  v.check(art.replay_failures == 0, std::to_string(art.replay_failures) + " logs diverged");
  for (const auto& m : art.replay_messages) v.note(m);
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hippo acceptance run"};
  std::string out = "acceptance_artifacts";
  std::vector<int> only;
  app.add_option("--out", out, "artifact directory");
  app.add_option("--only", only, "criteria to run (8 and 9 need 7)")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  std::set<int> selected(only.begin(), only.end());
  auto want = [&](int n) { return selected.empty() || selected.count(n) > 0; };

  const fs::path dir = fs::absolute(out);
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::cout << "artifacts in " << dir.string() << "\n";

  std::vector<Verdict> verdicts;
  auto run = [&](int n, auto&& fn) {
    if (!want(n)) return;
    try {
      verdicts.push_back(fn());
    } catch (const std::exception& e) {
      Verdict v(n, "aborted");
      v.check(false, std::string("exception: ") + e.what());
      verdicts.push_back(v);
    }
    verdicts.back().print();
  };

  Artifacts art;
  std::vector<RunOutcome> runs;
  run(1, gradients);
  run(2, gae_oracle);
  run(3, mechanisms);
  run(4, decomposition);
  run(5, metrics_fixtures);
  run(6, [&] { return expert_oracle(dir, art); });
  run(7, [&] { return directional(dir, art, runs); });
  run(8, [&] { return determinism(dir, art, runs); });
  run(9, [&] { return replay_closure(art); });

  std::cout << "\nsummary\n";
  bool all = true;
  for (const auto& v : verdicts) {
    v.print_line();
    all &= v.passed();
  }
  return all ? 0 : 1;
}
