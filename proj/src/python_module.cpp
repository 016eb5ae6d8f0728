#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "hippo/checkpoint.hpp"
#include "hippo/config.hpp"
#include "hippo/episode_log.hpp"
#include "hippo/hi.hpp"
#include "hippo/metrics.hpp"
#include "hippo/ppo.hpp"
#include "hippo/runner.hpp"

namespace py = pybind11;
using namespace hippo;

namespace {

// Configurations cross the boundary as JSON text; the Python side owns dicts.
RunConfig config_from_text(const std::string& text, const std::string& base_dir) {
  return run_config_from_json(nlohmann::json::parse(text), base_dir);
}

std::vector<EpisodeLog> logs_from_text(const std::vector<std::string>& texts) {
  std::vector<EpisodeLog> logs;
  for (const auto& t : texts) {
    std::istringstream in(t);
    logs.push_back(parse_episode_log(in));
  }
  return logs;
}

std::vector<std::string> logs_to_text(const std::vector<EpisodeLog>& logs) {
  std::vector<std::string> out;
  for (const auto& l : logs) out.push_back(format_episode_log(l));
  return out;
}

// Step-by-step access to the simulator without learning.
class PyEnv {
 public:
  PyEnv(const std::string& config_text, const std::string& base_dir)
      : cfg_(config_from_text(config_text, base_dir)), env_(make_environment(cfg_)) {
    reset();
  }

  std::vector<double> reset() {
    scope_ = initial_scope(env_.model, env_.motion);
    steps_ = 0;
    done_ = false;
    return observe(env_.model, scope_, env_.observation).features();
  }

  py::tuple step(int action) {
    if (done_) throw Error("episode is over; call reset()");
    const EnvStep st = env_step(env_, scope_, action_from_index(action));
    scope_ = st.next;
    ++steps_;
    const bool truncated = !st.done && steps_ >= env_.step_cap;
    done_ = st.done || truncated;
    std::vector<double> obs;
    if (!st.done) obs = observe(env_.model, scope_, env_.observation).features();
    py::dict info;
    info["position"] = std::vector<double>{scope_.tip_position.x(), scope_.tip_position.y(),
                                           scope_.tip_position.z()};
    info["depth"] = scope_.insertion_depth;
    info["segment"] = st.segment;
    info["wall_distance"] = st.proximity.wall_distance;
    info["collided"] = st.collided;
    info["reached_goal"] = st.reached_goal;
    info["path_error"] = st.path_error;
    info["truncated"] = truncated;
    return py::make_tuple(obs, st.reward.total(), done_, info);
  }

  double total_length() const { return env_.model.total_length(); }
  std::size_t observation_size() const { return Observation::feature_size(cfg_.observation.rays); }

 private:
  RunConfig cfg_;
  Environment env_;
  ScopeState scope_;
  std::size_t steps_ = 0;
  bool done_ = false;
};

}  // namespace

PYBIND11_MODULE(_hippo, m) {
  m.doc() = "HI-PPO endoscopy navigation core";
  py::register_exception<Error>(m, "HippoError", PyExc_ValueError);

  m.attr("ACTIONS") = std::vector<std::string>{"BendUp", "BendDown", "BendLeft", "BendRight",
                                               "Advance", "Withdraw"};

  m.def("default_config", [] { return to_json(RunConfig{}).dump(); });
  m.def("normalize_config", [](const std::string& text, const std::string& base_dir) {
    const RunConfig c = config_from_text(text, base_dir);
    c.validate();
    return canonical_json(c);
  });
  m.def("config_hash", [](const std::string& text, const std::string& base_dir) {
    return config_hash(config_from_text(text, base_dir));
  });

  m.def(
      "train",
      [](const std::string& text, const std::string& base_dir, bool keep_logs) {
        RunConfig cfg = config_from_text(text, base_dir);
        cfg.log_training = keep_logs;
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train(cfg);
        }
        py::dict out;
        out["checkpoint"] = py::bytes(serialize_checkpoint(r.checkpoint));
        out["logs"] = logs_to_text(r.logs);
        out["env_steps"] = r.stats.env_steps;
        out["episodes"] = r.stats.episodes;
        out["updates"] = r.stats.updates;
        out["goals"] = r.stats.goals;
        out["intervened_steps"] = r.stats.intervened_steps;
        out["aborted"] = r.aborted;
        out["abort_reason"] = r.abort_reason;
        out["stats_csv"] = format_train_stats_csv(r.stats);
        return out;
      },
      py::arg("config"), py::arg("base_dir") = "", py::arg("keep_logs") = true);

  m.def(
      "evaluate",
      [](const py::bytes& checkpoint, const std::vector<std::string>& segments,
         std::size_t episodes, bool deterministic, std::uint64_t seed) {
        const Checkpoint c = deserialize_checkpoint(std::string(checkpoint));
        EvaluateOptions opts{segments, episodes, deterministic, seed};
        return logs_to_text(evaluate(c, opts));
      },
      py::arg("checkpoint"), py::arg("segments") = std::vector<std::string>{},
      py::arg("episodes") = 1, py::arg("deterministic") = true, py::arg("seed") = 0);

  m.def("expert_episode", [](const std::string& text, const std::string& base_dir) {
    return format_episode_log(run_expert_episode(config_from_text(text, base_dir)));
  });

  m.def(
      "replay",
      [](const std::string& log_text, double tolerance) {
        const ReplayReport r = replay(logs_from_text({log_text}).front(), {}, tolerance);
        py::dict out;
        out["ok"] = r.ok();
        out["hash_ok"] = r.hash_ok;
        out["steps_checked"] = r.steps_checked;
        out["divergences"] = r.divergences.size();
        out["report"] = format_replay_report(r);
        return out;
      },
      py::arg("log"), py::arg("tolerance") = 1e-9);

  m.def(
      "report",
      [](const std::vector<std::string>& logs, const std::string& baseline,
         const std::string& candidate) {
        ReportOptions opts;
        opts.baseline = baseline;
        opts.candidate = candidate;
        const auto parsed = logs_from_text(logs);
        return format_report(compare_report(parsed, opts));
      },
      py::arg("logs"), py::arg("baseline") = "ppo", py::arg("candidate") = "hi-ppo");

  m.def(
      "gae",
      [](const std::vector<double>& rewards, const std::vector<double>& values,
         const std::vector<bool>& dones, double bootstrap, double gamma, double lambda) {
        std::unique_ptr<bool[]> d(new bool[dones.size()]);
        for (std::size_t i = 0; i < dones.size(); ++i) d[i] = dones[i];
        const GaeResult g =
            gae(rewards, values, std::span<const bool>(d.get(), dones.size()), bootstrap, gamma, lambda);
        return py::make_tuple(g.advantages, g.returns);
      },
      py::arg("rewards"), py::arg("values"), py::arg("dones"), py::arg("bootstrap"),
      py::arg("gamma"), py::arg("lam"));

  m.def("adjust_reward", &adjust_reward, py::arg("reward"), py::arg("flag"),
        py::arg("prev_flag"), py::arg("penalty"));
  m.def(
      "bc_similarity",
      [](const std::vector<double>& logits, int expert) { return bc_similarity(logits, expert); },
      py::arg("logits"), py::arg("expert_action"));
  m.def(
      "security",
      [](std::size_t steps, std::size_t proximity, std::size_t collisions) {
        return security(SecurityCounts{steps, proximity, collisions});
      },
      py::arg("steps"), py::arg("proximity"), py::arg("collisions"));

  py::class_<PyEnv>(m, "Env")
      .def(py::init<const std::string&, const std::string&>(), py::arg("config"),
           py::arg("base_dir") = "")
      .def("reset", &PyEnv::reset)
      .def("step", &PyEnv::step, py::arg("action"))
      .def_property_readonly("total_length", &PyEnv::total_length)
      .def_property_readonly("observation_size", &PyEnv::observation_size);
}
