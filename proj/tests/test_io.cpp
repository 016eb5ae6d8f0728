#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "hippo/checkpoint.hpp"
#include "hippo/config.hpp"
#include "hippo/episode_log.hpp"
#include "hippo/rng.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace hippo;
using nlohmann::json;

namespace {

json minimal_config() { return json{{"colon", "colon_paper.cfg"}}; }

RunConfig parse(const json& j) { return run_config_from_json(j, test_path("configs")); }

EpisodeLog sample_log() {
  RunConfig cfg;
  EpisodeLog log;
  log.config = canonical_json(cfg);
  log.config_hash = config_hash(cfg);
  log.seed = 42;
  log.episode = 3;
  log.mode = "train";
  log.policy = "hi-ppo";
  log.segments = {"Rectum", "Sigmoid"};
  log.start = Vec3(0.1, -0.2, 0.3);
  Rng rng(9);
  for (std::size_t i = 0; i < 5; ++i) {
    StepRecord s;
    s.step = i;
    s.position = Vec3(rng.normal(), rng.normal(), 1.0 / 3.0 + static_cast<double>(i));
    s.depth = 3.0 * static_cast<double>(i) + 1e-17;
    s.segment = i < 3 ? "Rectum" : "Sigmoid";
    s.action = static_cast<int>(i % kActionCount);
    s.agent_action = 5 - s.action;
    if (i == 2) s.expert_action = 4;
    s.intervened = i == 2 ? 1 : 0;
    for (auto& l : s.logits) l = rng.normal();
    s.value = std::nextafter(1.0, 2.0);
    s.base_reward = 0.1 + 0.2;
    s.reward = s.base_reward - (i == 2 ? 1.0 : 0.0);
    s.wall_distance = 12.345678901234567;
    s.below_threshold = i == 4;
    s.collided = false;
    s.path_error = std::numeric_limits<double>::denorm_min();
    log.steps.push_back(s);
  }
  log.termination = "goal";
  log.reached_goal = true;
  return log;
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("minimal file takes the algorithm's hyperparameter column") {
    const RunConfig hi = parse(minimal_config());
    CHECK(hi.algorithm == Algorithm::HiPpo);
    CHECK(hi.ppo.minibatch_size == 64);
    CHECK(hi.ppo.beta == 5e-3);
    json j = minimal_config();
    j["algorithm"] = "ppo";
    const RunConfig ppo = parse(j);
    CHECK(ppo.ppo.minibatch_size == 1024);
    CHECK(ppo.ppo.beta == 5e-4);
    for (const RunConfig* c : {&hi, &ppo}) {
      CHECK(c->ppo.learning_rate == 3e-4);
      CHECK(c->ppo.epsilon == 0.2);
      CHECK(c->ppo.buffer_size == 2048);
      CHECK(c->ppo.epochs == 3);
    }
  }

  TEST_CASE("unknown keys are rejected with their path") {
    json j = minimal_config();
    j["totl_steps"] = 5;
    CHECK_THROWS_WITH_AS(parse(j), doctest::Contains("totl_steps"), Error);
    json k = minimal_config();
    k["ppo"] = {{"learning_rate", 1e-3}, {"lr", 1e-3}};
    CHECK_THROWS_WITH_AS(parse(k), doctest::Contains("lr"), Error);
  }

  TEST_CASE("invalid values are rejected") {
    json j = minimal_config();
    j["hi"] = {{"penalty", 0.0}};
    CHECK_THROWS_AS(parse(j).validate(), Error);
    json k = minimal_config();
    k["algorithm"] = "trpo";
    CHECK_THROWS_AS(parse(k), Error);
    json m = minimal_config();
    m["colon"] = "no_such_colon.cfg";
    CHECK_THROWS_WITH_AS(parse(m), doctest::Contains("not found"), Error);
    CHECK_THROWS_AS(parse(json::object()), Error);
    json s = minimal_config();
    s["segments"] = {"Duodenum"};
    CHECK_THROWS_AS(active_segments(parse(s)), Error);
  }

  TEST_CASE("shipped default.json is the built-in default configuration") {
    std::ifstream in(test_path("configs/default.json"));
    REQUIRE(in);
    const json shipped = json::parse(in);
    CHECK(shipped == to_json(RunConfig{}));
    const RunConfig loaded = load_run_config(test_path("configs/default.json"));
    CHECK(config_hash(loaded) == config_hash(RunConfig{}));
    CHECK_NOTHROW(loaded.validate());
  }

  TEST_CASE("hash is stable across serialisation and sensitive to every field") {
    const RunConfig cfg = parse(minimal_config());
    const std::string h = config_hash(cfg);
    CHECK(h.size() == 64);
    CHECK(config_hash(run_config_from_json(to_json(cfg))) == h);
    CHECK(config_hash(run_config_from_json(json::parse(canonical_json(cfg)))) == h);
    RunConfig other = cfg;
    other.ppo.learning_rate = std::nextafter(3e-4, 1.0);
    CHECK(config_hash(other) != h);
    other = cfg;
    other.seed = 1;
    CHECK(config_hash(other) != h);
    // Known-answer check of the digest itself.
    CHECK(sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  }

  TEST_CASE("acceptance configurations are committed and within budget") {
    for (const char* name : {"ppo_rectum", "hi-ppo_rectum", "ppo_descending", "hi-ppo_descending"}) {
      CAPTURE(name);
      const RunConfig c =
          load_run_config(test_path(std::string("configs/acceptance/") + name + ".json"));
      CHECK_NOTHROW(c.validate());
      CHECK(c.total_steps <= 200000);
      CHECK(c.segments.size() == 1);
      const bool hi = c.algorithm == Algorithm::HiPpo;
      CHECK(c.intervention == (hi ? InterventionMode::Scripted : InterventionMode::None));
    }
  }
}

TEST_SUITE("episode_log") {
  TEST_CASE("round trip preserves every field bit-exactly") {
    const EpisodeLog log = sample_log();
    const std::string text = format_episode_log(log);
    std::istringstream in(text);
    const EpisodeLog back = parse_episode_log(in);
    CHECK(format_episode_log(back) == text);
    CHECK(back.config_hash == log.config_hash);
    CHECK(back.config == log.config);
    CHECK(back.seed == 42);
    CHECK(back.episode == 3);
    CHECK(back.segments == log.segments);
    REQUIRE(back.steps.size() == log.steps.size());
    for (std::size_t i = 0; i < log.steps.size(); ++i) {
      const StepRecord& a = log.steps[i];
      const StepRecord& b = back.steps[i];
      CHECK(a.position == b.position);
      CHECK(a.depth == b.depth);
      CHECK(a.logits == b.logits);
      CHECK(a.value == b.value);
      CHECK(a.reward == b.reward);
      CHECK(a.path_error == b.path_error);
      CHECK(a.expert_action == b.expert_action);
      CHECK(a.intervened == b.intervened);
      CHECK(a.below_threshold == b.below_threshold);
    }
    CHECK(back.termination == "goal");
    CHECK(back.reached_goal);
  }

  TEST_CASE("file round trip and discovery") {
    const auto dir = scratch_dir("episode_log");
    write_episode_log(sample_log(), dir / "b" / "episode_000001.jsonl");
    write_episode_log(sample_log(), dir / "a.jsonl");
    const auto found = find_episode_logs(dir);
    REQUIRE(found.size() == 2);
    CHECK(found[0].filename() == "a.jsonl");
    CHECK(read_episode_log(found[1]).steps.size() == 5);
  }

  TEST_CASE("malformed logs are rejected") {
    const std::string good = format_episode_log(sample_log());
    auto parse_text = [](const std::string& s) {
      std::istringstream in(s);
      return parse_episode_log(in);
    };
    CHECK_THROWS_AS(parse_text("not json\n"), Error);
    CHECK_THROWS_AS(parse_text(""), Error);

    std::istringstream lines(good);
    std::vector<std::string> all;
    for (std::string l; std::getline(lines, l);) all.push_back(l);
    REQUIRE(all.size() == 7);
    auto join = [](const std::vector<std::string>& v) {
      std::string s;
      for (const auto& l : v) s += l + "\n";
      return s;
    };

    std::vector<std::string> gap = all;
    gap.erase(gap.begin() + 2);
    CHECK_THROWS_AS(parse_text(join(gap)), Error);

    std::vector<std::string> no_header(all.begin() + 1, all.end());
    CHECK_THROWS_AS(parse_text(join(no_header)), Error);

    std::vector<std::string> truncated(all.begin(), all.end() - 1);
    CHECK_THROWS_AS(parse_text(join(truncated)), Error);

    json header = json::parse(all[0]);
    header["version"] = kEpisodeLogVersion + 1;
    std::vector<std::string> bad_version = all;
    bad_version[0] = header.dump();
    CHECK_THROWS_WITH_AS(parse_text(join(bad_version)), doctest::Contains("version"), Error);

    json step = json::parse(all[1]);
    step["pos"] = json::array({1.0, 2.0});
    std::vector<std::string> bad_pos = all;
    bad_pos[1] = step.dump();
    CHECK_THROWS_AS(parse_text(join(bad_pos)), Error);
  }
}

TEST_SUITE("checkpoint") {
  Checkpoint sample_checkpoint() {
    Rng rng(5);
    Checkpoint c;
    const RunConfig cfg;
    c.config = canonical_json(cfg);
    c.config_hash = config_hash(cfg);
    c.env_steps = 123456;
    c.updates = 60;
    c.params = oracle::small_policy(rng, 8, 7);
    return c;
  }

  TEST_CASE("serialisation round trip is bit-exact") {
    const Checkpoint c = sample_checkpoint();
    const std::string bytes = serialize_checkpoint(c);
    const Checkpoint back = deserialize_checkpoint(bytes);
    CHECK(back == c);
    CHECK(serialize_checkpoint(back) == bytes);
    const auto dir = scratch_dir("checkpoint");
    save_checkpoint(c, dir / "c.bin");
    CHECK(load_checkpoint(dir / "c.bin") == c);
  }

  TEST_CASE("corrupt checkpoints are rejected") {
    const std::string bytes = serialize_checkpoint(sample_checkpoint());
    CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, bytes.size() - 1)), Error);
    CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, 10)), Error);
    CHECK_THROWS_AS(deserialize_checkpoint(""), Error);
    std::string magic = bytes;
    magic[0] ^= 0x5a;
    CHECK_THROWS_WITH_AS(deserialize_checkpoint(magic), doctest::Contains("magic"), Error);
    CHECK_THROWS_WITH_AS(deserialize_checkpoint(bytes + "x"), doctest::Contains("trailing"), Error);
    CHECK_THROWS_AS(load_checkpoint(scratch_dir("missing_ckpt") / "none.bin"), Error);
  }
}
