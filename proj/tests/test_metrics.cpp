#include <doctest.h>

#include <cmath>

#include "hippo/colon.hpp"
#include "hippo/metrics.hpp"
#include "hippo/rng.hpp"
#include "oracles.hpp"

using namespace hippo;

namespace {

ColonModel straight_tube() {
  const std::vector<SegmentSpec> spec{straight_segment("Tube", 200.0, 20.0)};
  return build_colon(spec, 1);
}

StepRecord record(std::size_t i, double wall, bool collided, double err = 0.0,
                  std::string seg = "Tube") {
  StepRecord r;
  r.step = i;
  r.wall_distance = wall;
  r.below_threshold = wall < 5.0;
  r.collided = collided;
  r.path_error = err;
  r.segment = std::move(seg);
  return r;
}

EpisodeLog log_with(std::vector<StepRecord> steps, std::string policy = "ppo") {
  EpisodeLog log;
  log.policy = std::move(policy);
  log.steps = std::move(steps);
  return log;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("ATE examples") {
    const ColonModel m = straight_tube();
    std::vector<Vec3> on;
    for (double s = 0.0; s <= 200.0; s += 10.0) on.push_back(m.position_at(s));
    const MeanStd zero = ate(on, m);
    CHECK(zero.mean == 0.0);
    CHECK(zero.std == 0.0);

    std::vector<Vec3> off;
    for (double s = 10.0; s <= 190.0; s += 10.0) {
      const PathFrame f = m.frame_at(s);
      const double phi = s / 30.0;
      off.push_back(m.position_at(s) + 4.0 * (std::cos(phi) * f.right + std::sin(phi) * f.up));
    }
    const MeanStd four = ate(off, m);
    CHECK(four.mean == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(four.std < 1e-9);

    const std::vector<Vec3> two{m.position_at(50.0) + 2.0 * m.frame_at(50.0).up,
                                m.position_at(120.0) + 6.0 * m.frame_at(120.0).right};
    const MeanStd pair = ate(two, m);
    CHECK(pair.mean == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(pair.std == doctest::Approx(2.0).epsilon(1e-12));

    CHECK_THROWS_AS(ate(std::vector<Vec3>{}, m), Error);
  }

  TEST_CASE("ATE is translation invariant") {
    const ColonModel m = build_colon(default_colon_segments(), 7);
    const Vec3 shift(-30.0, 12.5, 400.0);
    const ColonModel t = m.translated(shift);
    Rng rng(2);
    std::vector<Vec3> a, b;
    for (int i = 0; i < 100; ++i) {
      const double s = rng.uniform(0.0, m.total_length());
      const Vec3 p = m.position_at(s) + Vec3(rng.normal(), rng.normal(), rng.normal()) * 3.0;
      a.push_back(p);
      b.push_back(p + shift);
    }
    const MeanStd x = ate(a, m);
    const MeanStd y = ate(b, t);
    CHECK(x.mean == doctest::Approx(y.mean).epsilon(1e-9));
    CHECK(x.std == doctest::Approx(y.std).epsilon(1e-9));
    CHECK(x.mean >= 0.0);
  }

  TEST_CASE("security examples") {
    std::vector<StepRecord> clean;
    for (std::size_t i = 0; i < 10; ++i) clean.push_back(record(i, 10.0, false));
    CHECK(security(log_with(clean)) == 1.0);

    std::vector<StepRecord> worst;
    for (std::size_t i = 0; i < 10; ++i) worst.push_back(record(i, 0.0, true));
    CHECK(security(log_with(worst)) == doctest::Approx(0.0).epsilon(1e-15));

    CHECK(security(SecurityCounts{100, 10, 2}) == doctest::Approx(0.956).epsilon(1e-15));
    CHECK(std::abs(security(SecurityCounts{100, 10, 2}) - 0.956) < 1e-15);
    CHECK_THROWS_AS(security(SecurityCounts{0, 0, 0}), Error);
    CHECK_THROWS_AS(security(log_with({})), Error);
  }

  TEST_CASE("security counts proximity and collisions once per step") {
    std::vector<StepRecord> steps{record(0, 10.0, false), record(1, 3.0, false),
                                  record(2, 0.0, true), record(3, 4.99, false)};
    const SecurityCounts c = security_counts(log_with(steps));
    CHECK(c.steps == 4);
    CHECK(c.proximity == 3);
    CHECK(c.collisions == 1);
  }

  TEST_CASE("adding a collision never raises security") {
    Rng rng(3);
    for (int k = 0; k < 200; ++k) {
      std::vector<StepRecord> steps;
      const std::size_t n = 1 + rng.index(50);
      for (std::size_t i = 0; i < n; ++i) {
        const bool c = rng.uniform() < 0.1;
        steps.push_back(record(i, c ? 0.0 : rng.uniform(0.0, 15.0), c));
      }
      const double before = security(log_with(steps));
      steps.push_back(record(n, 0.0, true));
      CHECK(security(log_with(steps)) <= before);
    }
  }

  TEST_CASE("security of a concatenation is the step-weighted combination") {
    Rng rng(4);
    for (int k = 0; k < 100; ++k) {
      std::vector<StepRecord> a, b;
      for (std::size_t i = 0, n = 1 + rng.index(40); i < n; ++i) {
        const bool c = rng.uniform() < 0.2;
        a.push_back(record(i, c ? 0.0 : rng.uniform(0.0, 12.0), c));
      }
      for (std::size_t i = 0, n = 1 + rng.index(40); i < n; ++i) {
        const bool c = rng.uniform() < 0.2;
        b.push_back(record(i, c ? 0.0 : rng.uniform(0.0, 12.0), c));
      }
      const double sa = security(log_with(a));
      const double sb = security(log_with(b));
      std::vector<StepRecord> ab = a;
      ab.insert(ab.end(), b.begin(), b.end());
      const double na = static_cast<double>(a.size());
      const double nb = static_cast<double>(b.size());
      CHECK(security(log_with(ab)) == doctest::Approx((na * sa + nb * sb) / (na + nb)).epsilon(1e-12));
    }
  }

  TEST_CASE("Table II ATE columns reproduce per-segment and trimmed improvements") {
    std::vector<StepRecord> ppo, hippo;
    std::size_t i = 0;
    for (const auto& row : oracle::table_ii()) {
      ppo.push_back(record(i, 10.0, false, row.ppo_ate, row.segment));
      hippo.push_back(record(i, 10.0, false, row.hippo_ate, row.segment));
      ++i;
    }
    const std::vector<EpisodeLog> logs{log_with(ppo, "ppo"), log_with(hippo, "hi-ppo")};
    const ComparisonReport rep = compare_report(logs);
    REQUIRE(rep.improvement);
    const auto& imp = *rep.improvement;
    REQUIRE(imp.segments.size() == 6);
    std::vector<double> expected, base;
    for (std::size_t k = 0; k < 6; ++k) {
      const auto& row = oracle::table_ii()[k];
      CHECK(imp.segments[k] == row.segment);
      const double want = (row.ppo_ate - row.hippo_ate) / row.ppo_ate;
      CHECK(imp.improvement[k] == doctest::Approx(want).epsilon(1e-12));
      expected.push_back(want);
      base.push_back(row.ppo_ate);
    }
    const double by_value = oracle::trimmed_mean(expected, expected);
    const double by_base = oracle::trimmed_mean(expected, base);
    CHECK(imp.trimmed_by_improvement == doctest::Approx(by_value).epsilon(1e-12));
    CHECK(imp.trimmed_by_baseline_ate == doctest::Approx(by_base).epsilon(1e-12));
    const bool reproduced = std::abs(100.0 * by_value - 38.63) <= 0.5 ||
                            std::abs(100.0 * by_base - 38.63) <= 0.5;
    CHECK(reproduced);
    CHECK(100.0 * by_value == doctest::Approx(38.63).epsilon(0.5 / 38.63));
  }

  TEST_CASE("identical logs give zero improvement; single segment gives one row") {
    std::vector<StepRecord> steps{record(0, 10.0, false, 2.0, "Rectum"),
                                  record(1, 10.0, false, 4.0, "Rectum")};
    const std::vector<EpisodeLog> logs{log_with(steps, "ppo"), log_with(steps, "hi-ppo")};
    const ComparisonReport rep = compare_report(logs);
    REQUIRE(rep.improvement);
    CHECK(rep.improvement->mean == 0.0);
    const std::vector<EpisodeLog> one{log_with(steps, "ppo")};
    const ComparisonReport single = compare_report(one);
    CHECK(single.cells.size() == 1);
    CHECK(single.cells[0].ate.mean == doctest::Approx(3.0));
    CHECK(single.cells[0].ate.std == doctest::Approx(1.0));
    CHECK(!single.improvement);
  }

  TEST_CASE("missing cells are reported, not fatal") {
    const std::vector<EpisodeLog> logs{
        log_with({record(0, 10.0, false, 1.0, "Rectum")}, "ppo"),
        log_with({record(0, 10.0, false, 1.0, "Sigmoid")}, "hi-ppo")};
    const ComparisonReport rep = compare_report(logs);
    CHECK(rep.missing.size() == 2);
    CHECK(format_report(rep).find("missing") != std::string::npos);
    CHECK(format_report_csv(rep).find("Rectum") != std::string::npos);
  }

  TEST_CASE("trajectory plot is an SVG document") {
    const ColonModel m = straight_tube();
    const std::vector<Vec3> traj{m.position_at(0.0), m.position_at(10.0)};
    const std::string svg = trajectory_svg(m, traj);
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
  }
}
