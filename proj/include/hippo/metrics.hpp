#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hippo/colon.hpp"
#include "hippo/scope.hpp"

namespace hippo {

struct StepRecord {
  std::size_t step = 0;
  Vec3 position = Vec3::Zero();
  double depth = 0.0;
  std::string segment;
  int action = 0;        // executed
  int agent_action = 0;  // sampled by the policy before arbitration
  std::optional<int> expert_action;
  int intervened = 0;
  std::array<double, kActionCount> logits{};  // pre-arbitration
  double value = 0.0;
  double base_reward = 0.0;
  double reward = 0.0;  // after the intervention penalty
  double wall_distance = 0.0;
  bool below_threshold = false;
  bool collided = false;
  double path_error = 0.0;  // distance to the nearest centerline point
};

struct EpisodeLog {
  int version = 1;
  std::string config_hash;
  std::string config;  // canonical JSON of the producing configuration
  std::uint64_t seed = 0;
  std::size_t episode = 0;
  std::string mode;    // train | evaluate | expert
  std::string policy;  // label used to group reports
  std::vector<std::string> segments;
  double step_period_s = 0.1;
  Vec3 start = Vec3::Zero();
  std::vector<StepRecord> steps;
  std::string termination;  // goal | collision | step_cap | budget
  bool reached_goal = false;

  double sim_time_s() const { return step_period_s * static_cast<double>(steps.size()); }
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population
};

MeanStd mean_std(std::span<const double> values);

// Distances from each point to its nearest centerline point.
std::vector<double> path_errors(std::span<const Vec3> trajectory, const ColonModel& model);

// Throws Error for an empty trajectory.
MeanStd ate(std::span<const Vec3> trajectory, const ColonModel& model);

struct SecurityCounts {
  std::size_t steps = 0;      // N
  std::size_t proximity = 0;  // f(D)
  std::size_t collisions = 0;  // C
};

struct SecurityWeights {
  double threshold = 5.0;  // D, mm
  double proximity = 0.3;
  double collision = 0.7;
};

SecurityCounts security_counts(const EpisodeLog& log, double threshold = 5.0);
double security(const SecurityCounts& counts, const SecurityWeights& w = {});
// Throws Error when the log has no steps.
double security(const EpisodeLog& log, const SecurityWeights& w = {});

struct CellStats {
  std::string policy;
  std::string segment;
  std::size_t episodes = 0;
  std::size_t steps = 0;
  std::size_t collisions = 0;
  std::size_t proximity_events = 0;
  std::size_t goals = 0;
  MeanStd ate;
  double security = 0.0;
  double sim_time_s = 0.0;  // mean per episode
};

struct ImprovementSummary {
  std::string baseline;
  std::string candidate;
  std::vector<std::string> segments;
  std::vector<double> improvement;  // (baseline - candidate) / baseline ATE
  double mean = 0.0;
  // Mean after dropping the largest and smallest improvement.
  double trimmed_by_improvement = 0.0;
  // Mean after dropping the segments with the largest and smallest baseline ATE.
  double trimmed_by_baseline_ate = 0.0;
};

ImprovementSummary relative_improvement(std::span<const std::string> segments,
                                        std::span<const double> baseline_ate,
                                        std::span<const double> candidate_ate);

struct ReportOptions {
  SecurityWeights weights;
  std::string baseline = "ppo";
  std::string candidate = "hi-ppo";
};

struct ComparisonReport {
  std::vector<CellStats> cells;
  std::vector<std::string> missing;  // "policy/segment" without data
  std::optional<ImprovementSummary> improvement;
};

// Steps are grouped by the log's policy label and each step's segment label.
// Uses only logged fields.
ComparisonReport compare_report(std::span<const EpisodeLog> logs, const ReportOptions& opts = {});

std::string format_report(const ComparisonReport& report);
std::string format_report_csv(const ComparisonReport& report);

// Top-down plot of the centerline, tube outline and trajectory.
std::string trajectory_svg(const ColonModel& model, std::span<const Vec3> trajectory);

}  // namespace hippo
