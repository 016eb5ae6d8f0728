#include "hippo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

namespace hippo {

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  const double n = static_cast<double>(values.size());
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(var / n);
  return out;
}

std::vector<double> path_errors(std::span<const Vec3> trajectory, const ColonModel& model) {
  std::vector<double> d;
  d.reserve(trajectory.size());
  for (const Vec3& p : trajectory) d.push_back(model.project(p).distance);
  return d;
}

MeanStd ate(std::span<const Vec3> trajectory, const ColonModel& model) {
  if (trajectory.empty()) throw Error("ate: empty trajectory");
  const auto d = path_errors(trajectory, model);
  return mean_std(d);
}

SecurityCounts security_counts(const EpisodeLog& log, double threshold) {
  SecurityCounts c;
  c.steps = log.steps.size();
  for (const auto& s : log.steps) {
    if (s.wall_distance < threshold) ++c.proximity;
    if (s.collided) ++c.collisions;
  }
  return c;
}

double security(const SecurityCounts& c, const SecurityWeights& w) {
  if (c.steps == 0) throw Error("security: no measurements");
  const double n = static_cast<double>(c.steps);
  return 1.0 - (w.proximity * static_cast<double>(c.proximity) / n +
                w.collision * static_cast<double>(c.collisions) / n);
}

double security(const EpisodeLog& log, const SecurityWeights& w) {
  return security(security_counts(log, w.threshold), w);
}

ImprovementSummary relative_improvement(std::span<const std::string> segments,
                                        std::span<const double> baseline_ate,
                                        std::span<const double> candidate_ate) {
  if (segments.size() != baseline_ate.size() || segments.size() != candidate_ate.size()) {
    throw Error("relative_improvement: length mismatch");
  }
  ImprovementSummary s;
  s.segments.assign(segments.begin(), segments.end());
  for (std::size_t i = 0; i < segments.size(); ++i) {
    s.improvement.push_back((baseline_ate[i] - candidate_ate[i]) / baseline_ate[i]);
  }
  const std::size_t n = s.improvement.size();
  if (n == 0) return s;
  s.mean = std::accumulate(s.improvement.begin(), s.improvement.end(), 0.0) / static_cast<double>(n);
  if (n < 3) {
    s.trimmed_by_improvement = s.mean;
    s.trimmed_by_baseline_ate = s.mean;
    return s;
  }
  std::vector<double> sorted = s.improvement;
  std::sort(sorted.begin(), sorted.end());
  s.trimmed_by_improvement =
      std::accumulate(sorted.begin() + 1, sorted.end() - 1, 0.0) / static_cast<double>(n - 2);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return baseline_ate[a] < baseline_ate[b]; });
  double acc = 0.0;
  for (std::size_t k = 1; k + 1 < n; ++k) acc += s.improvement[order[k]];
  s.trimmed_by_baseline_ate = acc / static_cast<double>(n - 2);
  return s;
}

ComparisonReport compare_report(std::span<const EpisodeLog> logs, const ReportOptions& opts) {
  struct Accum {
    std::vector<double> errors;
    SecurityCounts counts;
    std::size_t episodes = 0;
    std::size_t goals = 0;
    double sim_time = 0.0;
  };
  std::vector<std::string> policies, segments;
  std::map<std::pair<std::string, std::string>, Accum> cells;
  auto remember = [](std::vector<std::string>& v, const std::string& s) {
    if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
  };

  for (const auto& log : logs) {
    remember(policies, log.policy);
    std::map<std::string, std::size_t> steps_in;
    for (const auto& st : log.steps) {
      remember(segments, st.segment);
      Accum& a = cells[{log.policy, st.segment}];
      a.errors.push_back(st.path_error);
      ++a.counts.steps;
      if (st.wall_distance < opts.weights.threshold) ++a.counts.proximity;
      if (st.collided) ++a.counts.collisions;
      ++steps_in[st.segment];
    }
    for (const auto& [seg, n] : steps_in) {
      Accum& a = cells[{log.policy, seg}];
      ++a.episodes;
      a.sim_time += log.step_period_s * static_cast<double>(n);
      if (log.reached_goal && !log.steps.empty() && log.steps.back().segment == seg) ++a.goals;
    }
  }

  ComparisonReport report;
  for (const auto& seg : segments) {
    for (const auto& pol : policies) {
      const auto it = cells.find({pol, seg});
      if (it == cells.end()) {
        report.missing.push_back(pol + "/" + seg);
        continue;
      }
      const Accum& a = it->second;
      CellStats c;
      c.policy = pol;
      c.segment = seg;
      c.episodes = a.episodes;
      c.steps = a.counts.steps;
      c.collisions = a.counts.collisions;
      c.proximity_events = a.counts.proximity;
      c.goals = a.goals;
      c.ate = mean_std(a.errors);
      c.security = security(a.counts, opts.weights);
      c.sim_time_s = a.sim_time / static_cast<double>(a.episodes);
      report.cells.push_back(c);
    }
  }

  std::vector<std::string> shared;
  std::vector<double> base, cand;
  for (const auto& seg : segments) {
    const auto b = cells.find({opts.baseline, seg});
    const auto c = cells.find({opts.candidate, seg});
    if (b == cells.end() || c == cells.end()) continue;
    shared.push_back(seg);
    base.push_back(mean_std(b->second.errors).mean);
    cand.push_back(mean_std(c->second.errors).mean);
  }
  if (!shared.empty()) {
    ImprovementSummary s = relative_improvement(shared, base, cand);
    s.baseline = opts.baseline;
    s.candidate = opts.candidate;
    report.improvement = std::move(s);
  }
  return report;
}

std::string format_report(const ComparisonReport& report) {
  std::ostringstream out;
  out << std::left << std::setw(12) << "segment" << std::setw(10) << "policy" << std::right
      << std::setw(5) << "eps" << std::setw(8) << "steps" << std::setw(18) << "ATE mm (std)"
      << std::setw(10) << "security" << std::setw(6) << "coll" << std::setw(6) << "prox"
      << std::setw(6) << "goal" << std::setw(10) << "time s" << "\n";
  for (const auto& c : report.cells) {
    std::ostringstream ate;
    ate << std::fixed << std::setprecision(3) << c.ate.mean << " (" << std::setprecision(3)
        << c.ate.std << ")";
    out << std::left << std::setw(12) << c.segment << std::setw(10) << c.policy << std::right
        << std::setw(5) << c.episodes << std::setw(8) << c.steps << std::setw(18) << ate.str()
        << std::setw(10) << std::fixed << std::setprecision(4) << c.security << std::setw(6)
        << c.collisions << std::setw(6) << c.proximity_events << std::setw(6) << c.goals
        << std::setw(10) << std::setprecision(1) << c.sim_time_s << "\n";
  }
  for (const auto& m : report.missing) out << "missing: " << m << "\n";
  if (report.improvement) {
    const auto& s = *report.improvement;
    out << "\nATE improvement of " << s.candidate << " over " << s.baseline << ":\n";
    for (std::size_t i = 0; i < s.segments.size(); ++i) {
      out << "  " << std::left << std::setw(12) << s.segments[i] << std::right << std::fixed
          << std::setprecision(2) << 100.0 * s.improvement[i] << " %\n";
    }
    out << "  mean " << std::setprecision(2) << 100.0 * s.mean << " %, trimmed (by improvement) "
        << 100.0 * s.trimmed_by_improvement << " %, trimmed (by baseline ATE) "
        << 100.0 * s.trimmed_by_baseline_ate << " %\n";
  }
  return out.str();
}

std::string format_report_csv(const ComparisonReport& report) {
  std::ostringstream out;
  out << "segment,policy,episodes,steps,ate_mean,ate_std,security,collisions,proximity_events,"
         "goals,sim_time_s\n";
  out << std::setprecision(10);
  for (const auto& c : report.cells) {
    out << c.segment << ',' << c.policy << ',' << c.episodes << ',' << c.steps << ','
        << c.ate.mean << ',' << c.ate.std << ',' << c.security << ',' << c.collisions << ','
        << c.proximity_events << ',' << c.goals << ',' << c.sim_time_s << "\n";
  }
  return out.str();
}

std::string trajectory_svg(const ColonModel& model, std::span<const Vec3> trajectory) {
  // Project onto the two axes with the largest centerline extent.
  Vec3 lo = model.samples().front();
  Vec3 hi = lo;
  for (const auto& p : model.samples()) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec3 extent = hi - lo;
  std::array<int, 3> axes{0, 1, 2};
  std::sort(axes.begin(), axes.end(), [&](int a, int b) { return extent[a] > extent[b]; });
  const int ax = axes[0];
  const int ay = axes[1];
  const double margin = 40.0;
  const double scale = 2.0;
  const double width = (extent[ax] + 2 * margin) * scale;
  const double height = (extent[ay] + 2 * margin) * scale;
  auto px = [&](const Vec3& p) { return (p[ax] - lo[ax] + margin) * scale; };
  auto py = [&](const Vec3& p) { return height - (p[ay] - lo[ay] + margin) * scale; };

  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  auto polyline = [&](const std::vector<Vec3>& pts, const char* colour, double w,
                      const char* extra) {
    out << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"" << w << "\" "
        << extra << " points=\"";
    for (const auto& p : pts) out << px(p) << ',' << py(p) << ' ';
    out << "\"/>\n";
  };

  // Tube outline in the projection plane.
  std::vector<Vec3> left, right;
  const auto& s = model.sample_arclengths();
  for (std::size_t i = 0; i < s.size(); i += 4) {
    const PathFrame f = model.frame_at(s[i]);
    Vec3 side = Vec3::Zero();
    side[ax] = -f.tangent[ay];
    side[ay] = f.tangent[ax];
    if (side.norm() < 1e-9) side = f.right;
    side.normalize();
    const double r = model.radius_at(s[i]);
    left.push_back(model.samples()[i] + r * side);
    right.push_back(model.samples()[i] - r * side);
  }
  polyline(left, "#9aa5b1", 1.0, "");
  polyline(right, "#9aa5b1", 1.0, "");
  polyline(model.samples(), "#2b6cb0", 1.0, "stroke-dasharray=\"4 3\"");
  if (!trajectory.empty()) {
    polyline(std::vector<Vec3>(trajectory.begin(), trajectory.end()), "#c53030", 1.5, "");
  }
  for (const auto& w : model.waypoints()) {
    out << "<circle cx=\"" << px(w.position) << "\" cy=\"" << py(w.position)
        << "\" r=\"2\" fill=\"#2f855a\"/>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace hippo
