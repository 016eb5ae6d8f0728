#include "hippo/env.hpp"

#include <algorithm>
#include <cmath>

namespace hippo {

namespace {

// Sphere tracing against the tube: clearance under-estimates the true distance
// to the wall while the radius slope stays below ~0.4, which the build keeps.
constexpr double kStepFactor = 0.8;
constexpr double kMinStep = 0.1;
constexpr double kHitTolerance = 1e-9;
constexpr int kBisections = 60;

double clearance(const ColonModel& model, const Vec3& p) {
  const CenterlineProjection proj = model.project(p);
  return model.radius_at(proj.s) - proj.radial;
}

}  // namespace

std::vector<double> Observation::features() const {
  std::vector<double> f;
  f.reserve(feature_size(static_cast<int>(ray_depths.size())));
  f.insert(f.end(), ray_depths.begin(), ray_depths.end());
  f.push_back(waypoint_dir.x());
  f.push_back(waypoint_dir.y());
  f.push_back(waypoint_dir.z());
  f.push_back(waypoint_dist);
  f.insert(f.end(), bend_state.begin(), bend_state.end());
  return f;
}

TipFrame tip_frame(const ColonModel& model, const ScopeState& scope) {
  const PathFrame f = model.frame_at(scope.insertion_depth);
  const auto& b = scope.bend_angles;
  const double pitch = deg_to_rad(b[0] - b[1]);
  const double yaw = deg_to_rad(b[3] - b[2]);
  const Vec3 level = std::cos(yaw) * f.tangent + std::sin(yaw) * f.right;
  TipFrame t;
  t.forward = (std::cos(pitch) * level + std::sin(pitch) * f.up).normalized();
  t.up = (-std::sin(pitch) * level + std::cos(pitch) * f.up).normalized();
  t.right = t.up.cross(t.forward);
  return t;
}

std::vector<Vec3> ray_directions(const ObservationConfig& cfg) {
  if (cfg.rays < 1) throw Error("observation needs at least one ray");
  std::vector<Vec3> dirs{Vec3::UnitZ()};
  const int ring = cfg.rays - 1;
  const double half = deg_to_rad(cfg.cone_half_angle_deg);
  for (int k = 0; k < ring; ++k) {
    const double az = 2.0 * kPi * k / ring;
    dirs.emplace_back(std::sin(half) * std::sin(az), std::sin(half) * std::cos(az),
                      std::cos(half));
  }
  return dirs;
}

double cast_ray(const ColonModel& model, const Vec3& origin, const Vec3& dir,
                double max_range) {
  double c = clearance(model, origin);
  if (c <= 0.0) return 0.0;
  double t = 0.0;
  while (t < max_range) {
    if (c < kHitTolerance) return t;
    const double step = std::max(kStepFactor * c, kMinStep);
    const double next = std::min(t + step, max_range);
    const double cn = clearance(model, origin + next * dir);
    if (cn <= 0.0) {
      double lo = t;
      double hi = next;
      for (int i = 0; i < kBisections && hi - lo > kHitTolerance; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (clearance(model, origin + mid * dir) > 0.0) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      return 0.5 * (lo + hi);
    }
    if (next >= max_range) break;
    t = next;
    c = cn;
  }
  return max_range;
}

std::optional<std::size_t> next_waypoint(const ColonModel& model, double s) {
  const auto& w = model.waypoints();
  auto it = std::upper_bound(w.begin(), w.end(), s,
                             [](double v, const Waypoint& wp) { return v < wp.s; });
  if (it == w.end()) return std::nullopt;
  return static_cast<std::size_t>(it - w.begin());
}

std::size_t waypoints_reached(const ColonModel& model, double s) {
  const auto next = next_waypoint(model, s);
  return next ? *next : model.waypoints().size();
}

double distance_to_go(const ColonModel& model, const Vec3& p, double s) {
  const auto next = next_waypoint(model, s);
  if (!next) return 0.0;
  const auto& w = model.waypoints();
  double d = (w[*next].position - p).norm();
  for (std::size_t j = *next; j + 1 < w.size(); ++j) {
    d += (w[j + 1].position - w[j].position).norm();
  }
  return d;
}

Observation observe(const ColonModel& model, const ScopeState& scope,
                    const ObservationConfig& cfg) {
  if (wall_distance(model, scope.tip_position).collided) {
    throw Error("observe: scope tip is outside the lumen");
  }
  const TipFrame frame = tip_frame(model, scope);
  Observation obs;
  for (const Vec3& local : ray_directions(cfg)) {
    const double hit = cast_ray(model, scope.tip_position, frame.to_world(local), cfg.max_range);
    obs.ray_depths.push_back(std::clamp(hit / cfg.max_range, 0.0, 1.0));
  }
  if (const auto next = next_waypoint(model, scope.insertion_depth)) {
    const Vec3 delta = model.waypoints()[*next].position - scope.tip_position;
    const double dist = delta.norm();
    if (dist > 1e-9) obs.waypoint_dir = frame.to_local(delta / dist).normalized();
    obs.waypoint_dist = std::clamp(dist / cfg.waypoint_range, 0.0, 1.0);
  }
  for (int d = 0; d < 4; ++d) {
    obs.bend_state[d] = scope.bend_angles[d] / cfg.max_bend_deg;
  }
  return obs;
}

RewardTerms reward_terms(const ColonModel& model, const ScopeState& prev, const ScopeState& cur,
                         const RewardConfig& cfg) {
  RewardTerms r;
  const double before = distance_to_go(model, prev.tip_position, prev.insertion_depth);
  const double after = distance_to_go(model, cur.tip_position, cur.insertion_depth);
  r.position = cfg.position_weight * (before - after) / cfg.step_scale;

  if (const auto next = next_waypoint(model, cur.insertion_depth)) {
    const Vec3 delta = model.waypoints()[*next].position - cur.tip_position;
    const double dist = delta.norm();
    if (dist > 1e-9) {
      r.orientation = cfg.orientation_weight * cur.tip_heading.dot(delta / dist);
    }
  }

  if (waypoints_reached(model, cur.furthest_depth) > waypoints_reached(model, prev.furthest_depth)) {
    r.bonus = cfg.waypoint_bonus;
  }
  return r;
}

double base_reward(const ColonModel& model, const ScopeState& prev, const ScopeState& cur,
                   const RewardConfig& cfg) {
  return reward_terms(model, prev, cur, cfg).total();
}

}  // namespace hippo
