#pragma once

#include <array>
#include <optional>
#include <vector>

#include "hippo/colon.hpp"
#include "hippo/scope.hpp"

namespace hippo {

struct ObservationConfig {
  int rays = 9;                       // centre ray plus a ring on the cone
  double cone_half_angle_deg = 60.0;
  double max_range = 100.0;           // mm
  double waypoint_range = 100.0;      // waypoint distance normaliser, mm
  double max_bend_deg = 90.0;
};

struct Observation {
  std::vector<double> ray_depths;      // in [0, 1]
  Vec3 waypoint_dir = Vec3::Zero();    // tip frame: x right, y up, z forward
  double waypoint_dist = 0.0;          // in [0, 1]
  std::array<double, 4> bend_state{};  // bend / max bend, BendDirection order

  // Flat feature vector: rays, waypoint_dir, waypoint_dist, bend_state.
  std::vector<double> features() const;
  static std::size_t feature_size(int rays) { return static_cast<std::size_t>(rays) + 8; }
};

struct TipFrame {
  Vec3 right = Vec3::UnitX();
  Vec3 up = Vec3::UnitY();
  Vec3 forward = Vec3::UnitZ();

  Vec3 to_world(const Vec3& local) const {
    return local.x() * right + local.y() * up + local.z() * forward;
  }
  Vec3 to_local(const Vec3& world) const {
    return {world.dot(right), world.dot(up), world.dot(forward)};
  }
};

// Frame at the tip: forward is the heading, up follows the centerline frame.
TipFrame tip_frame(const ColonModel& model, const ScopeState& scope);

// Ray directions in the tip frame. Index 0 is the centre ray; ring rays start
// at "up" and proceed clockwise (towards "right") as seen from behind the tip.
std::vector<Vec3> ray_directions(const ObservationConfig& cfg);

// Distance along the ray to the lumen wall, capped at max_range.
double cast_ray(const ColonModel& model, const Vec3& origin, const Vec3& dir,
                double max_range);

// Throws Error when the tip is outside the lumen.
Observation observe(const ColonModel& model, const ScopeState& scope,
                    const ObservationConfig& cfg = {});

// First waypoint strictly ahead of arclength s.
std::optional<std::size_t> next_waypoint(const ColonModel& model, double s);

// Remaining path length through the waypoints: distance to the next waypoint
// plus the waypoint-to-waypoint distances after it. Zero past the last one.
double distance_to_go(const ColonModel& model, const Vec3& p, double s);

struct RewardConfig {
  double position_weight = 1.0;
  double orientation_weight = 0.1;
  double waypoint_bonus = 1.0;
  double step_scale = 3.0;  // mm, the largest advance per step
};

// Number of waypoints at or behind arclength s (the start waypoint counts).
std::size_t waypoints_reached(const ColonModel& model, double s);

struct RewardTerms {
  double position = 0.0;
  double orientation = 0.0;
  double bonus = 0.0;
  double total() const { return position + orientation + bonus; }
};

// The waypoint bonus is paid once per waypoint, when the scope's furthest
// depth first passes it.
RewardTerms reward_terms(const ColonModel& model, const ScopeState& prev, const ScopeState& cur,
                         const RewardConfig& cfg = {});

double base_reward(const ColonModel& model, const ScopeState& prev, const ScopeState& cur,
                   const RewardConfig& cfg = {});

}  // namespace hippo
