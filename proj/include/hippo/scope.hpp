#pragma once

#include <array>
#include <deque>
#include <optional>
#include <string_view>
#include <vector>

#include "hippo/colon.hpp"

namespace hippo {

// Discrete action set; the integer values are the wire/log encoding.
enum class Action : int {
  BendUp = 0,
  BendDown = 1,
  BendLeft = 2,
  BendRight = 3,
  Advance = 4,
  Withdraw = 5,
};

inline constexpr int kActionCount = 6;

constexpr int to_index(Action a) { return static_cast<int>(a); }
Action action_from_index(int index);  // throws Error outside 0..5
std::string_view to_string(Action a);
Action parse_action(std::string_view name);

// Bend directions, in the order used for ScopeState::bend_angles.
enum class BendDirection : int { Up = 0, Down = 1, Left = 2, Right = 3 };

constexpr BendDirection opposite(BendDirection d) {
  switch (d) {
    case BendDirection::Up: return BendDirection::Down;
    case BendDirection::Down: return BendDirection::Up;
    case BendDirection::Left: return BendDirection::Right;
    case BendDirection::Right: return BendDirection::Left;
  }
  return d;
}

constexpr Action bend_action(BendDirection d) { return static_cast<Action>(static_cast<int>(d)); }

struct MotionConfig {
  double bend_step_deg = 5.0;
  int bones = 5;
  double max_bend_deg = 90.0;
  double step_scale = 3.0;             // mm per Advance/Withdraw
  double proximity_threshold = 5.0;    // D, mm
  std::size_t trail_length = 64;
};

struct ScopeState {
  Vec3 tip_position = Vec3::Zero();
  Vec3 tip_heading = Vec3::UnitZ();
  double insertion_depth = 0.0;               // nearest centerline arclength, mm
  double furthest_depth = 0.0;                // max insertion depth so far, mm
  std::array<double, 4> bend_angles{};        // degrees, indexed by BendDirection
  std::array<std::vector<double>, 4> bone_rotations;  // degrees, per direction
  std::deque<Vec3> trail;

  double bend(BendDirection d) const { return bend_angles[static_cast<int>(d)]; }
};

// Tip at the start of the centerline, aligned with it, no bend.
ScopeState initial_scope(const ColonModel& model, const MotionConfig& cfg = {});

// Heading implied by the bend angles on the local centerline frame at `s`.
Vec3 heading_from_bends(const ColonModel& model, double s,
                        const std::array<double, 4>& bend_angles);

struct StepOutcome {
  ScopeState scope;
  ProximityReport proximity;
};

StepOutcome apply_action(const ColonModel& model, const ScopeState& scope, Action a,
                         const MotionConfig& cfg = {});

}  // namespace hippo
