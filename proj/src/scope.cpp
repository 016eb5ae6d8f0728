#include "hippo/scope.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace hippo {

namespace {

constexpr std::array<std::string_view, kActionCount> kActionNames{
    "BendUp", "BendDown", "BendLeft", "BendRight", "Advance", "Withdraw"};

void distribute_bones(ScopeState& s, const MotionConfig& cfg) {
  for (int d = 0; d < 4; ++d) {
    s.bone_rotations[d].assign(static_cast<std::size_t>(cfg.bones),
                               s.bend_angles[d] / static_cast<double>(cfg.bones));
  }
}

void push_trail(ScopeState& s, const MotionConfig& cfg) {
  s.trail.push_back(s.tip_position);
  while (s.trail.size() > cfg.trail_length) s.trail.pop_front();
}

// Net change of `delta` towards `d`: the opposing angle is unwound first and
// any remainder bends towards `d`, capped at the maximum.
void bend_towards(ScopeState& s, BendDirection d, double delta, double max_bend) {
  double& own = s.bend_angles[static_cast<int>(d)];
  double& other = s.bend_angles[static_cast<int>(opposite(d))];
  const double unwound = std::min(other, delta);
  other -= unwound;
  own = std::min(max_bend, own + (delta - unwound));
}

}  // namespace

Action action_from_index(int index) {
  if (index < 0 || index >= kActionCount) {
    throw Error("action index out of range: " + std::to_string(index));
  }
  return static_cast<Action>(index);
}

std::string_view to_string(Action a) { return kActionNames[static_cast<std::size_t>(to_index(a))]; }

Action parse_action(std::string_view name) {
  for (int i = 0; i < kActionCount; ++i) {
    if (kActionNames[static_cast<std::size_t>(i)] == name) return static_cast<Action>(i);
  }
  throw Error("unknown action '" + std::string(name) + "'");
}

Vec3 heading_from_bends(const ColonModel& model, double s,
                        const std::array<double, 4>& bend_angles) {
  const PathFrame f = model.frame_at(s);
  const double pitch = deg_to_rad(bend_angles[0] - bend_angles[1]);
  const double yaw = deg_to_rad(bend_angles[3] - bend_angles[2]);
  const Vec3 h = std::cos(pitch) * (std::cos(yaw) * f.tangent + std::sin(yaw) * f.right) +
                 std::sin(pitch) * f.up;
  return h.normalized();
}

ScopeState initial_scope(const ColonModel& model, const MotionConfig& cfg) {
  ScopeState s;
  s.insertion_depth = 0.0;
  s.tip_position = model.position_at(0.0);
  s.tip_heading = heading_from_bends(model, 0.0, s.bend_angles);
  distribute_bones(s, cfg);
  push_trail(s, cfg);
  return s;
}

StepOutcome apply_action(const ColonModel& model, const ScopeState& scope, Action a,
                         const MotionConfig& cfg) {
  StepOutcome out{scope, {}};
  ScopeState& s = out.scope;
  switch (a) {
    case Action::BendUp:
    case Action::BendDown:
    case Action::BendLeft:
    case Action::BendRight:
      bend_towards(s, static_cast<BendDirection>(to_index(a)), cfg.bend_step_deg,
                   cfg.max_bend_deg);
      distribute_bones(s, cfg);
      break;
    case Action::Advance:
      s.tip_position += cfg.step_scale * s.tip_heading;
      break;
    case Action::Withdraw:
      s.tip_position -= cfg.step_scale * s.tip_heading;
      break;
  }
  out.proximity = wall_distance(model, s.tip_position, cfg.proximity_threshold);
  s.insertion_depth = out.proximity.s;
  s.furthest_depth = std::max(s.furthest_depth, s.insertion_depth);
  s.tip_heading = heading_from_bends(model, s.insertion_depth, s.bend_angles);
  push_trail(s, cfg);
  return out;
}

}  // namespace hippo
