#include "hippo/expert.hpp"

#include <cmath>

namespace hippo {

std::optional<int> farthest_direction(const Observation& obs, double depth_threshold) {
  if (obs.ray_depths.empty()) return std::nullopt;
  int best = 0;
  for (int i = 1; i < static_cast<int>(obs.ray_depths.size()); ++i) {
    if (obs.ray_depths[i] > obs.ray_depths[best]) best = i;
  }
  if (obs.ray_depths[best] < depth_threshold) return std::nullopt;
  return best;
}

Action bend_toward_ray(int index, int ray_count) {
  const int ring = ray_count - 1;
  if (index < 1 || index > ring) throw Error("bend_toward_ray: not a ring ray");
  const double az = 2.0 * kPi * (index - 1) / ring;
  const double up = std::cos(az);
  const double right = std::sin(az);
  if (std::abs(up) >= std::abs(right) - 1e-12) {
    return up > 0.0 ? Action::BendUp : Action::BendDown;
  }
  return right > 0.0 ? Action::BendRight : Action::BendLeft;
}

namespace {

bool would_exceed(const ScopeState& scope, BendDirection d, const ExpertConfig& cfg) {
  return scope.bend(d) + cfg.bend_step_deg > cfg.max_bend_deg + 1e-9;
}

Action act_on_found(const ScopeState& scope, const Observation& obs, int ray,
                    const ExpertConfig& cfg) {
  if (ray == 0) return Action::Advance;
  const Action bend = bend_toward_ray(ray, static_cast<int>(obs.ray_depths.size()));
  // Already at the limit towards the target: move towards it instead.
  if (would_exceed(scope, static_cast<BendDirection>(to_index(bend)), cfg)) {
    return Action::Advance;
  }
  return bend;
}

}  // namespace

Action expert_step(const ColonModel& /*model*/, const ScopeState& scope, const Observation& obs,
                   ExpertMemory& memory, const ExpertConfig& cfg) {
  if (const auto ray = farthest_direction(obs, cfg.depth_threshold)) {
    memory.clear();
    return act_on_found(scope, obs, *ray, cfg);
  }
  for (BendDirection d : kSearchOrder) {
    bool& marked = memory.fully_bent[static_cast<int>(d)];
    if (marked) continue;
    if (would_exceed(scope, d, cfg)) {
      marked = true;
      continue;
    }
    return bend_action(d);
  }
  return Action::Withdraw;
}

Action expert_step(const ColonModel& model, const ScopeState& scope, const Observation& obs,
                   const ExpertConfig& cfg) {
  ExpertMemory fresh;
  return expert_step(model, scope, obs, fresh, cfg);
}

}  // namespace hippo
