#pragma once

#include <array>
#include <optional>

#include "hippo/env.hpp"
#include "hippo/scope.hpp"

namespace hippo {

struct ExpertConfig {
  double depth_threshold = 0.3;
  double bend_step_deg = 5.0;
  double max_bend_deg = 90.0;
};

// Deepest ray when it reaches the threshold; ties go to the lowest index, so
// the centre ray wins among equals.
std::optional<int> farthest_direction(const Observation& obs, double depth_threshold = 0.3);

// Bend action that swings the heading towards ring ray `index` (index >= 1).
// The dominant component of the ray's offset decides; diagonals prefer the
// vertical knob.
Action bend_toward_ray(int index, int ray_count);

// Directions marked fully bent while searching for an open direction. The
// marks persist across steps until a farthest point is found again.
struct ExpertMemory {
  std::array<bool, 4> fully_bent{};  // BendDirection order
  void clear() { fully_bent = {}; }
};

// Search order when no farthest point is visible.
inline constexpr std::array<BendDirection, 4> kSearchOrder{
    BendDirection::Up, BendDirection::Right, BendDirection::Down, BendDirection::Left};

// Farthest-point controller. Found on the centre ray: Advance. Found off
// centre: bend towards it. Not found: bend through the search order, marking
// directions whose next bend would exceed the limit; once all four are
// marked, Withdraw.
Action expert_step(const ColonModel& model, const ScopeState& scope, const Observation& obs,
                   ExpertMemory& memory, const ExpertConfig& cfg = {});

// Stateless form: a direction counts as fully bent when its angle is at the
// limit.
Action expert_step(const ColonModel& model, const ScopeState& scope, const Observation& obs,
                   const ExpertConfig& cfg = {});

}  // namespace hippo
