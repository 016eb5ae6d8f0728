#include "hippo/hi.hpp"

#include <algorithm>
#include <cmath>

namespace hippo {

void HIConfig::validate() const {
  if (!(penalty < 0.0)) throw Error("HIConfig: penalty (lambda) must be negative");
  if (!(bc_weight >= 0.0)) throw Error("HIConfig: bc_weight must be non-negative");
  if (stuck_window < 1) throw Error("HIConfig: stuck_window must be >= 1");
  if (human_hold_steps < 1) throw Error("HIConfig: human_hold_steps must be >= 1");
}

Arbitration arbitrate(Action agent_action, const InterventionState& iv) {
  if (!iv.active) return {agent_action, 0, std::nullopt};
  if (!iv.pending_human_action) {
    throw Error("arbitrate: intervention active but no human/expert action available");
  }
  return {*iv.pending_human_action, 1, iv.pending_human_action};
}

double adjust_reward(double reward, int flag, int prev_flag, double penalty) {
  return flag == 1 && prev_flag == 0 ? reward + penalty : reward;
}

double bc_similarity(std::span<const double> logits, int expert_action) {
  if (expert_action < 0 || expert_action >= kActionCount) {
    throw Error("bc_similarity: action index out of range");
  }
  return -log_softmax(logits)[static_cast<std::size_t>(expert_action)];
}

std::array<double, kActionCount> bc_similarity_gradient(std::span<const double> logits,
                                                        int expert_action) {
  auto g = softmax(logits);
  g[static_cast<std::size_t>(expert_action)] -= 1.0;
  return g;
}

LossParts hi_ppo_loss(const PolicyParams& params, const Batch& batch, const LossConfig& loss,
                      const HIConfig& cfg, Gradients* grad) {
  return evaluate_losses(params, batch, loss, cfg.bc_weight, grad);
}

bool detect_stuck(std::span<const ProgressSample> recent, const HIConfig& cfg) {
  if (recent.empty()) return false;
  if (recent.back().collided) return true;
  const auto window = static_cast<std::size_t>(cfg.stuck_window);
  if (recent.size() < window + 1) return false;
  const double progress = recent.back().depth - recent[recent.size() - 1 - window].depth;
  return progress < cfg.stuck_progress_eps;
}

void ScriptedExpertSource::reset_episode(std::size_t) {
  active_ = false;
  start_depth_ = 0.0;
  memory_.clear();
}

InterventionState ScriptedExpertSource::begin_step(const StepContext& ctx) {
  if (!active_ && detect_stuck(ctx.history, hi_)) {
    active_ = true;
    start_depth_ = ctx.scope.insertion_depth;
    memory_.clear();
  }
  InterventionState iv;
  iv.source = InterventionSourceKind::ScriptedExpert;
  iv.active = active_;
  if (active_) iv.pending_human_action = expert_step(ctx.model, ctx.scope, ctx.observation, memory_, expert_);
  return iv;
}

void ScriptedExpertSource::end_step(const StepContext& ctx, const Arbitration&) {
  if (active_ && ctx.scope.insertion_depth - start_depth_ >= hi_.stuck_progress_eps) {
    active_ = false;
  }
}

InterventionState RecordedSource::begin_step(const StepContext& ctx) {
  InterventionState iv;
  iv.source = reported_;
  const auto it = actions_.find({episode_, ctx.episode_step});
  if (it != actions_.end()) {
    iv.active = true;
    iv.pending_human_action = it->second;
  }
  return iv;
}

}  // namespace hippo
