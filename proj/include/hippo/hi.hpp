#pragma once

#include <deque>
#include <map>
#include <optional>
#include <span>

#include "hippo/env.hpp"
#include "hippo/expert.hpp"
#include "hippo/ppo.hpp"

namespace hippo {

struct HIConfig {
  double penalty = -1.0;   // lambda, must be negative
  double bc_weight = 0.1;  // alpha
  int stuck_window = 30;   // steps
  double stuck_progress_eps = 2.0;  // mm
  int human_hold_steps = 1;

  void validate() const;
};

enum class InterventionSourceKind { ScriptedExpert, RemoteHuman };

struct InterventionState {
  bool active = false;
  InterventionSourceKind source = InterventionSourceKind::ScriptedExpert;
  std::optional<Action> pending_human_action;
  int prev_flag = 0;  // m_{t-1}
};

struct Arbitration {
  Action executed = Action::Advance;
  int flag = 0;  // m_t
  std::optional<Action> expert_action;
};

// Behaviour policy mixing: the agent's action unless an intervention is
// active, then the human/expert action. Throws Error when active without one.
Arbitration arbitrate(Action agent_action, const InterventionState& iv);

// r + penalty on a 0 -> 1 edge of the intervention flag.
double adjust_reward(double reward, int flag, int prev_flag, double penalty);

// -log softmax(logits)[expert_action], log-sum-exp stabilised.
double bc_similarity(std::span<const double> logits, int expert_action);

// d bc_similarity / d logits = softmax(logits) - onehot(expert_action).
std::array<double, kActionCount> bc_similarity_gradient(std::span<const double> logits,
                                                        int expert_action);

// PPO total plus bc_weight times the mean cross-entropy over intervened
// samples (zero when there are none). The cloning term only reaches the actor.
LossParts hi_ppo_loss(const PolicyParams& params, const Batch& batch, const LossConfig& loss,
                      const HIConfig& cfg, Gradients* grad = nullptr);

struct ProgressSample {
  double depth = 0.0;  // insertion depth after the step, mm
  bool collided = false;
};

// True when the last sample collided, or when net progress across the last
// `stuck_window` steps (stuck_window + 1 samples) is below the threshold.
// Shorter histories only report collisions.
bool detect_stuck(std::span<const ProgressSample> recent, const HIConfig& cfg);

// Bounded history feeding detect_stuck.
class ProgressWindow {
 public:
  explicit ProgressWindow(int stuck_window = 30) : limit_(static_cast<std::size_t>(stuck_window) + 1) {}

  void reset(double depth) {
    samples_.clear();
    samples_.push_back({depth, false});
  }
  void push(ProgressSample s) {
    samples_.push_back(s);
    while (samples_.size() > limit_) samples_.pop_front();
  }
  std::vector<ProgressSample> samples() const { return {samples_.begin(), samples_.end()}; }

 private:
  std::size_t limit_;
  std::deque<ProgressSample> samples_;
};

struct StepContext {
  const ColonModel& model;
  const ScopeState& scope;
  const Observation& observation;
  std::span<const ProgressSample> history;
  std::size_t episode_step = 0;
};

// Supplies m_t and a_t^H. begin_step is called once per environment step
// before arbitration; end_step once after the step with the new state.
class InterventionSource {
 public:
  virtual ~InterventionSource() = default;
  virtual InterventionSourceKind kind() const = 0;
  virtual void reset_episode(std::size_t episode) = 0;
  virtual InterventionState begin_step(const StepContext& ctx) = 0;
  virtual void end_step(const StepContext& ctx, const Arbitration& result) = 0;
};

// Farthest-point expert that takes over when the agent is stuck and hands
// back once insertion depth has grown by stuck_progress_eps.
class ScriptedExpertSource : public InterventionSource {
 public:
  ScriptedExpertSource(HIConfig hi, ExpertConfig expert) : hi_(hi), expert_(expert) {}

  InterventionSourceKind kind() const override { return InterventionSourceKind::ScriptedExpert; }
  void reset_episode(std::size_t episode) override;
  InterventionState begin_step(const StepContext& ctx) override;
  void end_step(const StepContext& ctx, const Arbitration& result) override;

 private:
  HIConfig hi_;
  ExpertConfig expert_;
  ExpertMemory memory_;
  bool active_ = false;
  double start_depth_ = 0.0;
};

// Replays recorded human takeovers: (episode, step) -> action. Stands in for a
// remote operator so sessions can be reproduced offline.
class RecordedSource : public InterventionSource {
 public:
  using Key = std::pair<std::size_t, std::size_t>;
  explicit RecordedSource(std::map<Key, Action> actions,
                          InterventionSourceKind reported = InterventionSourceKind::ScriptedExpert)
      : actions_(std::move(actions)), reported_(reported) {}

  InterventionSourceKind kind() const override { return reported_; }
  void reset_episode(std::size_t episode) override { episode_ = episode; }
  InterventionState begin_step(const StepContext& ctx) override;
  void end_step(const StepContext&, const Arbitration&) override {}

 private:
  std::map<Key, Action> actions_;
  InterventionSourceKind reported_;
  std::size_t episode_ = 0;
};

}  // namespace hippo
