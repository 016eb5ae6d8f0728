#pragma once

#include <Eigen/Core>

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "hippo/network.hpp"
#include "hippo/rng.hpp"

namespace hippo {

struct Transition {
  std::vector<double> obs;  // raw features; normalisation happens in the network
  int executed_action = 0;
  std::array<double, kActionCount> agent_logits{};
  double logprob_old = 0.0;  // log pi_old(executed_action | obs)
  std::optional<int> expert_action;
  int intervened = 0;  // m_t
  double reward = 0.0;  // after the intervention penalty
  double value = 0.0;
  bool done = false;
};

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// Recursive generalised advantage estimation; `bootstrap_value` is V of the
// state after the last transition (ignored when that transition is done).
GaeResult gae(std::span<const double> rewards, std::span<const double> values,
              std::span<const bool> dones, double bootstrap_value, double gamma, double lambda);

// Zero mean, unit (population) standard deviation; untouched for size < 2.
void normalize_advantages(std::vector<double>& advantages);

class RolloutBuffer {
 public:
  explicit RolloutBuffer(std::size_t capacity = 2048) : capacity_(capacity) {}

  void add(Transition t);
  bool full() const { return transitions_.size() >= capacity_; }
  std::size_t size() const { return transitions_.size(); }
  std::size_t capacity() const { return capacity_; }
  void clear();

  const std::vector<Transition>& transitions() const { return transitions_; }
  const std::vector<double>& advantages() const { return advantages_; }
  const std::vector<double>& returns() const { return returns_; }
  bool has_advantages() const { return !advantages_.empty(); }

  // Runs GAE over the stored transitions; advantages are then normalised,
  // returns keep the raw advantages.
  void compute_advantages(double bootstrap_value, double gamma, double lambda,
                          bool normalize = true);

 private:
  std::size_t capacity_;
  std::vector<Transition> transitions_;
  std::vector<double> advantages_;
  std::vector<double> returns_;
};

// Column-major minibatch view used by the losses.
struct Batch {
  Eigen::MatrixXd obs;  // features x B, raw
  std::vector<int> actions;
  std::vector<double> logprob_old;
  std::vector<double> advantages;
  std::vector<double> returns;
  std::vector<int> expert_actions;  // -1 where no intervention

  std::size_t size() const { return actions.size(); }
};

Batch make_batch(const RolloutBuffer& buffer, std::span<const std::size_t> indices);

struct LossConfig {
  double clip_epsilon = 0.2;
  double entropy_coef = 5e-3;
  double value_coef = 0.5;
};

struct LossParts {
  double total = 0.0;
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;  // minus the mean policy entropy
  double bc = 0.0;       // mean cross-entropy over intervened samples
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  std::size_t intervened = 0;
};

struct Gradients {
  Mlp actor;
  Mlp critic;

  static Gradients zeros_like(const PolicyParams& p) {
    return {Mlp::zeros_like(p.actor), Mlp::zeros_like(p.critic)};
  }
};

// Shared evaluation behind ppo_loss and hi_ppo_loss: the clipped surrogate,
// value and entropy terms, plus `bc_weight` times the behaviour-cloning term.
// Gradients (if requested) are of `total`.
LossParts evaluate_losses(const PolicyParams& params, const Batch& batch, const LossConfig& cfg,
                          double bc_weight, Gradients* grad = nullptr);

// total = policy + value_coef * value + entropy_coef * entropy.
LossParts ppo_loss(const PolicyParams& params, const Batch& batch, const LossConfig& cfg,
                   Gradients* grad = nullptr);

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam() = default;
  Adam(const PolicyParams& params, AdamConfig cfg);

  void step(PolicyParams& params, const Gradients& grad);
  std::uint64_t steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::uint64_t t_ = 0;
};

struct UpdateConfig {
  int epochs = 3;
  int minibatch_size = 64;
  LossConfig loss;
  double bc_weight = 0.0;
};

struct UpdateStats {
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double bc = 0.0;
  double total = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  int minibatches = 0;
};

// Epochs of shuffled minibatches with Adam steps, then folds the buffer's
// observations into the normaliser (which stays fixed while the buffer is
// collected and optimised, so stored log-probabilities stay valid).
// Throws NumericError on a non-finite loss; `params` is left untouched then.
UpdateStats update(PolicyParams& params, Adam& optimizer, const RolloutBuffer& buffer,
                   const UpdateConfig& cfg, Rng& rng);

}  // namespace hippo
