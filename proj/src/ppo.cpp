#include "hippo/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <string>

namespace hippo {

GaeResult gae(std::span<const double> rewards, std::span<const double> values,
              std::span<const bool> dones, double bootstrap_value, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) throw Error("gae: length mismatch");
  if (gamma < 0.0 || gamma > 1.0 || lambda < 0.0 || lambda > 1.0) {
    throw Error("gae: gamma and lambda must lie in [0, 1]");
  }
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double running = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double next_value = i + 1 < n ? values[i + 1] : bootstrap_value;
    const double not_done = dones[i] ? 0.0 : 1.0;
    const double delta = rewards[i] + gamma * next_value * not_done - values[i];
    running = delta + gamma * lambda * not_done * running;
    out.advantages[i] = running;
    out.returns[i] = running + values[i];
  }
  return out;
}

void normalize_advantages(std::vector<double>& advantages) {
  if (advantages.size() < 2) return;
  const double n = static_cast<double>(advantages.size());
  const double mean = std::accumulate(advantages.begin(), advantages.end(), 0.0) / n;
  double var = 0.0;
  for (double a : advantages) var += (a - mean) * (a - mean);
  const double std = std::sqrt(var / n);
  for (double& a : advantages) a = (a - mean) / (std + 1e-8);
}

void RolloutBuffer::add(Transition t) {
  if (t.intervened && (!t.expert_action || *t.expert_action != t.executed_action)) {
    throw Error("intervened transition must execute the expert action");
  }
  transitions_.push_back(std::move(t));
  advantages_.clear();
  returns_.clear();
}

void RolloutBuffer::clear() {
  transitions_.clear();
  advantages_.clear();
  returns_.clear();
}

void RolloutBuffer::compute_advantages(double bootstrap_value, double gamma, double lambda,
                                       bool normalize) {
  std::vector<double> rewards, values;
  std::vector<char> done_flags;
  for (const auto& t : transitions_) {
    rewards.push_back(t.reward);
    values.push_back(t.value);
    done_flags.push_back(t.done ? 1 : 0);
  }
  const std::unique_ptr<bool[]> dones(new bool[done_flags.size()]);
  for (std::size_t i = 0; i < done_flags.size(); ++i) dones[i] = done_flags[i] != 0;
  GaeResult r = gae(rewards, values, std::span<const bool>(dones.get(), done_flags.size()),
                    bootstrap_value, gamma, lambda);
  returns_ = std::move(r.returns);
  advantages_ = std::move(r.advantages);
  if (normalize) normalize_advantages(advantages_);
}

Batch make_batch(const RolloutBuffer& buffer, std::span<const std::size_t> indices) {
  if (!buffer.has_advantages()) throw Error("make_batch: advantages not computed");
  const auto& ts = buffer.transitions();
  Batch b;
  if (indices.empty()) return b;
  const auto features = static_cast<Eigen::Index>(ts[indices[0]].obs.size());
  b.obs.resize(features, static_cast<Eigen::Index>(indices.size()));
  for (std::size_t c = 0; c < indices.size(); ++c) {
    const Transition& t = ts[indices[c]];
    for (Eigen::Index f = 0; f < features; ++f) {
      b.obs(f, static_cast<Eigen::Index>(c)) = t.obs[static_cast<std::size_t>(f)];
    }
    b.actions.push_back(t.executed_action);
    b.logprob_old.push_back(t.logprob_old);
    b.advantages.push_back(buffer.advantages()[indices[c]]);
    b.returns.push_back(buffer.returns()[indices[c]]);
    b.expert_actions.push_back(t.intervened && t.expert_action ? *t.expert_action : -1);
  }
  return b;
}

LossParts evaluate_losses(const PolicyParams& params, const Batch& batch, const LossConfig& cfg,
                          double bc_weight, Gradients* grad) {
  const std::size_t n = batch.size();
  if (n == 0) throw Error("loss: empty batch");
  if (!(cfg.clip_epsilon > 0.0 && cfg.clip_epsilon < 1.0)) {
    throw Error("loss: clip epsilon must lie in (0, 1)");
  }
  const Eigen::MatrixXd x = normalized_inputs(params, batch.obs);
  Mlp::Cache actor_cache, critic_cache;
  const Eigen::MatrixXd logits = params.actor.forward(x, grad ? &actor_cache : nullptr);
  const Eigen::MatrixXd values = params.critic.forward(x, grad ? &critic_cache : nullptr);

  const double inv_n = 1.0 / static_cast<double>(n);
  std::size_t intervened = 0;
  for (int a : batch.expert_actions) intervened += a >= 0 ? 1 : 0;
  const double inv_int = intervened ? 1.0 / static_cast<double>(intervened) : 0.0;

  Eigen::MatrixXd d_logits = Eigen::MatrixXd::Zero(kActionCount, static_cast<Eigen::Index>(n));
  Eigen::MatrixXd d_values = Eigen::MatrixXd::Zero(1, static_cast<Eigen::Index>(n));
  LossParts parts;
  parts.intervened = intervened;
  const double lo = 1.0 - cfg.clip_epsilon;
  const double hi = 1.0 + cfg.clip_epsilon;

  for (std::size_t i = 0; i < n; ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    std::array<double, kActionCount> z{};
    for (int k = 0; k < kActionCount; ++k) z[k] = logits(k, col);
    const auto lp = log_softmax(z);
    std::array<double, kActionCount> p{};
    double h = 0.0;
    for (int k = 0; k < kActionCount; ++k) {
      p[k] = std::exp(lp[k]);
      h -= p[k] * lp[k];
    }

    const int a = batch.actions[i];
    const double adv = batch.advantages[i];
    const double log_ratio = lp[a] - batch.logprob_old[i];
    const double ratio = std::exp(log_ratio);
    const double surr1 = ratio * adv;
    const double surr2 = std::clamp(ratio, lo, hi) * adv;
    parts.policy -= std::min(surr1, surr2) * inv_n;
    parts.entropy -= h * inv_n;
    parts.clip_fraction += (std::abs(ratio - 1.0) > cfg.clip_epsilon ? 1.0 : 0.0) * inv_n;
    parts.approx_kl += ((ratio - 1.0) - log_ratio) * inv_n;

    const double v_err = values(0, col) - batch.returns[i];
    parts.value += v_err * v_err * inv_n;

    const int expert = batch.expert_actions[i];
    if (expert >= 0) parts.bc -= lp[expert] * inv_int;

    if (!grad) continue;
    // d(policy)/d(log p_a); zero when the clipped branch is the minimum.
    const double d_lpa = surr1 <= surr2 ? -adv * ratio * inv_n : 0.0;
    for (int k = 0; k < kActionCount; ++k) {
      const double onehot = k == a ? 1.0 : 0.0;
      double g = d_lpa * (onehot - p[k]);
      // d(-H)/dz_k = p_k (log p_k + H)
      g += cfg.entropy_coef * inv_n * p[k] * (lp[k] + h);
      if (expert >= 0) {
        const double onehot_e = k == expert ? 1.0 : 0.0;
        g += bc_weight * inv_int * (p[k] - onehot_e);
      }
      d_logits(k, col) = g;
    }
    d_values(0, col) = cfg.value_coef * 2.0 * v_err * inv_n;
  }
  parts.total = parts.policy + cfg.value_coef * parts.value + cfg.entropy_coef * parts.entropy;
  if (bc_weight != 0.0) parts.total += bc_weight * parts.bc;

  if (!std::isfinite(parts.total)) {
    throw NumericError("non-finite loss (policy " + std::to_string(parts.policy) + ", value " +
                       std::to_string(parts.value) + ", entropy " +
                       std::to_string(parts.entropy) + ", bc " + std::to_string(parts.bc) + ")");
  }
  if (grad) {
    params.actor.backward(actor_cache, d_logits, grad->actor);
    params.critic.backward(critic_cache, d_values, grad->critic);
  }
  return parts;
}

LossParts ppo_loss(const PolicyParams& params, const Batch& batch, const LossConfig& cfg,
                   Gradients* grad) {
  return evaluate_losses(params, batch, cfg, 0.0, grad);
}

Adam::Adam(const PolicyParams& params, AdamConfig cfg)
    : cfg_(cfg),
      m_(params.actor.parameter_count() + params.critic.parameter_count(), 0.0),
      v_(m_.size(), 0.0) {}

void Adam::step(PolicyParams& params, const Gradients& grad) {
  std::vector<double> theta = params.actor.flatten();
  std::vector<double> g = grad.actor.flatten();
  const std::size_t actor_size = theta.size();
  {
    const auto c = params.critic.flatten();
    theta.insert(theta.end(), c.begin(), c.end());
    const auto gc = grad.critic.flatten();
    g.insert(g.end(), gc.begin(), gc.end());
  }
  if (theta.size() != m_.size()) throw Error("Adam: parameter count changed");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
    const double m_hat = m_[i] / bc1;
    const double v_hat = v_[i] / bc2;
    theta[i] -= cfg_.learning_rate * m_hat / (std::sqrt(v_hat) + cfg_.epsilon);
  }
  params.actor.unflatten(std::span<const double>(theta.data(), actor_size));
  params.critic.unflatten(
      std::span<const double>(theta.data() + actor_size, theta.size() - actor_size));
}

UpdateStats update(PolicyParams& params, Adam& optimizer, const RolloutBuffer& buffer,
                   const UpdateConfig& cfg, Rng& rng) {
  if (buffer.size() == 0) throw Error("update: empty buffer");
  if (!buffer.has_advantages()) throw Error("update: advantages not computed");
  if (cfg.epochs < 1 || cfg.minibatch_size < 1) throw Error("update: bad epoch/minibatch config");

  PolicyParams next = params;
  Adam next_opt = optimizer;
  UpdateStats stats;
  std::vector<std::size_t> order(buffer.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto mb = static_cast<std::size_t>(cfg.minibatch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    for (std::size_t start = 0; start < order.size(); start += mb) {
      const std::size_t end = std::min(order.size(), start + mb);
      const Batch batch =
          make_batch(buffer, std::span<const std::size_t>(order.data() + start, end - start));
      Gradients g = Gradients::zeros_like(next);
      const LossParts parts = evaluate_losses(next, batch, cfg.loss, cfg.bc_weight, &g);
      next_opt.step(next, g);
      if (!next.actor.all_finite() || !next.critic.all_finite()) {
        throw NumericError("update produced non-finite parameters");
      }
      stats.policy += parts.policy;
      stats.value += parts.value;
      stats.entropy += parts.entropy;
      stats.bc += parts.bc;
      stats.total += parts.total;
      stats.clip_fraction += parts.clip_fraction;
      stats.approx_kl += parts.approx_kl;
      ++stats.minibatches;
    }
  }
  const double k = 1.0 / stats.minibatches;
  stats.policy *= k;
  stats.value *= k;
  stats.entropy *= k;
  stats.bc *= k;
  stats.total *= k;
  stats.clip_fraction *= k;
  stats.approx_kl *= k;

  for (const auto& t : buffer.transitions()) next.normalizer.observe(t.obs);
  params = std::move(next);
  optimizer = std::move(next_opt);
  return stats;
}

}  // namespace hippo
