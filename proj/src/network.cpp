#include "hippo/network.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>

namespace hippo {

namespace {

// Rows (or columns) orthonormal, as in the usual orthogonal initialiser.
Eigen::MatrixXd orthogonal(int rows, int cols, Rng& rng, double gain) {
  const int n = std::max(rows, cols);
  const int k = std::min(rows, cols);
  Eigen::MatrixXd a(n, k);
  for (int j = 0; j < k; ++j) {
    for (int i = 0; i < n; ++i) a(i, j) = rng.normal();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, k);
  // Fix the sign ambiguity of QR so the result is a proper sample.
  const Eigen::MatrixXd r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  for (int j = 0; j < k; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  Eigen::MatrixXd w = rows >= cols ? q : Eigen::MatrixXd(q.transpose());
  return gain * w;
}

}  // namespace

Mlp Mlp::create(int inputs, std::span<const int> hidden, int outputs, Rng& rng,
                double output_gain) {
  Mlp m;
  int prev = inputs;
  for (std::size_t i = 0; i <= hidden.size(); ++i) {
    const bool last = i == hidden.size();
    const int next = last ? outputs : hidden[i];
    m.weights.push_back(orthogonal(next, prev, rng, last ? output_gain : std::sqrt(2.0)));
    m.biases.push_back(Eigen::VectorXd::Zero(next));
    prev = next;
  }
  return m;
}

Mlp Mlp::zeros_like(const Mlp& other) {
  Mlp m = other;
  m.set_zero();
  return m;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    n += static_cast<std::size_t>(weights[i].size() + biases[i].size());
  }
  return n;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, Cache* cache) const {
  Eigen::MatrixXd a = x;
  if (cache) {
    cache->activations.clear();
    cache->activations.push_back(x);
  }
  for (std::size_t i = 0; i < weights.size(); ++i) {
    Eigen::MatrixXd z = weights[i] * a;
    z.colwise() += biases[i];
    if (i + 1 < weights.size()) z = z.array().tanh().matrix();
    a = std::move(z);
    if (cache) cache->activations.push_back(a);
  }
  return a;
}

void Mlp::backward(const Cache& cache, const Eigen::MatrixXd& grad_out, Mlp& grad) const {
  Eigen::MatrixXd delta = grad_out;
  for (std::size_t k = weights.size(); k-- > 0;) {
    const Eigen::MatrixXd& input = cache.activations[k];
    grad.weights[k].noalias() += delta * input.transpose();
    grad.biases[k] += delta.rowwise().sum();
    if (k == 0) break;
    Eigen::MatrixXd back = weights[k].transpose() * delta;
    delta = back.array() * (1.0 - input.array().square());
  }
}

void Mlp::set_zero() {
  for (auto& w : weights) w.setZero();
  for (auto& b : biases) b.setZero();
}

bool Mlp::all_finite() const {
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!weights[i].allFinite() || !biases[i].allFinite()) return false;
  }
  return true;
}

std::vector<double> Mlp::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    flat.insert(flat.end(), weights[i].data(), weights[i].data() + weights[i].size());
    flat.insert(flat.end(), biases[i].data(), biases[i].data() + biases[i].size());
  }
  return flat;
}

void Mlp::unflatten(std::span<const double> flat) {
  if (flat.size() != parameter_count()) throw Error("Mlp::unflatten: size mismatch");
  std::size_t pos = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    std::copy_n(flat.data() + pos, weights[i].size(), weights[i].data());
    pos += static_cast<std::size_t>(weights[i].size());
    std::copy_n(flat.data() + pos, biases[i].size(), biases[i].data());
    pos += static_cast<std::size_t>(biases[i].size());
  }
}

bool Mlp::operator==(const Mlp& other) const {
  if (weights.size() != other.weights.size()) return false;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i].rows() != other.weights[i].rows() ||
        weights[i].cols() != other.weights[i].cols() || weights[i] != other.weights[i] ||
        biases[i] != other.biases[i]) {
      return false;
    }
  }
  return true;
}

Normalizer::Normalizer(int size)
    : mean_(Eigen::VectorXd::Zero(size)), m2_(Eigen::VectorXd::Zero(size)) {}

void Normalizer::observe(std::span<const double> x) {
  if (static_cast<int>(x.size()) != size()) throw Error("Normalizer: size mismatch");
  ++count_;
  const double n = static_cast<double>(count_);
  for (int i = 0; i < size(); ++i) {
    const double delta = x[i] - mean_[i];
    mean_[i] += delta / n;
    m2_[i] += delta * (x[i] - mean_[i]);
  }
}

Eigen::VectorXd Normalizer::variance() const {
  if (count_ == 0) return Eigen::VectorXd::Ones(size());
  return (m2_ / static_cast<double>(count_)).cwiseMax(kVarianceFloor);
}

Eigen::MatrixXd Normalizer::apply(const Eigen::MatrixXd& x, double clip) const {
  if (count_ == 0) return x;
  const Eigen::VectorXd inv_std = variance().cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd out = (x.colwise() - mean_).array().colwise() * inv_std.array();
  return out.cwiseMax(-clip).cwiseMin(clip);
}

void Normalizer::restore(std::uint64_t count, Eigen::VectorXd mean, Eigen::VectorXd m2) {
  if (mean.size() != m2.size()) throw Error("Normalizer::restore: size mismatch");
  count_ = count;
  mean_ = std::move(mean);
  m2_ = std::move(m2);
}

bool Normalizer::operator==(const Normalizer& other) const {
  return count_ == other.count_ && mean_.size() == other.mean_.size() && mean_ == other.mean_ &&
         m2_ == other.m2_;
}

bool PolicyParams::operator==(const PolicyParams& other) const {
  return actor == other.actor && critic == other.critic && normalizer == other.normalizer &&
         normalize == other.normalize && normalize_clip == other.normalize_clip;
}

PolicyParams init_policy(int observation_size, const NetworkConfig& cfg, std::uint64_t seed) {
  if (observation_size <= 0 || cfg.hidden_layers < 0 || cfg.hidden_units <= 0) {
    throw Error("init_policy: invalid network shape");
  }
  Rng rng(mix_seed(seed));
  std::vector<int> hidden(static_cast<std::size_t>(cfg.hidden_layers), cfg.hidden_units);
  PolicyParams p;
  p.actor = Mlp::create(observation_size, hidden, kActionCount, rng, 0.01);
  p.critic = Mlp::create(observation_size, hidden, 1, rng, 1.0);
  p.normalizer = Normalizer(observation_size);
  p.normalize = cfg.normalize;
  p.normalize_clip = cfg.normalize_clip;
  return p;
}

Eigen::MatrixXd normalized_inputs(const PolicyParams& params, const Eigen::MatrixXd& raw) {
  if (!params.normalize) return raw;
  return params.normalizer.apply(raw, params.normalize_clip);
}

PolicyOutput forward(const PolicyParams& params, std::span<const double> obs) {
  if (static_cast<int>(obs.size()) != params.observation_size()) {
    throw Error("forward: observation size mismatch");
  }
  Eigen::MatrixXd x(obs.size(), 1);
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (!std::isfinite(obs[i])) throw NumericError("forward: non-finite observation");
    x(static_cast<Eigen::Index>(i), 0) = obs[i];
  }
  const Eigen::MatrixXd in = normalized_inputs(params, x);
  const Eigen::MatrixXd logits = params.actor.forward(in);
  const Eigen::MatrixXd value = params.critic.forward(in);
  PolicyOutput out;
  for (int i = 0; i < kActionCount; ++i) out.logits[i] = logits(i, 0);
  out.value = value(0, 0);
  return out;
}

std::array<double, kActionCount> log_softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - mx);
  const double lse = mx + std::log(sum);
  std::array<double, kActionCount> out{};
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

std::array<double, kActionCount> softmax(std::span<const double> logits) {
  auto out = log_softmax(logits);
  for (double& v : out) v = std::exp(v);
  return out;
}

double entropy(std::span<const double> logits) {
  const auto lp = log_softmax(logits);
  double h = 0.0;
  for (double l : lp) h -= std::exp(l) * l;
  return h;
}

int argmax(std::span<const double> values) {
  return static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
}

}  // namespace hippo
