#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "hippo/common.hpp"
#include "hippo/rng.hpp"
#include "hippo/scope.hpp"

namespace hippo {

// Fully connected network with tanh hidden layers and a linear output layer.
// Batched evaluation takes one sample per column.
struct Mlp {
  std::vector<Eigen::MatrixXd> weights;  // (out x in) per layer
  std::vector<Eigen::VectorXd> biases;

  struct Cache {
    std::vector<Eigen::MatrixXd> activations;  // [0] is the input
  };

  static Mlp create(int inputs, std::span<const int> hidden, int outputs, Rng& rng,
                    double output_gain);
  static Mlp zeros_like(const Mlp& other);

  int input_size() const { return static_cast<int>(weights.front().cols()); }
  int output_size() const { return static_cast<int>(weights.back().rows()); }
  std::size_t parameter_count() const;

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Cache* cache = nullptr) const;

  // Accumulates parameter gradients into `grad` given dL/d(output).
  void backward(const Cache& cache, const Eigen::MatrixXd& grad_out, Mlp& grad) const;

  void set_zero();
  bool all_finite() const;

  // Flat views in a fixed order (weights then bias, layer by layer); used by
  // the optimiser and the gradient checks.
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> flat);

  bool operator==(const Mlp& other) const;
};

// Running per-feature mean and population variance (Welford).
class Normalizer {
 public:
  static constexpr double kVarianceFloor = 1e-8;

  Normalizer() = default;
  explicit Normalizer(int size);

  void observe(std::span<const double> x);
  Eigen::VectorXd mean() const { return mean_; }
  Eigen::VectorXd variance() const;
  std::uint64_t count() const { return count_; }
  int size() const { return static_cast<int>(mean_.size()); }

  // Identity until at least one sample has been seen.
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x, double clip) const;

  const Eigen::VectorXd& m2() const { return m2_; }
  void restore(std::uint64_t count, Eigen::VectorXd mean, Eigen::VectorXd m2);

  bool operator==(const Normalizer& other) const;

 private:
  std::uint64_t count_ = 0;
  Eigen::VectorXd mean_;
  Eigen::VectorXd m2_;
};

struct NetworkConfig {
  int hidden_layers = 2;
  int hidden_units = 128;
  bool normalize = true;
  double normalize_clip = 5.0;
};

// Actor (logits over the six actions) and critic (state value), with the
// observation normaliser shared by both.
struct PolicyParams {
  Mlp actor;
  Mlp critic;
  Normalizer normalizer;
  bool normalize = true;
  double normalize_clip = 5.0;

  int observation_size() const { return actor.input_size(); }
  bool operator==(const PolicyParams& other) const;
};

// Orthogonal initialisation from a fixed seed; zero biases, small policy head.
PolicyParams init_policy(int observation_size, const NetworkConfig& cfg, std::uint64_t seed);

struct PolicyOutput {
  std::array<double, kActionCount> logits{};
  double value = 0.0;
};

// Throws NumericError for non-finite input.
PolicyOutput forward(const PolicyParams& params, std::span<const double> obs);

Eigen::MatrixXd normalized_inputs(const PolicyParams& params, const Eigen::MatrixXd& raw);

std::array<double, kActionCount> softmax(std::span<const double> logits);
std::array<double, kActionCount> log_softmax(std::span<const double> logits);
double entropy(std::span<const double> logits);
int argmax(std::span<const double> values);

}  // namespace hippo
