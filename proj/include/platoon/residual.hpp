#pragma once

#include "platoon/dynamics.hpp"

#include <array>
#include <cstdint>
#include <deque>
#include <string>

namespace platoon::residual {

struct MlpConfig {
  int input_dim = 3;
  int hidden_units = 64;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int epochs = 100;
  double validation_split = 0.2;
  std::uint64_t init_seed = 0;
  /// Start with W2 = 0 so the untrained network outputs exactly b2 = 0.
  bool zero_output_head = false;
  /// Buffers smaller than this are not trained on.
  std::size_t min_samples = 5;

  void validate() const;
};

/// Network inputs: what the controller asked for, what the vehicle did, and
/// the last measured residual.
struct FeatureVector {
  double desired_speed = 0.0;
  double actual_speed = 0.0;
  double previous_residual = 0.0;

  Eigen::Vector3d as_vector() const { return {desired_speed, actual_speed, previous_residual}; }
};

/// Affine input/target scaling. scale entries are the population standard
/// deviation, or 1 where that falls below the floor.
struct Normalization {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Vector3d scale = Eigen::Vector3d::Ones();
  double target_mean = 0.0;
  double target_scale = 1.0;
  bool degenerate_features = false;
  /// Every target equal to within the floor.
  bool constant_target = false;

  static constexpr double kScaleFloor = 1e-6;
  // Normalized inputs are clipped to this many scale units.
  static constexpr double kInputClip = 3.0;

  Eigen::Vector3d apply(const FeatureVector& x) const {
    return (x.as_vector() - mean).cwiseQuotient(scale).cwiseMax(-kInputClip).cwiseMin(kInputClip);
  }
};

struct Sample {
  FeatureVector x;
  double y = 0.0;
};

/// FIFO window of training samples with statistics kept current on every push.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 200);

  /// Throws ParameterError on non-finite input.
  void push(const FeatureVector& x, double y);

  std::size_t size() const { return samples_.size(); }
  std::size_t capacity() const { return capacity_; }
  const std::deque<Sample>& samples() const { return samples_; }
  const Normalization& stats() const { return stats_; }

 private:
  void refresh();

  std::size_t capacity_;
  std::deque<Sample> samples_;
  Normalization stats_;
};

/// One-hidden-layer relu regressor with Adam state.
///
/// Parameters live in one flat vector, in the order
/// W1 (hidden x input, row-major), b1, W2 (1 x hidden), b2.
class Mlp {
 public:
  explicit Mlp(MlpConfig config);

  const MlpConfig& config() const { return config_; }
  int hidden() const { return config_.hidden_units; }
  Eigen::Index parameter_count() const { return params_.size(); }

  Vec& parameters() { return params_; }
  const Vec& parameters() const { return params_; }
  Vec& first_moment() { return m_; }
  Vec& second_moment() { return v_; }
  const Vec& first_moment() const { return m_; }
  const Vec& second_moment() const { return v_; }
  std::int64_t& step_count() { return steps_; }
  std::int64_t step_count() const { return steps_; }

  Normalization& normalization() { return norm_; }
  const Normalization& normalization() const { return norm_; }

  /// True once train() has run on a large-enough buffer.
  bool trained() const { return trained_; }
  void set_trained(bool t) { trained_ = t; }

  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMajor> W1() const { return {params_.data(), hidden(), config_.input_dim}; }
  Eigen::Map<const Vec> b1() const { return {params_.data() + w1_size(), hidden()}; }
  Eigen::Map<const Vec> W2() const { return {params_.data() + w1_size() + hidden(), hidden()}; }
  double b2() const { return params_(params_.size() - 1); }
  Eigen::Map<RowMajor> W1() { return {params_.data(), hidden(), config_.input_dim}; }
  Eigen::Map<Vec> b1() { return {params_.data() + w1_size(), hidden()}; }
  Eigen::Map<Vec> W2() { return {params_.data() + w1_size() + hidden(), hidden()}; }
  double& b2() { return params_(params_.size() - 1); }

 private:
  Eigen::Index w1_size() const { return static_cast<Eigen::Index>(config_.hidden_units) * config_.input_dim; }

  MlpConfig config_;
  Vec params_, m_, v_;
  std::int64_t steps_ = 0;
  Normalization norm_;
  bool trained_ = false;
};

struct TrainReport {
  bool trained = false;
  double initial_train_loss = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  int epochs_run = 0;
  std::size_t train_samples = 0;
  std::size_t val_samples = 0;
  bool degenerate_features = false;
  /// The output head was zeroed because every target was the same.
  bool constant_target = false;
};

/// Glorot-uniform weights from init_seed, zero biases, zero optimiser state.
Mlp init_mlp(const MlpConfig& config);

/// Network output on an already-normalised input, in normalised target units.
double forward_normalized(const Mlp& mlp, const Eigen::Vector3d& x);

/// Residual estimate in target units, using the normalisation the network was
/// last trained with.
double forward(const Mlp& mlp, const FeatureVector& x);

/// Gradient of (forward_normalized(x) - y)^2 with respect to the flat parameters.
Vec loss_gradient(const Mlp& mlp, const Eigen::Vector3d& x, double y);

/// Central-difference gradient of the same loss.
Vec numeric_gradient(const Mlp& mlp, const Eigen::Vector3d& x, double y, double eps = 1e-5);

/// max_i |a_i - n_i| / max(|a_i|, |n_i|, 1e-6).
double max_relative_error(const Vec& analytic, const Vec& numeric);

/// Analytic vs. finite-difference gradient on one sample, in normalised space.
double gradient_check(const Mlp& mlp, const FeatureVector& x, double y, double eps = 1e-5);

/// Full-batch Adam for config.epochs epochs; the newest validation_split
/// fraction of the buffer is held out. Warm-starts from the current weights.
/// When all targets coincide the output head is zeroed instead and no epochs
/// run, so the network returns the target mean exactly.
TrainReport train(Mlp& mlp, const ReplayBuffer& buffer);

/// Snapshot as a JSON document: header (format, shapes, config,
/// normalisation, optimiser step) plus flat numeric arrays.
std::string export_snapshot(const Mlp& mlp);
Mlp import_snapshot(const std::string& json_text);

}  // namespace platoon::residual
