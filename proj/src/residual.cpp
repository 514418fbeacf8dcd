#include "platoon/residual.hpp"

#include "platoon/errors.hpp"

#include "json.hpp"

#include <cmath>
#include <random>

namespace platoon::residual {

void MlpConfig::validate() const {
  if (input_dim != 3) throw ParameterError("residual network takes exactly 3 inputs");
  if (hidden_units < 1) throw ParameterError("hidden_units must be positive");
  if (!(learning_rate > 0)) throw ParameterError("learning_rate must be positive");
  if (epochs < 1) throw ParameterError("epochs must be at least 1");
  if (!(validation_split >= 0.0 && validation_split < 1.0)) throw ParameterError("validation_split must be in [0, 1)");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1 && adam_epsilon > 0)) {
    throw ParameterError("invalid Adam hyper-parameters");
  }
}

// ---------------------------------------------------------------- buffer

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ParameterError("replay buffer capacity must be positive");
}

void ReplayBuffer::push(const FeatureVector& x, double y) {
  if (!x.as_vector().allFinite() || !std::isfinite(y)) throw ParameterError("replay buffer rejects non-finite samples");
  samples_.push_back({x, y});
  while (samples_.size() > capacity_) samples_.pop_front();
  refresh();
}

void ReplayBuffer::refresh() {
  const double n = static_cast<double>(samples_.size());
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  double ysum = 0.0;
  for (const auto& s : samples_) {
    sum += s.x.as_vector();
    ysum += s.y;
  }
  stats_.mean = sum / n;
  stats_.target_mean = ysum / n;
  Eigen::Vector3d var = Eigen::Vector3d::Zero();
  double yvar = 0.0;
  for (const auto& s : samples_) {
    var += (s.x.as_vector() - stats_.mean).cwiseAbs2();
    yvar += (s.y - stats_.target_mean) * (s.y - stats_.target_mean);
  }
  var /= n;
  yvar /= n;
  stats_.degenerate_features = true;
  for (int i = 0; i < 3; ++i) {
    const double sd = std::sqrt(var(i));
    stats_.scale(i) = sd > Normalization::kScaleFloor ? sd : 1.0;
    if (sd > Normalization::kScaleFloor) stats_.degenerate_features = false;
  }
  const double ysd = std::sqrt(yvar);
  stats_.target_scale = ysd > Normalization::kScaleFloor ? ysd : 1.0;
  stats_.constant_target = !(ysd > Normalization::kScaleFloor);
}

// ---------------------------------------------------------------- network

Mlp::Mlp(MlpConfig config) : config_(std::move(config)) {
  config_.validate();
  const Eigen::Index n = w1_size() + 2 * hidden() + 1;
  params_ = Vec::Zero(n);
  m_ = Vec::Zero(n);
  v_ = Vec::Zero(n);
}

Mlp init_mlp(const MlpConfig& config) {
  Mlp mlp(config);
  std::mt19937_64 engine(config.init_seed);
  auto uniform = [&](double limit) {
    const double u = static_cast<double>(engine() >> 11) * (1.0 / 9007199254740992.0);
    return (2.0 * u - 1.0) * limit;
  };
  const int h = config.hidden_units;
  const double lim1 = std::sqrt(6.0 / (config.input_dim + h));
  const double lim2 = std::sqrt(6.0 / (h + 1));
  auto W1 = mlp.W1();
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < config.input_dim; ++c) W1(r, c) = uniform(lim1);
  }
  auto W2 = mlp.W2();
  for (int j = 0; j < h; ++j) {
    const double w = uniform(lim2);
    W2(j) = config.zero_output_head ? 0.0 : w;
  }
  return mlp;
}

double forward_normalized(const Mlp& mlp, const Eigen::Vector3d& x) {
  const Vec hidden = (mlp.W1() * x + mlp.b1()).cwiseMax(0.0);
  return mlp.W2().dot(hidden) + mlp.b2();
}

double forward(const Mlp& mlp, const FeatureVector& x) {
  const auto& n = mlp.normalization();
  return n.target_mean + n.target_scale * forward_normalized(mlp, n.apply(x));
}

namespace {

// Batch forward/backward for the loss mean_i (out_i - y_i)^2.
// X is 3 x n. Returns the loss; writes the gradient when `grad` is non-null.
double batch_loss(const Mlp& mlp, const Mat& X, const Vec& y, Vec* grad) {
  const Eigen::Index n = X.cols();
  if (n == 0) {
    if (grad) grad->setZero(mlp.parameter_count());
    return 0.0;
  }
  const Mat pre = (mlp.W1() * X).colwise() + Vec(mlp.b1());
  const Mat act = pre.cwiseMax(0.0);
  const Vec out = (act.transpose() * mlp.W2()).array() + mlp.b2();
  const Vec err = out - y;
  const double loss = err.squaredNorm() / static_cast<double>(n);
  if (grad) {
    const int h = mlp.hidden();
    const int d = mlp.config().input_dim;
    grad->resize(mlp.parameter_count());
    const Vec dout = (2.0 / static_cast<double>(n)) * err;                    // n
    const Vec gW2 = act * dout;                                               // h
    const double gb2 = dout.sum();
    Mat dpre = mlp.W2() * dout.transpose();                                   // h x n
    dpre = dpre.cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
    const Mlp::RowMajor gW1 = dpre * X.transpose();                           // h x d
    const Vec gb1 = dpre.rowwise().sum();
    Eigen::Index o = 0;
    grad->segment(o, h * d) = Eigen::Map<const Vec>(gW1.data(), h * d);
    o += h * d;
    grad->segment(o, h) = gb1;
    o += h;
    grad->segment(o, h) = gW2;
    o += h;
    (*grad)(o) = gb2;
  }
  return loss;
}

void adam_step(Mlp& mlp, const Vec& grad) {
  const auto& c = mlp.config();
  auto& t = mlp.step_count();
  ++t;
  mlp.first_moment() = c.adam_beta1 * mlp.first_moment() + (1.0 - c.adam_beta1) * grad;
  mlp.second_moment() = c.adam_beta2 * mlp.second_moment() + (1.0 - c.adam_beta2) * grad.cwiseAbs2();
  const double bc1 = 1.0 - std::pow(c.adam_beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(c.adam_beta2, static_cast<double>(t));
  const double step = c.learning_rate * std::sqrt(bc2) / bc1;
  mlp.parameters().array() -=
      step * mlp.first_moment().array() / (mlp.second_moment().array().sqrt() + c.adam_epsilon * std::sqrt(bc2));
}

}  // namespace

Vec loss_gradient(const Mlp& mlp, const Eigen::Vector3d& x, double y) {
  Vec g;
  batch_loss(mlp, Mat(x), Vec::Constant(1, y), &g);
  return g;
}

Vec numeric_gradient(const Mlp& mlp, const Eigen::Vector3d& x, double y, double eps) {
  Mlp probe = mlp;
  Vec g(mlp.parameter_count());
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double saved = probe.parameters()(i);
    probe.parameters()(i) = saved + eps;
    const double up = forward_normalized(probe, x) - y;
    probe.parameters()(i) = saved - eps;
    const double down = forward_normalized(probe, x) - y;
    probe.parameters()(i) = saved;
    g(i) = (up * up - down * down) / (2.0 * eps);
  }
  return g;
}

double max_relative_error(const Vec& analytic, const Vec& numeric) {
  if (analytic.size() != numeric.size()) throw DimensionError("gradient vectors differ in length");
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double a = analytic(i), n = numeric(i);
    const double denom = std::max({std::abs(a), std::abs(n), 1e-6});
    worst = std::max(worst, std::abs(a - n) / denom);
  }
  return worst;
}

double gradient_check(const Mlp& mlp, const FeatureVector& x, double y, double eps) {
  const auto& n = mlp.normalization();
  const Eigen::Vector3d xn = n.apply(x);
  const double yn = (y - n.target_mean) / n.target_scale;
  return max_relative_error(loss_gradient(mlp, xn, yn), numeric_gradient(mlp, xn, yn, eps));
}

TrainReport train(Mlp& mlp, const ReplayBuffer& buffer) {
  TrainReport report;
  const auto& cfg = mlp.config();
  if (buffer.size() < cfg.min_samples) return report;

  const Normalization& stats = buffer.stats();
  mlp.normalization() = stats;
  report.degenerate_features = stats.degenerate_features;
  report.constant_target = stats.constant_target;
  if (stats.constant_target) {
    mlp.W2().setZero();
    mlp.b2() = 0.0;
  }

  const std::size_t n = buffer.size();
  // Chronological split: the newest samples are held out.
  const auto n_train = static_cast<std::size_t>(static_cast<double>(n) * (1.0 - cfg.validation_split));
  const std::size_t n_val = n - n_train;

  Mat Xt(3, static_cast<Eigen::Index>(n_train)), Xv(3, static_cast<Eigen::Index>(n_val));
  Vec yt(static_cast<Eigen::Index>(n_train)), yv(static_cast<Eigen::Index>(n_val));
  std::size_t i = 0;
  for (const auto& s : buffer.samples()) {
    const Eigen::Vector3d xn = stats.apply(s.x);
    const double yn = (s.y - stats.target_mean) / stats.target_scale;
    if (i < n_train) {
      Xt.col(static_cast<Eigen::Index>(i)) = xn;
      yt(static_cast<Eigen::Index>(i)) = yn;
    } else {
      Xv.col(static_cast<Eigen::Index>(i - n_train)) = xn;
      yv(static_cast<Eigen::Index>(i - n_train)) = yn;
    }
    ++i;
  }

  const double to_units = stats.target_scale * stats.target_scale;
  Vec grad;
  report.initial_train_loss = batch_loss(mlp, Xt, yt, nullptr) * to_units;
  // A zeroed head already fits a constant target; Adam would only inflate the
  // rounding-level gradient into lr-sized jitter.
  const int epochs = stats.constant_target ? 0 : cfg.epochs;
  for (int e = 0; e < epochs; ++e) {
    batch_loss(mlp, Xt, yt, &grad);
    adam_step(mlp, grad);
  }
  report.train_loss = batch_loss(mlp, Xt, yt, nullptr) * to_units;
  report.val_loss = batch_loss(mlp, Xv, yv, nullptr) * to_units;
  report.epochs_run = epochs;
  report.train_samples = n_train;
  report.val_samples = n_val;
  report.trained = true;
  mlp.set_trained(true);
  return report;
}

// ---------------------------------------------------------------- snapshots

namespace {

std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

Vec from_std(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

}  // namespace

std::string export_snapshot(const Mlp& mlp) {
  using nlohmann::ordered_json;
  const auto& c = mlp.config();
  const auto& n = mlp.normalization();
  ordered_json j;
  j["format"] = "platoon-mlp";
  j["version"] = 1;
  j["shapes"] = {{"W1", {c.hidden_units, c.input_dim}}, {"b1", {c.hidden_units}}, {"W2", {1, c.hidden_units}}, {"b2", {1}}};
  j["layout"] = "W1 row-major, b1, W2, b2";
  j["config"] = {{"input_dim", c.input_dim},
                 {"hidden_units", c.hidden_units},
                 {"learning_rate", c.learning_rate},
                 {"adam_beta1", c.adam_beta1},
                 {"adam_beta2", c.adam_beta2},
                 {"adam_epsilon", c.adam_epsilon},
                 {"epochs", c.epochs},
                 {"validation_split", c.validation_split},
                 {"init_seed", c.init_seed},
                 {"zero_output_head", c.zero_output_head},
                 {"min_samples", c.min_samples}};
  j["normalization"] = {{"mean", {n.mean(0), n.mean(1), n.mean(2)}},
                        {"scale", {n.scale(0), n.scale(1), n.scale(2)}},
                        {"target_mean", n.target_mean},
                        {"target_scale", n.target_scale},
                        {"degenerate_features", n.degenerate_features},
                        {"constant_target", n.constant_target}};
  j["trained"] = mlp.trained();
  j["adam_step"] = mlp.step_count();
  j["parameters"] = to_std(mlp.parameters());
  j["adam_m"] = to_std(mlp.first_moment());
  j["adam_v"] = to_std(mlp.second_moment());
  return j.dump(1);
}

Mlp import_snapshot(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format").get<std::string>() != "platoon-mlp" || j.at("version").get<int>() != 1) {
      throw ParseError(0, "not a platoon-mlp v1 snapshot");
    }
    const auto& jc = j.at("config");
    MlpConfig c;
    c.input_dim = jc.at("input_dim").get<int>();
    c.hidden_units = jc.at("hidden_units").get<int>();
    c.learning_rate = jc.at("learning_rate").get<double>();
    c.adam_beta1 = jc.at("adam_beta1").get<double>();
    c.adam_beta2 = jc.at("adam_beta2").get<double>();
    c.adam_epsilon = jc.at("adam_epsilon").get<double>();
    c.epochs = jc.at("epochs").get<int>();
    c.validation_split = jc.at("validation_split").get<double>();
    c.init_seed = jc.at("init_seed").get<std::uint64_t>();
    c.zero_output_head = jc.at("zero_output_head").get<bool>();
    c.min_samples = jc.at("min_samples").get<std::size_t>();
    Mlp mlp(c);
    const auto params = j.at("parameters").get<std::vector<double>>();
    const auto m = j.at("adam_m").get<std::vector<double>>();
    const auto v = j.at("adam_v").get<std::vector<double>>();
    const auto expected = static_cast<std::size_t>(mlp.parameter_count());
    if (params.size() != expected || m.size() != expected || v.size() != expected) {
      throw ParseError(0, "snapshot parameter arrays do not match the declared shapes");
    }
    mlp.parameters() = from_std(params);
    mlp.first_moment() = from_std(m);
    mlp.second_moment() = from_std(v);
    mlp.step_count() = j.at("adam_step").get<std::int64_t>();
    mlp.set_trained(j.at("trained").get<bool>());
    const auto& jn = j.at("normalization");
    auto& n = mlp.normalization();
    const auto mean = jn.at("mean").get<std::vector<double>>();
    const auto scale = jn.at("scale").get<std::vector<double>>();
    if (mean.size() != 3 || scale.size() != 3) throw ParseError(0, "normalization vectors must have 3 entries");
    n.mean = Eigen::Vector3d(mean[0], mean[1], mean[2]);
    n.scale = Eigen::Vector3d(scale[0], scale[1], scale[2]);
    n.target_mean = jn.at("target_mean").get<double>();
    n.target_scale = jn.at("target_scale").get<double>();
    n.degenerate_features = jn.at("degenerate_features").get<bool>();
    n.constant_target = jn.at("constant_target").get<bool>();
    return mlp;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("invalid snapshot: ") + e.what());
  }
}

}  // namespace platoon::residual
