#include "platoon/errors.hpp"
#include "platoon/residual.hpp"

#include "doctest.h"

#include <cmath>
#include <algorithm>
#include <limits>
#include <random>

using namespace platoon;
using namespace platoon::residual;

namespace {

MlpConfig small(std::uint64_t seed = 1) {
  MlpConfig c;
  c.init_seed = seed;
  return c;
}

FeatureVector random_features(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  return {15.0 + 5.0 * d(rng), 15.0 + 5.0 * d(rng), d(rng)};
}

}  // namespace

TEST_CASE("initialisation") {
  const auto a = init_mlp(small(3));
  CHECK(a.parameter_count() == 64 * 3 + 64 + 64 + 1);
  CHECK(a.b1().isZero(0.0));
  CHECK(a.b2() == 0.0);
  CHECK(a.first_moment().isZero(0.0));
  CHECK(a.second_moment().isZero(0.0));
  CHECK(a.step_count() == 0);
  CHECK_FALSE(a.trained());

  const auto b = init_mlp(small(3));
  CHECK(a.parameters() == b.parameters());
  const auto c = init_mlp(small(4));
  CHECK(a.W1() != c.W1());
  CHECK(a.W1().maxCoeff() != a.W1().minCoeff());

  // Glorot-uniform bound for fan_in 3, fan_out 64.
  const double limit = std::sqrt(6.0 / (3.0 + 64.0));
  CHECK(a.W1().cwiseAbs().maxCoeff() <= limit);

  MlpConfig z = small(3);
  z.zero_output_head = true;
  const auto head = init_mlp(z);
  CHECK(head.W2().isZero(0.0));
  std::mt19937_64 rng(1);
  for (int i = 0; i < 10; ++i) CHECK(forward(head, random_features(rng)) == 0.0);
}

TEST_CASE("config validation") {
  MlpConfig c;
  c.epochs = 0;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c = MlpConfig{};
  c.validation_split = 1.0;
  CHECK_THROWS_AS(c.validate(), ParameterError);
}

TEST_CASE("forward special cases") {
  auto mlp = init_mlp(small());
  std::mt19937_64 rng(2);
  SUBCASE("zero network") {
    mlp.parameters().setZero();
    CHECK(forward(mlp, random_features(rng)) == 0.0);
  }
  SUBCASE("constant head") {
    mlp.W2().setZero();
    mlp.b2() = 3.0;
    for (int i = 0; i < 10; ++i) CHECK(forward(mlp, random_features(rng)) == 3.0);
  }
  SUBCASE("matches the written-out expression") {
    auto& n = mlp.normalization();
    n.mean = {10.0, 12.0, 0.5};
    n.scale = {2.0, 3.0, 0.25};
    n.target_mean = 1.5;
    n.target_scale = 0.5;
    mlp.b2() = 0.3;
    const FeatureVector x{11.0, 13.0, 0.4};
    const Eigen::Vector3d xn((11.0 - 10.0) / 2.0, (13.0 - 12.0) / 3.0, (0.4 - 0.5) / 0.25);
    const Vec hidden = (mlp.W1() * xn + mlp.b1()).cwiseMax(0.0);
    const double expect = 1.5 + 0.5 * (mlp.W2().dot(hidden) + 0.3);
    CHECK(forward(mlp, x) == doctest::Approx(expect).epsilon(1e-14));
  }
}

TEST_CASE("gradients agree with finite differences") {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> nd;
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    auto mlp = init_mlp(small(static_cast<std::uint64_t>(t)));
    mlp.b1().setConstant(0.05);
    const Eigen::Vector3d x(nd(rng), nd(rng), nd(rng));
    const double y = nd(rng);
    worst = std::max(worst, max_relative_error(loss_gradient(mlp, x, y), numeric_gradient(mlp, x, y)));
  }
  CHECK(worst < 1e-4);

  SUBCASE("zero network") {
    auto mlp = init_mlp(small());
    mlp.parameters().setZero();
    const Eigen::Vector3d x(0.3, -0.2, 1.0);
    const Vec g = loss_gradient(mlp, x, 0.0);
    CHECK(g.isZero(0.0));
    CHECK(max_relative_error(g, numeric_gradient(mlp, x, 0.0)) < 1e-4);
  }
  SUBCASE("a wrong gradient is detected") {
    const auto mlp = init_mlp(small(5));
    const Eigen::Vector3d x(0.3, -0.2, 1.0);
    Vec g = loss_gradient(mlp, x, 0.7);
    g(g.size() - 1) *= 1.5;
    CHECK(max_relative_error(g, numeric_gradient(mlp, x, 0.7)) > 1e-2);
  }
  SUBCASE("gradient_check on raw features") {
    const auto mlp = init_mlp(small(6));
    CHECK(gradient_check(mlp, {1.0, 2.0, 0.5}, 0.3) < 1e-4);
  }
}

TEST_CASE("replay buffer") {
  SUBCASE("FIFO eviction") {
    ReplayBuffer b(5);
    for (int i = 0; i < 6; ++i) b.push({double(i), 0.0, 0.0}, double(i));
    CHECK(b.size() == 5);
    CHECK(b.samples().front().y == 1.0);
    CHECK(b.samples().back().y == 5.0);
  }
  SUBCASE("degenerate statistics") {
    ReplayBuffer b(10);
    for (int i = 0; i < 3; ++i) b.push({4.0, 5.0, 6.0}, 2.0);
    CHECK(b.stats().mean == Eigen::Vector3d(4.0, 5.0, 6.0));
    CHECK(b.stats().scale == Eigen::Vector3d::Ones());
    CHECK(b.stats().target_scale == 1.0);
    CHECK(b.stats().degenerate_features);
  }
  SUBCASE("population statistics") {
    ReplayBuffer b(10);
    b.push({1.0, 0.0, 0.0}, 1.0);
    b.push({3.0, 0.0, 0.0}, 3.0);
    CHECK(b.stats().mean(0) == 2.0);
    CHECK(b.stats().scale(0) == 1.0);
    CHECK(b.stats().scale(1) == 1.0);
    CHECK(b.stats().target_mean == 2.0);
    CHECK_FALSE(b.stats().degenerate_features);
  }
  SUBCASE("read-back is lossless") {
    ReplayBuffer b(3);
    const FeatureVector x{1.25, -3.5, 0.125};
    b.push(x, 0.1);
    CHECK(b.samples()[0].x.as_vector() == x.as_vector());
    CHECK(b.samples()[0].y == 0.1);
  }
  SUBCASE("non-finite input is rejected") {
    ReplayBuffer b(3);
    CHECK_THROWS_AS(b.push({std::numeric_limits<double>::quiet_NaN(), 0, 0}, 0.0), ParameterError);
    CHECK_THROWS_AS(b.push({0, 0, 0}, std::numeric_limits<double>::infinity()), ParameterError);
    CHECK(b.size() == 0);
  }
}

TEST_CASE("normalisation clips far inputs") {
  Normalization n;
  const auto v = n.apply({100.0, -100.0, 1.0});
  CHECK(v(0) == Normalization::kInputClip);
  CHECK(v(1) == -Normalization::kInputClip);
  CHECK(v(2) == 1.0);
}

TEST_CASE("training") {
  std::mt19937_64 rng(21);
  SUBCASE("too few samples is a no-op") {
    auto mlp = init_mlp(small());
    const Vec before = mlp.parameters();
    ReplayBuffer b(10);
    for (int i = 0; i < 4; ++i) b.push(random_features(rng), 1.0);
    const auto r = train(mlp, b);
    CHECK_FALSE(r.trained);
    CHECK(r.epochs_run == 0);
    CHECK_FALSE(mlp.trained());
    CHECK(mlp.parameters() == before);
  }
  SUBCASE("constant target") {
    auto mlp = init_mlp(small());
    ReplayBuffer b(200);
    for (int i = 0; i < 100; ++i) b.push(random_features(rng), 2.0);
    const auto r = train(mlp, b);
    CHECK(r.trained);
    CHECK(r.constant_target);
    CHECK(r.epochs_run == 0);
    CHECK(r.train_samples == 80);
    CHECK(r.val_samples == 20);
    CHECK(r.train_loss < 1e-4);
    CHECK(r.train_loss <= r.initial_train_loss);
    for (int i = 0; i < 5; ++i) CHECK(forward(mlp, random_features(rng)) == 2.0);
  }
  // One 100-epoch full-batch update gets within a few times the threshold;
  // the online loop warm-starts every update, so ten updates are run.
  SUBCASE("linear target") {
    auto mlp = init_mlp(small());
    ReplayBuffer b(200);
    std::vector<double> grid;
    for (int i = 0; i <= 100; ++i) grid.push_back(-1.0 + 0.02 * i);
    std::shuffle(grid.begin(), grid.end(), rng);
    for (double x1 : grid) b.push({x1, 0.0, 0.0}, 0.5 * x1);
    const auto first = train(mlp, b);
    CHECK(first.train_loss < first.initial_train_loss / 10.0);
    TrainReport r = first;
    for (int update = 1; update < 10; ++update) r = train(mlp, b);
    CHECK(r.val_loss < 1e-3);
  }
  SUBCASE("single-sample overfit") {
    MlpConfig c = small();
    c.min_samples = 1;
    c.validation_split = 0.0;
    c.epochs = 2000;
    auto mlp = init_mlp(c);
    ReplayBuffer b(1);
    const FeatureVector x0{12.0, 11.0, 0.3};
    b.push(x0, 1.7);
    train(mlp, b);
    CHECK(std::abs(forward(mlp, x0) - 1.7) < 1e-3);
  }
  SUBCASE("two-sample overfit") {
    MlpConfig c = small();
    c.min_samples = 1;
    c.validation_split = 0.0;
    c.epochs = 2000;
    auto mlp = init_mlp(c);
    ReplayBuffer b(2);
    const FeatureVector x0{12.0, 11.0, 0.3}, x1{14.0, 15.0, -0.2};
    b.push(x0, 1.7);
    b.push(x1, -0.4);
    const auto r = train(mlp, b);
    CHECK_FALSE(r.constant_target);
    CHECK(std::abs(forward(mlp, x0) - 1.7) < 1e-3);
    CHECK(std::abs(forward(mlp, x1) + 0.4) < 1e-3);
  }
  SUBCASE("degenerate buffer trains and flags") {
    auto mlp = init_mlp(small());
    ReplayBuffer b(20);
    for (int i = 0; i < 10; ++i) b.push({5.0, 5.0, 0.0}, 1.0 + 0.1 * i);
    const auto r = train(mlp, b);
    CHECK(r.trained);
    CHECK(r.degenerate_features);
    CHECK(std::isfinite(r.train_loss));
  }
}

TEST_CASE("training is deterministic") {
  std::mt19937_64 rng(8);
  ReplayBuffer b(200);
  for (int i = 0; i < 150; ++i) {
    const auto x = random_features(rng);
    b.push(x, 0.1 * x.desired_speed - 3.0);
  }
  auto a = init_mlp(small(9)), c = init_mlp(small(9));
  train(a, b);
  train(c, b);
  CHECK(a.parameters() == c.parameters());
  CHECK(a.first_moment() == c.first_moment());
  CHECK(a.step_count() == 100);
}

TEST_CASE("fits the affine error shape") {
  // residual = 0.1 u - 3 + noise; error measured against the noise-free curve.
  const double sigma = 1.0;
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> speed(10.0, 30.0);
  std::normal_distribution<double> noise(0.0, sigma);
  ReplayBuffer b(200);
  for (int i = 0; i < 200; ++i) {
    const double u = speed(rng);
    b.push({u, u, 0.0}, 0.1 * u - 3.0 + noise(rng));
  }
  MlpConfig c = small(2);
  auto mlp = init_mlp(c);
  TrainReport r;
  for (int update = 0; update < 5; ++update) r = train(mlp, b);
  CHECK(r.train_loss <= r.initial_train_loss);
  double mse = 0.0;
  const int n = 200;
  for (int i = 0; i < n; ++i) {
    const double u = 10.0 + 20.0 * i / (n - 1);
    const double e = forward(mlp, {u, u, 0.0}) - (0.1 * u - 3.0);
    mse += e * e / n;
  }
  CHECK(mse < 0.5 * sigma * sigma);
}

TEST_CASE("snapshot round trip") {
  std::mt19937_64 rng(12);
  ReplayBuffer b(50);
  for (int i = 0; i < 50; ++i) b.push(random_features(rng), 0.5 * i);
  auto mlp = init_mlp(small(7));
  train(mlp, b);
  const auto text = export_snapshot(mlp);
  const auto back = import_snapshot(text);
  CHECK(back.parameters() == mlp.parameters());
  CHECK(back.first_moment() == mlp.first_moment());
  CHECK(back.second_moment() == mlp.second_moment());
  CHECK(back.step_count() == mlp.step_count());
  CHECK(back.trained());
  CHECK(back.normalization().mean == mlp.normalization().mean);
  CHECK(back.normalization().target_scale == mlp.normalization().target_scale);
  CHECK(export_snapshot(back) == text);
  const auto x = random_features(rng);
  CHECK(forward(back, x) == forward(mlp, x));

  CHECK_THROWS_AS(import_snapshot("{\"format\":\"other\",\"version\":1}"), ParseError);
  CHECK_THROWS_AS(import_snapshot("not json"), ParseError);
}
