#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "gtnet/errors.hpp"
#include "gtnet/mlp.hpp"

using namespace gtnet;
using namespace gtnet::nn;

namespace {

// Scalar loss 0.5 sum(out .* c) for a fixed random c, to probe backward().
double probe_loss(const Mlp& net, const Matrix& X, const Matrix& c) { return net.forward(X).cwiseProduct(c).sum(); }

}  // namespace

TEST(Mlp, ZeroWeightsGiveBias) {
  Mlp net({3, 4, 2});
  net.bias(1) << 1.5, -2.0;
  const Vector y = net.forward(Vector::Random(3).eval());
  EXPECT_EQ(y[0], 1.5);
  EXPECT_EQ(y[1], -2.0);
}

TEST(Mlp, IdentityLayer) {
  Mlp net({3, 3});
  net.weight(0) = Matrix::Identity(3, 3);
  const Vector x = Vector::Random(3);
  EXPECT_EQ(net.forward(x), x);
}

TEST(Mlp, HandEvaluatedSmallNet) {
  Mlp net = Mlp::he_uniform({2, 3, 1}, 17);
  const Vector x(Vector::Random(2));
  double out = net.bias(1)[0];
  for (int j = 0; j < 3; ++j) {
    double a = net.bias(0)[j];
    for (int i = 0; i < 2; ++i) a += net.weight(0)(j, i) * x[i];
    out += net.weight(1)(0, j) * std::max(0.0, a);
  }
  EXPECT_NEAR(net.forward(x)[0], out, 1e-14);
}

TEST(Mlp, HeUniformBoundsAndSeed) {
  const Mlp a = Mlp::he_uniform({10, 20, 5}, 3);
  const Mlp b = Mlp::he_uniform({10, 20, 5}, 3);
  EXPECT_EQ(a.flatten(), b.flatten());
  EXPECT_LE(a.weight(0).cwiseAbs().maxCoeff(), std::sqrt(6.0 / 10.0));
  EXPECT_LE(a.weight(1).cwiseAbs().maxCoeff(), std::sqrt(6.0 / 20.0));
  EXPECT_EQ(a.bias(0).norm(), 0.0);
  EXPECT_EQ(a.parameter_count(), 10u * 20 + 20 + 20 * 5 + 5);
}

TEST(Mlp, ZeroUpstreamGivesZeroGradients) {
  const Mlp net = Mlp::he_uniform({4, 6, 3}, 1);
  Mlp::Tape tape;
  const Matrix X = Matrix::Random(4, 5);
  net.forward(X, tape);
  Mlp::Gradients g = net.zero_gradients();
  const Matrix dX = net.backward(tape, Matrix::Zero(3, 5), g);
  EXPECT_EQ(dX.norm(), 0.0);
  EXPECT_EQ(Mlp::flatten(g).norm(), 0.0);
}

TEST(Mlp, LinearNetMatchesRegressionGradient) {
  Mlp net = Mlp::he_uniform({3, 1}, 4);
  const Matrix X = Matrix::Random(3, 8);
  const Matrix y = Matrix::Random(1, 8);
  Mlp::Tape tape;
  const Matrix r = net.forward(X, tape) - y;
  Mlp::Gradients g = net.zero_gradients();
  net.backward(tape, 2.0 * r, g);
  const Matrix dW = 2.0 * r * X.transpose();
  EXPECT_LT((g.dW[0] - dW).norm(), 1e-12);
  EXPECT_NEAR(g.db[0][0], 2.0 * r.sum(), 1e-12);
}

TEST(Mlp, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    Mlp net = Mlp::he_uniform({4, 7, 5, 2}, 100 + trial);
    const Matrix X = Matrix::Random(4, 6);
    const Matrix c = Matrix::Random(2, 6);
    Mlp::Tape tape;
    net.forward(X, tape);
    Mlp::Gradients g = net.zero_gradients();
    const Matrix dX = net.backward(tape, c, g);
    const Vector analytic = Mlp::flatten(g);
    Vector p = net.flatten();
    const double h = 1e-5;
    for (Eigen::Index k = 0; k < p.size(); ++k) {
      const double p0 = p[k];
      p[k] = p0 + h;
      net.unflatten(p);
      const double fp = probe_loss(net, X, c);
      p[k] = p0 - h;
      net.unflatten(p);
      const double fm = probe_loss(net, X, c);
      p[k] = p0;
      net.unflatten(p);
      const double fd = (fp - fm) / (2 * h);
      EXPECT_NEAR(analytic[k], fd, 1e-5 * std::max(1.0, std::abs(fd))) << k;
    }
    for (Eigen::Index i = 0; i < X.size(); ++i) {
      Matrix Xp = X, Xm = X;
      Xp(i) += h;
      Xm(i) -= h;
      const double fd = (probe_loss(net, Xp, c) - probe_loss(net, Xm, c)) / (2 * h);
      EXPECT_NEAR(dX(i), fd, 1e-5 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(Mlp, FlattenRoundTrip) {
  Mlp net = Mlp::he_uniform({3, 4, 2}, 5);
  const Vector p = net.flatten();
  Mlp other({3, 4, 2});
  other.unflatten(p);
  EXPECT_EQ(other.flatten(), p);
  EXPECT_THROW(other.unflatten(Vector::Zero(3)), ConfigError);
}

TEST(Mlp, InputDimensionChecked) {
  const Matrix x = Matrix::Zero(4, 1);
  EXPECT_THROW(Mlp({3, 2}).forward(x), ConfigError);
}

TEST(Mlp, StandardizerFitAndInvert) {
  Matrix data(2, 4);
  data << 1, 2, 3, 4, 5, 5, 5, 5;
  const Standardizer s = Standardizer::fit(data);
  EXPECT_NEAR(s.mean[0], 2.5, 1e-15);
  EXPECT_EQ(s.scale[1], 1.0);
  const Matrix z = s.apply(data);
  EXPECT_NEAR(z.row(0).mean(), 0.0, 1e-15);
  EXPECT_LT((s.invert(z) - data).norm(), 1e-14);
}

TEST(Training, ZeroLearningRateLeavesParameters) {
  Mlp net = Mlp::he_uniform({2, 4, 1}, 2);
  const Vector before = net.flatten();
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.learning_rate = 0.0;
  cfg.batch_size = 2;
  for (auto kind : {OptimizerKind::Sgd, OptimizerKind::Adam}) {
    cfg.optimizer = kind;
    train({&net}, 5, [&](auto, std::vector<Mlp::Gradients>& g, std::vector<double>&) {
      g[0].dW[0].setOnes();
      return 1.0;
    }, cfg);
    EXPECT_EQ(net.flatten(), before);
  }
}

TEST(Training, QuadraticFollowsGradientDescentRecurrence) {
  Mlp net({1, 1});
  net.weight(0)(0, 0) = 0.0;
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.learning_rate = 0.1;
  cfg.decay_factor = 0.5;
  cfg.decay_every_epochs = 4;
  cfg.batch_size = 1;
  cfg.optimizer = OptimizerKind::Sgd;
  train({&net}, 1, [&](auto, std::vector<Mlp::Gradients>& g, std::vector<double>&) {
    const double w = net.weight(0)(0, 0);
    g[0].dW[0](0, 0) = 2.0 * (w - 3.0);
    return (w - 3.0) * (w - 3.0);
  }, cfg);
  double w = 0.0;
  for (int e = 0; e < 10; ++e) w -= 0.1 * std::pow(0.5, e / 4) * 2.0 * (w - 3.0);
  EXPECT_NEAR(net.weight(0)(0, 0), w, 1e-14);
}

TEST(Training, LearningRateSchedule) {
  TrainConfig cfg;
  EXPECT_EQ(cfg.lr_at(0), 1e-3);
  EXPECT_EQ(cfg.lr_at(99), 1e-3);
  EXPECT_NEAR(cfg.lr_at(100), 0.9e-3, 1e-18);
  EXPECT_NEAR(cfg.lr_at(250), 0.81e-3, 1e-18);
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Training, DeterministicHistory) {
  auto run = [] {
    Mlp net = Mlp::he_uniform({1, 8, 1}, 6);
    const Matrix X = Vector::LinSpaced(40, -1, 1).transpose();
    const Matrix Y = X.array().square();
    TrainConfig cfg;
    cfg.epochs = 20;
    cfg.batch_size = 8;
    cfg.learning_rate = 1e-2;
    cfg.seed = 77;
    return train({&net}, 40, [&](std::span<const std::size_t> b, std::vector<Mlp::Gradients>& g, std::vector<double>&) {
      Matrix xb(1, b.size()), yb(1, b.size());
      for (std::size_t j = 0; j < b.size(); ++j) {
        xb(0, j) = X(0, b[j]);
        yb(0, j) = Y(0, b[j]);
      }
      Mlp::Tape tape;
      const Matrix r = net.forward(xb, tape) - yb;
      net.backward(tape, 2.0 * r / b.size(), g[0]);
      return r.squaredNorm() / b.size();
    }, cfg);
  };
  const auto a = run();
  const auto b = run();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].loss, b[i].loss);
  EXPECT_LT(a.back().loss, a.front().loss);
}

TEST(Training, NonFiniteLossThrows) {
  Mlp net({1, 1});
  TrainConfig cfg;
  cfg.epochs = 1;
  EXPECT_THROW(train({&net}, 3, [](auto, auto&, auto&) { return std::nan(""); }, cfg), DivergenceError);
}

TEST(Checkpoint, ExactRoundTrip) {
  NetCheckpoint ck{Mlp::he_uniform({3, 5, 2}, 8), Standardizer::fit(Matrix::Random(3, 10)),
                   Standardizer::fit(Matrix::Random(2, 10))};
  std::stringstream ss;
  write_checkpoint(ss, ck);
  const NetCheckpoint back = read_checkpoint(ss);
  EXPECT_EQ(back.net.dims(), ck.net.dims());
  EXPECT_EQ(back.net.flatten(), ck.net.flatten());
  EXPECT_EQ(back.input.mean, ck.input.mean);
  EXPECT_EQ(back.output.scale, ck.output.scale);
  std::stringstream bad("gtnet-mlp 9\n");
  EXPECT_THROW(read_checkpoint(bad), FormatError);
  std::string text = ss.str();
  std::stringstream truncated;
  write_checkpoint(truncated, ck);
  std::string t = truncated.str();
  std::stringstream cut(t.substr(0, t.size() / 2));
  EXPECT_THROW(read_checkpoint(cut), FormatError);
}
