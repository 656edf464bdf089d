#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "gtnet/cycle.hpp"
#include "gtnet/datasets.hpp"
#include "gtnet/errors.hpp"
#include "gtnet/physics_loss.hpp"

using namespace gtnet;
using namespace gtnet::physics;
using hybrid::kOutputCount;

namespace {

const cycle::EngineConfig& clean() {
  static const cycle::EngineConfig cfg = cycle::design_point(cycle::DesignSpec{});
  return cfg;
}

struct Batch {
  Matrix x, y, flows;
};

Batch cycle_batch(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> T2(250.0, 310.0), P2(50.0, 100.0), n2(0.82, 0.98);
  Batch b{Matrix(hybrid::kInputCount, n), Matrix(kOutputCount, n), Matrix()};
  for (int j = 0; j < n; ++j) {
    const double p2 = P2(rng);
    const auto p = cycle::off_design(clean(), T2(rng), p2, 0.8 * p2, n2(rng) * clean().design.n2);
    const auto xi = data::inputs_of(p);
    const auto yi = data::targets_of(p);
    for (int i = 0; i < hybrid::kInputCount; ++i) b.x(i, j) = xi[static_cast<std::size_t>(i)];
    for (int i = 0; i < kOutputCount; ++i) b.y(i, j) = yi[static_cast<std::size_t>(i)];
  }
  b.flows = hybrid::batch_mass_flows(b.x, clean().bleeds());
  return b;
}

const Batch& converged() {
  static const Batch b = cycle_batch(6, 21);
  return b;
}

template <class F>
void check_gradients(const Batch& b, F loss, const LossTerm& t, double tol) {
  const double h = 1e-5;
  int checked = 0;
  auto probe = [&](Matrix& m, const Matrix& g, Eigen::Index i) {
    const double v = m(i);
    const double step = h * std::abs(v);
    m(i) = v + step;
    const double fp = loss();
    m(i) = v - step;
    const double fm = loss();
    m(i) = v;
    const double fd = (fp - fm) / (2 * step);
    const double a = g(i);
    EXPECT_LT(std::abs(a - fd), tol * std::max(std::abs(fd), 1e-9 / std::abs(v))) << i << ' ' << a << ' ' << fd;
    ++checked;
  };
  Batch& mb = const_cast<Batch&>(b);
  for (Eigen::Index i = 0; i < mb.y.size(); ++i) probe(mb.y, t.d_outputs, i);
  for (Eigen::Index i = 0; i < mb.flows.size(); ++i) {
    if (mb.flows(i) != 0.0) probe(mb.flows, t.d_flows, i);
  }
  for (Eigen::Index i = 0; i < mb.x.size(); ++i) {
    if (std::isfinite(mb.x(i)) && mb.x(i) != 0.0) probe(mb.x, t.d_inputs, i);
  }
  EXPECT_GE(checked, 100);
}

}  // namespace

TEST(ParamsLoss, WorkedExamples) {
  Matrix pred(1, 1), y(1, 1);
  pred << 1.1;
  y << 1.0;
  EXPECT_NEAR(loss_params(pred, y, {0}).value, 0.01, 1e-15);
  Matrix p2(2, 2), y2(1, 2);
  p2 << 1.05, 0.95, 7.0, 7.0;
  y2 << 1.0, 1.0;
  EXPECT_NEAR(loss_params(p2, y2, {0}).value, 0.0025, 1e-15);
}

TEST(ParamsLoss, MatchesDoubleLoop) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  for (int c = 0; c < 20; ++c) {
    const int B = 1 + c % 7;
    const std::vector<int> sel = c % 2 ? std::vector<int>{3, 17, 26} : selector_all();
    const auto K = static_cast<Eigen::Index>(sel.size());
    Matrix pred(kOutputCount, B), y(K, B);
    for (Eigen::Index i = 0; i < pred.size(); ++i) pred(i) = u(rng);
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = u(rng);
    double ref = 0.0;
    for (int j = 0; j < B; ++j) {
      for (Eigen::Index k = 0; k < K; ++k) {
        const double e = (pred(sel[static_cast<std::size_t>(k)], j) - y(k, j)) / y(k, j);
        ref += e * e;
      }
    }
    ref /= static_cast<double>(B * K);
    const LossTerm t = loss_params(pred, y, sel);
    EXPECT_NEAR(t.value, ref, 1e-14 * ref);
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < pred.size(); ++i) {
      Matrix pp = pred, pm = pred;
      pp(i) += h;
      pm(i) -= h;
      const double fd = (loss_params(pp, y, sel, false).value - loss_params(pm, y, sel, false).value) / (2 * h);
      EXPECT_NEAR(t.d_outputs(i), fd, 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(ParamsLoss, RejectsBadShapes) {
  Matrix pred = Matrix::Ones(kOutputCount, 2);
  EXPECT_THROW(loss_params(pred, Matrix::Ones(2, 2), {0}), ConfigError);
  EXPECT_THROW(loss_params(pred, Matrix::Zero(1, 2), {0}), DomainError);
  EXPECT_THROW(loss_params(pred, Matrix::Ones(1, 2), {40}), ConfigError);
  EXPECT_EQ(selector_from_names({"T6"}).size(), 1u);
}

TEST(MassflowLoss, VanishesOnCyclePoints) {
  const PhysicsContext ctx = PhysicsContext::from_config(clean());
  const Batch& b = converged();
  EXPECT_LT(loss_massflow(b.x, b.y, b.flows, ctx, false).value, 1e-12);
}

TEST(MassflowLoss, PressureOffsetOracle) {
  const PhysicsContext ctx = PhysicsContext::from_config(clean());
  Batch b = converged();
  const Eigen::Index iP = output_index(Station::S3, hybrid::kP);
  b.y.row(iP) *= 1.01;
  const double M = static_cast<double>(massflow_stations().size());
  EXPECT_NEAR(loss_massflow(b.x, b.y, b.flows, ctx, false).value, 1e-4 / M, 1e-8 / M);
}

TEST(MassflowLoss, InvariantToJointScaling) {
  PhysicsContext ctx = PhysicsContext::from_config(clean());
  Batch b = converged();
  b.y.row(output_index(Station::S44, hybrid::kMa)) *= 1.03;
  const double base = loss_massflow(b.x, b.y, b.flows, ctx, false).value;
  for (double& a : ctx.areas) a *= 2.0;
  b.x.row(hybrid::kW2) *= 2.0;
  b.x.row(hybrid::kW25) *= 2.0;
  b.x.row(hybrid::kWF) *= 2.0;
  b.flows = hybrid::batch_mass_flows(b.x, clean().bleeds());
  EXPECT_NEAR(loss_massflow(b.x, b.y, b.flows, ctx, false).value, base, 1e-12 * base);
}

TEST(MassflowLoss, GradientsMatchFiniteDifferences) {
  const PhysicsContext ctx = PhysicsContext::from_config(clean());
  Batch b = cycle_batch(4, 33);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> jitter(0.97, 1.03);
  for (Eigen::Index i = 0; i < b.y.size(); ++i) b.y(i) *= jitter(rng);
  const LossTerm t = loss_massflow(b.x, b.y, b.flows, ctx);
  check_gradients(b, [&] { return loss_massflow(b.x, b.y, b.flows, ctx, false).value; }, t, 1e-5);
}

TEST(MassflowLoss, MissingAreaRejected) {
  PhysicsContext ctx = PhysicsContext::from_config(clean());
  ctx.areas[idx(Station::S8)] = 0.0;
  const Batch& b = converged();
  EXPECT_THROW(loss_massflow(b.x, b.y, b.flows, ctx), ConfigError);
}

TEST(PowerLoss, VanishesOnCyclePoints) {
  const PhysicsContext ctx = PhysicsContext::from_config(clean());
  const Batch& b = converged();
  EXPECT_LT(loss_power(b.x, b.y, b.flows, ctx, false).value, 1e-12);
}

TEST(PowerLoss, EnthalpyTermsMatchCycleWork) {
  const PhysicsContext ctx = PhysicsContext::from_config(clean());
  for (int c = 0; c < 4; ++c) {
    const double n2 = (0.85 + 0.04 * c) * clean().design.n2;
    const auto p = cycle::off_design(clean(), 270.0 + 10 * c, 70.0, 50.0, n2);
    Batch b = cycle_batch(1, 1);
    const auto xi = data::inputs_of(p);
    const auto yi = data::targets_of(p);
    for (int i = 0; i < hybrid::kInputCount; ++i) b.x(i, 0) = xi[static_cast<std::size_t>(i)];
    for (int i = 0; i < kOutputCount; ++i) b.y(i, 0) = yi[static_cast<std::size_t>(i)];
    b.flows = hybrid::batch_mass_flows(b.x, clean().bleeds());
    const EnthalpyTerms e = enthalpy_terms(b.x, b.y, b.flows, 0, ctx);
    EXPECT_NEAR(e.lpt, p.work.lpt, 1e-8 * p.work.lpt);
    EXPECT_NEAR(e.hpt, p.work.hpt, 1e-8 * p.work.hpt);
    EXPECT_NEAR(e.hpc, p.work.hpc, 1e-8 * p.work.hpc);
    EXPECT_NEAR(e.lpc, p.work.lpc, 1e-8 * p.work.lpc);
  }
}

TEST(PowerLoss, EfficiencyOffsetOracle) {
  PhysicsContext ctx = PhysicsContext::from_config(clean());
  const Batch& b = converged();
  const double eta = ctx.shafts.eta_l;
  ctx.shafts.eta_l = 1.01 * eta;
  const double expected = (0.01 * eta) * (0.01 * eta);
  EXPECT_NEAR(loss_power(b.x, b.y, b.flows, ctx, false).value, expected, 1e-6 * expected);
  ctx.shafts.eta_l = eta;
  ctx.shafts.p_ext += 1e3;
  double ref = 0.0;
  for (Eigen::Index j = 0; j < b.y.cols(); ++j) {
    const double H = enthalpy_terms(b.x, b.y, b.flows, j, ctx).hpt;
    ref += (1e3 / H) * (1e3 / H);
  }
  ref /= static_cast<double>(b.y.cols());
  EXPECT_NEAR(loss_power(b.x, b.y, b.flows, ctx, false).value, ref, 1e-6 * ref);
}

TEST(PowerLoss, GradientsMatchFiniteDifferences) {
  const PhysicsContext ctx = PhysicsContext::from_config(clean());
  Batch b = cycle_batch(4, 34);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> jitter(0.98, 1.02);
  for (Eigen::Index i = 0; i < b.y.size(); ++i) b.y(i) *= jitter(rng);
  const LossTerm t = loss_power(b.x, b.y, b.flows, ctx);
  check_gradients(b, [&] { return loss_power(b.x, b.y, b.flows, ctx, false).value; }, t, 1e-5);
}

TEST(PowerLoss, DegenerateTurbineRejected) {
  const PhysicsContext ctx = PhysicsContext::from_config(clean());
  Batch b = converged();
  b.y.row(output_index(Station::S6, hybrid::kT)) = b.y.row(output_index(Station::S44, hybrid::kT));
  b.flows.row(idx(Station::S6)) = b.flows.row(idx(Station::S44));
  b.flows.row(idx(Station::S25)).setZero();
  EXPECT_THROW(loss_power(b.x, b.y, b.flows, ctx), DomainError);
}
