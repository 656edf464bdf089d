#include <cmath>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "gtnet/cycle.hpp"
#include "gtnet/datasets.hpp"
#include "gtnet/errors.hpp"
#include "gtnet/hybrid_net.hpp"
#include "gtnet/mass_flows.hpp"

using namespace gtnet;
using namespace gtnet::hybrid;
using nn::Vector;

namespace {

const cycle::EngineConfig& clean() {
  static const cycle::EngineConfig cfg = cycle::design_point(cycle::DesignSpec{});
  return cfg;
}

// Random engine inputs around the design point.
Matrix random_inputs(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.9, 1.1);
  Matrix x(kInputCount, n);
  for (int j = 0; j < n; ++j) {
    x(kT2, j) = 288.15 * u(rng);
    x(kP2, j) = 90.0 * u(rng);
    x(kMa2, j) = 0.5 * u(rng);
    x(kPamb, j) = 70.0 * u(rng);
    x(kN1, j) = 0.95 * u(rng);
    x(kN2, j) = 0.95 * u(rng);
    x(kW2, j) = 100.0 * u(rng);
    x(kW25, j) = 57.0 * u(rng);
    x(kWF, j) = 1.8 * u(rng);
  }
  return x;
}

// Model with normalisers fitted to cycle samples so that outputs stay in a
// physical range.
HybridModel fitted_model(bool use_ma2, bool log_scale, std::uint64_t seed) {
  HybridModel m = HybridModel::create(clean().bleeds(), use_ma2, seed, 16);
  m.log_scale = log_scale;
  const data::Dataset d = data::gen_mc_samples(clean(), 64, data::Envelope{}, 5);
  m.fit_normalizers(d.x, d.y);
  return m;
}

const data::Dataset& mc_samples() {
  static const data::Dataset d = data::gen_mc_samples(clean(), 64, data::Envelope{}, 5);
  return d;
}

// True when no ReLU of any component net changes state between the two
// inputs, so a central difference across them sees a smooth function.
bool same_activation_pattern(const HybridModel& m, const Matrix& a, const Matrix& b) {
  const Cascade ca = forward_cascade(m, a);
  const Cascade cb = forward_cascade(m, b);
  for (int i = 0; i < kComponentCount; ++i) {
    for (std::size_t l = 0; l < ca.tapes[i].pre.size(); ++l) {
      if (((ca.tapes[i].pre[l].array() > 0) != (cb.tapes[i].pre[l].array() > 0)).any()) return false;
    }
  }
  return true;
}

}  // namespace

TEST(MassFlows, ZeroBleedCollapse) {
  const MassFlows f = infer_mass_flows(100.0, 30.0, 0.5, Bleeds{0.0, 0.0, 0.0, 0.0});
  EXPECT_EQ(f[Station::S3], 30.5);
  EXPECT_EQ(f[Station::S13], 70.0);
  EXPECT_EQ(f[Station::S8], 100.5);
  EXPECT_EQ(f[Station::S4], 30.5);
}

TEST(MassFlows, HandEvaluatedBookkeeping) {
  const Bleeds b{0.04, 0.03, 0.06, 0.01};
  const double W2 = 100.0, W25 = 30.0, WF = 0.5;
  const MassFlows f = infer_mass_flows(W2, W25, WF, b);
  EXPECT_NEAR(f[Station::S3], 29.1 + 0.5, 1e-12);
  EXPECT_NEAR(f[Station::S4], 30.0 * 0.87 + 0.5, 1e-12);
  EXPECT_NEAR(f[Station::S41], 26.1 + 0.5 + 1.8, 1e-12);
  EXPECT_NEAR(f[Station::S43], f[Station::S41], 1e-12);
  EXPECT_NEAR(f[Station::S44], 26.6 + 1.8 + 1.2, 1e-12);
  EXPECT_NEAR(f[Station::S45], 29.6 + 0.9, 1e-12);
  EXPECT_NEAR(f[Station::S5], 30.5, 1e-12);
  EXPECT_NEAR(f[Station::S6], 30.5, 1e-12);
  EXPECT_NEAR(f[Station::S13], 70.0, 1e-12);
  EXPECT_NEAR(f[Station::S16], 70.3, 1e-12);
  EXPECT_NEAR(f[Station::S64], 100.5, 1e-12);
  EXPECT_NEAR(f[Station::S8], 100.5, 1e-12);
}

TEST(MassFlows, IdentitiesOverRandomInputs) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> w2(20.0, 150.0), frac(0.3, 0.7), wf(0.0, 3.0), bl(0.0, 0.05);
  for (int i = 0; i < 50; ++i) {
    const Bleeds b{bl(rng), bl(rng), bl(rng), bl(rng) / 5};
    const double W2 = w2(rng), W25 = frac(rng) * W2, WF = wf(rng);
    const MassFlows f = infer_mass_flows(W2, W25, WF, b);
    EXPECT_NEAR(f[Station::S44] - f[Station::S41], W25 * b.hpt_cl, 1e-12 * W2);
    EXPECT_NEAR(f[Station::S64], f[Station::S6] + f[Station::S16] - b.c2b * W25, 1e-12 * W2);
    for (Station s : kAllStations) {
      const FlowCoefficients k = flow_coefficients(s, b);
      EXPECT_NEAR(f[s], k.w2 * W2 + k.w25 * W25 + k.wf * WF, 1e-12 * W2);
    }
  }
  const Bleeds no_leak{0.04, 0.03, 0.06, 0.0};
  const MassFlows f = infer_mass_flows(80.0, 40.0, 1.0, no_leak);
  EXPECT_NEAR(f[Station::S64], f[Station::S6] + f[Station::S16], 1e-12);
}

TEST(MassFlows, RejectsInvalidFlows) {
  EXPECT_THROW(infer_mass_flows(30.0, 40.0, 1.0, Bleeds{}), ConfigError);
  EXPECT_THROW(infer_mass_flows(80.0, 40.0, 1.0, Bleeds{0.1, 0.1, 0.1, 0.0}), ConfigError);
  EXPECT_THROW(infer_mass_flows(80.0, 40.0, 1.0, Bleeds{-0.01, 0.0, 0.0, 0.0}), ConfigError);
}

TEST(HybridNet, OutputNamesAndIndices) {
  EXPECT_EQ(output_name(0), "T25");
  EXPECT_EQ(output_name(output_index(Station::S6, kT)), "T6");
  EXPECT_EQ(output_name(26), "Ma8");
  EXPECT_EQ(output_index(Station::S41, kT), -1);
  EXPECT_EQ(component_specs(false).size(), 8u);
  EXPECT_EQ(component_specs(true)[0].inputs.size(), component_specs(false)[0].inputs.size() + 1);
}

TEST(HybridNet, Deterministic) {
  const HybridModel m = fitted_model(false, true, 3);
  const Matrix x = random_inputs(10, 1);
  EXPECT_EQ(predict(m, x), predict(m, x));
  const HybridModel m2 = fitted_model(false, true, 3);
  EXPECT_EQ(predict(m2, x), predict(m, x));
}

TEST(HybridNet, PambFeedsOnlyTheNozzle) {
  const HybridModel m = fitted_model(false, true, 4);
  Matrix x = random_inputs(6, 2);
  const Matrix a = predict(m, x);
  x.row(kPamb) *= 1.1;
  const Matrix b = predict(m, x);
  for (int r = 0; r < kOutputCount; ++r) {
    const bool nozzle = r >= output_index(Station::S8, kT);
    if (nozzle) {
      EXPECT_NE(a.row(r), b.row(r)) << output_name(r);
    } else {
      EXPECT_EQ(a.row(r), b.row(r)) << output_name(r);
    }
  }
}

TEST(HybridNet, Ma2OnlyUsedWhenEnabled) {
  const HybridModel m = fitted_model(false, true, 5);
  Matrix x = random_inputs(4, 3);
  const Matrix a = predict(m, x);
  x.row(kMa2).setConstant(std::nan(""));
  EXPECT_EQ(predict(m, x), a);
}

TEST(HybridNet, CascadeGradientMatchesFiniteDifferences) {
  for (bool log_scale : {false, true}) {
    const HybridModel m = fitted_model(true, log_scale, 6);
    const Matrix x = mc_samples().x.leftCols(8);
    const Matrix c = Matrix::Random(kOutputCount, x.cols());
    const Cascade cas = forward_cascade(m, x);
    CascadeGradients g;
    gradient_through_cascade(m, cas, c, Matrix(), g);
    auto f = [&](const Matrix& xi) { return predict(m, xi).cwiseProduct(c).sum(); };
    for (int r = 0; r < kInputCount; ++r) {
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double h = 1e-5 * std::abs(x(r, j));
        Matrix xp = x, xm = x;
        xp(r, j) += h;
        xm(r, j) -= h;
        if (!same_activation_pattern(m, xp, xm)) continue;
        const double fd = (f(xp) - f(xm)) / (2 * h);
        EXPECT_NEAR(g.inputs(r, j), fd, 1e-5 * std::max(1.0, std::abs(fd))) << kInputNames[r] << ' ' << log_scale;
      }
    }
  }
}

TEST(HybridNet, WeightGradientMatchesFiniteDifferences) {
  HybridModel m = fitted_model(false, true, 7);
  const Matrix x = mc_samples().x.leftCols(6);
  const Matrix c = Matrix::Random(kOutputCount, x.cols());
  const Cascade cas = forward_cascade(m, x);
  CascadeGradients g;
  gradient_through_cascade(m, cas, c, Matrix(), g);
  std::mt19937_64 rng(1);
  for (int comp = 0; comp < kComponentCount; ++comp) {
    nn::Mlp& net = m.nets[comp];
    const Vector analytic = nn::Mlp::flatten(g.nets[comp]);
    Vector p = net.flatten();
    std::uniform_int_distribution<Eigen::Index> pick(0, p.size() - 1);
    for (int t = 0; t < 15; ++t) {
      const Eigen::Index k = pick(rng);
      const double p0 = p[k], h = 1e-5;
      p[k] = p0 + h;
      net.unflatten(p);
      const double fp = predict(m, x).cwiseProduct(c).sum();
      p[k] = p0 - h;
      net.unflatten(p);
      const double fm = predict(m, x).cwiseProduct(c).sum();
      p[k] = p0;
      net.unflatten(p);
      const double fd = (fp - fm) / (2 * h);
      EXPECT_NEAR(analytic[k], fd, 1e-5 * std::max(1.0, std::abs(fd))) << component_name(static_cast<Component>(comp));
    }
  }
}

TEST(HybridNet, ZeroUpstreamAndDataflow) {
  const HybridModel m = fitted_model(false, true, 8);
  const Matrix x = mc_samples().x.leftCols(4);
  const Cascade cas = forward_cascade(m, x);
  CascadeGradients zero;
  gradient_through_cascade(m, cas, Matrix::Zero(kOutputCount, 4), Matrix(), zero);
  EXPECT_EQ(zero.inputs.norm(), 0.0);
  for (const auto& g : zero.nets) EXPECT_EQ(nn::Mlp::flatten(g).norm(), 0.0);

  Matrix d = Matrix::Zero(kOutputCount, 4);
  d.row(output_index(Station::S25, kT)).setOnes();
  CascadeGradients g;
  gradient_through_cascade(m, cas, d, Matrix(), g);
  EXPECT_EQ(nn::Mlp::flatten(g.nets[static_cast<int>(Component::Nozzle)]).norm(), 0.0);
  EXPECT_EQ(nn::Mlp::flatten(g.nets[static_cast<int>(Component::Hpc)]).norm(), 0.0);
  EXPECT_GT(nn::Mlp::flatten(g.nets[static_cast<int>(Component::Lpc)]).norm(), 0.0);
}

TEST(HybridNet, FlowGradientReachesInletFlows) {
  const HybridModel m = fitted_model(false, true, 9);
  const Matrix x = mc_samples().x.leftCols(3);
  const Cascade cas = forward_cascade(m, x);
  Matrix df = Matrix::Zero(kStationCount, 3);
  df.row(idx(Station::S8)).setOnes();
  CascadeGradients g;
  gradient_through_cascade(m, cas, Matrix::Zero(kOutputCount, 3), df, g);
  for (int j = 0; j < 3; ++j) {
    EXPECT_NEAR(g.inputs(kW2, j), 1.0, 1e-12);
    EXPECT_NEAR(g.inputs(kWF, j), 1.0, 1e-12);
    EXPECT_NEAR(g.inputs(kW25, j), 0.0, 1e-12);
  }
}

TEST(HybridNet, SaveLoadRoundTrip) {
  const HybridModel m = fitted_model(true, true, 10);
  const auto dir = std::filesystem::temp_directory_path() / "gtnet_test_model";
  std::filesystem::remove_all(dir);
  save_model(dir, m);
  const HybridModel back = load_model(dir);
  EXPECT_EQ(back.use_ma2, true);
  EXPECT_EQ(back.log_scale, true);
  EXPECT_EQ(back.hidden_width, 16);
  const Matrix x = random_inputs(5, 4);
  EXPECT_EQ(predict(back, x), predict(m, x));
  std::filesystem::remove(dir / "mixer.net");
  EXPECT_THROW(load_model(dir), FormatError);
  std::filesystem::remove_all(dir);
}

TEST(HybridNet, ContractChecks) {
  HybridModel m = HybridModel::create(Bleeds{}, false, 1, 8);
  EXPECT_NO_THROW(m.validate());
  m.nets[1] = nn::Mlp({3, 8, 3});
  EXPECT_THROW(m.validate(), ConfigError);
  EXPECT_THROW(predict(fitted_model(false, true, 1), Matrix::Zero(8, 1)), ConfigError);
}

TEST(HybridNet, NonFiniteOutputNamesComponent) {
  HybridModel m = HybridModel::create(Bleeds{}, false, 2, 8);
  m.log_scale = false;
  Vector p = m.nets[static_cast<int>(Component::Burner)].flatten();
  p[0] = std::nan("");
  m.nets[static_cast<int>(Component::Burner)].unflatten(p);
  try {
    predict(m, random_inputs(2, 5));
    FAIL() << "expected CascadeError";
  } catch (const CascadeError& e) {
    EXPECT_NE(std::string(e.what()).find("burner"), std::string::npos);
  }
}
