#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "gtnet/cycle.hpp"
#include "gtnet/errors.hpp"
#include "gtnet/kv_file.hpp"

using namespace gtnet;
using namespace gtnet::cycle;

namespace {

const EngineConfig& clean() {
  static const EngineConfig cfg = design_point(DesignSpec{});
  return cfg;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

double max_residual(const CyclePoint& p) {
  double m = 0.0;
  for (double r : p.residuals) m = std::max(m, std::abs(r));
  return m;
}

}  // namespace

TEST(Cycle, DesignPointValid) {
  EXPECT_NO_THROW(clean().validate());
  for (Station s : kAllStations) EXPECT_GT(clean().area(s), 0.0) << station_number(s);
  const CyclePoint p = evaluate(clean(), design_inputs(clean()), clean().design_solution);
  EXPECT_LT(max_residual(p), 1e-9);
}

TEST(Cycle, OffDesignAtDesignInputsReproducesDesign) {
  const CyclePoint p = off_design(clean(), design_inputs(clean()));
  const DesignSpec& d = clean().design;
  EXPECT_LT(rel(p.W2(), d.W2), 1e-6);
  EXPECT_LT(rel(p.at(Station::S25).Pt / p.at(Station::S2).Pt, d.pr_lpc), 1e-6);
  EXPECT_LT(rel(p.at(Station::S3).Pt / p.at(Station::S25).Pt, d.pr_hpc), 1e-6);
  EXPECT_LT(rel(p.at(Station::S4).Tt, d.T4), 1e-6);
  EXPECT_LT(rel(p.W2() - p.W25(), d.bpr * p.W25()), 1e-6);
  const CyclePoint ref = evaluate(clean(), design_inputs(clean()), clean().design_solution);
  for (Station s : kAllStations) {
    EXPECT_LT(rel(p.at(s).Tt, ref.at(s).Tt), 1e-6);
    EXPECT_LT(rel(p.at(s).Pt, ref.at(s).Pt), 1e-6);
  }
}

TEST(Cycle, ConservationAtSolution) {
  for (double n2 : {0.82, 0.9, 0.97}) {
    const CyclePoint p = off_design(clean(), 260.0, 60.0, 45.0, n2 * clean().design.n2);
    EXPECT_LT(max_residual(p), 1e-8);
    EXPECT_NEAR(p.at(Station::S8).W, p.W2() + p.WF(), 1e-9 * p.W2());
    const MassFlows mf = infer_mass_flows(p.W2(), p.W25(), p.WF(), clean().bleeds());
    for (Station s : kAllStations) EXPECT_NEAR(p.at(s).W, mf[s], 1e-9 * p.W2()) << station_number(s);
  }
}

TEST(Cycle, RaisingN2RaisesFuelAndT4) {
  const double n2 = 0.9 * clean().design.n2;
  const CyclePoint a = off_design(clean(), 270.0, 80.0, 60.0, n2);
  const CyclePoint b = off_design(clean(), 270.0, 80.0, 60.0, 1.02 * n2);
  EXPECT_GT(b.WF(), a.WF());
  EXPECT_GT(b.at(Station::S4).Tt, a.at(Station::S4).Tt);
}

TEST(Cycle, JacobianIsNonSingularAtDesign) {
  const auto J = jacobian(clean(), design_inputs(clean()), clean().design_solution);
  EXPECT_GT(std::abs(J.determinant()), 1e-12);
}

TEST(Cycle, InletFlowsRoundTrip) {
  const CyclePoint p = off_design(clean(), 250.0, 50.0, 30.0, 0.88 * clean().design.n2);
  FlightInputs in{250.0, 50.0, 30.0, std::nullopt, p.solution.n2, std::nullopt};
  const InletFlows f = solve_w2_w25(clean(), in);
  EXPECT_NEAR(f.W2, p.W2(), 1e-8 * p.W2());
  EXPECT_NEAR(f.W25, p.W25(), 1e-8 * p.W25());
  FlightInputs by_fuel{250.0, 50.0, 30.0, std::nullopt, std::nullopt, p.WF()};
  EXPECT_NEAR(solve_w2_w25(clean(), by_fuel).W2, p.W2(), 1e-6 * p.W2());
  FlightInputs none{250.0, 50.0, 30.0, std::nullopt, std::nullopt, std::nullopt};
  EXPECT_THROW(solve_w2_w25(clean(), none), ConfigError);
}

TEST(Cycle, CorrectedFlowSimilarity) {
  const double n2 = 0.93 * clean().design.n2;
  const CyclePoint a = off_design(clean(), 280.0, 45.0, 40.0, n2);
  const CyclePoint b = off_design(clean(), 280.0, 90.0, 80.0, n2);
  EXPECT_NEAR(b.W2() / a.W2(), 2.0, 0.01);
}

TEST(Cycle, DegradedEngineDiffers) {
  maps::DegradationState d;
  d.hpc = {-0.015, -0.02};
  d.lpt.eff_delta = -0.01;
  const EngineConfig deg = degrade(clean(), d);
  const double n2 = 0.95 * clean().design.n2;
  const CyclePoint a = off_design(clean(), 288.15, 101.325, 101.325, n2);
  const CyclePoint b = off_design(deg, 288.15, 101.325, 101.325, n2);
  EXPECT_NE(a.W2(), b.W2());
  EXPECT_GT(b.at(Station::S6).Tt, a.at(Station::S6).Tt);
  FlightInputs in{288.15, 101.325, 101.325, std::nullopt, n2, std::nullopt};
  EXPECT_NE(solve_w2_w25(deg, in).W2, solve_w2_w25(clean(), in).W2);
}

TEST(Cycle, DoublingFlowDoublesAreas) {
  DesignSpec s;
  s.W2 *= 2.0;
  const EngineConfig big = design_point(s);
  for (Station st : {Station::S2, Station::S13, Station::S25}) {
    EXPECT_NEAR(big.area(st) / clean().area(st), 2.0, 1e-6) << station_number(st);
  }
  // with the power offtake scaled too, the whole cycle is geometrically similar
  s.shafts.p_ext *= 2.0;
  const EngineConfig similar = design_point(s);
  for (Station st : kAllStations) {
    EXPECT_NEAR(similar.area(st) / clean().area(st), 2.0, 1e-6) << station_number(st);
  }
}

TEST(Cycle, SizingRejectsInconsistentTargets) {
  DesignSpec s;
  s.pr_hpc = -1.0;
  EXPECT_THROW(design_point(s), SizingError);
  DesignSpec leak;
  leak.bleeds.c2b = 0.01;
  EXPECT_THROW(design_point(leak), SizingError);
}

TEST(Cycle, EnvelopeCornersConverge) {
  for (double T2 : {244.0, 320.0}) {
    for (double P2 : {35.0, 110.0}) {
      for (double n2 : {0.8, 1.0}) {
        const double Pamb = std::min(P2, 22.0);
        const CyclePoint p = off_design(clean(), T2, P2, Pamb, n2 * clean().design.n2);
        EXPECT_LT(max_residual(p), 1e-8);
      }
    }
  }
}

TEST(Cycle, ConfigTextRoundTrip) {
  const std::string text = to_text(clean());
  const EngineConfig back = config_from_text(text);
  EXPECT_EQ(to_text(back), text);
  EXPECT_EQ(back.areas, clean().areas);
  const CyclePoint a = off_design(clean(), 260.0, 70.0, 50.0, 0.9);
  const CyclePoint b = off_design(back, 260.0, 70.0, 50.0, 0.9);
  EXPECT_EQ(a.W2(), b.W2());
  EXPECT_THROW(config_from_text("format something-else\n"), FormatError);
}

TEST(Cycle, DesignSpecFileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "gtnet_test_spec.txt";
  DesignSpec s;
  s.W2 = 95.5;
  s.T4 = 1600.0;
  s.bleeds.hpt_cl = 0.05;
  save_design_spec(path, s);
  const DesignSpec back = load_design_spec(path);
  EXPECT_EQ(back.W2, 95.5);
  EXPECT_EQ(back.T4, 1600.0);
  EXPECT_EQ(back.bleeds.hpt_cl, 0.05);
  write_text_file(path, "format gtnet-design-spec\nversion 1\ndesign.W2 80\n");
  EXPECT_EQ(load_design_spec(path).W2, 80.0);
  EXPECT_EQ(load_design_spec(path).T4, DesignSpec{}.T4);
  write_text_file(path, "format gtnet-design-spec\nversion 1\ndesign.unknown 1\n");
  EXPECT_THROW(load_design_spec(path), FormatError);
  std::filesystem::remove(path);
}
