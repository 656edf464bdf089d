#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "gtnet/errors.hpp"
#include "gtnet/flight_data.hpp"

using namespace gtnet;
using namespace gtnet::data;

namespace fs = std::filesystem;

namespace {

const cycle::EngineConfig& clean() {
  static const cycle::EngineConfig cfg = cycle::design_point(cycle::DesignSpec{});
  return cfg;
}

MissionProfile constant_mission(double duration, double n2 = 0.92) {
  MissionProfile m;
  m.waypoints = {{0.0, 280.0, 80.0, 60.0, n2}, {duration, 280.0, 80.0, 60.0, n2}};
  return m;
}

NoiseConfig silent() {
  NoiseConfig n;
  n.T6 = n.N1 = n.N2 = 0.0;
  return n;
}

// Series with only t and N1 filled in.
FlightSeries n1_series(const std::vector<double>& n1) {
  FlightSeries s;
  s.records = nn::Matrix::Ones(static_cast<Eigen::Index>(flight_channels().size()), static_cast<Eigen::Index>(n1.size()));
  for (std::size_t k = 0; k < n1.size(); ++k) {
    s.records(s.row("t"), static_cast<Eigen::Index>(k)) = static_cast<double>(k);
    s.records(s.row("N1"), static_cast<Eigen::Index>(k)) = n1[k];
  }
  return s;
}

}  // namespace

TEST(Mission, InterpolatesLinearly) {
  MissionProfile m;
  m.waypoints = {{0.0, 250.0, 50.0, 40.0, 0.8}, {10.0, 300.0, 100.0, 80.0, 1.0}};
  const Waypoint w = m.at(2.5);
  EXPECT_DOUBLE_EQ(w.T2, 262.5);
  EXPECT_DOUBLE_EQ(w.N2, 0.85);
  EXPECT_EQ(m.duration(), 10.0);
  m.waypoints[1].t = 0.0;
  EXPECT_THROW(m.validate(), ConfigError);
}

TEST(Mission, SyntheticStaysInEnvelope) {
  const Envelope env;
  const MissionProfile m = MissionProfile::synthetic(2000.0, env, 3);
  EXPECT_NO_THROW(m.validate());
  EXPECT_GE(m.duration(), 2000.0);
  for (const Waypoint& w : m.waypoints) {
    EXPECT_GE(w.T2, env.T2_min);
    EXPECT_LE(w.T2, env.T2_max);
    EXPECT_LE(w.Pamb, w.P2);
    EXPECT_GE(w.N2, env.N2_min);
    EXPECT_LE(w.N2, env.N2_max);
  }
  EXPECT_EQ(MissionProfile::synthetic(2000.0, env, 3).waypoints.size(), m.waypoints.size());
}

TEST(FlightSeries, NoiselessConstantFlight) {
  FlightReport rep;
  const FlightSeries s = gen_flight_series(clean(), constant_mission(20.0), silent(), 1, &rep);
  EXPECT_EQ(s.size(), 21u);
  EXPECT_EQ(rep.failed_time_indices.size(), 0u);
  EXPECT_EQ(s.records.row(s.row("T6")), s.records.row(s.row("T6_true")));
  EXPECT_EQ(s.records.row(s.row("N1")), s.records.row(s.row("N1_true")));
  const auto p = cycle::off_design(clean(), 280.0, 80.0, 60.0, 0.92 * clean().design.n2);
  EXPECT_NEAR(s.records(s.row("T6"), 7), p.at(Station::S6).Tt, 1e-6 * p.at(Station::S6).Tt);
  EXPECT_NEAR(s.records(s.row("W2_true"), 7), p.W2(), 1e-6 * p.W2());
  EXPECT_THROW(s.row("T7"), ConfigError);
}

TEST(FlightSeries, T6NoiseLevel) {
  NoiseConfig n = silent();
  n.T6 = 0.003;
  const FlightSeries s = gen_flight_series(clean(), constant_mission(10500.0), n, 17);
  ASSERT_GT(s.size(), 10000u);
  const Eigen::ArrayXd rel =
      (s.records.row(s.row("T6")).array() - s.records.row(s.row("T6_true")).array()) /
      s.records.row(s.row("T6_true")).array();
  const double mean = rel.mean();
  const double sd = std::sqrt((rel - mean).square().sum() / static_cast<double>(rel.size() - 1));
  EXPECT_NEAR(sd, 0.003, 0.1 * 0.003);
  EXPECT_NEAR(mean, 0.0, 0.0003);
}

TEST(FlightSeries, DegradedEngineShiftsExhaust) {
  const auto mission = constant_mission(2.0);
  const FlightSeries a = gen_flight_series(clean(), mission, silent(), 1);
  const FlightSeries b = gen_flight_series(cycle::degrade(clean(), default_degradation()), mission, silent(), 1);
  EXPECT_GT(b.records(b.row("T6"), 0), a.records(a.row("T6"), 0));
}

TEST(QuasiSteady, ConstantInputGivesEveryWindow) {
  const FlightSeries s = n1_series(std::vector<double>(30, 5000.0));
  const nn::Matrix q = extract_quasi_steady(s, 3, 0.01);
  EXPECT_EQ(q.cols(), 10);
  EXPECT_EQ(extract_quasi_steady(s, 4, 0.01).cols(), 7);
}

TEST(QuasiSteady, RampGivesNone) {
  std::vector<double> n1(40);
  for (std::size_t k = 0; k < n1.size(); ++k) n1[k] = 5000.0 * std::pow(1.02, static_cast<double>(k));
  EXPECT_EQ(extract_quasi_steady(n1_series(n1), 3, 0.01).cols(), 0);
}

TEST(QuasiSteady, RecoversHolds) {
  std::vector<double> n1;
  for (int k = 0; k < 6; ++k) n1.push_back(5000.0);
  for (int k = 1; k <= 5; ++k) n1.push_back(5000.0 * (1.0 + 0.03 * k));
  for (int k = 0; k < 9; ++k) n1.push_back(5750.0);
  const nn::Matrix q = extract_quasi_steady(n1_series(n1), 3, 0.01);
  ASSERT_EQ(q.cols(), 5);
  const Eigen::Index r = n1_series({1.0}).row("N1");
  EXPECT_EQ(q(r, 0), 5000.0);
  EXPECT_EQ(q(r, 1), 5000.0);
  for (int j = 2; j < 5; ++j) EXPECT_EQ(q(r, j), 5750.0);
  EXPECT_EQ(q(0, 2), 11.0);  // the last ramp sample already sits on the hold value
  EXPECT_THROW(extract_quasi_steady(n1_series(n1), 0, 0.01), ConfigError);
}

TEST(QuasiSteady, GapsBreakWindows) {
  FlightSeries s = n1_series(std::vector<double>(9, 5000.0));
  s.records(s.row("t"), 4) = 40.0;
  for (Eigen::Index k = 5; k < 9; ++k) s.records(s.row("t"), k) = 36.0 + static_cast<double>(k);
  EXPECT_EQ(extract_quasi_steady(s, 3, 0.01).cols(), 2);
}

TEST(Attach, CleanEngineRecoversTrueFlows) {
  MissionProfile m;
  m.waypoints = {{0.0, 260.0, 60.0, 40.0, 0.85}, {20.0, 300.0, 95.0, 70.0, 0.97}};
  const FlightSeries s = gen_flight_series(clean(), m, silent(), 2);
  const nn::Matrix q = extract_quasi_steady(s, 1, 0.01);
  AttachReport rep;
  const Dataset d = attach_w2_w25(q, clean(), &rep);
  EXPECT_EQ(rep.attached, 21u);
  EXPECT_EQ(d.tag, "fd");
  for (Eigen::Index j = 0; j < d.x.cols(); ++j) {
    EXPECT_NEAR(d.x(hybrid::kW2, j), d.meta(d.meta_row("W2_true"), j), 1e-6 * d.x(hybrid::kW2, j));
    EXPECT_NEAR(d.x(hybrid::kW25, j), d.meta(d.meta_row("W25_true"), j), 1e-6 * d.x(hybrid::kW25, j));
    EXPECT_NEAR(d.meta(d.meta_row("T6_ref"), j), d.y(0, j), 1e-6 * d.y(0, j));
    EXPECT_TRUE(std::isnan(d.x(hybrid::kMa2, j)));
  }
}

TEST(Attach, DegradedEngineBiasesCleanModel) {
  const FlightSeries s =
      gen_flight_series(cycle::degrade(clean(), default_degradation()), constant_mission(5.0), silent(), 2);
  const Dataset d = attach_w2_w25(extract_quasi_steady(s, 3, 0.01), clean());
  ASSERT_EQ(d.size(), 2u);
  EXPECT_GT(std::abs(d.x(hybrid::kW2, 0) / d.meta(d.meta_row("W2_true"), 0) - 1.0), 1e-4);
  EXPECT_GT(d.y(0, 0), d.meta(d.meta_row("T6_ref"), 0));
}

TEST(Attach, ChronologicalSplit) {
  Dataset d;
  d.x = nn::Matrix::Zero(9, 10);
  d.y = nn::Matrix::Zero(1, 10);
  d.meta = nn::Matrix::Zero(1, 10);
  d.meta_names = {"t"};
  for (int j = 0; j < 10; ++j) d.meta(0, j) = j;
  const SplitDataset s = split_chronological(d, 0.7);
  ASSERT_EQ(s.train.size(), 7u);
  EXPECT_EQ(s.train.meta(0, 6), 6.0);
  EXPECT_EQ(s.test.meta(0, 0), 7.0);
  EXPECT_THROW(split_chronological(d, -0.1), ConfigError);
}

TEST(FlightIo, RoundTrips) {
  const fs::path dir = fs::temp_directory_path() / "gtnet_flight_io";
  fs::create_directories(dir);
  const MissionProfile m = MissionProfile::synthetic(600.0, Envelope{}, 4);
  save_mission(dir / "mission.txt", m);
  const MissionProfile mb = load_mission(dir / "mission.txt");
  ASSERT_EQ(mb.waypoints.size(), m.waypoints.size());
  EXPECT_EQ(mb.waypoints[3].P2, m.waypoints[3].P2);
  EXPECT_EQ(mb.sample_rate, m.sample_rate);

  NoiseConfig n;
  n.WF = 0.001;
  save_noise(dir / "noise.txt", n);
  EXPECT_EQ(load_noise(dir / "noise.txt").WF, 0.001);
  EXPECT_EQ(load_noise(dir / "noise.txt").T6, 0.003);

  save_degradation(dir / "deg.txt", default_degradation());
  const maps::DegradationState d = load_degradation(dir / "deg.txt");
  EXPECT_EQ(d.hpc.eff_delta, -0.02);
  EXPECT_EQ(d.hpc.flow_delta, -0.015);
  EXPECT_EQ(d.lpt.eff_delta, -0.01);
  EXPECT_THROW(load_mission(dir / "noise.txt"), FormatError);
  fs::remove_all(dir);
}

TEST(FdPipeline, SmallRun) {
  FdSettings s;
  s.mission = MissionProfile::synthetic(300.0, Envelope{}, 6);
  s.seed = 3;
  s.train_ratio = 0.5;
  const FdResult r = gen_fd(clean(), s);
  EXPECT_GT(r.quasi_steady, 10u);
  EXPECT_EQ(r.split.train.size() + r.split.test.size(), r.attach_report.attached);
  EXPECT_EQ(r.attach_report.attached + r.attach_report.dropped.size(), r.quasi_steady);
  const FdResult again = gen_fd(clean(), s);
  EXPECT_EQ(again.split.train.y, r.split.train.y);
}
