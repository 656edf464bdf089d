#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gtnet/cycle.hpp"
#include "gtnet/datasets.hpp"

namespace gtnet::data {

// Operating-condition waypoints; inputs are interpolated linearly in time.
struct Waypoint {
  double t = 0.0;  // [s]
  double T2 = 0.0;
  double P2 = 0.0;
  double Pamb = 0.0;
  double N2 = 0.0;  // fraction of design N2
};

struct MissionProfile {
  double sample_rate = 1.0;  // [Hz]
  std::vector<Waypoint> waypoints;

  double duration() const { return waypoints.empty() ? 0.0 : waypoints.back().t; }
  Waypoint at(double t) const;
  void validate() const;

  // Alternating slow-drift holds and faster transitions drawn uniformly from
  // the envelope. Holds last hold_min..hold_max seconds.
  static MissionProfile synthetic(double duration, const Envelope& env, std::uint64_t seed,
                                  double hold_min = 40.0, double hold_max = 120.0);
};

// Key-value header plus a waypoint table:
//   format gtnet-mission
//   version 1
//   sample_rate 1
//   waypoints N
//   t T2 P2 Pamb N2     (N rows)
void save_mission(const std::filesystem::path& path, const MissionProfile& m);
MissionProfile load_mission(const std::filesystem::path& path);

// Zero-mean Gaussian relative noise std per recorded channel.
struct NoiseConfig {
  double T6 = 0.003;
  double N1 = 0.002;
  double N2 = 0.002;
  double WF = 0.0;
  double T2 = 0.0;
  double P2 = 0.0;
  double Pamb = 0.0;
};
void save_noise(const std::filesystem::path& path, const NoiseConfig& n);
NoiseConfig load_noise(const std::filesystem::path& path);

void save_degradation(const std::filesystem::path& path, const maps::DegradationState& d);
maps::DegradationState load_degradation(const std::filesystem::path& path);
// HPC eff -2 %, flow -1.5 %; LPT eff -1 %.
maps::DegradationState default_degradation();

// Recorded channels and their noise-free values.
inline const std::vector<std::string>& flight_channels() {
  static const std::vector<std::string> c = {"t",  "T2", "P2", "Pamb", "N1", "N2", "WF",
                                             "T6", "T6_true", "N1_true", "N2_true", "W2_true", "W25_true"};
  return c;
}

struct FlightSeries {
  // rows follow flight_channels(), one column per sample
  nn::Matrix records;
  double sample_rate = 1.0;

  std::size_t size() const { return static_cast<std::size_t>(records.cols()); }
  Eigen::Index row(const std::string& channel) const;
};

struct FlightReport {
  std::size_t samples = 0;
  std::vector<std::size_t> failed_time_indices;
};

// Solves the (degraded) cycle at every sample time and adds noise to the
// recorded channels. Failed solves are skipped and reported. Samples are
// solved independently, so jobs does not change the result.
FlightSeries gen_flight_series(const cycle::EngineConfig& cfg_degraded, const MissionProfile& mission,
                               const NoiseConfig& noise, std::uint64_t seed, FlightReport* report = nullptr,
                               int jobs = 1);

// Greedy scan for non-overlapping windows of `window` samples whose N1 range
// relative to the window mean is below amplitude. Each emits the window
// means of all channels (rows as in flight_channels()).
nn::Matrix extract_quasi_steady(const FlightSeries& series, int window = 3, double amplitude = 0.01);

struct AttachReport {
  std::size_t attached = 0;
  std::vector<std::size_t> dropped;  // column indices of the input matrix
};

// Flight dataset from quasi-steady points: inputs (W2, W25 from the clean
// model with N2 control; Ma2 unknown, stored as NaN), target T6, meta columns
// T6_true, T6_ref (clean-model T6), W2_true, W25_true, t.
Dataset attach_w2_w25(const nn::Matrix& quasi_steady, const cycle::EngineConfig& cfg_clean,
                      AttachReport* report = nullptr, int jobs = 1);

// Earlier samples (by column order) form the training split; round(ratio n)
// of them.
SplitDataset split_chronological(const Dataset& d, double ratio);

struct FdSettings {
  MissionProfile mission;
  NoiseConfig noise;
  maps::DegradationState degradation = default_degradation();
  std::uint64_t seed = 1;
  double train_ratio = 20000.0 / 26970.0;
  int window = 3;
  double amplitude = 0.01;
};

struct FdResult {
  SplitDataset split;
  FlightSeries series;
  FlightReport series_report;
  AttachReport attach_report;
  std::size_t quasi_steady = 0;
};

// Degraded series, quasi-steady extraction, flows from the clean model,
// chronological split.
FdResult gen_fd(const cycle::EngineConfig& cfg_clean, const FdSettings& s, int jobs = 1);

}  // namespace gtnet::data
