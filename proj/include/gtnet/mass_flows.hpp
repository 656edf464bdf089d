#pragma once

#include <array>
#include <optional>
#include <string>

namespace gtnet {

// Gas-path stations of the two-spool mixed turbofan.
enum class Station : int {
  S2 = 0,
  S13,
  S16,
  S25,
  S3,
  S4,
  S41,
  S43,
  S44,
  S45,
  S5,
  S6,
  S64,
  S8,
};
inline constexpr std::size_t kStationCount = 14;
inline constexpr std::array<Station, kStationCount> kAllStations = {
    Station::S2,  Station::S13, Station::S16, Station::S25, Station::S3,  Station::S4,  Station::S41,
    Station::S43, Station::S44, Station::S45, Station::S5,  Station::S6,  Station::S64, Station::S8};

constexpr std::size_t idx(Station s) { return static_cast<std::size_t>(s); }
int station_number(Station s);
std::optional<Station> station_from_number(int number);

// Cooling and leakage flows, all fractions of W25.
struct Bleeds {
  double hpt_cl = 0.04;   // HPT rotor cooling
  double lngv_cl = 0.03;  // LPT nozzle guide vane cooling
  double hngv_cl = 0.06;  // HPT nozzle guide vane cooling
  double c2b = 0.0;       // core-to-bypass leakage

  // Throws ConfigError on negative fractions or a total >= 0.2.
  void validate() const;
};

struct MassFlows {
  std::array<double, kStationCount> w{};
  double operator[](Station s) const { return w[idx(s)]; }
};

// Station mass flows from the two inlet flows and fuel flow:
//   W3  = W25 (1 - LNGV) + WF          W45 = W44 + W25 LNGV
//   W4  = W25 (1 - HPT - LNGV - HNGV) + WF
//   W41 = W4 + W25 HNGV,  W43 = W41    W5 = W45, W6 = W5
//   W44 = W4 + W25 (HNGV + HPT)        W13 = W2 - W25
//   W16 = W13 + c2b W25                W64 = W2 + WF, W8 = W64
// plus W2 and W25 themselves. Throws ConfigError if any flow is not positive.
MassFlows infer_mass_flows(double W2, double W25, double WF, const Bleeds& bleeds);

// W_s = w2 * W2 + w25 * W25 + wf * WF
struct FlowCoefficients {
  double w2 = 0.0;
  double w25 = 0.0;
  double wf = 0.0;
};
FlowCoefficients flow_coefficients(Station s, const Bleeds& bleeds);

// Stations carrying combustion products. Upstream stations (including the
// compressor delivery 3, whose bookkeeping flow counts WF) are fuel-free.
bool carries_fuel(Station s);

// Fuel-air ratio WF / (W - WF) for stations downstream of the burner, 0 else.
double station_far(Station s, double W, double WF);

}  // namespace gtnet
