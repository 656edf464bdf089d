#include "gtnet/mass_flows.hpp"

#include <sstream>

#include "gtnet/errors.hpp"

namespace gtnet {

namespace {
constexpr std::array<int, kStationCount> kNumbers = {2, 13, 16, 25, 3, 4, 41, 43, 44, 45, 5, 6, 64, 8};
}

int station_number(Station s) { return kNumbers[idx(s)]; }

std::optional<Station> station_from_number(int number) {
  for (Station s : kAllStations) {
    if (station_number(s) == number) return s;
  }
  return std::nullopt;
}

void Bleeds::validate() const {
  for (double f : {hpt_cl, lngv_cl, hngv_cl, c2b}) {
    if (!(f >= 0.0)) throw ConfigError("bleed fractions must be non-negative");
  }
  if (!(hpt_cl + lngv_cl + hngv_cl + c2b < 0.2)) {
    throw ConfigError("bleed fractions must sum to less than 0.2");
  }
}

FlowCoefficients flow_coefficients(Station s, const Bleeds& b) {
  const double core = 1.0 - b.hpt_cl - b.lngv_cl - b.hngv_cl;
  switch (s) {
    case Station::S2: return {1.0, 0.0, 0.0};
    case Station::S25: return {0.0, 1.0, 0.0};
    case Station::S13: return {1.0, -1.0, 0.0};
    case Station::S16: return {1.0, -1.0 + b.c2b, 0.0};
    case Station::S3: return {0.0, 1.0 - b.lngv_cl, 1.0};
    case Station::S4: return {0.0, core, 1.0};
    case Station::S41:
    case Station::S43: return {0.0, core + b.hngv_cl, 1.0};
    case Station::S44: return {0.0, core + b.hngv_cl + b.hpt_cl, 1.0};
    case Station::S45:
    case Station::S5:
    case Station::S6: return {0.0, core + b.hngv_cl + b.hpt_cl + b.lngv_cl, 1.0};
    case Station::S64:
    case Station::S8: return {1.0, 0.0, 1.0};
  }
  return {};
}

MassFlows infer_mass_flows(double W2, double W25, double WF, const Bleeds& bleeds) {
  // Evaluated line by line (not via flow_coefficients) so the two stay an
  // independent pair.
  bleeds.validate();
  MassFlows m;
  auto set = [&m](Station s, double v) { m.w[idx(s)] = v; };
  set(Station::S2, W2);
  set(Station::S25, W25);
  set(Station::S3, W25 * (1.0 - bleeds.lngv_cl) + WF);
  const double W4 = W25 * (1.0 - bleeds.hpt_cl - bleeds.lngv_cl - bleeds.hngv_cl) + WF;
  set(Station::S4, W4);
  set(Station::S41, W4 + W25 * bleeds.hngv_cl);
  set(Station::S43, m[Station::S41]);
  const double W44 = W4 + W25 * (bleeds.hngv_cl + bleeds.hpt_cl);
  set(Station::S44, W44);
  set(Station::S45, W44 + W25 * bleeds.lngv_cl);
  set(Station::S5, m[Station::S45]);
  set(Station::S6, m[Station::S5]);
  const double W13 = W2 - W25;
  set(Station::S13, W13);
  set(Station::S16, W13 + bleeds.c2b * W25);
  set(Station::S64, W2 + WF);
  set(Station::S8, m[Station::S64]);
  for (Station s : kAllStations) {
    if (!(m[s] > 0.0)) {
      std::ostringstream os;
      os << "non-positive mass flow " << m[s] << " kg/s at station " << station_number(s)
         << " (W2=" << W2 << ", W25=" << W25 << ", WF=" << WF << ")";
      throw ConfigError(os.str());
    }
  }
  return m;
}

bool carries_fuel(Station s) {
  switch (s) {
    case Station::S4:
    case Station::S41:
    case Station::S43:
    case Station::S44:
    case Station::S45:
    case Station::S5:
    case Station::S6:
    case Station::S64:
    case Station::S8: return true;
    default: return false;
  }
}

double station_far(Station s, double W, double WF) { return carries_fuel(s) ? WF / (W - WF) : 0.0; }

}  // namespace gtnet
