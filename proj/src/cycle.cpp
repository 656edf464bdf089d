#include "gtnet/cycle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "gtnet/errors.hpp"

namespace gtnet::cycle {

namespace thermo = gtnet::thermo;

namespace {

constexpr std::size_t kFull = 8;
using Full = std::array<double, kFull>;

Full to_full(const Unknowns& u) {
  return {u.n1, u.n2, u.wf, u.beta_lpc, u.beta_hpc, u.pr_hpt, u.pr_lpt, u.bpr};
}

Unknowns from_full(const Full& f) { return {f[0], f[1], f[2], f[3], f[4], f[5], f[6], f[7]}; }

std::size_t control_index(Control c) {
  switch (c) {
    case Control::N1: return 0;
    case Control::N2: return 1;
    case Control::WF: return 2;
  }
  return 1;
}

Full scales(const EngineConfig& cfg) {
  const Unknowns& d = cfg.design_solution;
  return {d.n1, d.n2, d.wf, 1.0, 1.0, d.pr_hpt, d.pr_lpt, d.bpr};
}

// Free (scaled) unknowns <-> full vector.
struct Layout {
  std::array<std::size_t, 7> free{};
  Full scale{};

  Layout(const EngineConfig& cfg, const OperatingInputs& in) : scale(scales(cfg)) {
    const std::size_t ci = control_index(in.control);
    std::size_t k = 0;
    for (std::size_t i = 0; i < kFull; ++i) {
      if (i != ci) free[k++] = i;
    }
  }

  Eigen::Matrix<double, 7, 1> pack(const Unknowns& u) const {
    const Full f = to_full(u);
    Eigen::Matrix<double, 7, 1> z;
    for (std::size_t k = 0; k < 7; ++k) z[k] = f[free[k]] / scale[free[k]];
    return z;
  }

  Unknowns unpack(const Eigen::Matrix<double, 7, 1>& z, const OperatingInputs& in) const {
    Full f{};
    f[control_index(in.control)] = in.control_value;
    for (std::size_t k = 0; k < 7; ++k) f[free[k]] = z[k] * scale[free[k]];
    return from_full(f);
  }
};

double compress(double T_in, double pr, double eff, double R) {
  const double h_in = thermo::enthalpy(T_in, 0.0);
  const double T_is = thermo::isentropic_temperature(T_in, 0.0, pr, R);
  const double h_out = h_in + (thermo::enthalpy(T_is, 0.0) - h_in) / eff;
  return thermo::temperature_from_enthalpy(h_out, 0.0);
}

double expand(double T_in, double far, double pr, double eff, double R) {
  const double h_in = thermo::enthalpy(T_in, far);
  const double T_is = thermo::isentropic_temperature(T_in, far, 1.0 / pr, R);
  const double h_out = h_in - eff * (h_in - thermo::enthalpy(T_is, far));
  return thermo::temperature_from_enthalpy(h_out, far);
}

double mixed_temperature(std::initializer_list<std::pair<double, double>> flows_and_h, double W, double far) {
  double H = 0.0;
  for (const auto& [w, h] : flows_and_h) H += w * h;
  return thermo::temperature_from_enthalpy(H / W, far);
}

double corrected_flow(double W, double T, double P) {
  return W * std::sqrt(T / thermo::kTref) / (P / thermo::kPref);
}

// Subsonic Mach number M with (1 + g M^2) / (M sqrt(1 + k M^2)) = target.
double mixer_mach(double target, double gamma) {
  const double k = 0.5 * (gamma - 1.0);
  auto phi = [&](double M) { return (1.0 + gamma * M * M) / (M * std::sqrt(1.0 + k * M * M)); };
  if (!(target > phi(1.0))) throw InfeasibleFlowError("mixer exit choked");
  double lo = 1e-8;
  double hi = 1.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (phi(mid) > target) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

double nozzle_mach(double P8, double Pamb, double gamma) {
  const double npr = P8 / Pamb;
  if (npr >= thermo::total_to_static_pressure_ratio(1.0, gamma)) return 1.0;
  if (npr <= 1.0) return 0.0;
  return thermo::mach_from_pressure_ratio(npr, gamma);
}

double residual_norm(const Residuals& r) {
  double m = 0.0;
  for (double v : r) m = std::max(m, std::abs(v));
  return std::isfinite(m) ? m : INFINITY;
}

std::string describe(const OperatingInputs& in) {
  std::ostringstream os;
  os << "T2=" << in.T2 << " P2=" << in.P2 << " Pamb=" << in.Pamb << " control=" << in.control_value;
  return os.str();
}

}  // namespace

void EngineConfig::validate() const {
  design.bleeds.validate();
  const ShaftConfig& sh = design.shafts;
  if (!(sh.eta_h > 0.9 && sh.eta_h <= 1.0) || !(sh.eta_l > 0.9 && sh.eta_l <= 1.0)) {
    throw ConfigError("mechanical efficiencies must lie in (0.9, 1]");
  }
  if (!(sh.p_ext >= 0.0)) throw ConfigError("power extraction must be non-negative");
  for (Station s : kAllStations) {
    if (!(areas[idx(s)] > 0.0)) {
      throw ConfigError("area of station " + std::to_string(station_number(s)) + " must be positive");
    }
  }
  if (design.bleeds.c2b != 0.0) {
    throw ConfigError("the matched cycle requires c2b = 0 (the bookkeeping W64 = W2 + WF drops the leakage)");
  }
}

CyclePoint evaluate(const EngineConfig& cfg, const OperatingInputs& in, const Unknowns& u) {
  const DesignSpec& d = cfg.design;
  const thermo::GasModel& gas = d.gas;
  const double R = gas.R;
  const Bleeds& b = d.bleeds;
  const LossConfig& loss = d.losses;

  CyclePoint p;
  p.inputs = in;
  p.solution = u;
  auto st = [&p](Station s) -> StationState& { return p.stations[idx(s)]; };

  if (!(u.bpr > 0.0) || !(u.wf > 0.0) || !(u.pr_hpt > 1.0) || !(u.pr_lpt > 1.0) || !(u.n1 > 0.0) ||
      !(u.n2 > 0.0)) {
    throw DomainError("matching unknowns out of range");
  }

  // LPC
  const double T2 = in.T2;
  const double P2 = in.P2;
  const double n_lpc = (u.n1 / d.n1) / std::sqrt(T2 / cfg.T2_ref);
  const maps::CompressorPoint lpc = maps::interp_compressor(cfg.maps.lpc, n_lpc, u.beta_lpc);
  const double W2 = lpc.wc * (P2 / thermo::kPref) / std::sqrt(T2 / thermo::kTref);
  const double T25 = compress(T2, lpc.pr, lpc.eff, R);
  const double P25 = P2 * lpc.pr;
  const double W25 = W2 / (1.0 + u.bpr);
  const double WF = u.wf;
  const MassFlows mf = infer_mass_flows(W2, W25, WF, b);

  // HPC
  const double n_hpc = (u.n2 / d.n2) / std::sqrt(T25 / cfg.T25_ref);
  const maps::CompressorPoint hpc = maps::interp_compressor(cfg.maps.hpc, n_hpc, u.beta_hpc);
  const double T3 = compress(T25, hpc.pr, hpc.eff, R);
  const double P3 = P25 * hpc.pr;
  const double h3 = thermo::enthalpy(T3, 0.0);

  // Burner
  const double W_air = W25 * (1.0 - b.hpt_cl - b.lngv_cl - b.hngv_cl);
  const double W4 = mf[Station::S4];
  const double far4 = station_far(Station::S4, W4, WF);
  if (!(far4 < thermo::kFarMax)) throw DomainError("fuel-air ratio above the property range");
  const double h4 = (W_air * h3 + loss.burner_eff * WF * loss.fuel_lhv) / W4;
  const double T4 = thermo::temperature_from_enthalpy(h4, far4);
  const double P4 = P3 * (1.0 - loss.burner_dp);

  // HPT with vane cooling mixed in ahead of the rotor, rotor cooling after it
  const double W41 = mf[Station::S41];
  const double far41 = station_far(Station::S41, W41, WF);
  const double T41 = mixed_temperature({{W4, h4}, {b.hngv_cl * W25, h3}}, W41, far41);
  const double h41 = thermo::enthalpy(T41, far41);
  const double n_hpt = (u.n2 / d.n2) / std::sqrt(T41 / cfg.T41_ref);
  const maps::TurbinePoint hpt = maps::interp_turbine(cfg.maps.hpt, n_hpt, u.pr_hpt);
  const double T43 = expand(T41, far41, u.pr_hpt, hpt.eff, R);
  const double h43 = thermo::enthalpy(T43, far41);
  const double P43 = P4 / u.pr_hpt;

  const double W44 = mf[Station::S44];
  const double far44 = station_far(Station::S44, W44, WF);
  const double T44 = mixed_temperature({{W41, h43}, {b.hpt_cl * W25, h3}}, W44, far44);
  const double h44 = thermo::enthalpy(T44, far44);

  const double W45 = mf[Station::S45];
  const double far45 = station_far(Station::S45, W45, WF);
  const double T45 = mixed_temperature({{W44, h44}, {b.lngv_cl * W25, h3}}, W45, far45);
  const double h45 = thermo::enthalpy(T45, far45);

  // LPT
  const double n_lpt = (u.n1 / d.n1) / std::sqrt(T45 / cfg.T45_ref);
  const maps::TurbinePoint lpt = maps::interp_turbine(cfg.maps.lpt, n_lpt, u.pr_lpt);
  const double T5 = expand(T45, far45, u.pr_lpt, lpt.eff, R);
  const double h5 = thermo::enthalpy(T5, far45);
  const double P5 = P43 / u.pr_lpt;
  const double P6 = P5 * (1.0 - loss.lpt_exit_dp);

  // Bypass
  const double P16 = P25 * (1.0 - loss.bypass_dp);

  st(Station::S2) = {T2, P2, 0.0, W2, 0.0};
  st(Station::S25) = {T25, P25, 0.0, W25, 0.0};
  st(Station::S13) = {T25, P25, 0.0, mf[Station::S13], 0.0};
  st(Station::S16) = {T25, P16, 0.0, mf[Station::S16], 0.0};
  st(Station::S3) = {T3, P3, 0.0, mf[Station::S3], 0.0};
  st(Station::S4) = {T4, P4, 0.0, W4, far4};
  st(Station::S41) = {T41, P4, 0.0, W41, far41};
  st(Station::S43) = {T43, P43, 0.0, mf[Station::S43], far41};
  st(Station::S44) = {T44, P43, 0.0, W44, far44};
  st(Station::S45) = {T45, P43, 0.0, W45, far45};
  st(Station::S5) = {T5, P5, 0.0, mf[Station::S5], far45};
  st(Station::S6) = {T5, P6, 0.0, mf[Station::S6], far45};

  for (Station s : {Station::S2, Station::S25, Station::S13, Station::S16, Station::S3, Station::S4, Station::S41,
                    Station::S43, Station::S44, Station::S45, Station::S5, Station::S6}) {
    StationState& x = st(s);
    x.Ma = thermo::mach_from_flow(x.W, x.Tt, x.Pt, cfg.area(s), gas, x.far);
  }

  // Mixer: static-pressure balance at entry, energy and momentum to exit.
  const StationState& s6 = st(Station::S6);
  const StationState& s16 = st(Station::S16);
  const double g6 = gas.gamma(s6.Tt, s6.far);
  const double g16 = gas.gamma(s16.Tt, s16.far);
  const double Ps6 = s6.Pt / thermo::total_to_static_pressure_ratio(s6.Ma, g6);
  const double Ps16 = s16.Pt / thermo::total_to_static_pressure_ratio(s16.Ma, g16);
  const double W64 = mf[Station::S64];
  const double far64 = station_far(Station::S64, W64, WF);
  const double T64 = mixed_temperature({{s6.W, h5}, {s16.W, thermo::enthalpy(s16.Tt, 0.0)}}, W64, far64);
  const double g64 = gas.gamma(T64, far64);
  const double impulse = 1000.0 * (Ps6 * cfg.area(Station::S6) * (1.0 + g6 * s6.Ma * s6.Ma) +
                                   Ps16 * cfg.area(Station::S16) * (1.0 + g16 * s16.Ma * s16.Ma));
  const double Ma64 = mixer_mach(impulse / (W64 * std::sqrt(R * T64 / g64)), g64);
  const double P64 = W64 / thermo::mass_flow_Q(T64, 1.0, Ma64, cfg.area(Station::S64), gas, far64);
  st(Station::S64) = {T64, P64, Ma64, W64, far64};

  // Convergent nozzle
  const double Ma8 = nozzle_mach(P64, in.Pamb, g64);
  const double W8 = mf[Station::S8];
  st(Station::S8) = {T64, P64, Ma8, W8, far64};
  const double Q8 = thermo::mass_flow_Q(T64, P64, Ma8, cfg.area(Station::S8), gas, far64);

  // Shaft work
  ShaftWork& w = p.work;
  w.lpc = W2 * (thermo::enthalpy(T25, 0.0) - thermo::enthalpy(T2, 0.0));
  w.hpc = W25 * (h3 - thermo::enthalpy(T25, 0.0)) + WF * h3;
  w.hpt = W41 * (h41 - h43);
  w.lpt = W45 * (h45 - h5);

  const ShaftConfig& sh = d.shafts;
  Residuals& r = p.residuals;
  r[0] = (corrected_flow(W25, T25, P25) - hpc.wc) / hpc.wc;
  r[1] = (corrected_flow(W41, T41, P4) - hpt.wc) / hpt.wc;
  r[2] = (corrected_flow(W45, T45, P43) - lpt.wc) / lpt.wc;
  r[3] = (Ps16 - Ps6) / s6.Pt;
  r[4] = (W8 - Q8) / W8;
  r[5] = (sh.eta_h * w.hpt - w.hpc - sh.p_ext) / w.hpt;
  r[6] = (sh.eta_l * w.lpt - w.lpc) / w.lpt;
  return p;
}

EngineConfig design_point(const DesignSpec& spec, const maps::MapSet& base_maps) {
  auto require = [](bool ok, const std::string& relation) {
    if (!ok) throw SizingError("inconsistent design targets: " + relation);
  };
  require(spec.T2 >= thermo::kTmin && spec.T2 <= thermo::kTmax, "T2 inside the property range");
  require(spec.P2 > 0.0 && spec.Pamb > 0.0, "P2 > 0 and Pamb > 0");
  require(spec.W2 > 0.0, "W2 > 0");
  require(spec.bpr > 0.0, "bypass ratio > 0");
  require(spec.pr_lpc > 1.0, "LPC PR > 1");
  require(spec.pr_hpc > 1.0, "HPC PR > 1");
  for (double e : {spec.eff_lpc, spec.eff_hpc, spec.eff_hpt, spec.eff_lpt}) {
    require(e > 0.0 && e <= 1.0, "component efficiencies in (0, 1]");
  }
  require(spec.n1 > 0.0 && spec.n2 > 0.0, "design shaft speeds > 0");
  for (Station s : kAllStations) {
    const double m = spec.mach[idx(s)];
    require(m >= 0.0 && m < 1.0, "station Mach targets in [0, 1)");
  }
  for (Station s : {Station::S2, Station::S13, Station::S25, Station::S3, Station::S4, Station::S41, Station::S43,
                    Station::S44, Station::S45, Station::S5, Station::S6}) {
    require(spec.mach[idx(s)] > 0.0,
            "a Mach target for station " + std::to_string(station_number(s)) + " is required");
  }
  try {
    spec.bleeds.validate();
  } catch (const ConfigError& e) {
    throw SizingError(std::string("inconsistent design targets: ") + e.what());
  }
  require(spec.bleeds.c2b == 0.0, "c2b = 0 for the matched cycle");
  require(spec.shafts.eta_h > 0.9 && spec.shafts.eta_h <= 1.0, "eta_h in (0.9, 1]");
  require(spec.shafts.eta_l > 0.9 && spec.shafts.eta_l <= 1.0, "eta_l in (0.9, 1]");

  const thermo::GasModel& gas = spec.gas;
  const double R = gas.R;
  const Bleeds& b = spec.bleeds;
  const LossConfig& loss = spec.losses;

  EngineConfig cfg;
  cfg.design = spec;
  cfg.maps = base_maps;

  const double W2 = spec.W2;
  const double W25 = W2 / (1.0 + spec.bpr);
  const double T2 = spec.T2;
  const double T25 = compress(T2, spec.pr_lpc, spec.eff_lpc, R);
  const double P25 = spec.P2 * spec.pr_lpc;
  const double T3 = compress(T25, spec.pr_hpc, spec.eff_hpc, R);
  const double P3 = P25 * spec.pr_hpc;
  const double h3 = thermo::enthalpy(T3, 0.0);
  require(spec.T4 > T3, "T4 > T3 (" + std::to_string(T3) + " K)");
  require(spec.T4 <= thermo::kTmax, "T4 inside the property range");

  // Fuel flow for the T4 target
  const double W_air = W25 * (1.0 - b.hpt_cl - b.lngv_cl - b.hngv_cl);
  double WF = W_air * (thermo::enthalpy(spec.T4, 0.0) - h3) / (loss.burner_eff * loss.fuel_lhv);
  for (int i = 0; i < 50; ++i) {
    const double far = WF / W_air;
    const thermo::EnthalpySensitivity e = thermo::enthalpy_sensitivity(spec.T4, far);
    const double f = (W_air + WF) * e.h - W_air * h3 - loss.burner_eff * WF * loss.fuel_lhv;
    const double df = e.h + (W_air + WF) * e.dfar / W_air - loss.burner_eff * loss.fuel_lhv;
    const double step = f / df;
    WF -= step;
    if (std::abs(step) < 1e-14 * WF) break;
  }
  require(WF > 0.0 && WF / W_air < thermo::kFarMax, "fuel-air ratio for T4 inside the property range");

  const MassFlows mf = infer_mass_flows(W2, W25, WF, b);
  const double W4 = mf[Station::S4];
  const double far4 = station_far(Station::S4, W4, WF);
  const double h4 = thermo::enthalpy(spec.T4, far4);

  const double W41 = mf[Station::S41];
  const double far41 = station_far(Station::S41, W41, WF);
  const double T41 = mixed_temperature({{W4, h4}, {b.hngv_cl * W25, h3}}, W41, far41);
  const double h41 = thermo::enthalpy(T41, far41);

  // HPT work from the HP balance, then the pressure ratio that delivers it.
  const double w_hpc = W25 * (h3 - thermo::enthalpy(T25, 0.0)) + WF * h3;
  const double w_hpt = (w_hpc + spec.shafts.p_ext) / spec.shafts.eta_h;
  const double h43 = h41 - w_hpt / W41;
  const double T43 = thermo::temperature_from_enthalpy(h43, far41);
  const double T43is = thermo::temperature_from_enthalpy(h41 - (h41 - h43) / spec.eff_hpt, far41);
  const double pr_hpt =
      std::exp((thermo::entropy_function(T41, far41) - thermo::entropy_function(T43is, far41)) / R);

  const double W44 = mf[Station::S44];
  const double far44 = station_far(Station::S44, W44, WF);
  const double T44 = mixed_temperature({{W41, h43}, {b.hpt_cl * W25, h3}}, W44, far44);
  const double h44 = thermo::enthalpy(T44, far44);
  const double W45 = mf[Station::S45];
  const double far45 = station_far(Station::S45, W45, WF);
  const double T45 = mixed_temperature({{W44, h44}, {b.lngv_cl * W25, h3}}, W45, far45);
  const double h45 = thermo::enthalpy(T45, far45);

  const double w_lpc = W2 * (thermo::enthalpy(T25, 0.0) - thermo::enthalpy(T2, 0.0));
  const double w_lpt = w_lpc / spec.shafts.eta_l;
  const double h5 = h45 - w_lpt / W45;
  const double T5 = thermo::temperature_from_enthalpy(h5, far45);
  const double T5is = thermo::temperature_from_enthalpy(h45 - (h45 - h5) / spec.eff_lpt, far45);
  const double pr_lpt =
      std::exp((thermo::entropy_function(T45, far45) - thermo::entropy_function(T5is, far45)) / R);
  require(pr_hpt > 1.0 && pr_lpt > 1.0, "turbine work below the compressor demand");

  const double P4 = P3 * (1.0 - loss.burner_dp);
  const double P43 = P4 / pr_hpt;
  const double P5 = P43 / pr_lpt;
  const double P6 = P5 * (1.0 - loss.lpt_exit_dp);
  const double P16 = P25 * (1.0 - loss.bypass_dp);

  auto size = [&](Station s, double T, double P, double far) {
    const double Ma = spec.mach[idx(s)];
    cfg.areas[idx(s)] = mf[s] / thermo::mass_flow_Q(T, P, Ma, 1.0, gas, far);
  };
  size(Station::S2, T2, spec.P2, 0.0);
  size(Station::S25, T25, P25, 0.0);
  size(Station::S13, T25, P25, 0.0);
  size(Station::S3, T3, P3, 0.0);
  size(Station::S4, spec.T4, P4, far4);
  size(Station::S41, T41, P4, far41);
  size(Station::S43, T43, P43, far41);
  size(Station::S44, T44, P43, far44);
  size(Station::S45, T45, P43, far45);
  size(Station::S5, T5, P5, far45);
  size(Station::S6, T5, P6, far45);

  // Bypass duct exit sized for equal static pressure at mixer entry.
  const double g6 = gas.gamma(T5, far45);
  const double Ps6 = P6 / thermo::total_to_static_pressure_ratio(spec.mach[idx(Station::S6)], g6);
  const double g16 = gas.gamma(T25, 0.0);
  require(P16 > Ps6 * (1.0 + 1e-6),
          "mixer static-pressure balance needs P16 > Ps6 (P16=" + std::to_string(P16) +
              " kPa, Ps6=" + std::to_string(Ps6) + " kPa)");
  const double Ma16 = thermo::mach_from_pressure_ratio(P16 / Ps6, g16);
  require(Ma16 < 0.9, "mixer static-pressure balance needs bypass Mach < 0.9 (got " + std::to_string(Ma16) + ")");
  cfg.areas[idx(Station::S16)] = mf[Station::S16] / thermo::mass_flow_Q(T25, P16, Ma16, 1.0, gas, 0.0);
  cfg.areas[idx(Station::S64)] = cfg.areas[idx(Station::S6)] + cfg.areas[idx(Station::S16)];

  // Scalars: the design node of every map lands on the design targets.
  const maps::CompressorPoint lpc0 = maps::interp_compressor(base_maps.lpc, maps::kDesignSpeed, maps::kDesignBeta);
  const maps::CompressorPoint hpc0 = maps::interp_compressor(base_maps.hpc, maps::kDesignSpeed, maps::kDesignBeta);
  const double hpt_pr0 = maps::kHptDesignPr * base_maps.hpt.scalars.pr;
  const double lpt_pr0 = maps::kLptDesignPr * base_maps.lpt.scalars.pr;
  const maps::TurbinePoint hpt0 = maps::interp_turbine(base_maps.hpt, maps::kDesignSpeed, hpt_pr0);
  const maps::TurbinePoint lpt0 = maps::interp_turbine(base_maps.lpt, maps::kDesignSpeed, lpt_pr0);

  auto scale = [](maps::MapScalars& s, double flow, double pr, double eff) {
    s.flow *= flow;
    s.pr *= pr;
    s.eff *= eff;
  };
  scale(cfg.maps.lpc.scalars, corrected_flow(W2, T2, spec.P2) / lpc0.wc, spec.pr_lpc / lpc0.pr,
        spec.eff_lpc / lpc0.eff);
  scale(cfg.maps.hpc.scalars, corrected_flow(W25, T25, P25) / hpc0.wc, spec.pr_hpc / hpc0.pr,
        spec.eff_hpc / hpc0.eff);
  scale(cfg.maps.hpt.scalars, corrected_flow(W41, T41, P4) / hpt0.wc, pr_hpt / hpt_pr0, spec.eff_hpt / hpt0.eff);
  scale(cfg.maps.lpt.scalars, corrected_flow(W45, T45, P43) / lpt0.wc, pr_lpt / lpt_pr0, spec.eff_lpt / lpt0.eff);

  cfg.T2_ref = T2;
  cfg.T25_ref = T25;
  cfg.T41_ref = T41;
  cfg.T45_ref = T45;
  cfg.design_solution = {spec.n1, spec.n2, WF, maps::kDesignBeta, maps::kDesignBeta, pr_hpt, pr_lpt, spec.bpr};

  // Nozzle throat from the design-point mixer exit.
  cfg.areas[idx(Station::S8)] = 1.0;
  const CyclePoint p = evaluate(cfg, design_inputs(cfg), cfg.design_solution);
  const StationState& s64 = p.at(Station::S64);
  require(s64.Pt > spec.Pamb, "nozzle pressure ratio > 1");
  const double Ma8 = nozzle_mach(s64.Pt, spec.Pamb, gas.gamma(s64.Tt, s64.far));
  cfg.areas[idx(Station::S8)] = s64.W / thermo::mass_flow_Q(s64.Tt, s64.Pt, Ma8, 1.0, gas, s64.far);
  cfg.validate();
  return cfg;
}

EngineConfig degrade(const EngineConfig& cfg, const maps::DegradationState& d) {
  EngineConfig out = cfg;
  out.maps = maps::apply_degradation(cfg.maps, d);
  auto combine = [](maps::ComponentDegradation& acc, const maps::ComponentDegradation& extra) {
    acc.flow_delta = (1.0 + acc.flow_delta) * (1.0 + extra.flow_delta) - 1.0;
    acc.eff_delta = (1.0 + acc.eff_delta) * (1.0 + extra.eff_delta) - 1.0;
  };
  out.degradation = cfg.degradation;
  combine(out.degradation.lpc, d.lpc);
  combine(out.degradation.hpc, d.hpc);
  combine(out.degradation.hpt, d.hpt);
  combine(out.degradation.lpt, d.lpt);
  return out;
}

OperatingInputs design_inputs(const EngineConfig& cfg, Control control) {
  OperatingInputs in;
  in.T2 = cfg.design.T2;
  in.P2 = cfg.design.P2;
  in.Pamb = cfg.design.Pamb;
  in.control = control;
  switch (control) {
    case Control::N1: in.control_value = cfg.design_solution.n1; break;
    case Control::N2: in.control_value = cfg.design_solution.n2; break;
    case Control::WF: in.control_value = cfg.design_solution.wf; break;
  }
  return in;
}

namespace {

using Vec7 = Eigen::Matrix<double, 7, 1>;

Vec7 as_vec(const Residuals& r) {
  Vec7 v;
  for (std::size_t i = 0; i < 7; ++i) v[i] = r[i];
  return v;
}

std::optional<CyclePoint> try_evaluate(const EngineConfig& cfg, const OperatingInputs& in, const Unknowns& u,
                                       bool* map_failure = nullptr) {
  try {
    CyclePoint p = evaluate(cfg, in, u);
    if (!std::isfinite(residual_norm(p.residuals))) return std::nullopt;
    return p;
  } catch (const MapExtrapolationError&) {
    if (map_failure) *map_failure = true;
    return std::nullopt;
  } catch (const Error&) {
    return std::nullopt;
  }
}

Eigen::Matrix<double, 7, 7> jacobian_impl(const EngineConfig& cfg, const OperatingInputs& in, const Layout& layout,
                                          const Vec7& z, const Vec7& f0, double h) {
  Eigen::Matrix<double, 7, 7> J;
  for (int j = 0; j < 7; ++j) {
    Vec7 zp = z;
    Vec7 zm = z;
    zp[j] += h;
    zm[j] -= h;
    const auto fp = try_evaluate(cfg, in, layout.unpack(zp, in));
    const auto fm = try_evaluate(cfg, in, layout.unpack(zm, in));
    if (fp && fm) {
      J.col(j) = (as_vec(fp->residuals) - as_vec(fm->residuals)) / (2.0 * h);
    } else if (fp) {
      J.col(j) = (as_vec(fp->residuals) - f0) / h;
    } else if (fm) {
      J.col(j) = (f0 - as_vec(fm->residuals)) / h;
    } else {
      throw ConvergenceError("Jacobian column " + std::to_string(j) + " cannot be evaluated");
    }
  }
  return J;
}

struct NewtonOutcome {
  std::optional<CyclePoint> point;
  Residuals last{};
  bool map_failure = false;
  std::string reason;
};

NewtonOutcome newton(const EngineConfig& cfg, const OperatingInputs& in, const Unknowns& guess,
                     const SolverOptions& opts) {
  NewtonOutcome out;
  const Layout layout(cfg, in);
  Vec7 z = layout.pack(guess);
  auto current = try_evaluate(cfg, in, layout.unpack(z, in), &out.map_failure);
  if (!current) {
    out.reason = "initial guess cannot be evaluated";
    return out;
  }
  for (int it = 0; it <= opts.max_iterations; ++it) {
    out.last = current->residuals;
    const double norm = residual_norm(current->residuals);
    if (norm < opts.tolerance) {
      current->iterations = it;
      out.point = std::move(current);
      return out;
    }
    if (it == opts.max_iterations) break;
    const Vec7 f = as_vec(current->residuals);
    Eigen::Matrix<double, 7, 7> J;
    try {
      J = jacobian_impl(cfg, in, layout, z, f, opts.fd_step);
    } catch (const ConvergenceError& e) {
      out.reason = e.what();
      return out;
    }
    Vec7 dz = J.fullPivLu().solve(-f);
    if (!dz.allFinite()) {
      out.reason = "singular Jacobian";
      return out;
    }
    const double big = dz.cwiseAbs().maxCoeff();
    if (big > opts.max_step) dz *= opts.max_step / big;

    std::optional<CyclePoint> accepted;
    Vec7 z_acc = z;
    std::optional<CyclePoint> fallback;
    Vec7 z_fb = z;
    double lambda = 1.0;
    for (int k = 0; k <= opts.max_halvings; ++k, lambda *= 0.5) {
      const Vec7 zt = z + lambda * dz;
      auto trial = try_evaluate(cfg, in, layout.unpack(zt, in), &out.map_failure);
      if (!trial) continue;
      if (residual_norm(trial->residuals) < norm) {
        accepted = std::move(trial);
        z_acc = zt;
        break;
      }
      if (!fallback) {
        fallback = std::move(trial);
        z_fb = zt;
      }
    }
    if (!accepted && fallback) {
      accepted = std::move(fallback);
      z_acc = z_fb;
    }
    if (!accepted) {
      out.reason = "no evaluable point along the Newton step";
      return out;
    }
    z = z_acc;
    current = std::move(accepted);
  }
  out.reason = "no convergence in " + std::to_string(opts.max_iterations) + " iterations";
  return out;
}

}  // namespace

Eigen::Matrix<double, 7, 7> jacobian(const EngineConfig& cfg, const OperatingInputs& in, const Unknowns& u,
                                     double fd_step) {
  const Layout layout(cfg, in);
  const Vec7 z = layout.pack(u);
  const CyclePoint p = evaluate(cfg, in, layout.unpack(z, in));
  return jacobian_impl(cfg, in, layout, z, as_vec(p.residuals), fd_step);
}

CyclePoint off_design(const EngineConfig& cfg, const OperatingInputs& in, const SolverOptions& opts,
                      const Unknowns* guess) {
  if (!(in.T2 > 0.0) || !(in.P2 > 0.0) || !(in.Pamb > 0.0) || !(in.control_value > 0.0)) {
    throw DomainError("operating inputs must be positive (" + describe(in) + ")");
  }
  Unknowns start = cfg.design_solution;
  if (guess) {
    start = *guess;
  } else {
    // Corrected fuel flow WF / (delta sqrt(theta)) is near its design value.
    start.wf *= (in.P2 / cfg.design.P2) * std::sqrt(in.T2 / cfg.design.T2);
    if (in.control == Control::WF) start.wf = in.control_value;
  }
  NewtonOutcome direct = newton(cfg, in, start, opts);
  if (direct.point) return *direct.point;

  bool map_failure = direct.map_failure;
  Residuals last = direct.last;
  std::string reason = direct.reason;
  if (opts.continuation_steps > 0) {
    const OperatingInputs from = design_inputs(cfg, in.control);
    Unknowns u = cfg.design_solution;
    int total_iterations = 0;
    for (int k = 1; k <= opts.continuation_steps; ++k) {
      const double t = static_cast<double>(k) / opts.continuation_steps;
      OperatingInputs step = in;
      step.T2 = from.T2 + t * (in.T2 - from.T2);
      step.P2 = from.P2 + t * (in.P2 - from.P2);
      step.Pamb = from.Pamb + t * (in.Pamb - from.Pamb);
      step.control_value = from.control_value + t * (in.control_value - from.control_value);
      NewtonOutcome o = newton(cfg, step, u, opts);
      total_iterations += o.point ? o.point->iterations : 0;
      if (!o.point) {
        map_failure = map_failure || o.map_failure;
        last = o.last;
        reason = "continuation step " + std::to_string(k) + ": " + o.reason;
        break;
      }
      u = o.point->solution;
      if (k == opts.continuation_steps) {
        o.point->iterations = total_iterations;
        return *o.point;
      }
    }
  }
  if (map_failure) {
    throw EnvelopeError("operating point outside the component maps (" + describe(in) + "): " + reason);
  }
  throw ConvergenceError("off-design matching failed (" + describe(in) + "): " + reason,
                         std::vector<double>(last.begin(), last.end()));
}

CyclePoint off_design(const EngineConfig& cfg, double T2, double P2, double Pamb, double N2) {
  OperatingInputs in;
  in.T2 = T2;
  in.P2 = P2;
  in.Pamb = Pamb;
  in.control = Control::N2;
  in.control_value = N2;
  return off_design(cfg, in);
}

InletFlows solve_w2_w25(const EngineConfig& cfg, const FlightInputs& f, const SolverOptions& opts) {
  OperatingInputs in;
  in.T2 = f.T2;
  in.P2 = f.P2;
  in.Pamb = f.Pamb;
  if (f.n2) {
    in.control = Control::N2;
    in.control_value = *f.n2;
  } else if (f.n1) {
    in.control = Control::N1;
    in.control_value = *f.n1;
  } else if (f.wf) {
    in.control = Control::WF;
    in.control_value = *f.wf;
  } else {
    throw ConfigError("solve_w2_w25 needs N2, N1 or WF");
  }
  const CyclePoint p = off_design(cfg, in, opts);
  return {p.W2(), p.W25()};
}

}  // namespace gtnet::cycle
