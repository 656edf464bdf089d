#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "gtnet/component_maps.hpp"
#include "gtnet/gas_thermo.hpp"
#include "gtnet/mass_flows.hpp"

namespace gtnet::cycle {

struct StationState {
  double Tt = 0.0;   // [K]
  double Pt = 0.0;   // [kPa]
  double Ma = 0.0;
  double W = 0.0;    // [kg/s]
  double far = 0.0;
};

struct ShaftConfig {
  double eta_h = 0.99;
  double eta_l = 0.99;
  double p_ext = 80e3;  // HP-spool power extraction [W]
};

struct LossConfig {
  double burner_dp = 0.04;     // fraction of P3
  double burner_eff = 0.995;
  double fuel_lhv = 43.124e6;  // [J/kg]
  double bypass_dp = 0.03;     // 13 -> 16
  double lpt_exit_dp = 0.01;   // 5 -> 6
};

// Station order as in kAllStations: 2 13 16 25 3 4 41 43 44 45 5 6 64 8.
// Stations 16, 64 and 8 are sized from the mixer and nozzle instead.
inline constexpr std::array<double, kStationCount> kDefaultDesignMach = {
    0.5, 0.45, 0.0, 0.45, 0.3, 0.15, 0.3, 0.35, 0.35, 0.35, 0.4, 0.4, 0.0, 0.0};

// Design-point targets. Station Mach numbers fix the sized flow areas.
struct DesignSpec {
  double T2 = 288.15;
  double P2 = 101.325;
  double Pamb = 101.325;
  double W2 = 110.0;
  double bpr = 0.75;  // W13 / W25
  double pr_lpc = maps::kLpcDesignPr;
  double pr_hpc = maps::kHpcDesignPr;
  double eff_lpc = maps::kLpcDesignEff;
  double eff_hpc = maps::kHpcDesignEff;
  double eff_hpt = maps::kHptDesignEff;
  double eff_lpt = maps::kLptDesignEff;
  double T4 = 1650.0;
  // Design shaft speeds; off-design speeds are given in the same unit.
  double n1 = 1.0;
  double n2 = 1.0;
  std::array<double, kStationCount> mach = kDefaultDesignMach;

  Bleeds bleeds;
  ShaftConfig shafts;
  LossConfig losses;
  thermo::GasModel gas;

};

// Unknowns of the matching problem. Which of n1, n2, wf is held fixed
// depends on the control mode.
struct Unknowns {
  double n1 = 0.0;
  double n2 = 0.0;
  double wf = 0.0;
  double beta_lpc = 0.0;
  double beta_hpc = 0.0;
  double pr_hpt = 0.0;
  double pr_lpt = 0.0;
  double bpr = 0.0;
};

struct EngineConfig {
  DesignSpec design;
  std::array<double, kStationCount> areas{};  // [m^2]
  maps::MapSet maps;                           // scalars set by sizing
  // Temperatures used to correct shaft speeds, recorded at design.
  double T2_ref = 0.0;
  double T25_ref = 0.0;
  double T41_ref = 0.0;
  double T45_ref = 0.0;
  Unknowns design_solution;
  maps::DegradationState degradation;  // already applied to maps

  const Bleeds& bleeds() const { return design.bleeds; }
  const ShaftConfig& shafts() const { return design.shafts; }
  double area(Station s) const { return areas[idx(s)]; }
  // Throws ConfigError when an invariant does not hold.
  void validate() const;
};

// Sizes areas and map scalars from the targets. Throws SizingError naming
// the violated relation for inconsistent targets.
EngineConfig design_point(const DesignSpec& spec, const maps::MapSet& base_maps = maps::builtin_maps());

// Copy of cfg with component maps degraded.
EngineConfig degrade(const EngineConfig& cfg, const maps::DegradationState& d);

enum class Control { N2, N1, WF };

struct OperatingInputs {
  double T2 = 0.0;
  double P2 = 0.0;
  double Pamb = 0.0;
  Control control = Control::N2;
  double control_value = 0.0;  // N2, N1 or WF
};

inline constexpr std::size_t kResidualCount = 7;
using Residuals = std::array<double, kResidualCount>;

// Rotor enthalpy-flow changes [W], as used in the shaft balances.
struct ShaftWork {
  double lpc = 0.0;
  double hpc = 0.0;  // includes WF h3 because W3 counts the fuel flow
  double hpt = 0.0;
  double lpt = 0.0;
};

struct CyclePoint {
  OperatingInputs inputs;
  Unknowns solution;
  std::array<StationState, kStationCount> stations{};
  ShaftWork work;
  Residuals residuals{};
  int iterations = 0;

  const StationState& at(Station s) const { return stations[idx(s)]; }
  double W2() const { return at(Station::S2).W; }
  double W25() const { return at(Station::S25).W; }
  double WF() const { return solution.wf; }
};

// One pass through the gas path for given unknowns. Residual order:
//   0 HPC corrected flow vs map     4 nozzle flow vs W8
//   1 HPT corrected flow vs map     5 HP shaft power balance
//   2 LPT corrected flow vs map     6 LP shaft power balance
//   3 mixer static-pressure balance
// Throws DomainError, InfeasibleFlowError or MapExtrapolationError when the
// unknowns leave the modelled region.
CyclePoint evaluate(const EngineConfig& cfg, const OperatingInputs& in, const Unknowns& u);

struct SolverOptions {
  double tolerance = 1e-8;
  int max_iterations = 50;
  int max_halvings = 8;
  double fd_step = 1e-6;        // relative to the variable scale
  double max_step = 0.25;       // largest scaled Newton step
  int continuation_steps = 12;  // used if the direct solve fails; 0 disables
};

// Scaled Jacobian d(residuals)/d(free unknowns) by central differences.
// Free unknowns are all of (n1, n2, wf) except the controlled one, followed
// by beta_lpc, beta_hpc, pr_hpt, pr_lpt, bpr.
Eigen::Matrix<double, 7, 7> jacobian(const EngineConfig& cfg, const OperatingInputs& in, const Unknowns& u,
                                     double fd_step = 1e-6);

// Damped Newton-Raphson matching. Falls back to continuation from the design
// point if the direct solve fails. Throws ConvergenceError (with the last
// residuals) or EnvelopeError when the inputs lie outside the maps.
CyclePoint off_design(const EngineConfig& cfg, const OperatingInputs& in, const SolverOptions& opts = {},
                      const Unknowns* guess = nullptr);

// Convenience overload with N2 control.
CyclePoint off_design(const EngineConfig& cfg, double T2, double P2, double Pamb, double N2);

OperatingInputs design_inputs(const EngineConfig& cfg, Control control = Control::N2);

struct FlightInputs {
  double T2 = 0.0;
  double P2 = 0.0;
  double Pamb = 0.0;
  std::optional<double> n1;
  std::optional<double> n2;
  std::optional<double> wf;
};

struct InletFlows {
  double W2 = 0.0;
  double W25 = 0.0;
};

// Matched-cycle inlet flows. The clean model has one control degree of
// freedom: N2 is used when given, otherwise N1, otherwise WF. Throws
// ConfigError if none is given.
InletFlows solve_w2_w25(const EngineConfig& cfg, const FlightInputs& in, const SolverOptions& opts = {});

// Key-value text serialisation. Map tables are the built-in ones; only their
// scalars are stored.
std::string to_text(const EngineConfig& cfg);
EngineConfig config_from_text(const std::string& text);
void save_config(const std::filesystem::path& path, const EngineConfig& cfg);
EngineConfig load_config(const std::filesystem::path& path);
// Key-value design targets; absent keys keep their defaults.
void save_design_spec(const std::filesystem::path& path, const DesignSpec& spec);
DesignSpec load_design_spec(const std::filesystem::path& path);

}  // namespace gtnet::cycle
