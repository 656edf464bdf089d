#pragma once

// Working-fluid properties (half-ideal gas: cp = cp(T, far)) and 1-D
// isentropic flow relations shared by the reference cycle and the physics
// losses. Pressures are in kPa throughout the public API, temperatures in K,
// enthalpies in J/kg.

namespace gtnet::thermo {

inline constexpr double kTref = 288.15;   // enthalpy/entropy reference [K]
inline constexpr double kPref = 101.325;  // standard pressure [kPa]
inline constexpr double kRair = 287.05;   // [J/(kg K)]
inline constexpr double kTmin = 200.0;
inline constexpr double kTmax = 2500.0;
inline constexpr double kFarMax = 0.1;

// Specific heat at constant pressure [J/(kg K)]. Dry-air polynomial plus a
// term proportional to the fuel mass fraction far/(1+far).
double cp(double T, double far);

// Specific enthalpy [J/kg], zero at kTref for every far.
double enthalpy(double T, double far);

// Entropy function phi(T) = int_{Tref}^{T} cp/T dT [J/(kg K)]. Isentropic
// change between two temperatures satisfies phi2 - phi1 = R ln(P2/P1).
double entropy_function(double T, double far);

// Inverse of enthalpy() by Newton iteration.
double temperature_from_enthalpy(double h, double far);

// Exit temperature of an isentropic change from T_in across pressure ratio
// P_out/P_in (>1 compression, <1 expansion).
double isentropic_temperature(double T_in, double far, double pressure_ratio, double R = kRair);

struct GasModel {
  double R = kRair;
  // gamma is evaluated from cp(T, far) unless fixed_gamma > 0.
  double fixed_gamma = 0.0;

  double gamma(double T, double far) const;
  double cp(double T, double far) const;
};

// Flow function normalized so that q(1) = 1.
double q_ma(double Ma, double gamma);

// K = sqrt(gamma/R) (2/(gamma+1))^((gamma+1)/(2(gamma-1)))
double flow_constant(double gamma, double R);

// Q = K P A / sqrt(T) q(Ma) [kg/s], P in kPa, A in m^2.
double mass_flow_Q(double T, double P, double Ma, double A, double gamma, double R);
double mass_flow_Q(double T, double P, double Ma, double A, const GasModel& gas, double far = 0.0);

enum class Branch { Subsonic, Supersonic };

// Mach number at which mass_flow_Q equals W. Throws InfeasibleFlowError when
// W exceeds the choked flow by more than 1e-9 relative.
double mach_from_flow(double W, double T, double P, double A, const GasModel& gas, double far = 0.0,
                      Branch branch = Branch::Subsonic);

// Pt/Ps for a given Mach number.
double total_to_static_pressure_ratio(double Ma, double gamma);
// Mach number from Pt/Ps >= 1.
double mach_from_pressure_ratio(double pt_over_ps, double gamma);

// Value and partial derivatives of mass_flow_Q including the dependence of
// gamma on (T, far). No domain checks: used on network predictions, where an
// untrained net may produce Ma < 0 transiently.
struct FlowSensitivity {
  double Q = 0.0;
  double dT = 0.0;
  double dP = 0.0;
  double dMa = 0.0;
  double dfar = 0.0;
};
FlowSensitivity mass_flow_sensitivity(double T, double P, double Ma, double A, const GasModel& gas,
                                      double far);

struct EnthalpySensitivity {
  double h = 0.0;
  double dT = 0.0;  // = cp
  double dfar = 0.0;
};
// Unchecked enthalpy with derivatives.
EnthalpySensitivity enthalpy_sensitivity(double T, double far);

}  // namespace gtnet::thermo
