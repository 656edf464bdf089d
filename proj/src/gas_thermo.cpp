// Half-ideal-gas properties. Coefficients are the widely used Walsh & Fletcher
// dry-air and combustion-product correction polynomials in Tz = T/1000 K
// (kJ/(kg K)).

#include "gtnet/gas_thermo.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "gtnet/errors.hpp"

namespace gtnet::thermo {
namespace {

constexpr std::array<double, 9> kAir = {0.992313, 0.236688, -1.852148, 6.083152, -8.893933,
                                        7.097112, -3.234725, 0.794571, -0.081873};
constexpr std::array<double, 8> kFuel = {-0.718874, 8.747481, -15.863157, 17.254096,
                                         -10.233795, 3.081778,  -0.361112,  -0.003919};

constexpr double kZref = kTref / 1000.0;

template <std::size_t N>
double poly(const std::array<double, N>& c, double z) {
  double s = 0.0;
  for (std::size_t i = N; i-- > 0;) s = s * z + c[i];
  return s;
}

template <std::size_t N>
double poly_derivative(const std::array<double, N>& c, double z) {
  double s = 0.0;
  for (std::size_t i = N; i-- > 1;) s = s * z + static_cast<double>(i) * c[i];
  return s;
}

// int_{zref}^{z} poly dz
template <std::size_t N>
double poly_integral(const std::array<double, N>& c, double z) {
  double s = 0.0;
  double zs = 0.0;
  for (std::size_t i = N; i-- > 0;) {
    s = s * z + c[i] / static_cast<double>(i + 1);
    zs = zs * kZref + c[i] / static_cast<double>(i + 1);
  }
  return s * z - zs * kZref;
}

// int_{zref}^{z} poly/z dz
template <std::size_t N>
double poly_over_z_integral(const std::array<double, N>& c, double z) {
  double s = c[0] * std::log(z / kZref);
  for (std::size_t i = 1; i < N; ++i) {
    const double k = static_cast<double>(i);
    s += c[i] * (std::pow(z, k) - std::pow(kZref, k)) / k;
  }
  return s;
}

double fuel_fraction(double far) { return far / (1.0 + far); }

void check_domain(double T, double far) {
  if (!(T >= kTmin && T <= kTmax)) {
    std::ostringstream os;
    os << "temperature " << T << " K outside [" << kTmin << ", " << kTmax << "]";
    throw DomainError(os.str());
  }
  if (!(far >= 0.0 && far < kFarMax)) {
    std::ostringstream os;
    os << "fuel-air ratio " << far << " outside [0, " << kFarMax << ")";
    throw DomainError(os.str());
  }
}

double cp_raw(double T, double far) {
  const double z = T / 1000.0;
  return 1000.0 * (poly(kAir, z) + fuel_fraction(far) * poly(kFuel, z));
}

double dcp_dT_raw(double T, double far) {
  const double z = T / 1000.0;
  return poly_derivative(kAir, z) + fuel_fraction(far) * poly_derivative(kFuel, z);
}

double enthalpy_raw(double T, double far) {
  const double z = T / 1000.0;
  return 1.0e6 * (poly_integral(kAir, z) + fuel_fraction(far) * poly_integral(kFuel, z));
}

double entropy_raw(double T, double far) {
  const double z = T / 1000.0;
  return 1000.0 * (poly_over_z_integral(kAir, z) + fuel_fraction(far) * poly_over_z_integral(kFuel, z));
}

double gamma_from_cp(double cpv, double R) { return cpv / (cpv - R); }

}  // namespace

double cp(double T, double far) {
  check_domain(T, far);
  return cp_raw(T, far);
}

double enthalpy(double T, double far) {
  check_domain(T, far);
  return enthalpy_raw(T, far);
}

double entropy_function(double T, double far) {
  check_domain(T, far);
  return entropy_raw(T, far);
}

double temperature_from_enthalpy(double h, double far) {
  check_domain(kTref, far);
  double T = kTref + h / 1100.0;
  T = std::clamp(T, kTmin, kTmax);
  for (int it = 0; it < 60; ++it) {
    const double f = enthalpy_raw(T, far) - h;
    double dT = -f / cp_raw(T, far);
    T += dT;
    if (T < kTmin * 0.5) T = kTmin * 0.5;
    if (std::abs(dT) < 1e-13 * T) break;
  }
  check_domain(T, far);
  return T;
}

double isentropic_temperature(double T_in, double far, double pressure_ratio, double R) {
  check_domain(T_in, far);
  if (!(pressure_ratio > 0.0)) throw DomainError("pressure ratio must be positive");
  const double target = entropy_raw(T_in, far) + R * std::log(pressure_ratio);
  const double g = gamma_from_cp(cp_raw(T_in, far), R);
  double T = T_in * std::pow(pressure_ratio, (g - 1.0) / g);
  for (int it = 0; it < 60; ++it) {
    const double f = entropy_raw(T, far) - target;
    const double dT = -f * T / cp_raw(T, far);
    T += dT;
    if (T < kTmin * 0.5) T = kTmin * 0.5;
    if (std::abs(dT) < 1e-13 * T) break;
  }
  check_domain(T, far);
  return T;
}

double GasModel::gamma(double T, double far) const {
  if (fixed_gamma > 0.0) return fixed_gamma;
  return gamma_from_cp(thermo::cp(T, far), R);
}

double GasModel::cp(double T, double far) const { return thermo::cp(T, far); }

double q_ma(double Ma, double gamma) {
  if (!(Ma >= 0.0)) throw DomainError("Mach number must be non-negative");
  if (!(gamma > 1.0 && gamma < 2.0)) throw DomainError("gamma outside (1, 2)");
  const double e = (gamma + 1.0) / (2.0 * (gamma - 1.0));
  return Ma * std::pow((gamma + 1.0) / 2.0, e) * std::pow(1.0 + 0.5 * (gamma - 1.0) * Ma * Ma, -e);
}

double flow_constant(double gamma, double R) {
  const double e = (gamma + 1.0) / (2.0 * (gamma - 1.0));
  return std::sqrt(gamma / R) * std::pow(2.0 / (gamma + 1.0), e);
}

double mass_flow_Q(double T, double P, double Ma, double A, double gamma, double R) {
  if (!(T > 0.0) || !(P > 0.0) || !(A > 0.0)) {
    throw DomainError("mass_flow_Q requires T, P, A > 0");
  }
  return flow_constant(gamma, R) * (P * 1000.0) * A / std::sqrt(T) * q_ma(Ma, gamma);
}

double mass_flow_Q(double T, double P, double Ma, double A, const GasModel& gas, double far) {
  return mass_flow_Q(T, P, Ma, A, gas.gamma(T, far), gas.R);
}

double mach_from_flow(double W, double T, double P, double A, const GasModel& gas, double far,
                      Branch branch) {
  const double gamma = gas.gamma(T, far);
  const double choked = mass_flow_Q(T, P, 1.0, A, gamma, gas.R);
  if (!(W >= 0.0)) throw DomainError("mass flow must be non-negative");
  const double target = W / choked;
  if (target > 1.0 + 1e-9) {
    std::ostringstream os;
    os << "mass flow " << W << " kg/s exceeds choked flow " << choked << " kg/s";
    throw InfeasibleFlowError(os.str());
  }
  if (target >= 1.0) return 1.0;
  if (target == 0.0) return branch == Branch::Subsonic ? 0.0 : INFINITY;

  // Bracketed Newton on q(M) - target.
  double lo = branch == Branch::Subsonic ? 0.0 : 1.0;
  double hi = branch == Branch::Subsonic ? 1.0 : 60.0;
  if (branch == Branch::Supersonic && q_ma(hi, gamma) > target) {
    throw InfeasibleFlowError("supersonic branch: flow below representable Mach range");
  }
  const double k = 0.5 * (gamma - 1.0);
  const double e = (gamma + 1.0) / (2.0 * (gamma - 1.0));
  const double norm = std::pow((gamma + 1.0) / 2.0, e);
  double M = branch == Branch::Subsonic ? 0.6 * target : 2.0;
  for (int it = 0; it < 200; ++it) {
    const double s = 1.0 + k * M * M;
    const double q = norm * M * std::pow(s, -e);
    const double f = q - target;
    // q is increasing on the subsonic branch, decreasing on the supersonic one
    const bool below = branch == Branch::Subsonic ? (f < 0.0) : (f > 0.0);
    if (below) lo = M; else hi = M;
    const double dq = norm * std::pow(s, -e) * (1.0 - 2.0 * e * k * M * M / s);
    double next = M - f / dq;
    if (!(next > lo && next < hi) || dq == 0.0) next = 0.5 * (lo + hi);
    if (std::abs(next - M) < 1e-15 * std::max(1.0, M)) {
      M = next;
      break;
    }
    M = next;
    if (hi - lo < 1e-16) break;
  }
  return M;
}

double total_to_static_pressure_ratio(double Ma, double gamma) {
  return std::pow(1.0 + 0.5 * (gamma - 1.0) * Ma * Ma, gamma / (gamma - 1.0));
}

double mach_from_pressure_ratio(double pt_over_ps, double gamma) {
  if (!(pt_over_ps >= 1.0)) throw DomainError("total-to-static pressure ratio below 1");
  return std::sqrt(2.0 / (gamma - 1.0) * (std::pow(pt_over_ps, (gamma - 1.0) / gamma) - 1.0));
}

FlowSensitivity mass_flow_sensitivity(double T, double P, double Ma, double A, const GasModel& gas,
                                      double far) {
  double gamma = gas.fixed_gamma;
  double dg_dT = 0.0;
  double dg_dfar = 0.0;
  if (!(gas.fixed_gamma > 0.0)) {
    const double c = cp_raw(T, far);
    gamma = gamma_from_cp(c, gas.R);
    const double dg_dcp = -gas.R / ((c - gas.R) * (c - gas.R));
    dg_dT = dg_dcp * dcp_dT_raw(T, far);
    const double z = T / 1000.0;
    dg_dfar = dg_dcp * 1000.0 * poly(kFuel, z) / ((1.0 + far) * (1.0 + far));
  }
  const double k = 0.5 * (gamma - 1.0);
  const double e = (gamma + 1.0) / (2.0 * (gamma - 1.0));
  const double s = 1.0 + k * Ma * Ma;
  const double C = std::sqrt(gamma / gas.R) * (P * 1000.0) * A / std::sqrt(T);
  const double spow = std::pow(s, -e);

  FlowSensitivity out;
  out.Q = C * Ma * spow;
  out.dP = out.Q / P;
  out.dMa = C * spow * (1.0 - 2.0 * e * k * Ma * Ma / s);
  const double dQ_dgamma =
      out.Q * (0.5 / gamma + std::log(s) / ((gamma - 1.0) * (gamma - 1.0)) - e * 0.5 * Ma * Ma / s);
  out.dT = -0.5 * out.Q / T + dQ_dgamma * dg_dT;
  out.dfar = dQ_dgamma * dg_dfar;
  return out;
}

EnthalpySensitivity enthalpy_sensitivity(double T, double far) {
  const double z = T / 1000.0;
  EnthalpySensitivity out;
  out.h = enthalpy_raw(T, far);
  out.dT = cp_raw(T, far);
  out.dfar = 1.0e6 * poly_integral(kFuel, z) / ((1.0 + far) * (1.0 + far));
  return out;
}

}  // namespace gtnet::thermo
