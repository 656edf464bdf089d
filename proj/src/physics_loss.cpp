#include "gtnet/physics_loss.hpp"

#include <cmath>

#include "gtnet/errors.hpp"

namespace gtnet::physics {

using hybrid::kOutputCount;
using hybrid::output_index;

PhysicsContext PhysicsContext::from_config(const cycle::EngineConfig& cfg) {
  PhysicsContext c;
  c.areas = cfg.areas;
  c.shafts = cfg.design.shafts;
  c.gas = cfg.design.gas;
  c.bleeds = cfg.design.bleeds;
  return c;
}

std::vector<int> selector_all() {
  std::vector<int> s(kOutputCount);
  for (int i = 0; i < kOutputCount; ++i) s[static_cast<std::size_t>(i)] = i;
  return s;
}

std::vector<int> selector_from_names(const std::vector<std::string>& names) {
  std::vector<int> s;
  for (const std::string& n : names) {
    int found = -1;
    for (int i = 0; i < kOutputCount; ++i) {
      if (hybrid::output_name(i) == n) found = i;
    }
    if (found < 0) throw ConfigError("unknown station parameter '" + n + "'");
    s.push_back(found);
  }
  return s;
}

LossTerm loss_params(const Matrix& pred, const Matrix& target, const std::vector<int>& selector, bool grad) {
  const Eigen::Index B = pred.cols();
  const auto K = static_cast<Eigen::Index>(selector.size());
  if (B == 0 || K == 0) throw ConfigError("parameter loss needs a non-empty batch and selector");
  if (target.rows() != K || target.cols() != B) throw ConfigError("target shape does not match selector x batch");
  LossTerm t;
  if (grad) t.d_outputs = Matrix::Zero(pred.rows(), B);
  const double norm = 1.0 / (static_cast<double>(B) * static_cast<double>(K));
  for (Eigen::Index j = 0; j < B; ++j) {
    for (Eigen::Index k = 0; k < K; ++k) {
      const int row = selector[static_cast<std::size_t>(k)];
      if (row < 0 || row >= pred.rows()) throw ConfigError("selector index out of range");
      const double y = target(k, j);
      if (y == 0.0) throw DomainError("relative error undefined for a zero target");
      const double e = (pred(row, j) - y) / y;
      t.value += norm * e * e;
      if (grad) t.d_outputs(row, j) += norm * 2.0 * e / y;
    }
  }
  return t;
}

LossTerm loss_params_mc(const Matrix& pred, const Matrix& target, bool grad) {
  return loss_params(pred, target, selector_all(), grad);
}

LossTerm loss_params_fd(const Matrix& pred, const Matrix& target, const std::vector<int>& selector, bool grad) {
  return loss_params(pred, target, selector, grad);
}

const std::vector<Station>& massflow_stations() {
  static const std::vector<Station> s = {Station::S25, Station::S13, Station::S3,  Station::S4, Station::S44,
                                         Station::S6,  Station::S16, Station::S64, Station::S8};
  return s;
}

namespace {

Eigen::Index row_of(Station s) { return static_cast<Eigen::Index>(idx(s)); }

void check_shapes(const Matrix& inputs, const Matrix& outputs, const Matrix& flows) {
  if (inputs.rows() != hybrid::kInputCount || outputs.rows() != kOutputCount ||
      flows.rows() != static_cast<Eigen::Index>(kStationCount) || inputs.cols() != outputs.cols() ||
      flows.cols() != outputs.cols() || outputs.cols() == 0) {
    throw ConfigError("physics loss expects 9 x B inputs, 27 x B outputs and 14 x B flows");
  }
}

}  // namespace

LossTerm loss_massflow(const Matrix& inputs, const Matrix& outputs, const Matrix& flows, const PhysicsContext& ctx,
                       bool grad) {
  check_shapes(inputs, outputs, flows);
  const Eigen::Index B = outputs.cols();
  const auto& stations = massflow_stations();
  for (Station s : stations) {
    if (!(ctx.areas[idx(s)] > 0.0)) {
      throw ConfigError("missing area for station " + std::to_string(station_number(s)));
    }
  }
  LossTerm t;
  if (grad) {
    t.d_outputs = Matrix::Zero(kOutputCount, B);
    t.d_flows = Matrix::Zero(flows.rows(), B);
    t.d_inputs = Matrix::Zero(inputs.rows(), B);
  }
  const double norm = 1.0 / (static_cast<double>(B) * static_cast<double>(stations.size()));
  for (Eigen::Index j = 0; j < B; ++j) {
    const double WF = inputs(hybrid::kWF, j);
    for (Station s : stations) {
      const int iT = output_index(s, hybrid::kT);
      const double W = flows(row_of(s), j);
      const bool fuel = carries_fuel(s);
      const double far = fuel ? WF / (W - WF) : 0.0;
      const thermo::FlowSensitivity q = thermo::mass_flow_sensitivity(
          outputs(iT, j), outputs(iT + 1, j), outputs(iT + 2, j), ctx.areas[idx(s)], ctx.gas, far);
      const double r = (W - q.Q) / W;
      t.value += norm * r * r;
      if (!grad) continue;
      const double dQ = -norm * 2.0 * r / W;  // dL/dQ
      t.d_outputs(iT, j) += dQ * q.dT;
      t.d_outputs(iT + 1, j) += dQ * q.dP;
      t.d_outputs(iT + 2, j) += dQ * q.dMa;
      double dW = norm * 2.0 * r * q.Q / (W * W);
      if (fuel) {
        const double den = (W - WF) * (W - WF);
        dW += dQ * q.dfar * (-WF / den);
        t.d_inputs(hybrid::kWF, j) += dQ * q.dfar * (W / den);
      }
      t.d_flows(row_of(s), j) += dW;
    }
  }
  return t;
}

namespace {

// Variables the enthalpy terms depend on.
enum Var : int { vT2 = 0, vT25, vT13, vT3, vT4, vT44, vT6, vW2, vW25, vW13, vW3, vW4, vW44, vW6, vWF, kVarCount };

struct Linear {
  double value = 0.0;
  std::array<double, kVarCount> d{};
};

struct PowerTerms {
  Linear lpt, hpt, hpc, lpc;
};

PowerTerms power_terms(const Matrix& inputs, const Matrix& outputs, const Matrix& flows, Eigen::Index j,
                       const Bleeds& b) {
  auto T = [&](Station s) { return outputs(output_index(s, hybrid::kT), j); };
  auto W = [&](Station s) { return flows(row_of(s), j); };
  const double WF = inputs(hybrid::kWF, j);

  const auto e2 = thermo::enthalpy_sensitivity(inputs(hybrid::kT2, j), 0.0);
  const auto e25 = thermo::enthalpy_sensitivity(T(Station::S25), 0.0);
  const auto e13 = thermo::enthalpy_sensitivity(T(Station::S13), 0.0);
  const auto e3 = thermo::enthalpy_sensitivity(T(Station::S3), 0.0);

  struct Burnt {
    thermo::EnthalpySensitivity e;
    double W, dfar_dW, dfar_dWF;
  };
  auto burnt = [&](Station s) {
    const double w = W(s);
    const double den = (w - WF) * (w - WF);
    return Burnt{thermo::enthalpy_sensitivity(T(s), WF / (w - WF)), w, -WF / den, w / den};
  };
  const Burnt b4 = burnt(Station::S4);
  const Burnt b44 = burnt(Station::S44);
  const Burnt b6 = burnt(Station::S6);

  const double W2 = W(Station::S2);
  const double W25 = W(Station::S25);
  const double W13 = W(Station::S13);
  const double W3 = W(Station::S3);

  PowerTerms p;
  // H flows of burnt-gas stations: value, d/dT, d/dW (incl. composition), d/dWF
  auto H = [](const Burnt& x) {
    return std::array<double, 4>{x.W * x.e.h, x.W * x.e.dT, x.e.h + x.W * x.e.dfar * x.dfar_dW,
                                 x.W * x.e.dfar * x.dfar_dWF};
  };
  const auto H4 = H(b4);
  const auto H44 = H(b44);
  const auto H6 = H(b6);

  Linear& lpc = p.lpc;
  lpc.value = W13 * e13.h + W25 * e25.h - W2 * e2.h;
  lpc.d[vT13] = W13 * e13.dT;
  lpc.d[vT25] = W25 * e25.dT;
  lpc.d[vT2] = -W2 * e2.dT;
  lpc.d[vW13] = e13.h;
  lpc.d[vW25] = e25.h;
  lpc.d[vW2] = -e2.h;

  Linear& hpc = p.hpc;
  hpc.value = W3 * e3.h + b.lngv_cl * W25 * e3.h - W25 * e25.h;
  hpc.d[vT3] = (W3 + b.lngv_cl * W25) * e3.dT;
  hpc.d[vT25] = -W25 * e25.dT;
  hpc.d[vW3] = e3.h;
  hpc.d[vW25] = b.lngv_cl * e3.h - e25.h;

  Linear& hpt = p.hpt;
  hpt.value = H4[0] + b.hngv_cl * W25 * e3.h - (H44[0] - b.hpt_cl * W25 * e3.h);
  hpt.d[vT4] = H4[1];
  hpt.d[vT44] = -H44[1];
  hpt.d[vT3] = (b.hngv_cl + b.hpt_cl) * W25 * e3.dT;
  hpt.d[vW4] = H4[2];
  hpt.d[vW44] = -H44[2];
  hpt.d[vW25] = (b.hngv_cl + b.hpt_cl) * e3.h;
  hpt.d[vWF] = H4[3] - H44[3];

  Linear& lpt = p.lpt;
  lpt.value = H44[0] + b.lngv_cl * W25 * e3.h - H6[0];
  lpt.d[vT44] = H44[1];
  lpt.d[vT3] = b.lngv_cl * W25 * e3.dT;
  lpt.d[vT6] = -H6[1];
  lpt.d[vW44] = H44[2];
  lpt.d[vW6] = -H6[2];
  lpt.d[vW25] = b.lngv_cl * e3.h;
  lpt.d[vWF] = H44[3] - H6[3];
  return p;
}

void scatter(const std::array<double, kVarCount>& g, Eigen::Index j, LossTerm& t) {
  auto out = [&](Station s, int v) { t.d_outputs(output_index(s, hybrid::kT), j) += g[static_cast<std::size_t>(v)]; };
  auto flow = [&](Station s, int v) { t.d_flows(row_of(s), j) += g[static_cast<std::size_t>(v)]; };
  t.d_inputs(hybrid::kT2, j) += g[vT2];
  t.d_inputs(hybrid::kWF, j) += g[vWF];
  out(Station::S25, vT25);
  out(Station::S13, vT13);
  out(Station::S3, vT3);
  out(Station::S4, vT4);
  out(Station::S44, vT44);
  out(Station::S6, vT6);
  flow(Station::S2, vW2);
  flow(Station::S25, vW25);
  flow(Station::S13, vW13);
  flow(Station::S3, vW3);
  flow(Station::S4, vW4);
  flow(Station::S44, vW44);
  flow(Station::S6, vW6);
}

}  // namespace

EnthalpyTerms enthalpy_terms(const Matrix& inputs, const Matrix& outputs, const Matrix& flows, Eigen::Index col,
                             const PhysicsContext& ctx) {
  check_shapes(inputs, outputs, flows);
  const PowerTerms p = power_terms(inputs, outputs, flows, col, ctx.bleeds);
  return {p.lpt.value, p.hpt.value, p.hpc.value, p.lpc.value};
}

LossTerm loss_power(const Matrix& inputs, const Matrix& outputs, const Matrix& flows, const PhysicsContext& ctx,
                    bool grad) {
  check_shapes(inputs, outputs, flows);
  const Eigen::Index B = outputs.cols();
  LossTerm t;
  if (grad) {
    t.d_outputs = Matrix::Zero(kOutputCount, B);
    t.d_flows = Matrix::Zero(flows.rows(), B);
    t.d_inputs = Matrix::Zero(inputs.rows(), B);
  }
  const double norm = 1.0 / static_cast<double>(B);
  const double eta_l = ctx.shafts.eta_l;
  const double eta_h = ctx.shafts.eta_h;
  const double p_ext = ctx.shafts.p_ext;
  for (Eigen::Index j = 0; j < B; ++j) {
    const PowerTerms p = power_terms(inputs, outputs, flows, j, ctx.bleeds);
    const double L = p.lpt.value;
    const double H = p.hpt.value;
    if (!(std::abs(L) > 1.0) || !(std::abs(H) > 1.0)) {
      throw DomainError("degenerate operating point: vanishing turbine enthalpy drop");
    }
    const double a = (eta_l * L - p.lpc.value) / L;
    const double c = (eta_h * H - p.hpc.value - p_ext) / H;
    t.value += norm * (a * a + c * c);
    if (!grad) continue;
    const double ga = norm * 2.0 * a;
    const double gc = norm * 2.0 * c;
    const double dL = ga * p.lpc.value / (L * L);
    const double dLpc = -ga / L;
    const double dH = gc * (p.hpc.value + p_ext) / (H * H);
    const double dHpc = -gc / H;
    std::array<double, kVarCount> g{};
    for (std::size_t v = 0; v < g.size(); ++v) {
      g[v] = dL * p.lpt.d[v] + dLpc * p.lpc.d[v] + dH * p.hpt.d[v] + dHpc * p.hpc.d[v];
    }
    scatter(g, j, t);
  }
  return t;
}

}  // namespace gtnet::physics
