#pragma once

#include <array>
#include <vector>

#include "gtnet/cycle.hpp"
#include "gtnet/gas_thermo.hpp"
#include "gtnet/hybrid_net.hpp"
#include "gtnet/mass_flows.hpp"

namespace gtnet::physics {

using nn::Matrix;

// Everything the thermodynamic losses need from the engine configuration.
struct PhysicsContext {
  std::array<double, kStationCount> areas{};
  cycle::ShaftConfig shafts;
  thermo::GasModel gas;
  Bleeds bleeds;

  static PhysicsContext from_config(const cycle::EngineConfig& cfg);
};

struct LossWeights {
  double params = 1.0;
  double massflow = 1.0;
  double power = 1.0;
};

struct LossBreakdown {
  double loss1 = 0.0;
  double loss2 = 0.0;
  double loss3 = 0.0;
  double total() const { return loss1 + loss2 + loss3; }
};

// A batch-mean loss and its gradients with respect to the cascade outputs
// (27 x B), station flows (14 x B) and engine inputs (9 x B). Gradient
// matrices are left empty when not requested.
struct LossTerm {
  double value = 0.0;
  Matrix d_outputs;
  Matrix d_flows;
  Matrix d_inputs;
};

// Output rows compared against flight records (T6 only in the test case).
std::vector<int> selector_all();
std::vector<int> selector_from_names(const std::vector<std::string>& names);

// (1/N) sum_samples mean_{k in selector} (pred_k - y_k)^2 / y_k^2. target has
// one row per selector entry. Throws DomainError on a zero target.
LossTerm loss_params(const Matrix& pred, const Matrix& target, const std::vector<int>& selector, bool grad = true);
LossTerm loss_params_mc(const Matrix& pred, const Matrix& target, bool grad = true);
LossTerm loss_params_fd(const Matrix& pred, const Matrix& target, const std::vector<int>& selector,
                        bool grad = true);

// Stations entering the continuity loss: 25 13 3 4 44 6 16 64 8.
const std::vector<Station>& massflow_stations();

// (1/N)(1/M) sum (W_i - Q(T_i, P_i, Ma_i, A_i))^2 / W_i^2 with W_i from the
// flow bookkeeping and far_i = WF / (W_i - WF) behind the burner.
LossTerm loss_massflow(const Matrix& inputs, const Matrix& outputs, const Matrix& flows, const PhysicsContext& ctx,
                       bool grad = true);

// Enthalpy flows [W] of one sample:
//   LPT = H44 + H_LNGV - H6          HPC = H3 + H_LNGV - H25
//   HPT = H4 + H_HNGV - (H44 - H_HPT)  LPC = H13 + H25 - H2
// with H_i = W_i h(T_i, far_i) and cooling flows at h(T3, 0).
struct EnthalpyTerms {
  double lpt = 0.0;
  double hpt = 0.0;
  double hpc = 0.0;
  double lpc = 0.0;
};
EnthalpyTerms enthalpy_terms(const Matrix& inputs, const Matrix& outputs, const Matrix& flows, Eigen::Index col,
                             const PhysicsContext& ctx);

// (1/N) sum [ (eta_l LPT - LPC)^2 / LPT^2 + (eta_h HPT - HPC - P_ext)^2 / HPT^2 ].
// Throws DomainError when a turbine enthalpy drop vanishes.
LossTerm loss_power(const Matrix& inputs, const Matrix& outputs, const Matrix& flows, const PhysicsContext& ctx,
                    bool grad = true);

}  // namespace gtnet::physics
