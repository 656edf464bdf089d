#pragma once

#include <filesystem>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gtnet/cycle.hpp"
#include "gtnet/datasets.hpp"
#include "gtnet/hybrid_net.hpp"
#include "gtnet/physics_loss.hpp"

namespace gtnet::wsolve {

struct WSolveOptions {
  int max_iterations = 200;
  double gradient_tol = 1e-8;  // on the gradient w.r.t. (W2/W2_0, W25/W25_0)
  double objective_tol = 1e-12;
  int max_backtracks = 40;
  double armijo = 1e-4;
  // Coarse grid over W2 in [scan_low, scan_high] x W2_0 and the W25/W2 ratio
  // within +-scan_ratio of the initial ratio; the descent starts from the
  // best grid point. scan_steps = 0 starts from the initial guess directly.
  int scan_steps = 18;
  double scan_low = 0.6;
  double scan_high = 1.5;
  double scan_ratio = 0.2;
};

struct WSolveResult {
  double W2 = 0.0;
  double W25 = 0.0;
  double final_objective = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct Objective {
  double value = 0.0;
  Eigen::Vector2d gradient = Eigen::Vector2d::Zero();  // d/dW2, d/dW25
};

// loss2 + loss3 of the frozen model for one sample with W2, W25 substituted.
Objective objective(const hybrid::HybridModel& model, const physics::PhysicsContext& ctx, const Eigen::VectorXd& x,
                    double W2, double W25);

// Objective values only, for a batch of (W2, W25) candidates sharing the other
// inputs. Candidates where the cascade fails get +inf.
std::vector<double> objective_values(const hybrid::HybridModel& model, const physics::PhysicsContext& ctx,
                                     const Eigen::VectorXd& x, const std::vector<Eigen::Vector2d>& w);

// Gradient descent with Barzilai-Borwein trial steps and Armijo backtracking
// in coordinates scaled by the initial guess, projected onto 0 < W25 < W2.
// Non-convergence is reported in the result, not thrown.
WSolveResult solve_w(const hybrid::HybridModel& model, const physics::PhysicsContext& ctx, const Eigen::VectorXd& x,
                     double W2_0, double W25_0, const WSolveOptions& opts = {});

// Corrected-flow similarity from the design point:
// W2 = W2d (P2/P2d) / sqrt(T2/T2d), W25 = W2 / (1 + bpr_d).
std::pair<double, double> similarity_init(const cycle::EngineConfig& cfg, double T2, double P2);

// Independent per-sample solves over a dataset, initialised by similarity.
std::vector<WSolveResult> solve_w_batch(const hybrid::HybridModel& model, const cycle::EngineConfig& cfg,
                                        const data::Dataset& d, const WSolveOptions& opts = {}, int jobs = 1);

// Copy of d with the W2, W25 inputs replaced by solved values.
data::Dataset with_solved_flows(const data::Dataset& d, const std::vector<WSolveResult>& r);

// Columns: sample W2 W25 objective converged
void save_results(const std::filesystem::path& path, const std::vector<WSolveResult>& r);

}  // namespace gtnet::wsolve
