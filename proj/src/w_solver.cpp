#include "gtnet/w_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "gtnet/errors.hpp"
#include "gtnet/kv_file.hpp"
#include "gtnet/parallel.hpp"

namespace gtnet::wsolve {

using hybrid::kW2;
using hybrid::kW25;

Objective objective(const hybrid::HybridModel& model, const physics::PhysicsContext& ctx, const Eigen::VectorXd& x,
                    double W2, double W25) {
  if (x.size() != hybrid::kInputCount) throw ConfigError("w solver expects a 9-element input vector");
  nn::Matrix in = x;
  in(kW2, 0) = W2;
  in(kW25, 0) = W25;
  const hybrid::Cascade c = hybrid::forward_cascade(model, in);
  const auto l2 = physics::loss_massflow(c.inputs, c.outputs, c.flows, ctx);
  const auto l3 = physics::loss_power(c.inputs, c.outputs, c.flows, ctx);
  hybrid::CascadeGradients g;
  hybrid::gradient_through_cascade(model, c, l2.d_outputs + l3.d_outputs, l2.d_flows + l3.d_flows, g);
  const nn::Matrix d_in = g.inputs + l2.d_inputs + l3.d_inputs;
  Objective o;
  o.value = l2.value + l3.value;
  o.gradient = {d_in(kW2, 0), d_in(kW25, 0)};
  return o;
}

std::vector<double> objective_values(const hybrid::HybridModel& model, const physics::PhysicsContext& ctx,
                                     const Eigen::VectorXd& x, const std::vector<Eigen::Vector2d>& w) {
  if (x.size() != hybrid::kInputCount) throw ConfigError("w solver expects a 9-element input vector");
  const auto B = static_cast<Eigen::Index>(w.size());
  std::vector<double> out(w.size(), std::numeric_limits<double>::infinity());
  if (B == 0) return out;
  nn::Matrix in = x.replicate(1, B);
  for (Eigen::Index j = 0; j < B; ++j) {
    in(kW2, j) = w[static_cast<std::size_t>(j)][0];
    in(kW25, j) = w[static_cast<std::size_t>(j)][1];
  }
  hybrid::Cascade c;
  try {
    c = hybrid::forward_cascade(model, in);
  } catch (const Error&) {
    // one bad candidate poisons the batch; fall back to single evaluations
    for (std::size_t k = 0; k < w.size(); ++k) {
      try {
        out[k] = objective(model, ctx, x, w[k][0], w[k][1]).value;
      } catch (const Error&) {
      }
    }
    return out;
  }
  for (Eigen::Index j = 0; j < B; ++j) {
    try {
      const auto xi = c.inputs.col(j), yi = c.outputs.col(j), fi = c.flows.col(j);
      const double v = physics::loss_massflow(xi, yi, fi, ctx, false).value +
                       physics::loss_power(xi, yi, fi, ctx, false).value;
      if (std::isfinite(v)) out[static_cast<std::size_t>(j)] = v;
    } catch (const Error&) {
    }
  }
  return out;
}

namespace {

constexpr double kFloor = 1e-6;

Eigen::Vector2d project(Eigen::Vector2d s, const Eigen::Vector2d& w0) {
  const double W2 = std::max(s[0] * w0[0], kFloor * w0[0]);
  const double W25 = std::clamp(s[1] * w0[1], kFloor * W2, (1.0 - kFloor) * W2);
  return {W2 / w0[0], W25 / w0[1]};
}

}  // namespace

WSolveResult solve_w(const hybrid::HybridModel& model, const physics::PhysicsContext& ctx, const Eigen::VectorXd& x,
                     double W2_0, double W25_0, const WSolveOptions& opts) {
  if (!(W25_0 > 0.0 && W25_0 < W2_0)) throw ConfigError("initial guess must satisfy 0 < W25 < W2");
  if (opts.max_iterations < 0 || opts.max_backtracks < 1 || opts.scan_steps < 0 ||
      !(opts.scan_low > 0.0 && opts.scan_high >= opts.scan_low) || !(opts.scan_ratio >= 0.0 && opts.scan_ratio < 1.0)) {
    throw ConfigError("bad w solver options");
  }
  const Eigen::Vector2d w0(W2_0, W25_0);
  auto eval = [&](const Eigen::Vector2d& s, Objective& o) {
    try {
      o = objective(model, ctx, x, s[0] * w0[0], s[1] * w0[1]);
      o.gradient = o.gradient.cwiseProduct(w0);  // scaled coordinates
      return std::isfinite(o.value) && o.gradient.allFinite();
    } catch (const Error&) {
      return false;
    }
  };

  WSolveResult r;
  Eigen::Vector2d s(1.0, 1.0);
  if (opts.scan_steps > 0) {
    std::vector<Eigen::Vector2d> grid{{W2_0, W25_0}};
    const int n = opts.scan_steps;
    const double ratio0 = W25_0 / W2_0;
    for (int a = 0; a <= n; ++a) {
      const double W2 = W2_0 * (opts.scan_low + (opts.scan_high - opts.scan_low) * a / n);
      for (int b = 0; b <= n / 2; ++b) {
        const double ratio = ratio0 * (1.0 - opts.scan_ratio + 2.0 * opts.scan_ratio * b / (n / 2));
        if (ratio < 1.0) grid.emplace_back(W2, ratio * W2);
      }
    }
    const std::vector<double> v = objective_values(model, ctx, x, grid);
    const auto best = static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin());
    if (std::isfinite(v[best])) s = grid[best].cwiseQuotient(w0);
  }
  Objective f;
  if (!eval(s, f)) {
    r.W2 = s[0] * W2_0;
    r.W25 = s[1] * W25_0;
    r.final_objective = std::numeric_limits<double>::quiet_NaN();
    r.gradient_norm = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  double alpha = 0.05 / std::max(f.gradient.norm(), 1e-300);
  for (;;) {
    r.gradient_norm = f.gradient.norm();
    if (f.value < opts.objective_tol || r.gradient_norm < opts.gradient_tol) {
      r.converged = true;
      break;
    }
    if (r.iterations >= opts.max_iterations) break;
    bool accepted = false;
    Eigen::Vector2d s_new;
    Objective f_new;
    for (int k = 0; k < opts.max_backtracks; ++k) {
      // cap the trial step at 0.2 in scaled units
      const double a = std::min(alpha, 0.2 / r.gradient_norm);
      s_new = project(s - a * f.gradient, w0);
      const Eigen::Vector2d step = s_new - s;
      if (eval(s_new, f_new) && f_new.value <= f.value + opts.armijo * f.gradient.dot(step)) {
        accepted = true;
        break;
      }
      alpha = 0.5 * a;
    }
    if (!accepted) break;
    const Eigen::Vector2d ds = s_new - s;
    const Eigen::Vector2d dg = f_new.gradient - f.gradient;
    const double sy = ds.dot(dg);
    alpha = sy > 0.0 ? ds.squaredNorm() / sy : 2.0 * alpha;
    s = s_new;
    f = f_new;
    ++r.iterations;
  }
  r.W2 = s[0] * w0[0];
  r.W25 = s[1] * w0[1];
  r.final_objective = f.value;
  return r;
}

std::pair<double, double> similarity_init(const cycle::EngineConfig& cfg, double T2, double P2) {
  if (!(T2 > 0.0 && P2 > 0.0)) throw ConfigError("similarity init needs positive T2 and P2");
  const auto& d = cfg.design;
  const double W2 = d.W2 * (P2 / d.P2) / std::sqrt(T2 / d.T2);
  return {W2, W2 / (1.0 + d.bpr)};
}

std::vector<WSolveResult> solve_w_batch(const hybrid::HybridModel& model, const cycle::EngineConfig& cfg,
                                        const data::Dataset& d, const WSolveOptions& opts, int jobs) {
  const physics::PhysicsContext ctx = physics::PhysicsContext::from_config(cfg);
  const std::size_t n = d.size();
  std::vector<WSolveResult> out(n);
  parallel_for(n, jobs, [&](std::size_t k) {
    const Eigen::VectorXd x = d.x.col(static_cast<Eigen::Index>(k));
    const auto [W2, W25] = similarity_init(cfg, x(hybrid::kT2), x(hybrid::kP2));
    out[k] = solve_w(model, ctx, x, W2, W25, opts);
  });
  return out;
}

data::Dataset with_solved_flows(const data::Dataset& d, const std::vector<WSolveResult>& r) {
  if (r.size() != d.size()) throw ConfigError("one w solve result per sample expected");
  data::Dataset out = d;
  for (std::size_t k = 0; k < r.size(); ++k) {
    const auto j = static_cast<Eigen::Index>(k);
    out.x(kW2, j) = r[k].W2;
    out.x(kW25, j) = r[k].W25;
  }
  return out;
}

void save_results(const std::filesystem::path& path, const std::vector<WSolveResult>& r) {
  std::ostringstream os;
  os << "sample W2 W25 objective converged\n";
  for (std::size_t k = 0; k < r.size(); ++k) {
    os << k << ' ' << format_double(r[k].W2) << ' ' << format_double(r[k].W25) << ' '
       << format_double(r[k].final_objective) << ' ' << (r[k].converged ? 1 : 0) << '\n';
  }
  write_text_file(path, os.str());
}

}  // namespace gtnet::wsolve
