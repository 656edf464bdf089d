#include "gtnet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gtnet/errors.hpp"
#include "gtnet/kv_file.hpp"

namespace gtnet::train {

using hybrid::HybridModel;
using nn::Matrix;

namespace {

Matrix take(const Matrix& m, std::span<const std::size_t> cols) {
  Matrix out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = m.col(static_cast<Eigen::Index>(cols[j]));
  return out;
}

struct PhysicsPart {
  double loss2 = 0.0;
  double loss3 = 0.0;
  Matrix d_outputs;
  Matrix d_flows;
  std::size_t skipped = 0;
};

void add_weighted(PhysicsPart& p, const physics::LossTerm& t, double w, Eigen::Index col) {
  p.d_outputs.col(col) += w * t.d_outputs.col(0);
  p.d_flows.col(col) += w * t.d_flows.col(0);
}

// loss2 and loss3 over the batch. Samples whose predicted states fall outside
// the property domain, give non-finite terms, or whose own loss2 or loss3
// exceeds limit contribute nothing and are counted.
PhysicsPart physics_terms(const hybrid::Cascade& c, const physics::PhysicsContext& ctx,
                          const physics::LossWeights& w, double limit) {
  const Eigen::Index B = c.outputs.cols();
  PhysicsPart p;
  p.d_outputs = Matrix::Zero(c.outputs.rows(), B);
  p.d_flows = Matrix::Zero(c.flows.rows(), B);
  if (w.massflow == 0.0 && w.power == 0.0) return p;
  auto usable = [limit](const physics::LossTerm& t) {
    return std::isfinite(t.value) && t.value <= limit && t.d_outputs.allFinite() && t.d_flows.allFinite();
  };
  const double inv_b = 1.0 / static_cast<double>(B);
  for (Eigen::Index j = 0; j < B; ++j) {
    try {
      const auto l2 = physics::loss_massflow(c.inputs.col(j), c.outputs.col(j), c.flows.col(j), ctx);
      const auto l3 = physics::loss_power(c.inputs.col(j), c.outputs.col(j), c.flows.col(j), ctx);
      if (!usable(l2) || !usable(l3)) {
        ++p.skipped;
        continue;
      }
      p.loss2 += inv_b * w.massflow * l2.value;
      p.loss3 += inv_b * w.power * l3.value;
      add_weighted(p, l2, inv_b * w.massflow, j);
      add_weighted(p, l3, inv_b * w.power, j);
    } catch (const DomainError&) {
      ++p.skipped;
    }
  }
  return p;
}

void write_config_snapshot(const std::filesystem::path& path, const char* phase, const PhaseConfig& cfg,
                           const data::SplitDataset& d, const std::vector<int>& selector) {
  KeyValueFile kv;
  kv.set("format", std::string("gtnet-train-config"));
  kv.set("version", 1LL);
  kv.set("phase", std::string(phase));
  kv.set("epochs", static_cast<long long>(cfg.train.epochs));
  kv.set("learning_rate", cfg.train.learning_rate);
  kv.set("decay_factor", cfg.train.decay_factor);
  kv.set("decay_every_epochs", static_cast<long long>(cfg.train.decay_every_epochs));
  kv.set("batch_size", static_cast<long long>(cfg.train.batch_size));
  kv.set("seed", std::to_string(cfg.train.seed));
  kv.set("optimizer", std::string(cfg.train.optimizer == nn::OptimizerKind::Adam ? "adam" : "sgd"));
  kv.set("weight.params", cfg.weights.params);
  kv.set("weight.massflow", cfg.weights.massflow);
  kv.set("weight.power", cfg.weights.power);
  kv.set("physics_warmup_epochs", static_cast<long long>(cfg.physics_warmup_epochs));
  kv.set("physics_ramp_epochs", static_cast<long long>(cfg.physics_ramp_epochs));
  kv.set("physics_limit", cfg.physics_limit);
  kv.set("checkpoint_every", static_cast<long long>(cfg.checkpoint_every));
  kv.set("train_samples", static_cast<long long>(d.train.size()));
  kv.set("test_samples", static_cast<long long>(d.test.size()));
  std::string sel;
  for (int s : selector) sel += (sel.empty() ? "" : ",") + hybrid::output_name(s);
  kv.set("selector", sel);
  kv.save(path);
}

History run_phase(HybridModel& model, const data::SplitDataset& d, const PhaseConfig& cfg,
                  const std::vector<int>& selector, const physics::PhysicsContext& ctx, const char* phase) {
  cfg.train.validate();
  if (cfg.checkpoint_every <= 0) throw ConfigError("checkpoint interval must be positive");
  if (!(cfg.physics_limit > 0.0)) throw ConfigError("physics limit must be positive");
  if (cfg.physics_warmup_epochs < 0 || cfg.physics_ramp_epochs < 0) {
    throw ConfigError("warm-up and ramp epochs must be non-negative");
  }
  History h;
  for (int s : selector) h.parameters.push_back(hybrid::output_name(s));
  if (d.train.size() == 0) return h;
  if (d.train.y.rows() != static_cast<Eigen::Index>(selector.size())) {
    throw ConfigError("training targets do not match the selector");
  }
  const bool write = !cfg.run_dir.empty();
  if (write) {
    std::filesystem::create_directories(cfg.run_dir);
    write_config_snapshot(cfg.run_dir / "config.txt", phase, cfg, d, selector);
  }

  PhaseLoss loss{&model, &ctx, &d.train, selector, cfg.weights, cfg.physics_limit};
  int epoch = 0;
  std::size_t skipped = 0;
  nn::BatchLoss batch_loss = [&](std::span<const std::size_t> batch, std::vector<nn::Mlp::Gradients>& grads,
                                 std::vector<double>& parts) {
    const double ramp = std::clamp(static_cast<double>(epoch - cfg.physics_warmup_epochs + 1) /
                                       static_cast<double>(cfg.physics_ramp_epochs + 1), 0.0, 1.0);
    loss.weights = cfg.weights;
    loss.weights.massflow *= ramp;
    loss.weights.power *= ramp;
    double value = 0.0;
    std::string reason;
    try {
      value = loss(batch, grads, parts, &skipped);
      if (!std::isfinite(value)) reason = "non-finite loss";
    } catch (const CascadeError& e) {
      reason = e.what();
    }
    if (reason.empty()) return value;
    std::ostringstream os;
    os << phase << " diverged in epoch " << epoch + 1 << ": " << reason;
    if (parts.size() == 3) os << " (loss1 " << parts[0] << ", loss2 " << parts[1] << ", loss3 " << parts[2] << ")";
    if (write) {
      const std::vector<std::size_t> cols(batch.begin(), batch.end());
      const auto path = cfg.run_dir / "divergent_batch.txt";
      data::save_dataset(path, d.train.subset(cols));
      os << "; batch written to " << path.string();
    }
    throw DivergenceError(os.str(), epoch + 1);
  };

  auto on_epoch = [&](const nn::EpochRecord& r) {
    HistoryRow row;
    row.epoch = r.epoch + 1;
    row.lr = r.lr;
    row.loss1 = r.parts.size() > 0 ? r.parts[0] : 0.0;
    row.loss2 = r.parts.size() > 1 ? r.parts[1] : 0.0;
    row.loss3 = r.parts.size() > 2 ? r.parts[2] : 0.0;
    row.skipped = skipped;
    skipped = 0;
    if (d.test.size() > 0) row.test_max_error = max_relative_errors(model, d.test, selector);
    h.rows.push_back(row);
    epoch = r.epoch + 1;
    if (write && row.epoch % cfg.checkpoint_every == 0) {
      hybrid::save_model(cfg.run_dir / ("checkpoint-" + std::to_string(row.epoch)), model);
    }
  };

  nn::train(model.net_pointers(), d.train.size(), batch_loss, cfg.train, on_epoch);
  if (write) {
    write_history(cfg.run_dir / "history.txt", h);
    hybrid::save_model(cfg.run_dir / "model", model);
  }
  return h;
}

}  // namespace

double PhaseLoss::operator()(std::span<const std::size_t> batch, std::vector<nn::Mlp::Gradients>& grads,
                             std::vector<double>& parts, std::size_t* skipped) const {
  const Matrix x = take(data->x, batch);
  const Matrix y = take(data->y, batch);
  const hybrid::Cascade c = hybrid::forward_cascade(*model, x);
  const auto l1 = physics::loss_params(c.outputs, y, selector);
  PhysicsPart p = physics_terms(c, *ctx, weights, physics_limit);
  if (skipped) *skipped += p.skipped;
  p.d_outputs += weights.params * l1.d_outputs;
  hybrid::CascadeGradients cg;
  cg.nets = std::move(grads);
  hybrid::gradient_through_cascade(*model, c, p.d_outputs, p.d_flows, cg);
  grads = std::move(cg.nets);
  parts = {weights.params * l1.value, p.loss2, p.loss3};
  return parts[0] + parts[1] + parts[2];
}

std::vector<double> max_relative_errors(const HybridModel& model, const data::Dataset& d,
                                        const std::vector<int>& selector) {
  std::vector<double> out(selector.size(), 0.0);
  if (d.size() == 0) return out;
  const Matrix pred = hybrid::predict(model, d.x);
  for (std::size_t k = 0; k < selector.size(); ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    const auto truth = d.y.row(row).array();
    out[k] = ((pred.row(selector[k]).array() - truth) / truth).abs().maxCoeff();
  }
  return out;
}

void write_history(const std::filesystem::path& path, const History& h) {
  std::ostringstream os;
  os << "epoch loss1 loss2 loss3 lr total skipped";
  for (const auto& p : h.parameters) os << " maxerr:" << p;
  os << '\n';
  for (const auto& r : h.rows) {
    os << r.epoch << ' ' << format_double(r.loss1) << ' ' << format_double(r.loss2) << ' ' << format_double(r.loss3)
       << ' ' << format_double(r.lr) << ' ' << format_double(r.total()) << ' ' << r.skipped;
    for (double e : r.test_max_error) os << ' ' << format_double(e);
    os << '\n';
  }
  write_text_file(path, os.str());
}

History pretrain_mc(HybridModel& model, const data::SplitDataset& mc, const PhaseConfig& cfg,
                    const physics::PhysicsContext& ctx) {
  model.validate();
  if (mc.train.y.rows() != hybrid::kOutputCount) throw ConfigError("pre-training needs all 27 station targets");
  if (mc.train.size() > 0) model.fit_normalizers(mc.train.x, mc.train.y);
  return run_phase(model, mc, cfg, physics::selector_all(), ctx, "pretrain");
}

History train_fd(HybridModel& model, const data::SplitDataset& fd, const PhaseConfig& cfg,
                 const std::vector<int>& selector, const physics::PhysicsContext& ctx) {
  model.validate();
  if (model.use_ma2) throw ConfigError("flight data carries no Ma2; the model must be built without it");
  return run_phase(model, fd, cfg, selector, ctx, "train-fd");
}

}  // namespace gtnet::train
