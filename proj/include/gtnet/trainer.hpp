#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gtnet/datasets.hpp"
#include "gtnet/hybrid_net.hpp"
#include "gtnet/physics_loss.hpp"

namespace gtnet::train {

struct PhaseConfig {
  nn::TrainConfig train;
  physics::LossWeights weights;
  // loss2 and loss3 are left out of the objective for physics_warmup_epochs,
  // then their weights grow linearly to full over physics_ramp_epochs
  int physics_warmup_epochs = 10;
  int physics_ramp_epochs = 40;
  // samples whose own loss2 or loss3 exceeds this are left out of both
  double physics_limit = 1.0;
  int checkpoint_every = 100;
  // Run directory; nothing is written when empty.
  std::filesystem::path run_dir;
};

struct HistoryRow {
  int epoch = 0;  // 1-based
  double loss1 = 0.0;
  double loss2 = 0.0;
  double loss3 = 0.0;
  double lr = 0.0;
  std::size_t skipped = 0;             // samples left out of the physics terms
  std::vector<double> test_max_error;  // one per evaluated parameter
  double total() const { return loss1 + loss2 + loss3; }
};

struct History {
  std::vector<std::string> parameters;  // names of test_max_error entries
  std::vector<HistoryRow> rows;
};

// Columns: epoch loss1 loss2 loss3 lr total skipped maxerr:<name>...
void write_history(const std::filesystem::path& path, const History& h);

// Batch loss of one phase, exposed for tests. Fills per-net gradients and
// returns loss1, loss2, loss3 (weighted) in parts.
struct PhaseLoss {
  const hybrid::HybridModel* model = nullptr;
  const physics::PhysicsContext* ctx = nullptr;
  const data::Dataset* data = nullptr;
  std::vector<int> selector;  // output rows matching data->y rows
  physics::LossWeights weights;
  double physics_limit = 1.0;

  double operator()(std::span<const std::size_t> batch, std::vector<nn::Mlp::Gradients>& grads,
                    std::vector<double>& parts, std::size_t* skipped = nullptr) const;
};

// Max relative error per selected output over a dataset.
std::vector<double> max_relative_errors(const hybrid::HybridModel& model, const data::Dataset& d,
                                        const std::vector<int>& selector);

// Phase one: fits the normalisers on the training split, then minimises
// loss1 (all 27 outputs) + loss2 + loss3.
History pretrain_mc(hybrid::HybridModel& model, const data::SplitDataset& mc, const PhaseConfig& cfg,
                    const physics::PhysicsContext& ctx);

// Phase two: normalisers stay frozen; loss1 covers the selected outputs only.
// An empty training split leaves the model untouched.
History train_fd(hybrid::HybridModel& model, const data::SplitDataset& fd, const PhaseConfig& cfg,
                 const std::vector<int>& selector, const physics::PhysicsContext& ctx);

}  // namespace gtnet::train
