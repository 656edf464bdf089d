#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace gtnet::nn {

using Matrix = Eigen::MatrixXd;  // features x batch
using Vector = Eigen::VectorXd;

// Fully connected network, ReLU on hidden layers, identity output.
class Mlp {
 public:
  Mlp() = default;
  // All parameters zero.
  explicit Mlp(std::vector<int> dims);
  // Uniform(-sqrt(6/fan_in), sqrt(6/fan_in)) weights, zero biases.
  static Mlp he_uniform(std::vector<int> dims, std::uint64_t seed);

  const std::vector<int>& dims() const { return dims_; }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  std::size_t layer_count() const { return weights_.size(); }
  std::size_t parameter_count() const;

  Matrix& weight(std::size_t layer) { return weights_[layer]; }
  const Matrix& weight(std::size_t layer) const { return weights_[layer]; }
  Vector& bias(std::size_t layer) { return biases_[layer]; }
  const Vector& bias(std::size_t layer) const { return biases_[layer]; }

  // Activations kept for the backward pass.
  struct Tape {
    std::vector<Matrix> inputs;  // input of each layer
    std::vector<Matrix> pre;     // pre-activation of each layer
  };

  Matrix forward(const Matrix& X) const;
  Vector forward(const Vector& x) const;
  Matrix forward(const Matrix& X, Tape& tape) const;

  struct Gradients {
    std::vector<Matrix> dW;
    std::vector<Vector> db;
    void zero();
    void scale(double s);
    void add(const Gradients& other);
  };
  Gradients zero_gradients() const;

  // Given dL/d(output), accumulates dL/d(params) into grads and returns
  // dL/d(input).
  Matrix backward(const Tape& tape, const Matrix& upstream, Gradients& grads) const;

  // Flat parameter view: layer by layer, W column-major then b.
  Vector flatten() const;
  void unflatten(const Vector& params);
  static Vector flatten(const Gradients& g);

  bool finite() const;

 private:
  void check_input(long rows) const;

  std::vector<int> dims_;
  std::vector<Matrix> weights_;
  std::vector<Vector> biases_;
};

// Per-feature affine standardisation z = (x - mean) / scale.
struct Standardizer {
  Vector mean;
  Vector scale;

  static Standardizer identity(int dim);
  // Columns of data are samples. Features with zero spread get scale 1.
  static Standardizer fit(const Matrix& data);
  Matrix apply(const Matrix& X) const;
  Matrix invert(const Matrix& Z) const;
  int dim() const { return static_cast<int>(mean.size()); }
};

void sgd_step(Mlp& net, const Mlp::Gradients& grads, double lr);

enum class OptimizerKind { Sgd, Adam };

struct TrainConfig {
  int epochs = 500;
  double learning_rate = 1e-3;
  double decay_factor = 0.1;  // lr *= (1 - decay_factor) every decay_every_epochs
  int decay_every_epochs = 100;
  int batch_size = 256;
  std::uint64_t seed = 1;
  OptimizerKind optimizer = OptimizerKind::Adam;

  // Throws ConfigError.
  void validate() const;
  // Learning rate during (0-based) epoch.
  double lr_at(int epoch) const;
};

// Updates a set of nets from matching gradients.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, std::vector<Mlp*> nets);
  void step(const std::vector<Mlp::Gradients>& grads, double lr);

 private:
  OptimizerKind kind_;
  std::vector<Mlp*> nets_;
  std::vector<Vector> m_;
  std::vector<Vector> v_;
  long t_ = 0;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double loss = 0.0;          // sample-weighted mean over the epoch's batches
  std::vector<double> parts;  // same averaging, per loss term
};

// Loss over one mini-batch (indices into the training set). Must fill grads
// (one entry per net, already zeroed by the caller) and may fill parts.
using BatchLoss = std::function<double(std::span<const std::size_t> batch, std::vector<Mlp::Gradients>& grads,
                                       std::vector<double>& parts)>;
using EpochCallback = std::function<void(const EpochRecord&)>;

// Mini-batch training with per-epoch shuffling driven by cfg.seed only.
// Throws DivergenceError on a non-finite batch loss.
std::vector<EpochRecord> train(const std::vector<Mlp*>& nets, std::size_t n_samples, const BatchLoss& loss,
                               const TrainConfig& cfg, const EpochCallback& on_epoch = {});

// Text checkpoint "gtnet-mlp 1" with dims, normalisers and parameters in
// round-trip decimal.
struct NetCheckpoint {
  Mlp net;
  Standardizer input;
  Standardizer output;
};
void write_checkpoint(std::ostream& os, const NetCheckpoint& ck);
NetCheckpoint read_checkpoint(std::istream& is);

}  // namespace gtnet::nn
