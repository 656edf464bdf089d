#include "gtnet/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

#include "gtnet/errors.hpp"
#include "gtnet/kv_file.hpp"

namespace gtnet::nn {

Mlp::Mlp(std::vector<int> dims) : dims_(std::move(dims)) {
  if (dims_.size() < 2) throw ConfigError("an MLP needs at least input and output widths");
  for (int d : dims_) {
    if (d <= 0) throw ConfigError("layer widths must be positive");
  }
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    weights_.push_back(Matrix::Zero(dims_[l + 1], dims_[l]));
    biases_.push_back(Vector::Zero(dims_[l + 1]));
  }
}

Mlp Mlp::he_uniform(std::vector<int> dims, std::uint64_t seed) {
  Mlp net(std::move(dims));
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < net.weights_.size(); ++l) {
    const double limit = std::sqrt(6.0 / net.dims_[l]);
    std::uniform_real_distribution<double> dist(-limit, limit);
    Matrix& W = net.weights_[l];
    for (Eigen::Index j = 0; j < W.cols(); ++j) {
      for (Eigen::Index i = 0; i < W.rows(); ++i) W(i, j) = dist(rng);
    }
  }
  return net;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) n += weights_[l].size() + biases_[l].size();
  return n;
}

void Mlp::check_input(long rows) const {
  if (dims_.empty()) throw ConfigError("empty network");
  if (rows != dims_.front()) {
    throw ConfigError("input dimension " + std::to_string(rows) + " does not match network input " +
                      std::to_string(dims_.front()));
  }
}

Matrix Mlp::forward(const Matrix& X) const {
  check_input(X.rows());
  Matrix a = X;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Matrix z = weights_[l] * a;
    z.colwise() += biases_[l];
    if (l + 1 < weights_.size()) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  return a;
}

Vector Mlp::forward(const Vector& x) const { return forward(Matrix(x)).col(0); }

Matrix Mlp::forward(const Matrix& X, Tape& tape) const {
  check_input(X.rows());
  tape.inputs.resize(weights_.size());
  tape.pre.resize(weights_.size());
  Matrix a = X;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    tape.inputs[l] = a;
    Matrix z = weights_[l] * a;
    z.colwise() += biases_[l];
    tape.pre[l] = z;
    a = l + 1 < weights_.size() ? Matrix(z.cwiseMax(0.0)) : z;
  }
  return a;
}

Mlp::Gradients Mlp::zero_gradients() const {
  Gradients g;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    g.dW.push_back(Matrix::Zero(weights_[l].rows(), weights_[l].cols()));
    g.db.push_back(Vector::Zero(biases_[l].size()));
  }
  return g;
}

void Mlp::Gradients::zero() {
  for (auto& m : dW) m.setZero();
  for (auto& v : db) v.setZero();
}

void Mlp::Gradients::scale(double s) {
  for (auto& m : dW) m *= s;
  for (auto& v : db) v *= s;
}

void Mlp::Gradients::add(const Gradients& other) {
  for (std::size_t l = 0; l < dW.size(); ++l) {
    dW[l] += other.dW[l];
    db[l] += other.db[l];
  }
}

Matrix Mlp::backward(const Tape& tape, const Matrix& upstream, Gradients& grads) const {
  const std::size_t L = weights_.size();
  if (tape.pre.size() != L) throw ConfigError("tape does not belong to this network");
  if (upstream.rows() != dims_.back() || upstream.cols() != tape.pre.back().cols()) {
    throw ConfigError("upstream gradient shape mismatch");
  }
  if (grads.dW.size() != L) grads = zero_gradients();
  Matrix delta = upstream;
  for (std::size_t k = L; k-- > 0;) {
    if (k + 1 < L) delta = delta.cwiseProduct((tape.pre[k].array() > 0.0).cast<double>().matrix());
    grads.dW[k].noalias() += delta * tape.inputs[k].transpose();
    grads.db[k] += delta.rowwise().sum();
    delta = weights_[k].transpose() * delta;
  }
  return delta;
}

Vector Mlp::flatten() const {
  Vector p(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index o = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    p.segment(o, weights_[l].size()) = weights_[l].reshaped();
    o += weights_[l].size();
    p.segment(o, biases_[l].size()) = biases_[l];
    o += biases_[l].size();
  }
  return p;
}

void Mlp::unflatten(const Vector& p) {
  if (p.size() != static_cast<Eigen::Index>(parameter_count())) throw ConfigError("parameter vector size mismatch");
  Eigen::Index o = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    weights_[l].reshaped() = p.segment(o, weights_[l].size());
    o += weights_[l].size();
    biases_[l] = p.segment(o, biases_[l].size());
    o += biases_[l].size();
  }
}

Vector Mlp::flatten(const Gradients& g) {
  Eigen::Index n = 0;
  for (std::size_t l = 0; l < g.dW.size(); ++l) n += g.dW[l].size() + g.db[l].size();
  Vector p(n);
  Eigen::Index o = 0;
  for (std::size_t l = 0; l < g.dW.size(); ++l) {
    p.segment(o, g.dW[l].size()) = g.dW[l].reshaped();
    o += g.dW[l].size();
    p.segment(o, g.db[l].size()) = g.db[l];
    o += g.db[l].size();
  }
  return p;
}

bool Mlp::finite() const {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    if (!weights_[l].allFinite() || !biases_[l].allFinite()) return false;
  }
  return true;
}

Standardizer Standardizer::identity(int dim) { return {Vector::Zero(dim), Vector::Ones(dim)}; }

Standardizer Standardizer::fit(const Matrix& data) {
  if (data.cols() == 0) throw ConfigError("cannot fit a standardiser on no samples");
  Standardizer s;
  s.mean = data.rowwise().mean();
  const Matrix centred = data.colwise() - s.mean;
  s.scale = (centred.array().square().rowwise().sum() / static_cast<double>(data.cols())).sqrt().matrix();
  for (Eigen::Index i = 0; i < s.scale.size(); ++i) {
    if (!(s.scale[i] > 1e-12 * std::max(1.0, std::abs(s.mean[i])))) s.scale[i] = 1.0;
  }
  return s;
}

Matrix Standardizer::apply(const Matrix& X) const {
  return (X.colwise() - mean).array().colwise() / scale.array();
}

Matrix Standardizer::invert(const Matrix& Z) const {
  return (Z.array().colwise() * scale.array()).matrix().colwise() + mean;
}

void sgd_step(Mlp& net, const Mlp::Gradients& grads, double lr) {
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    net.weight(l) -= lr * grads.dW[l];
    net.bias(l) -= lr * grads.db[l];
  }
}

void TrainConfig::validate() const {
  if (epochs <= 0) throw ConfigError("epochs must be positive");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be >= 0");
  if (!(decay_factor >= 0.0 && decay_factor <= 1.0)) throw ConfigError("decay factor must lie in [0, 1]");
  if (decay_every_epochs <= 0) throw ConfigError("decay interval must be positive");
  if (batch_size <= 0) throw ConfigError("batch size must be positive");
}

double TrainConfig::lr_at(int epoch) const {
  return learning_rate * std::pow(1.0 - decay_factor, epoch / decay_every_epochs);
}

Optimizer::Optimizer(OptimizerKind kind, std::vector<Mlp*> nets) : kind_(kind), nets_(std::move(nets)) {
  if (kind_ == OptimizerKind::Adam) {
    for (Mlp* n : nets_) {
      m_.push_back(Vector::Zero(static_cast<Eigen::Index>(n->parameter_count())));
      v_.push_back(Vector::Zero(static_cast<Eigen::Index>(n->parameter_count())));
    }
  }
}

void Optimizer::step(const std::vector<Mlp::Gradients>& grads, double lr) {
  if (grads.size() != nets_.size()) throw ConfigError("one gradient set per network expected");
  if (kind_ == OptimizerKind::Sgd) {
    for (std::size_t i = 0; i < nets_.size(); ++i) sgd_step(*nets_[i], grads[i], lr);
    return;
  }
  constexpr double b1 = 0.9;
  constexpr double b2 = 0.999;
  constexpr double eps = 1e-8;
  ++t_;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < nets_.size(); ++i) {
    const Vector g = Mlp::flatten(grads[i]);
    m_[i] = b1 * m_[i] + (1.0 - b1) * g;
    v_[i] = b2 * v_[i] + (1.0 - b2) * g.cwiseAbs2();
    const Vector step = (m_[i] / c1).array() / ((v_[i] / c2).array().sqrt() + eps);
    nets_[i]->unflatten(nets_[i]->flatten() - lr * step);
  }
}

std::vector<EpochRecord> train(const std::vector<Mlp*>& nets, std::size_t n_samples, const BatchLoss& loss,
                               const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  std::vector<EpochRecord> history;
  if (n_samples == 0) return history;
  Optimizer opt(cfg.optimizer, nets);
  std::vector<std::size_t> order(n_samples);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(cfg.seed);
  std::vector<Mlp::Gradients> grads;
  for (const Mlp* n : nets) grads.push_back(n->zero_gradients());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = cfg.lr_at(epoch);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    for (std::size_t start = 0; start < n_samples; start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(n_samples, start + static_cast<std::size_t>(cfg.batch_size));
      const std::span<const std::size_t> batch(order.data() + start, stop - start);
      for (auto& g : grads) g.zero();
      std::vector<double> parts;
      const double value = loss(batch, grads, parts);
      if (!std::isfinite(value)) {
        std::ostringstream os;
        os << "non-finite training loss in epoch " << epoch << " (batch starting at position " << start << ")";
        throw DivergenceError(os.str(), epoch);
      }
      const double w = static_cast<double>(batch.size()) / static_cast<double>(n_samples);
      rec.loss += w * value;
      if (rec.parts.size() < parts.size()) rec.parts.resize(parts.size(), 0.0);
      for (std::size_t k = 0; k < parts.size(); ++k) rec.parts[k] += w * parts[k];
      opt.step(grads, lr);
    }
    history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return history;
}

namespace {

void write_vector(std::ostream& os, const char* key, const Vector& v) {
  os << key << ' ' << v.size();
  for (Eigen::Index i = 0; i < v.size(); ++i) os << ' ' << format_double(v[i]);
  os << '\n';
}

std::vector<std::string> expect_line(std::istream& is, const std::string& key) {
  std::string line;
  while (std::getline(is, line)) {
    auto tok = split_ws(line);
    if (tok.empty() || tok[0][0] == '#') continue;
    if (tok[0] != key) throw FormatError("expected '" + key + "' in network checkpoint, found '" + tok[0] + "'");
    return tok;
  }
  throw FormatError("network checkpoint truncated before '" + key + "'");
}

long parse_count(const std::string& s) {
  const double v = parse_double(s);
  if (v < 0 || v != std::floor(v)) throw FormatError("bad count '" + s + "'");
  return static_cast<long>(v);
}

Vector read_vector(std::istream& is, const std::string& key) {
  const auto tok = expect_line(is, key);
  if (tok.size() < 2) throw FormatError("missing length for '" + key + "'");
  const long n = parse_count(tok[1]);
  if (static_cast<long>(tok.size()) != n + 2) throw FormatError("wrong number of values for '" + key + "'");
  Vector v(n);
  for (long i = 0; i < n; ++i) v[i] = parse_double(tok[static_cast<std::size_t>(i + 2)]);
  return v;
}

}  // namespace

void write_checkpoint(std::ostream& os, const NetCheckpoint& ck) {
  os << "gtnet-mlp 1\n";
  os << "dims " << ck.net.dims().size();
  for (int d : ck.net.dims()) os << ' ' << d;
  os << '\n';
  write_vector(os, "input_mean", ck.input.mean);
  write_vector(os, "input_scale", ck.input.scale);
  write_vector(os, "output_mean", ck.output.mean);
  write_vector(os, "output_scale", ck.output.scale);
  for (std::size_t l = 0; l < ck.net.layer_count(); ++l) {
    write_vector(os, "weight", ck.net.weight(l).reshaped());
    write_vector(os, "bias", ck.net.bias(l));
  }
}

NetCheckpoint read_checkpoint(std::istream& is) {
  const auto head = expect_line(is, "gtnet-mlp");
  if (head.size() != 2 || head[1] != "1") throw FormatError("unsupported network checkpoint version");
  const auto dtok = expect_line(is, "dims");
  if (dtok.size() < 2) throw FormatError("missing dims");
  const long nd = parse_count(dtok[1]);
  if (static_cast<long>(dtok.size()) != nd + 2 || nd < 2) throw FormatError("bad dims line");
  std::vector<int> dims;
  for (long i = 0; i < nd; ++i) dims.push_back(static_cast<int>(parse_count(dtok[static_cast<std::size_t>(i + 2)])));
  NetCheckpoint ck;
  ck.net = Mlp(dims);
  ck.input = {read_vector(is, "input_mean"), read_vector(is, "input_scale")};
  ck.output = {read_vector(is, "output_mean"), read_vector(is, "output_scale")};
  if (ck.input.dim() != dims.front() || ck.input.scale.size() != dims.front() || ck.output.dim() != dims.back() ||
      ck.output.scale.size() != dims.back()) {
    throw FormatError("normaliser sizes do not match network dims");
  }
  for (std::size_t l = 0; l < ck.net.layer_count(); ++l) {
    const Vector w = read_vector(is, "weight");
    const Vector b = read_vector(is, "bias");
    if (w.size() != ck.net.weight(l).size() || b.size() != ck.net.bias(l).size()) {
      throw FormatError("layer " + std::to_string(l) + " size mismatch");
    }
    ck.net.weight(l).reshaped() = w;
    ck.net.bias(l) = b;
  }
  return ck;
}

}  // namespace gtnet::nn
