#include "gtnet/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "gtnet/errors.hpp"
#include "gtnet/hybrid_net.hpp"
#include "gtnet/kv_file.hpp"

namespace gtnet::eval {

using nn::Matrix;

std::vector<double> relative_errors(const std::vector<double>& pred, const std::vector<double>& truth) {
  if (pred.size() != truth.size()) throw ConfigError("prediction and truth lengths differ");
  std::vector<double> e(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (truth[i] == 0.0) throw DomainError("relative error undefined for a zero truth value");
    e[i] = std::abs(pred[i] - truth[i]) / std::abs(truth[i]);
  }
  return e;
}

double quantile(std::vector<double> v, double p) {
  if (v.empty()) throw ConfigError("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("quantile level outside [0, 1]");
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

Histogram histogram(const std::vector<double>& errors, double bin_width) {
  if (!(bin_width > 0.0)) throw ConfigError("bin width must be positive");
  Histogram h;
  h.bin_width = bin_width;
  const double mx = errors.empty() ? 0.0 : *std::max_element(errors.begin(), errors.end());
  const auto bins = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(mx / bin_width)));
  h.counts.assign(bins, 0);
  for (std::size_t k = 0; k <= bins; ++k) h.edges.push_back(static_cast<double>(k) * bin_width);
  for (double e : errors) {
    if (!(e >= 0.0)) throw DomainError("errors must be non-negative");
    const auto k = std::min(bins - 1, static_cast<std::size_t>(std::floor(e / bin_width)));
    ++h.counts[k];
  }
  return h;
}

ErrorStats error_stats(const std::vector<double>& errors, double bin_width) {
  if (errors.empty()) throw ConfigError("error statistics need at least one sample");
  ErrorStats s;
  s.count = errors.size();
  const double n = static_cast<double>(errors.size());
  s.mean = std::accumulate(errors.begin(), errors.end(), 0.0) / n;
  double ss = 0.0;
  for (double e : errors) ss += (e - s.mean) * (e - s.mean);
  s.std = std::sqrt(ss / n);
  std::vector<double> sorted = errors;
  std::sort(sorted.begin(), sorted.end());
  s.q25 = quantile(sorted, 0.25);
  s.q50 = quantile(sorted, 0.50);
  s.q75 = quantile(sorted, 0.75);
  s.max = sorted.back();
  s.histogram = histogram(errors, bin_width);
  return s;
}

ErrorStats relative_error_stats(const std::vector<double>& pred, const std::vector<double>& truth,
                                double bin_width) {
  return error_stats(relative_errors(pred, truth), bin_width);
}

const std::vector<int>& TnnBaseline::input_rows() {
  static const std::vector<int> rows = {hybrid::kT2, hybrid::kP2, hybrid::kPamb, hybrid::kN1,
                                        hybrid::kN2, hybrid::kW2, hybrid::kW25, hybrid::kWF};
  return rows;
}

namespace {

Matrix select_rows(const Matrix& x, const std::vector<int>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
  return out;
}

}  // namespace

TnnBaseline TnnBaseline::create(std::uint64_t seed, int hidden_width, int hidden_layers) {
  if (hidden_width <= 0 || hidden_layers <= 0) throw ConfigError("TNN needs positive hidden sizes");
  std::vector<int> dims{static_cast<int>(input_rows().size())};
  for (int i = 0; i < hidden_layers; ++i) dims.push_back(hidden_width);
  dims.push_back(1);
  TnnBaseline t;
  t.net = nn::Mlp::he_uniform(dims, seed);
  t.input = nn::Standardizer::identity(dims.front());
  t.output = nn::Standardizer::identity(1);
  return t;
}

std::vector<double> TnnBaseline::predict(const Matrix& inputs) const {
  const Matrix z = net.forward(input.apply(select_rows(inputs, input_rows())));
  const Matrix y = output.invert(z);
  return {y.data(), y.data() + y.size()};
}

std::vector<nn::EpochRecord> train_tnn_baseline(TnnBaseline& tnn, const data::Dataset& train,
                                                const nn::TrainConfig& cfg) {
  if (train.size() == 0) return {};
  const Eigen::Index t6 = train.y_row("T6");
  const Matrix x = select_rows(train.x, TnnBaseline::input_rows());
  const Matrix y = train.y.row(t6);
  tnn.input = nn::Standardizer::fit(x);
  tnn.output = nn::Standardizer::fit(y);
  const Matrix xs = tnn.input.apply(x);
  const double scale = tnn.output.scale[0];

  nn::BatchLoss loss = [&](std::span<const std::size_t> batch, std::vector<nn::Mlp::Gradients>& grads,
                           std::vector<double>& parts) {
    const auto B = static_cast<Eigen::Index>(batch.size());
    Matrix xb(xs.rows(), B);
    Eigen::RowVectorXd yb(B);
    for (Eigen::Index j = 0; j < B; ++j) {
      xb.col(j) = xs.col(static_cast<Eigen::Index>(batch[static_cast<std::size_t>(j)]));
      yb[j] = y(0, static_cast<Eigen::Index>(batch[static_cast<std::size_t>(j)]));
    }
    nn::Mlp::Tape tape;
    const Matrix z = tnn.net.forward(xb, tape);
    const Eigen::RowVectorXd pred = tnn.output.invert(z).row(0);
    const Eigen::RowVectorXd r = (pred - yb).cwiseQuotient(yb);
    const double value = r.squaredNorm() / static_cast<double>(B);
    const Matrix dz = (2.0 / static_cast<double>(B) * scale) * r.cwiseQuotient(yb);
    tnn.net.backward(tape, dz, grads[0]);
    parts = {value};
    return value;
  };
  return nn::train({&tnn.net}, train.size(), loss, cfg);
}

void save_tnn(const std::filesystem::path& dir, const TnnBaseline& tnn) {
  std::filesystem::create_directories(dir);
  std::ofstream os(dir / "tnn.net", std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot write '" + (dir / "tnn.net").string() + "'");
  nn::write_checkpoint(os, {tnn.net, tnn.input, tnn.output});
  if (!os) throw FormatError("write failed for '" + (dir / "tnn.net").string() + "'");
}

TnnBaseline load_tnn(const std::filesystem::path& dir) {
  std::ifstream is(dir / "tnn.net", std::ios::binary);
  if (!is) throw FormatError("cannot read '" + (dir / "tnn.net").string() + "'");
  nn::NetCheckpoint ck = nn::read_checkpoint(is);
  if (ck.net.input_dim() != static_cast<int>(TnnBaseline::input_rows().size()) || ck.net.output_dim() != 1) {
    throw FormatError("TNN checkpoint has unexpected dimensions");
  }
  return {std::move(ck.net), std::move(ck.input), std::move(ck.output)};
}

std::string format_report(const std::vector<ReportRow>& rows) {
  std::ostringstream os;
  os << "# relative error statistics; quantiles by linear interpolation between closest ranks, std over N\n";
  os << "model n mean std q25 q50 q75 max median/mean parameters\n";
  for (const auto& r : rows) {
    const auto& s = r.stats;
    os << r.name << ' ' << s.count << ' ' << format_double(s.mean) << ' ' << format_double(s.std) << ' '
       << format_double(s.q25) << ' ' << format_double(s.q50) << ' ' << format_double(s.q75) << ' '
       << format_double(s.max) << ' ' << format_double(r.median_over_mean) << ' ' << r.parameters << '\n';
  }
  return os.str();
}

std::vector<ReportRow> compare_report(const std::vector<ModelErrors>& models, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<ReportRow> rows;
  for (const auto& m : models) {
    if (m.name.empty() || m.name.find_first_of(" /\t") != std::string::npos) {
      throw ConfigError("model names must be non-empty without spaces or slashes");
    }
    ReportRow r;
    r.name = m.name;
    r.stats = error_stats(m.errors);
    r.parameters = m.parameters;
    r.median_over_mean = r.stats.mean > 0.0 ? r.stats.q50 / r.stats.mean : 0.0;
    rows.push_back(r);

    std::ostringstream raw;
    raw << "# sample relative_error\n";
    for (std::size_t k = 0; k < m.errors.size(); ++k) raw << k << ' ' << format_double(m.errors[k]) << '\n';
    write_text_file(dir / ("errors_" + m.name + ".txt"), raw.str());

    std::ostringstream hist;
    hist << "lower,upper,count\n";
    const Histogram& h = r.stats.histogram;
    for (std::size_t k = 0; k < h.counts.size(); ++k) {
      hist << format_double(h.edges[k]) << ',' << format_double(h.edges[k + 1]) << ',' << h.counts[k] << '\n';
    }
    write_text_file(dir / ("histogram_" + m.name + ".csv"), hist.str());
  }
  write_text_file(dir / "stats.txt", format_report(rows));
  return rows;
}

}  // namespace gtnet::eval
