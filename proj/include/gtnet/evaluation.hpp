#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gtnet/datasets.hpp"
#include "gtnet/mlp.hpp"

namespace gtnet::eval {

struct Histogram {
  double bin_width = 0.005;
  std::vector<double> edges;  // counts.size() + 1 entries, edges[0] = 0
  std::vector<std::size_t> counts;
};

struct ErrorStats {
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;  // population
  double q25 = 0.0;
  double q50 = 0.0;
  double q75 = 0.0;
  double max = 0.0;
  Histogram histogram;
};

// |pred - truth| / truth elementwise. Throws DomainError on a zero truth.
std::vector<double> relative_errors(const std::vector<double>& pred, const std::vector<double>& truth);

// Linear interpolation between closest ranks: position p (n - 1) in the
// sorted sample.
double quantile(std::vector<double> values, double p);

// Bins [k w, (k+1) w) over [0, max]; the last bin also holds max itself.
Histogram histogram(const std::vector<double>& errors, double bin_width = 0.005);

ErrorStats error_stats(const std::vector<double>& errors, double bin_width = 0.005);
ErrorStats relative_error_stats(const std::vector<double>& pred, const std::vector<double>& truth,
                                double bin_width = 0.005);

// Plain deep MLP on the measurable engine inputs (Ma2 excluded) predicting T6.
struct TnnBaseline {
  nn::Mlp net;
  nn::Standardizer input;
  nn::Standardizer output;

  static TnnBaseline create(std::uint64_t seed, int hidden_width = 64, int hidden_layers = 28);
  static const std::vector<int>& input_rows();
  std::size_t parameter_count() const { return net.parameter_count(); }
  // inputs 9 x N, returns T6 (length N)
  std::vector<double> predict(const nn::Matrix& inputs) const;
};

// Normalisers are fitted on the training split, then the net is trained on
// the T6 relative squared error only.
std::vector<nn::EpochRecord> train_tnn_baseline(TnnBaseline& tnn, const data::Dataset& train,
                                                const nn::TrainConfig& cfg);

// Directory with tnn.net.
void save_tnn(const std::filesystem::path& dir, const TnnBaseline& tnn);
TnnBaseline load_tnn(const std::filesystem::path& dir);

struct ModelErrors {
  std::string name;
  std::vector<double> errors;  // per test sample
  std::size_t parameters = 0;  // 0 for models without trainable weights
};

struct ReportRow {
  std::string name;
  ErrorStats stats;
  std::size_t parameters = 0;
  double median_over_mean = 0.0;
};

// Writes stats.txt (rows in the given order), errors_<name>.txt and
// histogram_<name>.csv into dir. Returns the rows.
std::vector<ReportRow> compare_report(const std::vector<ModelErrors>& models, const std::filesystem::path& dir);

// Plain-text table of the rows, as in stats.txt.
std::string format_report(const std::vector<ReportRow>& rows);

}  // namespace gtnet::eval
