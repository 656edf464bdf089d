#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gtnet/cycle.hpp"
#include "gtnet/hybrid_net.hpp"

namespace gtnet::data {

using nn::Matrix;

// Samples are columns. x follows the engine input order, y the columns named
// in y_names, meta carries bookkeeping columns (truth values, time index...).
struct Dataset {
  std::string tag;  // "mc" or "fd"
  std::vector<std::string> x_names;
  std::vector<std::string> y_names;
  std::vector<std::string> meta_names;
  Matrix x;
  Matrix y;
  Matrix meta;

  std::size_t size() const { return static_cast<std::size_t>(x.cols()); }
  Dataset subset(const std::vector<std::size_t>& columns) const;
  // Row of a meta column; throws FormatError if absent.
  Eigen::Index meta_row(const std::string& name) const;
  Eigen::Index y_row(const std::string& name) const;
};

struct SplitDataset {
  Dataset train;
  Dataset test;
  double ratio = 0.8;
  std::uint64_t seed = 0;
};

std::vector<std::string> input_names();
std::vector<std::string> output_names();
Dataset empty_mc_dataset();

// Shuffles with the seed and puts round(ratio * n) samples in train.
SplitDataset split(const Dataset& all, double ratio, std::uint64_t seed);

struct Envelope {
  double T2_min = 244.0, T2_max = 320.0;
  double P2_min = 35.0, P2_max = 110.0;
  double Pamb_min = 22.0, Pamb_max = 102.0;  // with Pamb <= P2
  double N2_min = 0.8, N2_max = 1.0;          // fractions of design N2
  void validate() const;
};

struct McReport {
  std::size_t samples = 0;
  std::size_t rejected = 0;  // draws whose off-design solve failed
};

// Monte Carlo samples with inputs uniform over the envelope and targets from
// off_design. Each sample draws from its own derived seed, so the result does
// not depend on jobs. Throws EnvelopeError if more than half of all draws fail.
Dataset gen_mc_samples(const cycle::EngineConfig& cfg, std::size_t n, const Envelope& env, std::uint64_t seed,
                       McReport* report = nullptr, int jobs = 1);
SplitDataset gen_mc(const cycle::EngineConfig& cfg, std::size_t n, const Envelope& env, double ratio,
                    std::uint64_t seed, McReport* report = nullptr, int jobs = 1);

// Input / target vectors of a converged cycle point.
std::vector<double> inputs_of(const cycle::CyclePoint& p);
std::vector<double> targets_of(const cycle::CyclePoint& p);

// Columnar text file:
//   gtnet-dataset 1
//   tag mc
//   rows N
//   columns x:T2 ... y:T25 ... m:...
//   one sample per line
void save_dataset(const std::filesystem::path& path, const Dataset& d);
// Throws FormatError on version mismatch, truncation, or (when expected is
// given) a column schema different from expected's.
Dataset load_dataset(const std::filesystem::path& path, const Dataset* expected_schema = nullptr);

void save_split(const std::filesystem::path& dir, const SplitDataset& s);
SplitDataset load_split(const std::filesystem::path& dir);

}  // namespace gtnet::data
