#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gtnet::maps {

// Dense table over a rectilinear (row, col) grid, row-major.
class Table2D {
 public:
  Table2D() = default;
  Table2D(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  const std::vector<double>& values() const { return values_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

// Multiplicative scale factors set by design-point sizing (and degradation).
struct MapScalars {
  double flow = 1.0;
  double pr = 1.0;
  double eff = 1.0;
};

// Compressor map on (corrected speed fraction, beta). beta = 0 is the surge
// line, beta = 1 the choke line: corrected flow rises and pressure ratio falls
// with beta along a speed line.
struct CompressorMap {
  std::string name;
  std::vector<double> speeds;
  std::vector<double> betas;
  Table2D wc;
  Table2D pr;
  Table2D eff;
  MapScalars scalars;
};

struct CompressorPoint {
  double wc = 0.0;
  double pr = 0.0;
  double eff = 0.0;
};

// Turbine map on (corrected speed fraction, pressure ratio). Flow rises with
// pressure ratio up to choke and is flat after it.
struct TurbineMap {
  std::string name;
  std::vector<double> speeds;
  std::vector<double> prs;
  Table2D wc;
  Table2D eff;
  MapScalars scalars;
};

struct TurbinePoint {
  double wc = 0.0;
  double eff = 0.0;
};

// Bilinear lookup, then wc *= flow, pr *= pr, eff *= eff. Throws
// MapExtrapolationError outside the grid.
CompressorPoint interp_compressor(const CompressorMap& map, double n_corr, double beta);

// The pressure-ratio coordinate is scaled by the pr scalar before lookup
// (map pr = pr / scalars.pr); wc and eff are scaled multiplicatively after.
TurbinePoint interp_turbine(const TurbineMap& map, double n_corr, double pr);

struct ComponentDegradation {
  double flow_delta = 0.0;
  double eff_delta = 0.0;
};

struct DegradationState {
  ComponentDegradation lpc;
  ComponentDegradation hpc;
  ComponentDegradation hpt;
  ComponentDegradation lpt;

  bool is_zero() const;
};

// Returns a copy with flow scalar *= (1 + flow_delta), eff scalar *=
// (1 + eff_delta). Throws InvalidDegradationError if any scaled table
// efficiency leaves (0, 1].
CompressorMap apply_degradation(const CompressorMap& map, const ComponentDegradation& d);
TurbineMap apply_degradation(const TurbineMap& map, const ComponentDegradation& d);

struct MapSet {
  CompressorMap lpc;
  CompressorMap hpc;
  TurbineMap hpt;
  TurbineMap lpt;
};

MapSet apply_degradation(const MapSet& maps, const DegradationState& d);

// Design-point coordinates of the built-in maps.
inline constexpr double kDesignSpeed = 1.0;
inline constexpr double kDesignBeta = 0.5;
inline constexpr double kLpcDesignPr = 3.2;
inline constexpr double kHpcDesignPr = 7.5;
inline constexpr double kLpcDesignEff = 0.86;
inline constexpr double kHpcDesignEff = 0.85;
inline constexpr double kHptDesignPr = 3.0;
inline constexpr double kLptDesignPr = 2.2;
inline constexpr double kHptDesignEff = 0.88;
inline constexpr double kLptDesignEff = 0.90;

// Deterministic analytic maps: elliptic compressor speed lines, parabolic
// choking curves for turbines. Unit corrected flow at the design node.
MapSet builtin_maps();

// Invariant checks; return a description of the first violation or "".
std::string check_invariants(const CompressorMap& map);
std::string check_invariants(const TurbineMap& map);

// Columnar text format:
//   gtnet-map 1
//   kind compressor|turbine
//   name <name>
//   scalars <flow> <pr> <eff>
//   speeds <n> v...
//   betas|prs <n> v...
//   columns speed beta wc pr eff     (compressor)  / speed pr wc eff (turbine)
//   one row per node, speed-major
void write_map(std::ostream& os, const CompressorMap& map);
void write_map(std::ostream& os, const TurbineMap& map);
CompressorMap read_compressor_map(std::istream& is);
TurbineMap read_turbine_map(std::istream& is);

}  // namespace gtnet::maps
