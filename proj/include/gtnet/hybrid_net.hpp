#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gtnet/mass_flows.hpp"
#include "gtnet/mlp.hpp"

namespace gtnet::hybrid {

using nn::Matrix;

// Engine input vector order.
enum InputIndex : int { kT2 = 0, kP2, kMa2, kPamb, kN1, kN2, kW2, kW25, kWF };
inline constexpr int kInputCount = 9;
inline constexpr std::array<const char*, kInputCount> kInputNames = {"T2", "P2", "Ma2", "Pamb", "N1",
                                                                       "N2", "W2", "W25", "WF"};

// Predicted stations; the output vector holds (Tt, Pt, Ma) for each in turn.
inline constexpr std::array<Station, 9> kOutputStations = {Station::S25, Station::S13, Station::S3,
                                                           Station::S4,  Station::S44, Station::S6,
                                                           Station::S16, Station::S64, Station::S8};
inline constexpr int kOutputCount = 27;
enum Quantity : int { kT = 0, kP = 1, kMa = 2 };
// Position of (station, quantity) in the output vector, or -1.
int output_index(Station s, Quantity q);
// "T25", "P3", "Ma8", ...
std::string output_name(int index);

enum class Component : int { Lpc = 0, Hpc, Burner, Hpt, Lpt, Bypass, Mixer, Nozzle };
inline constexpr int kComponentCount = 8;
const char* component_name(Component c);

// Where a component-net input comes from.
struct Source {
  enum Kind { Input, Output, Flow } kind;
  int index;  // engine input index, output index, or Station index for flows
};

struct ComponentSpec {
  Component component;
  std::vector<Source> inputs;
  int first_output;  // outputs are [first_output, first_output + n_outputs)
  int n_outputs;
};

// Table of component inputs/outputs in cascade order.
std::vector<ComponentSpec> component_specs(bool use_ma2);

struct HybridModel {
  std::array<nn::Mlp, kComponentCount> nets;
  std::array<nn::Standardizer, kComponentCount> input_norm;
  std::array<nn::Standardizer, kComponentCount> output_norm;
  Bleeds bleeds;
  bool use_ma2 = false;
  int hidden_width = 64;
  int hidden_layers = 2;
  // Temperatures, pressures and flows pass through log() before the input
  // normalisers, and predicted T and P through exp() after the output ones.
  bool log_scale = false;

  // Fresh He-initialised nets (identity normalisers), seeds derived from seed.
  static HybridModel create(const Bleeds& bleeds, bool use_ma2, std::uint64_t seed, int hidden_width = 64,
                            int hidden_layers = 2);

  nn::Mlp& net(Component c) { return nets[static_cast<std::size_t>(c)]; }
  const nn::Mlp& net(Component c) const { return nets[static_cast<std::size_t>(c)]; }
  std::vector<nn::Mlp*> net_pointers();
  std::size_t parameter_count() const;

  // Throws ConfigError unless every net has the dims of its component spec.
  void validate() const;

  // Fits every normaliser on physically consistent data (inputs 9 x N,
  // targets 27 x N), feeding each net the true upstream states.
  void fit_normalizers(const Matrix& inputs, const Matrix& targets);
};

// Station flows (kStationCount x B) from the W2, W25, WF rows of inputs.
Matrix batch_mass_flows(const Matrix& inputs, const Bleeds& bleeds);

struct Cascade {
  Matrix inputs;   // 9 x B
  Matrix flows;    // kStationCount x B
  Matrix outputs;  // 27 x B, physical units
  std::array<nn::Mlp::Tape, kComponentCount> tapes;
};

// Runs the eight nets in gas-path order. Throws CascadeError naming the
// first component producing a non-finite value.
Cascade forward_cascade(const HybridModel& model, const Matrix& inputs);
Matrix predict(const HybridModel& model, const Matrix& inputs);

struct CascadeGradients {
  std::vector<nn::Mlp::Gradients> nets;  // one per component
  Matrix inputs;                         // dL/d(inputs), 9 x B
};

// Chain rule through the cascade and the flow bookkeeping. d_flows may be
// empty (no direct dependence of the loss on station flows). Net gradients
// are accumulated into grads.nets (resized if empty).
void gradient_through_cascade(const HybridModel& model, const Cascade& cascade, const Matrix& d_outputs,
                              const Matrix& d_flows, CascadeGradients& grads);

// Bundle: manifest.txt plus <component>.net for each net.
void save_model(const std::filesystem::path& dir, const HybridModel& model);
HybridModel load_model(const std::filesystem::path& dir);

}  // namespace gtnet::hybrid
