#include "gtnet/hybrid_net.hpp"

#include <fstream>

#include "gtnet/errors.hpp"
#include "gtnet/kv_file.hpp"
#include "gtnet/seeds.hpp"

namespace gtnet::hybrid {

int output_index(Station s, Quantity q) {
  for (std::size_t i = 0; i < kOutputStations.size(); ++i) {
    if (kOutputStations[i] == s) return static_cast<int>(3 * i) + q;
  }
  return -1;
}

std::string output_name(int index) {
  static constexpr std::array<const char*, 3> prefix = {"T", "P", "Ma"};
  return prefix[static_cast<std::size_t>(index % 3)] +
         std::to_string(station_number(kOutputStations[static_cast<std::size_t>(index / 3)]));
}

const char* component_name(Component c) {
  static constexpr std::array<const char*, kComponentCount> names = {"lpc", "hpc",    "burner", "hpt",
                                                                      "lpt", "bypass", "mixer",  "nozzle"};
  return names[static_cast<std::size_t>(c)];
}

namespace {

Source in(int i) { return {Source::Input, i}; }
Source flow(Station s) { return {Source::Flow, static_cast<int>(idx(s))}; }

void add_state(std::vector<Source>& v, Station s) {
  for (Quantity q : {kT, kP, kMa}) v.push_back({Source::Output, output_index(s, q)});
}

}  // namespace

std::vector<ComponentSpec> component_specs(bool use_ma2) {
  std::vector<ComponentSpec> specs;
  {
    std::vector<Source> v = {in(kT2), in(kP2)};
    if (use_ma2) v.push_back(in(kMa2));
    v.insert(v.end(), {in(kW2), in(kW25), in(kN1)});
    specs.push_back({Component::Lpc, v, output_index(Station::S25, kT), 6});
  }
  {
    std::vector<Source> v;
    add_state(v, Station::S25);
    v.insert(v.end(), {flow(Station::S25), in(kN2)});
    specs.push_back({Component::Hpc, v, output_index(Station::S3, kT), 3});
  }
  {
    std::vector<Source> v;
    add_state(v, Station::S3);
    v.insert(v.end(), {flow(Station::S3), in(kWF)});
    specs.push_back({Component::Burner, v, output_index(Station::S4, kT), 3});
  }
  {
    std::vector<Source> v;
    add_state(v, Station::S4);
    v.push_back(flow(Station::S4));
    add_state(v, Station::S3);
    v.push_back(in(kN2));
    specs.push_back({Component::Hpt, v, output_index(Station::S44, kT), 3});
  }
  {
    std::vector<Source> v;
    add_state(v, Station::S44);
    v.push_back(flow(Station::S44));
    add_state(v, Station::S3);
    v.push_back(in(kN1));
    specs.push_back({Component::Lpt, v, output_index(Station::S6, kT), 3});
  }
  {
    std::vector<Source> v;
    add_state(v, Station::S13);
    v.push_back(flow(Station::S13));
    specs.push_back({Component::Bypass, v, output_index(Station::S16, kT), 3});
  }
  {
    std::vector<Source> v;
    add_state(v, Station::S6);
    v.push_back(flow(Station::S6));
    add_state(v, Station::S16);
    v.push_back(flow(Station::S16));
    specs.push_back({Component::Mixer, v, output_index(Station::S64, kT), 3});
  }
  {
    std::vector<Source> v;
    add_state(v, Station::S64);
    v.insert(v.end(), {flow(Station::S64), in(kPamb)});
    specs.push_back({Component::Nozzle, v, output_index(Station::S8, kT), 3});
  }
  return specs;
}

namespace {

std::vector<int> net_dims(const ComponentSpec& spec, int width, int layers) {
  std::vector<int> d = {static_cast<int>(spec.inputs.size())};
  for (int i = 0; i < layers; ++i) d.push_back(width);
  d.push_back(spec.n_outputs);
  return d;
}

Matrix assemble(const ComponentSpec& spec, const Matrix& inputs, const Matrix& outputs, const Matrix& flows) {
  Matrix X(static_cast<Eigen::Index>(spec.inputs.size()), inputs.cols());
  for (std::size_t r = 0; r < spec.inputs.size(); ++r) {
    const Source& s = spec.inputs[r];
    const Eigen::Index row = static_cast<Eigen::Index>(r);
    switch (s.kind) {
      case Source::Input: X.row(row) = inputs.row(s.index); break;
      case Source::Output: X.row(row) = outputs.row(s.index); break;
      case Source::Flow: X.row(row) = flows.row(s.index); break;
    }
  }
  return X;
}

// Positive state quantities (T, P, flows) enter and leave the nets on a log
// scale when the model asks for it; Mach numbers and speeds stay linear.
bool log_input(const Source& s) {
  switch (s.kind) {
    case Source::Input: return s.index == kT2 || s.index == kP2 || s.index == kPamb;
    case Source::Output: return s.index % 3 != kMa;
    case Source::Flow: return true;
  }
  return false;
}

bool log_output(int index) { return index % 3 != kMa; }

Matrix to_net_space(const ComponentSpec& spec, Matrix X, bool log_scale) {
  if (!log_scale) return X;
  for (std::size_t r = 0; r < spec.inputs.size(); ++r) {
    if (log_input(spec.inputs[r])) X.row(static_cast<Eigen::Index>(r)) = X.row(static_cast<Eigen::Index>(r)).array().log();
  }
  return X;
}

Matrix outputs_to_net_space(const ComponentSpec& spec, Matrix Y, bool log_scale) {
  if (!log_scale) return Y;
  for (int k = 0; k < spec.n_outputs; ++k) {
    if (log_output(spec.first_output + k)) Y.row(k) = Y.row(k).array().log();
  }
  return Y;
}

Matrix outputs_from_net_space(const ComponentSpec& spec, Matrix Y, bool log_scale) {
  if (!log_scale) return Y;
  for (int k = 0; k < spec.n_outputs; ++k) {
    if (log_output(spec.first_output + k)) Y.row(k) = Y.row(k).array().exp();
  }
  return Y;
}

}  // namespace

HybridModel HybridModel::create(const Bleeds& bleeds, bool use_ma2, std::uint64_t seed, int hidden_width,
                                int hidden_layers) {
  if (hidden_width <= 0 || hidden_layers < 0) throw ConfigError("bad hidden layer configuration");
  HybridModel m;
  m.bleeds = bleeds;
  m.use_ma2 = use_ma2;
  m.hidden_width = hidden_width;
  m.hidden_layers = hidden_layers;
  const auto specs = component_specs(use_ma2);
  for (const ComponentSpec& s : specs) {
    const auto i = static_cast<std::size_t>(s.component);
    m.nets[i] = nn::Mlp::he_uniform(net_dims(s, hidden_width, hidden_layers), derive_seed(seed, i));
    m.input_norm[i] = nn::Standardizer::identity(static_cast<int>(s.inputs.size()));
    m.output_norm[i] = nn::Standardizer::identity(s.n_outputs);
  }
  return m;
}

std::vector<nn::Mlp*> HybridModel::net_pointers() {
  std::vector<nn::Mlp*> p;
  for (auto& n : nets) p.push_back(&n);
  return p;
}

std::size_t HybridModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& net : nets) n += net.parameter_count();
  return n;
}

void HybridModel::validate() const {
  for (const ComponentSpec& s : component_specs(use_ma2)) {
    const auto i = static_cast<std::size_t>(s.component);
    const nn::Mlp& net = nets[i];
    if (net.dims().empty() || net.input_dim() != static_cast<int>(s.inputs.size()) ||
        net.output_dim() != s.n_outputs) {
      throw ConfigError(std::string(component_name(s.component)) + " net must map " +
                        std::to_string(s.inputs.size()) + " inputs to " + std::to_string(s.n_outputs) +
                        " outputs");
    }
    if (input_norm[i].dim() != net.input_dim() || input_norm[i].scale.size() != net.input_dim() ||
        output_norm[i].dim() != net.output_dim() || output_norm[i].scale.size() != net.output_dim()) {
      throw ConfigError(std::string(component_name(s.component)) + " normaliser size mismatch");
    }
  }
}

void HybridModel::fit_normalizers(const Matrix& inputs, const Matrix& targets) {
  if (inputs.rows() != kInputCount || targets.rows() != kOutputCount || inputs.cols() != targets.cols()) {
    throw ConfigError("normaliser fit needs 9 x N inputs and 27 x N targets");
  }
  const Matrix flows = batch_mass_flows(inputs, bleeds);
  for (const ComponentSpec& s : component_specs(use_ma2)) {
    const auto i = static_cast<std::size_t>(s.component);
    input_norm[i] = nn::Standardizer::fit(to_net_space(s, assemble(s, inputs, targets, flows), log_scale));
    output_norm[i] =
        nn::Standardizer::fit(outputs_to_net_space(s, targets.middleRows(s.first_output, s.n_outputs), log_scale));
  }
}

Matrix batch_mass_flows(const Matrix& inputs, const Bleeds& bleeds) {
  Matrix flows(static_cast<Eigen::Index>(kStationCount), inputs.cols());
  for (Eigen::Index j = 0; j < inputs.cols(); ++j) {
    const MassFlows mf = infer_mass_flows(inputs(kW2, j), inputs(kW25, j), inputs(kWF, j), bleeds);
    for (std::size_t s = 0; s < kStationCount; ++s) flows(static_cast<Eigen::Index>(s), j) = mf.w[s];
  }
  return flows;
}

Cascade forward_cascade(const HybridModel& model, const Matrix& inputs) {
  if (inputs.rows() != kInputCount) throw ConfigError("engine input matrix must have 9 rows");
  Cascade c;
  c.inputs = inputs;
  c.flows = batch_mass_flows(inputs, model.bleeds);
  c.outputs = Matrix::Zero(kOutputCount, inputs.cols());
  for (const ComponentSpec& s : component_specs(model.use_ma2)) {
    const auto i = static_cast<std::size_t>(s.component);
    const Matrix Z = model.input_norm[i].apply(to_net_space(s, assemble(s, inputs, c.outputs, c.flows), model.log_scale));
    const Matrix Y = outputs_from_net_space(s, model.output_norm[i].invert(model.nets[i].forward(Z, c.tapes[i])),
                                            model.log_scale);
    if (!Y.allFinite()) {
      throw CascadeError(std::string("non-finite output from the ") + component_name(s.component) + " net");
    }
    c.outputs.middleRows(s.first_output, s.n_outputs) = Y;
  }
  return c;
}

Matrix predict(const HybridModel& model, const Matrix& inputs) { return forward_cascade(model, inputs).outputs; }

void gradient_through_cascade(const HybridModel& model, const Cascade& c, const Matrix& d_outputs,
                              const Matrix& d_flows, CascadeGradients& grads) {
  const Eigen::Index B = c.inputs.cols();
  if (d_outputs.rows() != kOutputCount || d_outputs.cols() != B) {
    throw ConfigError("output gradient must be 27 x batch");
  }
  if (grads.nets.size() != kComponentCount) {
    grads.nets.clear();
    for (const auto& n : model.nets) grads.nets.push_back(n.zero_gradients());
  }
  Matrix d_out = d_outputs;
  Matrix d_flow = d_flows.size() == 0 ? Matrix::Zero(static_cast<Eigen::Index>(kStationCount), B) : d_flows;
  if (d_flow.rows() != static_cast<Eigen::Index>(kStationCount) || d_flow.cols() != B) {
    throw ConfigError("flow gradient must be 14 x batch");
  }
  Matrix d_in = Matrix::Zero(kInputCount, B);

  const auto specs = component_specs(model.use_ma2);
  for (auto it = specs.rbegin(); it != specs.rend(); ++it) {
    const ComponentSpec& s = *it;
    const auto i = static_cast<std::size_t>(s.component);
    Matrix gz = d_out.middleRows(s.first_output, s.n_outputs);
    if (model.log_scale) {
      for (int k = 0; k < s.n_outputs; ++k) {
        if (log_output(s.first_output + k)) gz.row(k) = gz.row(k).cwiseProduct(c.outputs.row(s.first_output + k));
      }
    }
    gz = gz.array().colwise() * model.output_norm[i].scale.array();
    const Matrix dZ = model.nets[i].backward(c.tapes[i], gz, grads.nets[i]);
    Matrix dX = dZ.array().colwise() / model.input_norm[i].scale.array();
    if (model.log_scale) {
      const Matrix X = assemble(s, c.inputs, c.outputs, c.flows);
      for (std::size_t r = 0; r < s.inputs.size(); ++r) {
        const auto row = static_cast<Eigen::Index>(r);
        if (log_input(s.inputs[r])) dX.row(row) = dX.row(row).cwiseQuotient(X.row(row));
      }
    }
    for (std::size_t r = 0; r < s.inputs.size(); ++r) {
      const Source& src = s.inputs[r];
      const auto row = dX.row(static_cast<Eigen::Index>(r));
      switch (src.kind) {
        case Source::Input: d_in.row(src.index) += row; break;
        case Source::Output: d_out.row(src.index) += row; break;
        case Source::Flow: d_flow.row(src.index) += row; break;
      }
    }
  }
  for (Station st : kAllStations) {
    const FlowCoefficients k = flow_coefficients(st, model.bleeds);
    const auto row = d_flow.row(static_cast<Eigen::Index>(idx(st)));
    d_in.row(kW2) += k.w2 * row;
    d_in.row(kW25) += k.w25 * row;
    d_in.row(kWF) += k.wf * row;
  }
  grads.inputs = std::move(d_in);
}

namespace {
constexpr const char* kManifestFormat = "gtnet-hybrid";
constexpr long long kManifestVersion = 1;
}  // namespace

void save_model(const std::filesystem::path& dir, const HybridModel& model) {
  model.validate();
  std::filesystem::create_directories(dir);
  KeyValueFile kv;
  kv.set("format", std::string(kManifestFormat));
  kv.set("version", kManifestVersion);
  kv.set("use_ma2", static_cast<long long>(model.use_ma2 ? 1 : 0));
  kv.set("hidden_width", static_cast<long long>(model.hidden_width));
  kv.set("hidden_layers", static_cast<long long>(model.hidden_layers));
  kv.set("log_scale", static_cast<long long>(model.log_scale ? 1 : 0));
  kv.set("bleeds.hpt_cl", model.bleeds.hpt_cl);
  kv.set("bleeds.lngv_cl", model.bleeds.lngv_cl);
  kv.set("bleeds.hngv_cl", model.bleeds.hngv_cl);
  kv.set("bleeds.c2b", model.bleeds.c2b);
  for (int i = 0; i < kComponentCount; ++i) {
    const std::string name = component_name(static_cast<Component>(i));
    const std::string file = name + ".net";
    kv.set("net." + name, file);
    std::ofstream os(dir / file, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("cannot write '" + (dir / file).string() + "'");
    const auto k = static_cast<std::size_t>(i);
    nn::write_checkpoint(os, {model.nets[k], model.input_norm[k], model.output_norm[k]});
    if (!os) throw FormatError("write failed for '" + (dir / file).string() + "'");
  }
  kv.save(dir / "manifest.txt");
}

HybridModel load_model(const std::filesystem::path& dir) {
  const KeyValueFile kv = KeyValueFile::load(dir / "manifest.txt");
  if (!kv.has("format") || kv.get("format") != kManifestFormat) throw FormatError("not a hybrid model bundle");
  if (kv.get_int("version") != kManifestVersion) throw FormatError("unsupported hybrid model version");
  HybridModel m;
  m.use_ma2 = kv.get_int("use_ma2") != 0;
  m.hidden_width = static_cast<int>(kv.get_int("hidden_width"));
  m.hidden_layers = static_cast<int>(kv.get_int("hidden_layers"));
  m.log_scale = kv.get_int("log_scale") != 0;
  m.bleeds.hpt_cl = kv.get_double("bleeds.hpt_cl");
  m.bleeds.lngv_cl = kv.get_double("bleeds.lngv_cl");
  m.bleeds.hngv_cl = kv.get_double("bleeds.hngv_cl");
  m.bleeds.c2b = kv.get_double("bleeds.c2b");
  for (int i = 0; i < kComponentCount; ++i) {
    const std::string name = component_name(static_cast<Component>(i));
    const std::filesystem::path file = dir / kv.get("net." + name);
    std::ifstream is(file, std::ios::binary);
    if (!is) throw FormatError("cannot open '" + file.string() + "'");
    nn::NetCheckpoint ck = nn::read_checkpoint(is);
    const auto k = static_cast<std::size_t>(i);
    m.nets[k] = std::move(ck.net);
    m.input_norm[k] = std::move(ck.input);
    m.output_norm[k] = std::move(ck.output);
  }
  try {
    m.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("model bundle violates the component contract: ") + e.what());
  }
  return m;
}

}  // namespace gtnet::hybrid
