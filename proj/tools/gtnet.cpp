// gtnet command-line driver.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gtnet/cycle.hpp"
#include "gtnet/datasets.hpp"
#include "gtnet/errors.hpp"
#include "gtnet/evaluation.hpp"
#include "gtnet/flight_data.hpp"
#include "gtnet/hybrid_net.hpp"
#include "gtnet/kv_file.hpp"
#include "gtnet/trainer.hpp"
#include "gtnet/w_solver.hpp"

namespace fs = std::filesystem;
using namespace gtnet;

namespace {

enum Exit : int { kOk = 0, kUsage = 1, kFailure = 2, kIo = 3 };

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Machine-readable record of one invocation. Holds no clock or host data so
// reruns produce identical manifests.
void write_manifest(const fs::path& path, const std::string& command,
                    const std::vector<std::pair<std::string, std::string>>& args, const fs::path& root,
                    const std::vector<fs::path>& outputs) {
  nlohmann::ordered_json j;
  j["tool"] = "gtnet";
  j["manifest_version"] = 1;
  j["command"] = command;
  nlohmann::ordered_json a = nlohmann::ordered_json::object();
  for (const auto& [k, v] : args) a[k] = v;
  j["arguments"] = a;
  nlohmann::ordered_json files = nlohmann::ordered_json::array();
  for (const fs::path& p : outputs) {
    const std::string bytes = read_text_file(p);
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a(bytes)));
    files.push_back({{"path", fs::relative(p, root).generic_string()}, {"bytes", bytes.size()}, {"fnv1a64", hex}});
  }
  j["outputs"] = files;
  write_text_file(path, j.dump(2) + "\n");
}

// Regular files below dir, sorted, excluding the manifest itself.
std::vector<fs::path> files_below(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().filename() != "run_manifest.json") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

void write_dir_manifest(const fs::path& dir, const std::string& command,
                        const std::vector<std::pair<std::string, std::string>>& args) {
  write_manifest(dir / "run_manifest.json", command, args, dir, files_below(dir));
}

void write_file_manifest(const fs::path& file, const std::string& command,
                         const std::vector<std::pair<std::string, std::string>>& args) {
  const fs::path root = file.has_parent_path() ? file.parent_path() : fs::path(".");
  write_manifest(fs::path(file.string() + ".manifest.json"), command, args, root, {file});
}

std::string str(double v) { return format_double(v); }

// Bundle directory of a training run (run/model) or a bare bundle.
fs::path model_dir(const fs::path& p) {
  if (fs::exists(p / "manifest.txt")) return p;
  if (fs::exists(p / "model" / "manifest.txt")) return p / "model";
  throw FormatError("no hybrid model bundle at '" + p.string() + "'");
}

// Engine configuration stored next to a dataset or a model run.
cycle::EngineConfig engine_near(const fs::path& p) {
  for (const fs::path& c : {p / "engine.txt", p.parent_path() / "engine.txt"}) {
    if (fs::exists(c)) return cycle::load_config(c);
  }
  throw FormatError("no engine.txt found at '" + p.string() + "'");
}

struct TrainFlags {
  int epochs = 500;
  double lr = 1e-3;
  double decay = 0.1;
  int decay_every = 100;
  int batch = 256;
  std::uint64_t seed = 1;
  std::string optimizer = "adam";

  void add(CLI::App* c) {
    c->add_option("--epochs", epochs, "Training epochs")->capture_default_str();
    c->add_option("--lr", lr, "Initial learning rate")->capture_default_str();
    c->add_option("--decay", decay, "Learning-rate decay fraction per interval")->capture_default_str();
    c->add_option("--decay-every", decay_every, "Epochs between learning-rate decays")->capture_default_str();
    c->add_option("--batch", batch, "Mini-batch size")->capture_default_str();
    c->add_option("--seed", seed, "Seed for initialisation and shuffling")->capture_default_str();
    c->add_option("--optimizer", optimizer, "adam or sgd")
        ->check(CLI::IsMember({"adam", "sgd"}))
        ->capture_default_str();
  }
  nn::TrainConfig config() const {
    nn::TrainConfig t;
    t.epochs = epochs;
    t.learning_rate = lr;
    t.decay_factor = decay;
    t.decay_every_epochs = decay_every;
    t.batch_size = batch;
    t.seed = seed;
    t.optimizer = optimizer == "sgd" ? nn::OptimizerKind::Sgd : nn::OptimizerKind::Adam;
    return t;
  }
  void record(std::vector<std::pair<std::string, std::string>>& a) const {
    a.insert(a.end(), {{"epochs", std::to_string(epochs)},
                       {"lr", str(lr)},
                       {"decay", str(decay)},
                       {"decay_every", std::to_string(decay_every)},
                       {"batch", std::to_string(batch)},
                       {"seed", std::to_string(seed)},
                       {"optimizer", optimizer}});
  }
};

struct PhysicsFlags {
  double weight = 1.0;
  int warmup = 10;
  int ramp = 40;
  double limit = 1.0;

  void add(CLI::App* c) {
    c->add_option("--physics-weight", weight, "Weight of the mass-flow and power losses")->capture_default_str();
    c->add_option("--physics-warmup", warmup, "Epochs before the thermodynamic losses enter")->capture_default_str();
    c->add_option("--physics-ramp", ramp, "Epochs over which their weight grows to full")->capture_default_str();
    c->add_option("--physics-limit", limit, "Per-sample loss above which a sample is left out of them")
        ->capture_default_str();
  }
  void apply(train::PhaseConfig& pc) const {
    pc.weights.massflow = weight;
    pc.weights.power = weight;
    pc.physics_warmup_epochs = warmup;
    pc.physics_ramp_epochs = ramp;
    pc.physics_limit = limit;
  }
  void record(std::vector<std::pair<std::string, std::string>>& a) const {
    a.insert(a.end(), {{"physics_weight", str(weight)},
                       {"physics_warmup", std::to_string(warmup)},
                       {"physics_ramp", std::to_string(ramp)},
                       {"physics_limit", str(limit)}});
  }
};

void print_history_tail(const train::History& h) {
  if (h.rows.empty()) {
    std::cout << "no training samples; model unchanged\n";
    return;
  }
  const auto& r = h.rows.back();
  std::cout << "epoch " << r.epoch << " loss1 " << r.loss1 << " loss2 " << r.loss2 << " loss3 " << r.loss3 << '\n';
  double worst = 0.0;
  std::string name;
  for (std::size_t k = 0; k < r.test_max_error.size(); ++k) {
    if (r.test_max_error[k] >= worst) {
      worst = r.test_max_error[k];
      name = h.parameters[k];
    }
  }
  if (!name.empty()) std::cout << "largest test max relative error: " << name << ' ' << worst << '\n';
}

void save_series(const fs::path& path, const data::FlightSeries& s) {
  std::ostringstream os;
  os << "# sample_rate " << format_double(s.sample_rate) << '\n';
  const auto& ch = data::flight_channels();
  for (std::size_t i = 0; i < ch.size(); ++i) os << (i ? " " : "") << ch[i];
  os << '\n';
  for (Eigen::Index j = 0; j < s.records.cols(); ++j) {
    for (Eigen::Index i = 0; i < s.records.rows(); ++i) os << (i ? " " : "") << format_double(s.records(i, j));
    os << '\n';
  }
  write_text_file(path, os.str());
}

struct ModelEntry {
  std::string name;
  std::string kind;
  fs::path path;
};

std::vector<ModelEntry> parse_models(const std::string& list) {
  std::vector<ModelEntry> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    ModelEntry e;
    std::string spec = item;
    if (const auto eq = spec.find('='); eq != std::string::npos) {
      e.name = spec.substr(0, eq);
      spec = spec.substr(eq + 1);
    }
    if (const auto colon = spec.find(':'); colon != std::string::npos) {
      e.kind = spec.substr(0, colon);
      e.path = spec.substr(colon + 1);
    } else {
      e.kind = spec;
    }
    if (e.kind != "hybrid" && e.kind != "hybrid-w" && e.kind != "reference" && e.kind != "tnn") {
      throw UsageError("unknown model kind '" + e.kind + "' (hybrid, hybrid-w, reference, tnn)");
    }
    if (e.kind != "reference" && e.path.empty()) throw UsageError("model kind '" + e.kind + "' needs a path");
    if (e.name.empty()) e.name = e.kind == "hybrid-w" ? "hybrid_w" : e.kind;
    out.push_back(e);
  }
  if (out.empty()) throw UsageError("--models lists no models");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid component-network turbofan performance model"};
  app.require_subcommand(1);
  int jobs = 1;
  app.add_option("--jobs", jobs, "Worker threads for generation and evaluation")->check(CLI::PositiveNumber);

  // design
  auto* design = app.add_subcommand("design", "Size the engine at its design point");
  std::string spec_path, design_out;
  design->add_option("--spec", spec_path, "Design specification file (defaults when omitted)")
      ->check(CLI::ExistingFile);
  design->add_option("--out", design_out, "Engine configuration file to write")->required();

  // gen-mc
  auto* gen_mc = app.add_subcommand("gen-mc", "Monte Carlo dataset over the operating envelope");
  std::string mc_cfg, mc_out;
  std::size_t mc_n = 15360;
  double mc_split = 0.8;
  std::uint64_t mc_seed = 1;
  gen_mc->add_option("--cfg", mc_cfg, "Engine configuration")->required()->check(CLI::ExistingFile);
  gen_mc->add_option("--n", mc_n, "Number of samples")->capture_default_str()->check(CLI::PositiveNumber);
  gen_mc->add_option("--split", mc_split, "Training fraction")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  gen_mc->add_option("--seed", mc_seed, "Sampling seed")->capture_default_str();
  gen_mc->add_option("--out", mc_out, "Output directory")->required();

  // gen-fd
  auto* gen_fd = app.add_subcommand("gen-fd", "Synthetic flight dataset from a degraded engine");
  std::string fd_cfg, fd_degr, fd_mission, fd_noise, fd_out;
  std::uint64_t fd_seed = 1;
  double fd_duration = 100000.0;
  double fd_ratio = 20000.0 / 26970.0;
  gen_fd->add_option("--cfg", fd_cfg, "Clean engine configuration")->required()->check(CLI::ExistingFile);
  gen_fd->add_option("--degradation", fd_degr, "Degradation file (default scenario when omitted)")
      ->check(CLI::ExistingFile);
  gen_fd->add_option("--mission", fd_mission, "Mission profile (synthetic when omitted)")->check(CLI::ExistingFile);
  gen_fd->add_option("--noise", fd_noise, "Sensor noise file (defaults when omitted)")->check(CLI::ExistingFile);
  gen_fd->add_option("--duration", fd_duration, "Synthetic mission length [s]")->capture_default_str();
  gen_fd->add_option("--train-ratio", fd_ratio, "Chronological training fraction")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  gen_fd->add_option("--seed", fd_seed, "Mission and noise seed")->capture_default_str();
  gen_fd->add_option("--out", fd_out, "Output directory")->required();

  // pretrain
  auto* pretrain = app.add_subcommand("pretrain", "Phase one: Monte Carlo pre-training");
  std::string pre_out, pre_data;
  int width = 64;
  int layers = 2;
  bool use_ma2 = false;
  bool log_scale = false;
  TrainFlags pre_flags;
  PhysicsFlags pre_phys;
  pre_phys.weight = 0.1;
  pretrain->add_option("--model-out", pre_out, "Run directory to create")->required();
  pretrain->add_option("--data", pre_data, "Monte Carlo dataset directory")->required()->check(CLI::ExistingDirectory);
  pretrain->add_option("--width", width, "Hidden width of the component nets")->capture_default_str();
  pretrain->add_option("--layers", layers, "Hidden layers per component net")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  pretrain->add_flag("--use-ma2", use_ma2, "Feed Ma2 to the LPC net");
  pretrain->add_flag("--log-scale", log_scale, "Take logs of temperatures, pressures and flows inside the nets");
  pre_flags.add(pretrain);
  pre_phys.add(pretrain);

  // train-fd
  auto* train_fd = app.add_subcommand("train-fd", "Phase two: flight-data training");
  std::string fd_model, fd_data, fd_model_out, select = "T6";
  TrainFlags fd_flags;
  PhysicsFlags fd_phys;
  fd_phys.warmup = 0;
  fd_phys.ramp = 0;
  train_fd->add_option("--model", fd_model, "Pre-trained run or bundle")->required()->check(CLI::ExistingDirectory);
  train_fd->add_option("--data", fd_data, "Flight dataset directory")->required()->check(CLI::ExistingDirectory);
  train_fd->add_option("--select", select, "Comma-separated recorded station parameters")->capture_default_str();
  train_fd->add_option("--model-out", fd_model_out, "Run directory to create (default <model>-fd)");
  fd_flags.add(train_fd);
  fd_phys.add(train_fd);

  // train-tnn
  auto* train_tnn = app.add_subcommand("train-tnn", "Deep plain-network baseline on flight data");
  std::string tnn_data, tnn_out;
  int tnn_layers = 28, tnn_width = 64;
  TrainFlags tnn_flags;
  train_tnn->add_option("--data", tnn_data, "Flight dataset directory")->required()->check(CLI::ExistingDirectory);
  train_tnn->add_option("--model-out", tnn_out, "Output directory")->required();
  train_tnn->add_option("--layers", tnn_layers, "Hidden layers")->capture_default_str();
  train_tnn->add_option("--width", tnn_width, "Hidden width")->capture_default_str();
  tnn_flags.add(train_tnn);

  // solve-w
  auto* solve_w = app.add_subcommand("solve-w", "Iteration phase: recover W2 and W25 per sample");
  std::string sw_model, sw_data, sw_out, sw_split = "test";
  int sw_iter = 200;
  int sw_scan = wsolve::WSolveOptions{}.scan_steps;
  solve_w->add_option("--model", sw_model, "Hybrid run or bundle")->required()->check(CLI::ExistingDirectory);
  solve_w->add_option("--data", sw_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  solve_w->add_option("--split", sw_split, "train or test")->check(CLI::IsMember({"train", "test"}))->capture_default_str();
  solve_w->add_option("--max-iter", sw_iter, "Iteration cap per sample")->capture_default_str();
  solve_w->add_option("--scan-steps", sw_scan, "Coarse grid resolution before descent (0 disables)")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  solve_w->add_option("--out", sw_out, "Results file")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "Compare T6 errors of several models on a test split");
  std::string ev_models, ev_data, ev_report, ev_target = "T6";
  eval->add_option("--models", ev_models,
                   "Comma list of [name=]kind[:path]; kinds hybrid, hybrid-w, reference, tnn")
      ->required();
  eval->add_option("--data", ev_data, "Dataset directory (test split is used)")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--target", ev_target, "Station parameter to compare")->capture_default_str();
  eval->add_option("--report", ev_report, "Report directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  std::vector<std::pair<std::string, std::string>> args{{"jobs", std::to_string(jobs)}};
  try {
    if (*design) {
      const cycle::DesignSpec spec = spec_path.empty() ? cycle::DesignSpec{} : cycle::load_design_spec(spec_path);
      const cycle::EngineConfig cfg = cycle::design_point(spec);
      if (fs::path(design_out).has_parent_path()) fs::create_directories(fs::path(design_out).parent_path());
      cycle::save_config(design_out, cfg);
      args.push_back({"spec", spec_path});
      write_file_manifest(design_out, "design", args);
      std::cout << "design point written to " << design_out << '\n';
    } else if (*gen_mc) {
      const cycle::EngineConfig cfg = cycle::load_config(mc_cfg);
      data::McReport rep;
      const auto split = data::gen_mc(cfg, mc_n, data::Envelope{}, mc_split, mc_seed, &rep, jobs);
      fs::create_directories(mc_out);
      data::save_split(mc_out, split);
      cycle::save_config(fs::path(mc_out) / "engine.txt", cfg);
      args.insert(args.end(), {{"cfg", mc_cfg}, {"n", std::to_string(mc_n)}, {"split", str(mc_split)},
                               {"seed", std::to_string(mc_seed)}});
      write_dir_manifest(mc_out, "gen-mc", args);
      std::cout << rep.samples << " samples (" << rep.rejected << " draws rejected): " << split.train.size()
                << " train / " << split.test.size() << " test\n";
    } else if (*gen_fd) {
      const cycle::EngineConfig cfg = cycle::load_config(fd_cfg);
      data::FdSettings s;
      s.seed = fd_seed;
      s.train_ratio = fd_ratio;
      if (!fd_degr.empty()) s.degradation = data::load_degradation(fd_degr);
      if (!fd_noise.empty()) s.noise = data::load_noise(fd_noise);
      s.mission = fd_mission.empty() ? data::MissionProfile::synthetic(fd_duration, data::Envelope{}, fd_seed)
                                     : data::load_mission(fd_mission);
      const data::FdResult r = data::gen_fd(cfg, s, jobs);
      const fs::path out(fd_out);
      fs::create_directories(out);
      data::save_split(out, r.split);
      cycle::save_config(out / "engine.txt", cfg);
      data::save_mission(out / "mission.txt", s.mission);
      data::save_noise(out / "noise.txt", s.noise);
      data::save_degradation(out / "degradation.txt", s.degradation);
      save_series(out / "series.txt", r.series);
      args.insert(args.end(), {{"cfg", fd_cfg}, {"degradation", fd_degr}, {"mission", fd_mission},
                               {"noise", fd_noise}, {"duration", str(fd_duration)}, {"train_ratio", str(fd_ratio)},
                               {"seed", std::to_string(fd_seed)}});
      write_dir_manifest(out, "gen-fd", args);
      std::cout << r.series.size() << " series samples (" << r.series_report.failed_time_indices.size()
                << " failed solves), " << r.quasi_steady << " quasi-steady points, "
                << r.attach_report.dropped.size() << " dropped at flow attachment: " << r.split.train.size()
                << " train / " << r.split.test.size() << " test\n";
    } else if (*pretrain) {
      const data::SplitDataset mc = data::load_split(pre_data);
      const cycle::EngineConfig cfg = engine_near(pre_data);
      hybrid::HybridModel model = hybrid::HybridModel::create(cfg.bleeds(), use_ma2, pre_flags.seed, width, layers);
      model.log_scale = log_scale;
      train::PhaseConfig pc;
      pc.train = pre_flags.config();
      pre_phys.apply(pc);
      pc.run_dir = pre_out;
      const auto h = train::pretrain_mc(model, mc, pc, physics::PhysicsContext::from_config(cfg));
      cycle::save_config(fs::path(pre_out) / "engine.txt", cfg);
      args.insert(args.end(), {{"data", pre_data}, {"width", std::to_string(width)},
                                 {"layers", std::to_string(layers)},
                                 {"use_ma2", use_ma2 ? "1" : "0"},
                                 {"log_scale", log_scale ? "1" : "0"}});
      pre_flags.record(args);
      pre_phys.record(args);
      write_dir_manifest(pre_out, "pretrain", args);
      print_history_tail(h);
    } else if (*train_fd) {
      fs::path base = fs::path(fd_model).lexically_normal();
      if (base.filename().empty()) base = base.parent_path();
      const fs::path out = fd_model_out.empty() ? fs::path(base.string() + "-fd") : fs::path(fd_model_out);
      const data::SplitDataset fd = data::load_split(fd_data);
      const cycle::EngineConfig cfg = engine_near(fd_model);
      hybrid::HybridModel model = hybrid::load_model(model_dir(fd_model));
      std::vector<std::string> names;
      std::stringstream ss(select);
      for (std::string t; std::getline(ss, t, ',');) names.push_back(t);
      if (names != fd.train.y_names) throw UsageError("--select must match the recorded targets of the dataset");
      train::PhaseConfig pc;
      pc.train = fd_flags.config();
      fd_phys.apply(pc);
      pc.run_dir = out;
      const auto h =
          train::train_fd(model, fd, pc, physics::selector_from_names(names), physics::PhysicsContext::from_config(cfg));
      if (h.rows.empty()) hybrid::save_model(out / "model", model);
      cycle::save_config(out / "engine.txt", cfg);
      args.insert(args.end(), {{"model", fd_model}, {"data", fd_data}, {"select", select}});
      fd_flags.record(args);
      fd_phys.record(args);
      write_dir_manifest(out, "train-fd", args);
      print_history_tail(h);
    } else if (*train_tnn) {
      const data::SplitDataset fd = data::load_split(tnn_data);
      eval::TnnBaseline tnn = eval::TnnBaseline::create(tnn_flags.seed, tnn_width, tnn_layers);
      const auto hist = eval::train_tnn_baseline(tnn, fd.train, tnn_flags.config());
      eval::save_tnn(tnn_out, tnn);
      std::ostringstream os;
      os << "epoch loss lr\n";
      for (const auto& r : hist) os << r.epoch + 1 << ' ' << format_double(r.loss) << ' ' << format_double(r.lr) << '\n';
      write_text_file(fs::path(tnn_out) / "history.txt", os.str());
      args.insert(args.end(), {{"data", tnn_data}, {"layers", std::to_string(tnn_layers)},
                               {"width", std::to_string(tnn_width)}});
      tnn_flags.record(args);
      write_dir_manifest(tnn_out, "train-tnn", args);
      std::cout << "TNN parameters: " << tnn.parameter_count() << '\n';
    } else if (*solve_w) {
      const data::SplitDataset d = data::load_split(sw_data);
      const data::Dataset& set = sw_split == "test" ? d.test : d.train;
      const hybrid::HybridModel model = hybrid::load_model(model_dir(sw_model));
      const cycle::EngineConfig cfg = engine_near(sw_model);
      wsolve::WSolveOptions opts;
      opts.max_iterations = sw_iter;
      opts.scan_steps = sw_scan;
      const auto res = wsolve::solve_w_batch(model, cfg, set, opts, jobs);
      if (fs::path(sw_out).has_parent_path()) fs::create_directories(fs::path(sw_out).parent_path());
      wsolve::save_results(sw_out, res);
      args.insert(args.end(), {{"model", sw_model}, {"data", sw_data}, {"split", sw_split},
                               {"max_iter", std::to_string(sw_iter)}, {"scan_steps", std::to_string(sw_scan)}});
      write_file_manifest(sw_out, "solve-w", args);
      std::size_t ok = 0;
      for (const auto& r : res) ok += r.converged ? 1 : 0;
      std::cout << ok << " of " << res.size() << " solves converged\n";
    } else if (*eval) {
      const data::SplitDataset d = data::load_split(ev_data);
      const data::Dataset& test = d.test;
      const Eigen::Index target = test.y_row(ev_target);
      const int out_row = physics::selector_from_names({ev_target}).front();
      std::vector<double> truth(test.size());
      for (std::size_t k = 0; k < test.size(); ++k) truth[k] = test.y(target, static_cast<Eigen::Index>(k));
      std::vector<eval::ModelErrors> models;
      for (const ModelEntry& e : parse_models(ev_models)) {
        eval::ModelErrors m;
        m.name = e.name;
        std::vector<double> pred(test.size());
        if (e.kind == "reference") {
          if (ev_target != "T6") throw UsageError("the reference model is recorded for T6 only");
          const Eigen::Index row = test.meta_row("T6_ref");
          for (std::size_t k = 0; k < test.size(); ++k) pred[k] = test.meta(row, static_cast<Eigen::Index>(k));
        } else if (e.kind == "tnn") {
          if (ev_target != "T6") throw UsageError("the TNN baseline predicts T6 only");
          const eval::TnnBaseline tnn = eval::load_tnn(e.path);
          pred = tnn.predict(test.x);
          m.parameters = tnn.parameter_count();
        } else {
          const hybrid::HybridModel model = hybrid::load_model(model_dir(e.path));
          data::Dataset in = test;
          if (e.kind == "hybrid-w") {
            const cycle::EngineConfig cfg = engine_near(e.path);
            in = wsolve::with_solved_flows(test, wsolve::solve_w_batch(model, cfg, test, {}, jobs));
          }
          const nn::Matrix p = hybrid::predict(model, in.x);
          for (std::size_t k = 0; k < test.size(); ++k) pred[k] = p(out_row, static_cast<Eigen::Index>(k));
          m.parameters = model.parameter_count();
        }
        m.errors = eval::relative_errors(pred, truth);
        models.push_back(std::move(m));
      }
      const auto rows = eval::compare_report(models, ev_report);
      args.insert(args.end(), {{"models", ev_models}, {"data", ev_data}, {"target", ev_target}});
      write_dir_manifest(ev_report, "eval", args);
      std::cout << eval::format_report(rows);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const FormatError& e) {
    std::cerr << "I/O or schema error: " << e.what() << '\n';
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kIo;
  } catch (const Error& e) {
    std::cerr << "failed: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}
