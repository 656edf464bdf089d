#include <functional>
#include <vector>

#include "gtnet/cycle.hpp"
#include "gtnet/errors.hpp"
#include "gtnet/kv_file.hpp"

namespace gtnet::cycle {

namespace {

constexpr const char* kFormat = "gtnet-engine";
constexpr long long kVersion = 1;

// One table drives both directions so the two cannot drift apart.
struct Field {
  std::string key;
  std::function<double&(EngineConfig&)> ref;
};

std::vector<Field> fields() {
  std::vector<Field> f;
  auto add = [&f](std::string key, std::function<double&(EngineConfig&)> ref) {
    f.push_back({std::move(key), std::move(ref)});
  };
  add("design.T2", [](EngineConfig& c) -> double& { return c.design.T2; });
  add("design.P2", [](EngineConfig& c) -> double& { return c.design.P2; });
  add("design.Pamb", [](EngineConfig& c) -> double& { return c.design.Pamb; });
  add("design.W2", [](EngineConfig& c) -> double& { return c.design.W2; });
  add("design.bpr", [](EngineConfig& c) -> double& { return c.design.bpr; });
  add("design.pr_lpc", [](EngineConfig& c) -> double& { return c.design.pr_lpc; });
  add("design.pr_hpc", [](EngineConfig& c) -> double& { return c.design.pr_hpc; });
  add("design.eff_lpc", [](EngineConfig& c) -> double& { return c.design.eff_lpc; });
  add("design.eff_hpc", [](EngineConfig& c) -> double& { return c.design.eff_hpc; });
  add("design.eff_hpt", [](EngineConfig& c) -> double& { return c.design.eff_hpt; });
  add("design.eff_lpt", [](EngineConfig& c) -> double& { return c.design.eff_lpt; });
  add("design.T4", [](EngineConfig& c) -> double& { return c.design.T4; });
  add("design.n1", [](EngineConfig& c) -> double& { return c.design.n1; });
  add("design.n2", [](EngineConfig& c) -> double& { return c.design.n2; });
  for (Station s : kAllStations) {
    add("design.mach." + std::to_string(station_number(s)),
        [s](EngineConfig& c) -> double& { return c.design.mach[idx(s)]; });
  }
  add("bleeds.hpt_cl", [](EngineConfig& c) -> double& { return c.design.bleeds.hpt_cl; });
  add("bleeds.lngv_cl", [](EngineConfig& c) -> double& { return c.design.bleeds.lngv_cl; });
  add("bleeds.hngv_cl", [](EngineConfig& c) -> double& { return c.design.bleeds.hngv_cl; });
  add("bleeds.c2b", [](EngineConfig& c) -> double& { return c.design.bleeds.c2b; });
  add("shafts.eta_h", [](EngineConfig& c) -> double& { return c.design.shafts.eta_h; });
  add("shafts.eta_l", [](EngineConfig& c) -> double& { return c.design.shafts.eta_l; });
  add("shafts.p_ext", [](EngineConfig& c) -> double& { return c.design.shafts.p_ext; });
  add("losses.burner_dp", [](EngineConfig& c) -> double& { return c.design.losses.burner_dp; });
  add("losses.burner_eff", [](EngineConfig& c) -> double& { return c.design.losses.burner_eff; });
  add("losses.fuel_lhv", [](EngineConfig& c) -> double& { return c.design.losses.fuel_lhv; });
  add("losses.bypass_dp", [](EngineConfig& c) -> double& { return c.design.losses.bypass_dp; });
  add("losses.lpt_exit_dp", [](EngineConfig& c) -> double& { return c.design.losses.lpt_exit_dp; });
  add("gas.R", [](EngineConfig& c) -> double& { return c.design.gas.R; });
  add("gas.fixed_gamma", [](EngineConfig& c) -> double& { return c.design.gas.fixed_gamma; });
  for (Station s : kAllStations) {
    add("area." + std::to_string(station_number(s)), [s](EngineConfig& c) -> double& { return c.areas[idx(s)]; });
  }
  auto scalars = [&add](const std::string& name, std::function<maps::MapScalars&(EngineConfig&)> get) {
    add("scalars." + name + ".flow", [get](EngineConfig& c) -> double& { return get(c).flow; });
    add("scalars." + name + ".pr", [get](EngineConfig& c) -> double& { return get(c).pr; });
    add("scalars." + name + ".eff", [get](EngineConfig& c) -> double& { return get(c).eff; });
  };
  scalars("lpc", [](EngineConfig& c) -> maps::MapScalars& { return c.maps.lpc.scalars; });
  scalars("hpc", [](EngineConfig& c) -> maps::MapScalars& { return c.maps.hpc.scalars; });
  scalars("hpt", [](EngineConfig& c) -> maps::MapScalars& { return c.maps.hpt.scalars; });
  scalars("lpt", [](EngineConfig& c) -> maps::MapScalars& { return c.maps.lpt.scalars; });
  add("ref.T2", [](EngineConfig& c) -> double& { return c.T2_ref; });
  add("ref.T25", [](EngineConfig& c) -> double& { return c.T25_ref; });
  add("ref.T41", [](EngineConfig& c) -> double& { return c.T41_ref; });
  add("ref.T45", [](EngineConfig& c) -> double& { return c.T45_ref; });
  add("solution.n1", [](EngineConfig& c) -> double& { return c.design_solution.n1; });
  add("solution.n2", [](EngineConfig& c) -> double& { return c.design_solution.n2; });
  add("solution.wf", [](EngineConfig& c) -> double& { return c.design_solution.wf; });
  add("solution.beta_lpc", [](EngineConfig& c) -> double& { return c.design_solution.beta_lpc; });
  add("solution.beta_hpc", [](EngineConfig& c) -> double& { return c.design_solution.beta_hpc; });
  add("solution.pr_hpt", [](EngineConfig& c) -> double& { return c.design_solution.pr_hpt; });
  add("solution.pr_lpt", [](EngineConfig& c) -> double& { return c.design_solution.pr_lpt; });
  add("solution.bpr", [](EngineConfig& c) -> double& { return c.design_solution.bpr; });
  auto degr = [&add](const std::string& name, std::function<maps::ComponentDegradation&(EngineConfig&)> get) {
    add("degradation." + name + ".flow", [get](EngineConfig& c) -> double& { return get(c).flow_delta; });
    add("degradation." + name + ".eff", [get](EngineConfig& c) -> double& { return get(c).eff_delta; });
  };
  degr("lpc", [](EngineConfig& c) -> maps::ComponentDegradation& { return c.degradation.lpc; });
  degr("hpc", [](EngineConfig& c) -> maps::ComponentDegradation& { return c.degradation.hpc; });
  degr("hpt", [](EngineConfig& c) -> maps::ComponentDegradation& { return c.degradation.hpt; });
  degr("lpt", [](EngineConfig& c) -> maps::ComponentDegradation& { return c.degradation.lpt; });
  return f;
}

bool is_spec_key(const std::string& key) {
  for (const char* prefix : {"design.", "bleeds.", "shafts.", "losses.", "gas."}) {
    if (key.rfind(prefix, 0) == 0) return true;
  }
  return false;
}

constexpr const char* kSpecFormat = "gtnet-design-spec";

}  // namespace

void save_design_spec(const std::filesystem::path& path, const DesignSpec& spec) {
  KeyValueFile kv;
  kv.set("format", std::string(kSpecFormat));
  kv.set("version", kVersion);
  EngineConfig c;
  c.design = spec;
  for (const Field& f : fields()) {
    if (is_spec_key(f.key)) kv.set(f.key, f.ref(c));
  }
  write_text_file(path, kv.to_string());
}

DesignSpec load_design_spec(const std::filesystem::path& path) {
  const KeyValueFile kv = KeyValueFile::load(path);
  if (!kv.has("format") || kv.get("format") != kSpecFormat) throw FormatError("not a design specification file");
  if (kv.get_int("version") != kVersion) throw FormatError("unsupported design specification version");
  auto known = [](const std::string& key) {
    for (const Field& f : fields()) {
      if (f.key == key) return is_spec_key(key);
    }
    return false;
  };
  for (const auto& [key, value] : kv.entries()) {
    if (key != "format" && key != "version" && !known(key)) {
      throw FormatError("unknown design specification key '" + key + "'");
    }
  }
  EngineConfig c;
  for (const Field& f : fields()) {
    if (is_spec_key(f.key)) f.ref(c) = kv.get_double(f.key, f.ref(c));
  }
  return c.design;
}

std::string to_text(const EngineConfig& cfg) {
  KeyValueFile kv;
  kv.set("format", std::string(kFormat));
  kv.set("version", kVersion);
  kv.set("maps", std::string("builtin"));
  EngineConfig copy = cfg;
  for (const Field& f : fields()) kv.set(f.key, f.ref(copy));
  return "# two-spool mixed turbofan configuration\n" + kv.to_string();
}

EngineConfig config_from_text(const std::string& text) {
  const KeyValueFile kv = KeyValueFile::parse(text);
  if (!kv.has("format") || kv.get("format") != kFormat) throw FormatError("not an engine configuration file");
  if (kv.get_int("version") != kVersion) {
    throw FormatError("unsupported engine configuration version " + kv.get("version"));
  }
  if (kv.get("maps") != "builtin") throw FormatError("unknown map source '" + kv.get("maps") + "'");
  EngineConfig cfg;
  cfg.maps = maps::builtin_maps();
  for (const Field& f : fields()) f.ref(cfg) = kv.get_double(f.key);
  cfg.validate();
  return cfg;
}

void save_config(const std::filesystem::path& path, const EngineConfig& cfg) { write_text_file(path, to_text(cfg)); }

EngineConfig load_config(const std::filesystem::path& path) { return config_from_text(read_text_file(path)); }

}  // namespace gtnet::cycle
