#include "gtnet/flight_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "gtnet/errors.hpp"
#include "gtnet/kv_file.hpp"
#include "gtnet/parallel.hpp"
#include "gtnet/seeds.hpp"

namespace gtnet::data {

Waypoint MissionProfile::at(double t) const {
  if (waypoints.empty()) throw ConfigError("mission has no waypoints");
  if (t <= waypoints.front().t) return waypoints.front();
  if (t >= waypoints.back().t) return waypoints.back();
  const auto it = std::upper_bound(waypoints.begin(), waypoints.end(), t,
                                   [](double v, const Waypoint& w) { return v < w.t; });
  const Waypoint& b = *it;
  const Waypoint& a = *(it - 1);
  const double s = (t - a.t) / (b.t - a.t);
  auto lerp = [s](double x, double y) { return x + s * (y - x); };
  return {t, lerp(a.T2, b.T2), lerp(a.P2, b.P2), lerp(a.Pamb, b.Pamb), lerp(a.N2, b.N2)};
}

void MissionProfile::validate() const {
  if (!(sample_rate > 0.0)) throw ConfigError("sample rate must be positive");
  if (waypoints.size() < 2) throw ConfigError("mission needs at least two waypoints");
  for (std::size_t i = 0; i < waypoints.size(); ++i) {
    const Waypoint& w = waypoints[i];
    if (i > 0 && !(w.t > waypoints[i - 1].t)) throw ConfigError("waypoint times must increase");
    if (!(w.T2 > 0.0 && w.P2 > 0.0 && w.Pamb > 0.0 && w.N2 > 0.0)) {
      throw ConfigError("waypoint values must be positive");
    }
  }
}

MissionProfile MissionProfile::synthetic(double duration, const Envelope& env, std::uint64_t seed, double hold_min,
                                         double hold_max) {
  env.validate();
  if (!(duration > 0.0) || !(hold_min > 0.0) || hold_max < hold_min) throw ConfigError("bad mission timing");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto draw = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  auto clamp_to = [&env](Waypoint w) {
    w.T2 = std::clamp(w.T2, env.T2_min, env.T2_max);
    w.P2 = std::clamp(w.P2, env.P2_min, env.P2_max);
    w.Pamb = std::clamp(w.Pamb, env.Pamb_min, std::min(env.Pamb_max, w.P2));
    w.N2 = std::clamp(w.N2, env.N2_min, env.N2_max);
    return w;
  };
  auto random_point = [&](double t) {
    Waypoint w{t, draw(env.T2_min, env.T2_max), draw(env.P2_min, env.P2_max), 0.0, draw(env.N2_min, env.N2_max)};
    w.Pamb = draw(env.Pamb_min, std::min(env.Pamb_max, w.P2));
    return clamp_to(w);
  };

  MissionProfile m;
  m.waypoints.push_back(random_point(0.0));
  while (m.waypoints.back().t < duration) {
    // hold with a slow drift
    Waypoint w = m.waypoints.back();
    w.t += std::round(draw(hold_min, hold_max));
    w.T2 += draw(-3.0, 3.0);
    w.P2 *= 1.0 + draw(-0.03, 0.03);
    w.Pamb *= 1.0 + draw(-0.03, 0.03);
    w.N2 *= 1.0 + draw(-0.02, 0.02);
    m.waypoints.push_back(clamp_to(w));
    // transition to a new condition
    Waypoint next = random_point(w.t + std::round(draw(10.0, 30.0)));
    m.waypoints.push_back(next);
  }
  return m;
}

void save_mission(const std::filesystem::path& path, const MissionProfile& m) {
  std::ostringstream os;
  os << "format gtnet-mission\nversion 1\nsample_rate " << format_double(m.sample_rate) << "\nwaypoints "
     << m.waypoints.size() << "\n# t T2 P2 Pamb N2\n";
  for (const Waypoint& w : m.waypoints) {
    os << format_double(w.t) << ' ' << format_double(w.T2) << ' ' << format_double(w.P2) << ' '
       << format_double(w.Pamb) << ' ' << format_double(w.N2) << '\n';
  }
  write_text_file(path, os.str());
}

MissionProfile load_mission(const std::filesystem::path& path) {
  std::istringstream is(read_text_file(path));
  std::string line;
  MissionProfile m;
  std::size_t expected = 0;
  bool have_count = false;
  bool have_format = false;
  while (std::getline(is, line)) {
    const auto tok = split_ws(line);
    if (tok.empty() || tok[0][0] == '#') continue;
    if (!have_count) {
      if (tok.size() != 2) throw FormatError("bad mission header line '" + line + "'");
      if (tok[0] == "format") {
        if (tok[1] != "gtnet-mission") throw FormatError("not a mission file");
        have_format = true;
      } else if (tok[0] == "version") {
        if (tok[1] != "1") throw FormatError("unsupported mission version");
      } else if (tok[0] == "sample_rate") {
        m.sample_rate = parse_double(tok[1]);
      } else if (tok[0] == "waypoints") {
        expected = static_cast<std::size_t>(parse_double(tok[1]));
        have_count = true;
      } else {
        throw FormatError("unknown mission key '" + tok[0] + "'");
      }
      continue;
    }
    if (tok.size() != 5) throw FormatError("waypoint rows need 5 values");
    m.waypoints.push_back({parse_double(tok[0]), parse_double(tok[1]), parse_double(tok[2]), parse_double(tok[3]),
                           parse_double(tok[4])});
  }
  if (!have_format || !have_count || m.waypoints.size() != expected) {
    throw FormatError("mission file incomplete or waypoint count mismatch");
  }
  m.validate();
  return m;
}

void save_noise(const std::filesystem::path& path, const NoiseConfig& n) {
  KeyValueFile kv;
  kv.set("format", std::string("gtnet-noise"));
  kv.set("version", 1LL);
  kv.set("T6", n.T6);
  kv.set("N1", n.N1);
  kv.set("N2", n.N2);
  kv.set("WF", n.WF);
  kv.set("T2", n.T2);
  kv.set("P2", n.P2);
  kv.set("Pamb", n.Pamb);
  kv.save(path);
}

NoiseConfig load_noise(const std::filesystem::path& path) {
  const KeyValueFile kv = KeyValueFile::load(path);
  if (!kv.has("format") || kv.get("format") != "gtnet-noise" || kv.get_int("version") != 1) {
    throw FormatError("not a noise configuration file");
  }
  NoiseConfig n;
  n.T6 = kv.get_double("T6", n.T6);
  n.N1 = kv.get_double("N1", n.N1);
  n.N2 = kv.get_double("N2", n.N2);
  n.WF = kv.get_double("WF", n.WF);
  n.T2 = kv.get_double("T2", n.T2);
  n.P2 = kv.get_double("P2", n.P2);
  n.Pamb = kv.get_double("Pamb", n.Pamb);
  for (double v : {n.T6, n.N1, n.N2, n.WF, n.T2, n.P2, n.Pamb}) {
    if (!(v >= 0.0)) throw ConfigError("noise levels must be non-negative");
  }
  return n;
}

void save_degradation(const std::filesystem::path& path, const maps::DegradationState& d) {
  KeyValueFile kv;
  kv.set("format", std::string("gtnet-degradation"));
  kv.set("version", 1LL);
  kv.set("lpc.flow", d.lpc.flow_delta);
  kv.set("lpc.eff", d.lpc.eff_delta);
  kv.set("hpc.flow", d.hpc.flow_delta);
  kv.set("hpc.eff", d.hpc.eff_delta);
  kv.set("hpt.flow", d.hpt.flow_delta);
  kv.set("hpt.eff", d.hpt.eff_delta);
  kv.set("lpt.flow", d.lpt.flow_delta);
  kv.set("lpt.eff", d.lpt.eff_delta);
  kv.save(path);
}

maps::DegradationState load_degradation(const std::filesystem::path& path) {
  const KeyValueFile kv = KeyValueFile::load(path);
  if (!kv.has("format") || kv.get("format") != "gtnet-degradation" || kv.get_int("version") != 1) {
    throw FormatError("not a degradation file");
  }
  maps::DegradationState d;
  d.lpc = {kv.get_double("lpc.flow", 0.0), kv.get_double("lpc.eff", 0.0)};
  d.hpc = {kv.get_double("hpc.flow", 0.0), kv.get_double("hpc.eff", 0.0)};
  d.hpt = {kv.get_double("hpt.flow", 0.0), kv.get_double("hpt.eff", 0.0)};
  d.lpt = {kv.get_double("lpt.flow", 0.0), kv.get_double("lpt.eff", 0.0)};
  return d;
}

maps::DegradationState default_degradation() {
  maps::DegradationState d;
  d.hpc = {-0.015, -0.02};
  d.lpt = {0.0, -0.01};
  return d;
}

Eigen::Index FlightSeries::row(const std::string& channel) const {
  const auto& c = flight_channels();
  const auto it = std::find(c.begin(), c.end(), channel);
  if (it == c.end()) throw ConfigError("unknown flight channel '" + channel + "'");
  return static_cast<Eigen::Index>(it - c.begin());
}

FlightSeries gen_flight_series(const cycle::EngineConfig& cfg, const MissionProfile& mission,
                               const NoiseConfig& noise, std::uint64_t seed, FlightReport* report, int jobs) {
  mission.validate();
  const auto n = static_cast<std::size_t>(std::floor(mission.duration() * mission.sample_rate)) + 1;
  const auto rows = static_cast<Eigen::Index>(flight_channels().size());
  // noise is drawn up front so every sample owns a fixed slice of the stream
  constexpr int kNoisy = 7;
  std::vector<double> z(n * kNoisy);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (double& v : z) v = gauss(rng);

  std::vector<Eigen::VectorXd> cols(n);
  std::vector<char> ok(n, 0);
  parallel_for(n, jobs, [&](std::size_t k) {
    const double t = static_cast<double>(k) / mission.sample_rate;
    const Waypoint w = mission.at(t);
    cycle::OperatingInputs in;
    in.T2 = w.T2;
    in.P2 = w.P2;
    in.Pamb = w.Pamb;
    in.control = cycle::Control::N2;
    in.control_value = w.N2 * cfg.design.n2;
    cycle::CyclePoint p;
    try {
      p = cycle::off_design(cfg, in);
    } catch (const Error&) {
      return;
    }
    const double* e = &z[k * kNoisy];
    const double T6 = p.at(Station::S6).Tt;
    Eigen::VectorXd c(rows);
    c << t, w.T2 * (1.0 + noise.T2 * e[0]), w.P2 * (1.0 + noise.P2 * e[1]), w.Pamb * (1.0 + noise.Pamb * e[2]),
        p.solution.n1 * (1.0 + noise.N1 * e[3]), p.solution.n2 * (1.0 + noise.N2 * e[4]),
        p.WF() * (1.0 + noise.WF * e[5]), T6 * (1.0 + noise.T6 * e[6]), T6, p.solution.n1, p.solution.n2, p.W2(),
        p.W25();
    cols[k] = std::move(c);
    ok[k] = 1;
  });

  FlightReport rep;
  for (std::size_t k = 0; k < n; ++k) {
    if (!ok[k]) rep.failed_time_indices.push_back(k);
  }
  FlightSeries fs;
  fs.sample_rate = mission.sample_rate;
  fs.records = nn::Matrix(rows, static_cast<Eigen::Index>(n - rep.failed_time_indices.size()));
  Eigen::Index j = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (ok[k]) fs.records.col(j++) = cols[k];
  }
  rep.samples = static_cast<std::size_t>(j);
  if (report) *report = rep;
  return fs;
}

nn::Matrix extract_quasi_steady(const FlightSeries& series, int window, double amplitude) {
  if (window <= 0) throw ConfigError("window must be positive");
  const Eigen::Index n1 = series.row("N1");
  const Eigen::Index t_row = series.row("t");
  const Eigen::Index n = series.records.cols();
  const double dt = 1.0 / series.sample_rate;
  std::vector<Eigen::VectorXd> out;
  Eigen::Index i = 0;
  while (i + window <= n) {
    // samples dropped by failed solves break contiguity
    const bool contiguous =
        std::abs(series.records(t_row, i + window - 1) - series.records(t_row, i) - (window - 1) * dt) < 1e-9;
    const auto block = series.records.middleCols(i, window);
    const double lo = block.row(n1).minCoeff();
    const double hi = block.row(n1).maxCoeff();
    const double mean = block.row(n1).mean();
    if (contiguous && (hi - lo) / mean < amplitude) {
      out.push_back(block.rowwise().mean());
      i += window;
    } else {
      ++i;
    }
  }
  nn::Matrix m(series.records.rows(), static_cast<Eigen::Index>(out.size()));
  for (std::size_t j = 0; j < out.size(); ++j) m.col(static_cast<Eigen::Index>(j)) = out[j];
  return m;
}

Dataset attach_w2_w25(const nn::Matrix& qs, const cycle::EngineConfig& cfg, AttachReport* report, int jobs) {
  FlightSeries probe;  // channel lookup only
  auto r = [&probe](const char* c) { return probe.row(c); };
  const auto n = static_cast<std::size_t>(qs.cols());
  std::vector<cycle::CyclePoint> points(n);
  std::vector<char> ok(n, 0);
  parallel_for(n, jobs, [&](std::size_t k) {
    const auto c = qs.col(static_cast<Eigen::Index>(k));
    cycle::OperatingInputs in;
    in.T2 = c(r("T2"));
    in.P2 = c(r("P2"));
    in.Pamb = c(r("Pamb"));
    in.control = cycle::Control::N2;
    in.control_value = c(r("N2"));
    try {
      points[k] = cycle::off_design(cfg, in);
      ok[k] = 1;
    } catch (const Error&) {
    }
  });

  AttachReport rep;
  for (std::size_t k = 0; k < n; ++k) {
    if (!ok[k]) rep.dropped.push_back(k);
  }
  const auto m = static_cast<Eigen::Index>(n - rep.dropped.size());
  Dataset d;
  d.tag = "fd";
  d.x_names = input_names();
  d.y_names = {"T6"};
  d.meta_names = {"T6_true", "T6_ref", "W2_true", "W25_true", "t"};
  d.x = nn::Matrix(hybrid::kInputCount, m);
  d.y = nn::Matrix(1, m);
  d.meta = nn::Matrix(5, m);
  Eigen::Index j = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (!ok[k]) continue;
    const auto c = qs.col(static_cast<Eigen::Index>(k));
    const cycle::CyclePoint& p = points[k];
    d.x.col(j) << c(r("T2")), c(r("P2")), std::nan(""), c(r("Pamb")), c(r("N1")), c(r("N2")), p.W2(), p.W25(),
        c(r("WF"));
    d.y(0, j) = c(r("T6"));
    d.meta.col(j) << c(r("T6_true")), p.at(Station::S6).Tt, c(r("W2_true")), c(r("W25_true")), c(r("t"));
    ++j;
  }
  rep.attached = static_cast<std::size_t>(m);
  if (report) *report = rep;
  return d;
}

SplitDataset split_chronological(const Dataset& d, double ratio) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw ConfigError("split ratio must lie in [0, 1]");
  const std::size_t n = d.size();
  const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
  std::vector<std::size_t> a(n_train), b(n - n_train);
  std::iota(a.begin(), a.end(), std::size_t{0});
  std::iota(b.begin(), b.end(), n_train);
  SplitDataset s;
  s.train = d.subset(a);
  s.test = d.subset(b);
  s.ratio = ratio;
  return s;
}

FdResult gen_fd(const cycle::EngineConfig& cfg_clean, const FdSettings& s, int jobs) {
  const cycle::EngineConfig degraded = cycle::degrade(cfg_clean, s.degradation);
  FdResult r;
  r.series = gen_flight_series(degraded, s.mission, s.noise, s.seed, &r.series_report, jobs);
  const nn::Matrix qs = extract_quasi_steady(r.series, s.window, s.amplitude);
  r.quasi_steady = static_cast<std::size_t>(qs.cols());
  r.split = split_chronological(attach_w2_w25(qs, cfg_clean, &r.attach_report, jobs), s.train_ratio);
  r.split.seed = s.seed;
  return r;
}

}  // namespace gtnet::data
