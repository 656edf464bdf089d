#include "gtnet/component_maps.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "gtnet/errors.hpp"
#include "gtnet/kv_file.hpp"

namespace gtnet::maps {
namespace {

struct Cell {
  std::size_t i0, i1;
  double t;
};

Cell locate(const std::vector<double>& grid, double x, const std::string& what) {
  if (grid.size() < 2) throw ConfigError("map grid for " + what + " needs at least two nodes");
  if (!(x >= grid.front() && x <= grid.back())) {
    std::ostringstream os;
    os << what << " = " << x << " outside map range [" << grid.front() << ", " << grid.back() << "]";
    throw MapExtrapolationError(os.str());
  }
  auto it = std::upper_bound(grid.begin(), grid.end(), x);
  std::size_t i1 = static_cast<std::size_t>(it - grid.begin());
  if (i1 >= grid.size()) i1 = grid.size() - 1;
  const std::size_t i0 = i1 - 1;
  const double t = (x - grid[i0]) / (grid[i1] - grid[i0]);
  return {i0, i1, t};
}

double bilinear(const Table2D& tab, const Cell& r, const Cell& c) {
  const double v00 = tab(r.i0, c.i0);
  const double v01 = tab(r.i0, c.i1);
  const double v10 = tab(r.i1, c.i0);
  const double v11 = tab(r.i1, c.i1);
  const double lo = (1.0 - c.t) * v00 + c.t * v01;
  const double hi = (1.0 - c.t) * v10 + c.t * v11;
  return (1.0 - r.t) * lo + r.t * hi;
}

std::vector<double> grid(int first, int count, double denom) {
  std::vector<double> g(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) g[static_cast<std::size_t>(i)] = (first + i) / denom;
  return g;
}

CompressorMap make_compressor(const std::string& name, std::vector<double> speeds, double design_pr,
                              double design_eff, double flow_exponent) {
  CompressorMap m;
  m.name = name;
  m.speeds = std::move(speeds);
  m.betas = grid(0, 21, 20.0);
  const std::size_t ns = m.speeds.size();
  const std::size_t nb = m.betas.size();
  m.wc = Table2D(ns, nb);
  m.pr = Table2D(ns, nb);
  m.eff = Table2D(ns, nb);

  // Speed lines are quarter-ellipse arcs in (wc, pr): flat at surge, vertical
  // at choke.
  auto raw_wc = [flow_exponent](double n, double beta) {
    const double th = beta * std::numbers::pi / 2.0;
    return std::pow(n, flow_exponent) * (0.90 + 0.15 * std::sin(th));
  };
  auto raw_rise = [](double n, double beta) {
    const double th = beta * std::numbers::pi / 2.0;
    return n * n * (0.78 + 0.32 * std::cos(th));
  };
  const double wc_design = raw_wc(kDesignSpeed, kDesignBeta);
  const double rise_design = raw_rise(kDesignSpeed, kDesignBeta);

  std::size_t design_row = ns;
  std::size_t design_col = nb;
  for (std::size_t i = 0; i < ns; ++i) {
    const double n = m.speeds[i];
    if (n == kDesignSpeed) design_row = i;
    for (std::size_t j = 0; j < nb; ++j) {
      const double b = m.betas[j];
      if (b == kDesignBeta) design_col = j;
      m.wc(i, j) = raw_wc(n, b) / wc_design;
      m.pr(i, j) = 1.0 + (design_pr - 1.0) * raw_rise(n, b) / rise_design;
      m.eff(i, j) = design_eff * (1.0 - 0.5 * (n - 1.0) * (n - 1.0) - 0.4 * (b - 0.5) * (b - 0.5));
    }
  }
  // The design node carries the design values exactly.
  m.wc(design_row, design_col) = 1.0;
  m.pr(design_row, design_col) = design_pr;
  m.eff(design_row, design_col) = design_eff;
  return m;
}

TurbineMap make_turbine(const std::string& name, std::vector<double> prs, double design_pr,
                        double choke_pr, double design_eff) {
  TurbineMap m;
  m.name = name;
  m.speeds = grid(8, 19, 20.0);  // 0.40 .. 1.30
  m.prs = std::move(prs);
  const std::size_t ns = m.speeds.size();
  const std::size_t np = m.prs.size();
  m.wc = Table2D(ns, np);
  m.eff = Table2D(ns, np);

  auto raw_wc = [choke_pr](double n, double pr) {
    const double x = pr < choke_pr ? (choke_pr - pr) / (choke_pr - 1.0) : 0.0;
    return (1.0 - 0.04 * (n - 1.0)) * (1.0 - x * x);
  };
  const double wc_design = raw_wc(kDesignSpeed, design_pr);
  std::size_t design_row = ns;
  std::size_t design_col = np;
  for (std::size_t i = 0; i < ns; ++i) {
    const double n = m.speeds[i];
    if (n == kDesignSpeed) design_row = i;
    for (std::size_t j = 0; j < np; ++j) {
      const double pr = m.prs[j];
      if (pr == design_pr) design_col = j;
      const double dp = (pr - design_pr) / design_pr;
      m.wc(i, j) = raw_wc(n, pr) / wc_design;
      m.eff(i, j) = design_eff * (1.0 - 0.35 * (n - 1.0) * (n - 1.0) - 0.08 * dp * dp);
    }
  }
  m.wc(design_row, design_col) = 1.0;
  m.eff(design_row, design_col) = design_eff;
  return m;
}

void check_scaled_eff(const Table2D& eff, double scalar, const std::string& name) {
  for (double e : eff.values()) {
    const double s = e * scalar;
    if (!(s > 0.0 && s <= 1.0)) {
      std::ostringstream os;
      os << name << ": scaled efficiency " << s << " outside (0, 1]";
      throw InvalidDegradationError(os.str());
    }
  }
}

}  // namespace

CompressorPoint interp_compressor(const CompressorMap& map, double n_corr, double beta) {
  const Cell r = locate(map.speeds, n_corr, map.name + " corrected speed");
  const Cell c = locate(map.betas, beta, map.name + " beta");
  CompressorPoint p;
  p.wc = bilinear(map.wc, r, c) * map.scalars.flow;
  p.pr = bilinear(map.pr, r, c) * map.scalars.pr;
  p.eff = bilinear(map.eff, r, c) * map.scalars.eff;
  return p;
}

TurbinePoint interp_turbine(const TurbineMap& map, double n_corr, double pr) {
  const Cell r = locate(map.speeds, n_corr, map.name + " corrected speed");
  const Cell c = locate(map.prs, pr / map.scalars.pr, map.name + " pressure ratio");
  TurbinePoint p;
  p.wc = bilinear(map.wc, r, c) * map.scalars.flow;
  p.eff = bilinear(map.eff, r, c) * map.scalars.eff;
  return p;
}

bool DegradationState::is_zero() const {
  for (const auto* c : {&lpc, &hpc, &hpt, &lpt}) {
    if (c->flow_delta != 0.0 || c->eff_delta != 0.0) return false;
  }
  return true;
}

CompressorMap apply_degradation(const CompressorMap& map, const ComponentDegradation& d) {
  CompressorMap out = map;
  out.scalars.flow *= 1.0 + d.flow_delta;
  out.scalars.eff *= 1.0 + d.eff_delta;
  if (!(out.scalars.flow > 0.0)) throw InvalidDegradationError(map.name + ": flow scalar not positive");
  check_scaled_eff(out.eff, out.scalars.eff, map.name);
  return out;
}

TurbineMap apply_degradation(const TurbineMap& map, const ComponentDegradation& d) {
  TurbineMap out = map;
  out.scalars.flow *= 1.0 + d.flow_delta;
  out.scalars.eff *= 1.0 + d.eff_delta;
  if (!(out.scalars.flow > 0.0)) throw InvalidDegradationError(map.name + ": flow scalar not positive");
  check_scaled_eff(out.eff, out.scalars.eff, map.name);
  return out;
}

MapSet apply_degradation(const MapSet& maps, const DegradationState& d) {
  return MapSet{apply_degradation(maps.lpc, d.lpc), apply_degradation(maps.hpc, d.hpc),
                apply_degradation(maps.hpt, d.hpt), apply_degradation(maps.lpt, d.lpt)};
}

MapSet builtin_maps() {
  MapSet s;
  s.lpc = make_compressor("LPC", grid(12, 35, 40.0), kLpcDesignPr, kLpcDesignEff, 1.15);  // 0.30 .. 1.15
  s.hpc = make_compressor("HPC", grid(20, 27, 40.0), kHpcDesignPr, kHpcDesignEff, 1.4);  // 0.50 .. 1.15
  s.hpt = make_turbine("HPT", grid(12, 39, 10.0), kHptDesignPr, 2.4, kHptDesignEff);  // pr 1.2 .. 5.0
  s.lpt = make_turbine("LPT", grid(11, 40, 10.0), kLptDesignPr, 3.8, kLptDesignEff);  // pr 1.1 .. 5.0
  return s;
}

namespace {

void check_axis(std::ostringstream& os, const std::vector<double>& axis, const char* name) {
  if (axis.size() < 2) os << name << " axis needs at least two values; ";
  for (std::size_t i = 1; i < axis.size(); ++i) {
    if (!(axis[i] > axis[i - 1])) os << name << " axis not strictly increasing at " << i << "; ";
  }
}

}  // namespace

std::string check_invariants(const CompressorMap& m) {
  std::ostringstream os;
  check_axis(os, m.speeds, "speed");
  check_axis(os, m.betas, "beta");
  for (const Table2D* t : {&m.wc, &m.pr, &m.eff}) {
    if (t->rows() != m.speeds.size() || t->cols() != m.betas.size()) {
      os << "table shape does not match the grid; ";
      return os.str();
    }
  }
  for (std::size_t i = 0; i < m.speeds.size(); ++i) {
    for (std::size_t j = 0; j < m.betas.size(); ++j) {
      const double e = m.eff(i, j) * m.scalars.eff;
      const double pr = m.pr(i, j) * m.scalars.pr;
      const double wc = m.wc(i, j) * m.scalars.flow;
      if (!(e > 0.0 && e <= 1.0)) os << "eff " << e << " at node (" << i << "," << j << "); ";
      if (!(pr >= 1.0)) os << "pr " << pr << " < 1 at node (" << i << "," << j << "); ";
      if (!(wc > 0.0)) os << "wc " << wc << " <= 0 at node (" << i << "," << j << "); ";
      if (j > 0) {
        if (m.wc(i, j) < m.wc(i, j - 1)) os << "wc decreasing in beta at speed " << m.speeds[i] << "; ";
        if (m.pr(i, j) > m.pr(i, j - 1)) os << "pr increasing in beta at speed " << m.speeds[i] << "; ";
      }
    }
  }
  return os.str();
}

std::string check_invariants(const TurbineMap& m) {
  std::ostringstream os;
  check_axis(os, m.speeds, "speed");
  check_axis(os, m.prs, "pressure-ratio");
  for (const Table2D* t : {&m.wc, &m.eff}) {
    if (t->rows() != m.speeds.size() || t->cols() != m.prs.size()) {
      os << "table shape does not match the grid; ";
      return os.str();
    }
  }
  for (std::size_t i = 0; i < m.speeds.size(); ++i) {
    for (std::size_t j = 0; j < m.prs.size(); ++j) {
      const double e = m.eff(i, j) * m.scalars.eff;
      const double wc = m.wc(i, j) * m.scalars.flow;
      if (!(e > 0.0 && e <= 1.0)) os << "eff " << e << " at node (" << i << "," << j << "); ";
      if (!(wc > 0.0)) os << "wc " << wc << " <= 0 at node (" << i << "," << j << "); ";
      if (j > 0 && m.wc(i, j) < m.wc(i, j - 1)) os << "wc decreasing in pr at speed " << m.speeds[i] << "; ";
    }
  }
  return os.str();
}

namespace {

void write_vector(std::ostream& os, const char* key, const std::vector<double>& v) {
  os << key << ' ' << v.size();
  for (double x : v) os << ' ' << format_double(x);
  os << '\n';
}

struct MapHeader {
  std::string kind;
  std::string name;
  MapScalars scalars;
  std::vector<double> speeds;
  std::vector<double> second;
};

std::vector<std::string> next_tokens(std::istream& is) {
  std::string line;
  while (std::getline(is, line)) {
    auto t = split_ws(line);
    if (t.empty() || t[0][0] == '#') continue;
    return t;
  }
  throw FormatError("map file truncated");
}

std::vector<double> read_vector(const std::vector<std::string>& t, const std::string& key) {
  if (t.size() < 2 || t[0] != key) throw FormatError("map file: expected '" + key + "'");
  const auto n = static_cast<std::size_t>(std::stoul(t[1]));
  if (t.size() != n + 2) throw FormatError("map file: '" + key + "' count mismatch");
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = parse_double(t[i + 2]);
  return v;
}

MapHeader read_header(std::istream& is, const std::string& kind, const std::string& second_key) {
  auto t = next_tokens(is);
  if (t.size() != 2 || t[0] != "gtnet-map") throw FormatError("not a map file");
  if (t[1] != "1") throw FormatError("unsupported map format version " + t[1]);
  MapHeader h;
  t = next_tokens(is);
  if (t.size() != 2 || t[0] != "kind") throw FormatError("map file: expected 'kind'");
  h.kind = t[1];
  if (h.kind != kind) throw FormatError("map file holds a " + h.kind + " map, expected " + kind);
  t = next_tokens(is);
  if (t.size() != 2 || t[0] != "name") throw FormatError("map file: expected 'name'");
  h.name = t[1];
  t = next_tokens(is);
  if (t.size() != 4 || t[0] != "scalars") throw FormatError("map file: expected 'scalars'");
  h.scalars = {parse_double(t[1]), parse_double(t[2]), parse_double(t[3])};
  h.speeds = read_vector(next_tokens(is), "speeds");
  h.second = read_vector(next_tokens(is), second_key);
  return h;
}

}  // namespace

void write_map(std::ostream& os, const CompressorMap& m) {
  os << "gtnet-map 1\nkind compressor\nname " << m.name << "\nscalars " << format_double(m.scalars.flow)
     << ' ' << format_double(m.scalars.pr) << ' ' << format_double(m.scalars.eff) << '\n';
  write_vector(os, "speeds", m.speeds);
  write_vector(os, "betas", m.betas);
  os << "columns speed beta wc pr eff\n";
  for (std::size_t i = 0; i < m.speeds.size(); ++i) {
    for (std::size_t j = 0; j < m.betas.size(); ++j) {
      os << format_double(m.speeds[i]) << ' ' << format_double(m.betas[j]) << ' '
         << format_double(m.wc(i, j)) << ' ' << format_double(m.pr(i, j)) << ' '
         << format_double(m.eff(i, j)) << '\n';
    }
  }
}

void write_map(std::ostream& os, const TurbineMap& m) {
  os << "gtnet-map 1\nkind turbine\nname " << m.name << "\nscalars " << format_double(m.scalars.flow)
     << ' ' << format_double(m.scalars.pr) << ' ' << format_double(m.scalars.eff) << '\n';
  write_vector(os, "speeds", m.speeds);
  write_vector(os, "prs", m.prs);
  os << "columns speed pr wc eff\n";
  for (std::size_t i = 0; i < m.speeds.size(); ++i) {
    for (std::size_t j = 0; j < m.prs.size(); ++j) {
      os << format_double(m.speeds[i]) << ' ' << format_double(m.prs[j]) << ' '
         << format_double(m.wc(i, j)) << ' ' << format_double(m.eff(i, j)) << '\n';
    }
  }
}

CompressorMap read_compressor_map(std::istream& is) {
  MapHeader h = read_header(is, "compressor", "betas");
  auto t = next_tokens(is);
  if (t != std::vector<std::string>{"columns", "speed", "beta", "wc", "pr", "eff"}) {
    throw FormatError("compressor map: unexpected column layout");
  }
  CompressorMap m;
  m.name = h.name;
  m.scalars = h.scalars;
  m.speeds = h.speeds;
  m.betas = h.second;
  m.wc = Table2D(m.speeds.size(), m.betas.size());
  m.pr = m.wc;
  m.eff = m.wc;
  for (std::size_t i = 0; i < m.speeds.size(); ++i) {
    for (std::size_t j = 0; j < m.betas.size(); ++j) {
      t = next_tokens(is);
      if (t.size() != 5) throw FormatError("compressor map: bad row");
      if (parse_double(t[0]) != m.speeds[i] || parse_double(t[1]) != m.betas[j]) {
        throw FormatError("compressor map: rows out of grid order");
      }
      m.wc(i, j) = parse_double(t[2]);
      m.pr(i, j) = parse_double(t[3]);
      m.eff(i, j) = parse_double(t[4]);
    }
  }
  return m;
}

TurbineMap read_turbine_map(std::istream& is) {
  MapHeader h = read_header(is, "turbine", "prs");
  auto t = next_tokens(is);
  if (t != std::vector<std::string>{"columns", "speed", "pr", "wc", "eff"}) {
    throw FormatError("turbine map: unexpected column layout");
  }
  TurbineMap m;
  m.name = h.name;
  m.scalars = h.scalars;
  m.speeds = h.speeds;
  m.prs = h.second;
  m.wc = Table2D(m.speeds.size(), m.prs.size());
  m.eff = m.wc;
  for (std::size_t i = 0; i < m.speeds.size(); ++i) {
    for (std::size_t j = 0; j < m.prs.size(); ++j) {
      t = next_tokens(is);
      if (t.size() != 4) throw FormatError("turbine map: bad row");
      if (parse_double(t[0]) != m.speeds[i] || parse_double(t[1]) != m.prs[j]) {
        throw FormatError("turbine map: rows out of grid order");
      }
      m.wc(i, j) = parse_double(t[2]);
      m.eff(i, j) = parse_double(t[3]);
    }
  }
  return m;
}

}  // namespace gtnet::maps
