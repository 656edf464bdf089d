#include "gtnet/datasets.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "gtnet/errors.hpp"
#include "gtnet/kv_file.hpp"
#include "gtnet/seeds.hpp"

namespace gtnet::data {

using hybrid::kInputCount;
using hybrid::kOutputCount;

namespace {

Matrix take_columns(const Matrix& m, const std::vector<std::size_t>& columns) {
  Matrix out(m.rows(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t k = 0; k < columns.size(); ++k) {
    out.col(static_cast<Eigen::Index>(k)) = m.col(static_cast<Eigen::Index>(columns[k]));
  }
  return out;
}

Eigen::Index find_row(const std::vector<std::string>& names, const std::string& name, const char* what) {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<Eigen::Index>(i);
  }
  throw FormatError(std::string("dataset has no ") + what + " column '" + name + "'");
}

constexpr std::uint64_t kSplitStream = 0xFFFF0001ULL;

}  // namespace

Dataset Dataset::subset(const std::vector<std::size_t>& columns) const {
  Dataset d = *this;
  d.x = take_columns(x, columns);
  d.y = take_columns(y, columns);
  d.meta = take_columns(meta, columns);
  return d;
}

Eigen::Index Dataset::meta_row(const std::string& name) const { return find_row(meta_names, name, "meta"); }
Eigen::Index Dataset::y_row(const std::string& name) const { return find_row(y_names, name, "target"); }

std::vector<std::string> input_names() { return {hybrid::kInputNames.begin(), hybrid::kInputNames.end()}; }

std::vector<std::string> output_names() {
  std::vector<std::string> n;
  for (int i = 0; i < kOutputCount; ++i) n.push_back(hybrid::output_name(i));
  return n;
}

Dataset empty_mc_dataset() {
  Dataset d;
  d.tag = "mc";
  d.x_names = input_names();
  d.y_names = output_names();
  d.x = Matrix(kInputCount, 0);
  d.y = Matrix(kOutputCount, 0);
  d.meta = Matrix(0, 0);
  return d;
}

SplitDataset split(const Dataset& all, double ratio, std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw ConfigError("split ratio must lie in [0, 1]");
  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(seed, kSplitStream));
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(all.size())));
  std::vector<std::size_t> tr(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> te(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(tr.begin(), tr.end());
  std::sort(te.begin(), te.end());
  return {all.subset(tr), all.subset(te), ratio, seed};
}

void Envelope::validate() const {
  auto ok = [](double lo, double hi) { return lo > 0.0 && hi >= lo; };
  if (!ok(T2_min, T2_max) || !ok(P2_min, P2_max) || !ok(Pamb_min, Pamb_max) || !ok(N2_min, N2_max)) {
    throw ConfigError("envelope ranges must be positive with min <= max");
  }
  if (Pamb_min > P2_max) throw ConfigError("envelope admits no point with Pamb <= P2");
}

std::vector<double> inputs_of(const cycle::CyclePoint& p) {
  const auto& s2 = p.at(Station::S2);
  return {s2.Tt, s2.Pt, s2.Ma, p.inputs.Pamb, p.solution.n1, p.solution.n2, p.W2(), p.W25(), p.WF()};
}

std::vector<double> targets_of(const cycle::CyclePoint& p) {
  std::vector<double> y;
  for (Station s : hybrid::kOutputStations) {
    const auto& st = p.at(s);
    y.insert(y.end(), {st.Tt, st.Pt, st.Ma});
  }
  return y;
}

Dataset gen_mc_samples(const cycle::EngineConfig& cfg, std::size_t n, const Envelope& env, std::uint64_t seed,
                       McReport* report, int jobs) {
  env.validate();
  if (n == 0) throw ConfigError("sample count must be positive");
  Dataset d = empty_mc_dataset();
  d.x = Matrix(kInputCount, static_cast<Eigen::Index>(n));
  d.y = Matrix(kOutputCount, static_cast<Eigen::Index>(n));
  d.meta = Matrix(0, static_cast<Eigen::Index>(n));

  std::vector<std::size_t> rejects(n, 0);
  std::atomic<std::size_t> total_rejects{0};
  std::atomic<bool> abort{false};

  auto work = [&](std::size_t k) {
    std::mt19937_64 rng(derive_seed(seed, k));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto draw = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
    while (!abort.load(std::memory_order_relaxed)) {
      cycle::OperatingInputs in;
      in.T2 = draw(env.T2_min, env.T2_max);
      in.P2 = draw(env.P2_min, env.P2_max);
      in.Pamb = draw(env.Pamb_min, env.Pamb_max);
      in.control = cycle::Control::N2;
      in.control_value = cfg.design.n2 * draw(env.N2_min, env.N2_max);
      if (in.Pamb > in.P2) continue;
      try {
        const cycle::CyclePoint p = cycle::off_design(cfg, in);
        const auto x = inputs_of(p);
        const auto y = targets_of(p);
        for (int i = 0; i < kInputCount; ++i) d.x(i, static_cast<Eigen::Index>(k)) = x[static_cast<std::size_t>(i)];
        for (int i = 0; i < kOutputCount; ++i) d.y(i, static_cast<Eigen::Index>(k)) = y[static_cast<std::size_t>(i)];
        return;
      } catch (const Error&) {
        ++rejects[k];
        if (++total_rejects > n) abort = true;
      }
    }
  };

  const int workers = std::max(1, jobs);
  if (workers == 1) {
    for (std::size_t k = 0; k < n && !abort; ++k) work(k);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t k = static_cast<std::size_t>(w); k < n && !abort; k += static_cast<std::size_t>(workers)) {
          work(k);
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  const std::size_t rejected = std::accumulate(rejects.begin(), rejects.end(), std::size_t{0});
  if (abort || rejected > n) {
    throw EnvelopeError("more than half of the Monte Carlo draws failed to converge; shrink the envelope");
  }
  if (report) *report = {n, rejected};
  return d;
}

SplitDataset gen_mc(const cycle::EngineConfig& cfg, std::size_t n, const Envelope& env, double ratio,
                    std::uint64_t seed, McReport* report, int jobs) {
  return split(gen_mc_samples(cfg, n, env, seed, report, jobs), ratio, seed);
}

namespace {
constexpr const char* kFormat = "gtnet-dataset";
constexpr const char* kVersion = "1";

std::vector<std::string> next_tokens(std::istream& is, const std::string& what) {
  std::string line;
  while (std::getline(is, line)) {
    auto tok = split_ws(line);
    if (!tok.empty()) return tok;
  }
  throw FormatError("dataset truncated: missing " + what);
}

}  // namespace

void save_dataset(const std::filesystem::path& path, const Dataset& d) {
  if (d.x.rows() != static_cast<Eigen::Index>(d.x_names.size()) ||
      d.y.rows() != static_cast<Eigen::Index>(d.y_names.size()) ||
      d.meta.rows() != static_cast<Eigen::Index>(d.meta_names.size()) || d.y.cols() != d.x.cols() ||
      d.meta.cols() != d.x.cols()) {
    throw ConfigError("dataset matrices do not match their column names");
  }
  std::ostringstream os;
  os << kFormat << ' ' << kVersion << '\n';
  os << "tag " << d.tag << '\n';
  os << "rows " << d.size() << '\n';
  os << "columns";
  for (const auto& n : d.x_names) os << " x:" << n;
  for (const auto& n : d.y_names) os << " y:" << n;
  for (const auto& n : d.meta_names) os << " m:" << n;
  os << '\n';
  for (Eigen::Index j = 0; j < d.x.cols(); ++j) {
    bool first = true;
    auto put = [&](double v) {
      if (!first) os << ' ';
      os << format_double(v);
      first = false;
    };
    for (Eigen::Index i = 0; i < d.x.rows(); ++i) put(d.x(i, j));
    for (Eigen::Index i = 0; i < d.y.rows(); ++i) put(d.y(i, j));
    for (Eigen::Index i = 0; i < d.meta.rows(); ++i) put(d.meta(i, j));
    os << '\n';
  }
  write_text_file(path, os.str());
}

Dataset load_dataset(const std::filesystem::path& path, const Dataset* expected) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open '" + path.string() + "'");
  auto head = next_tokens(is, "header");
  if (head.size() != 2 || head[0] != kFormat) throw FormatError("'" + path.string() + "' is not a dataset file");
  if (head[1] != kVersion) throw FormatError("unsupported dataset version " + head[1]);
  auto tag = next_tokens(is, "tag");
  if (tag.size() != 2 || tag[0] != "tag") throw FormatError("missing dataset tag");
  auto rows = next_tokens(is, "row count");
  if (rows.size() != 2 || rows[0] != "rows") throw FormatError("missing row count");
  const double nrows = parse_double(rows[1]);
  if (nrows < 0 || nrows != std::floor(nrows)) throw FormatError("bad row count");
  const auto n = static_cast<Eigen::Index>(nrows);
  auto cols = next_tokens(is, "column schema");
  if (cols.empty() || cols[0] != "columns") throw FormatError("missing column schema");

  Dataset d;
  d.tag = tag[1];
  int last_rank = 0;
  for (std::size_t i = 1; i < cols.size(); ++i) {
    const std::string& c = cols[i];
    if (c.size() < 3 || c[1] != ':') throw FormatError("bad column name '" + c + "'");
    const int rank = c[0] == 'x' ? 0 : c[0] == 'y' ? 1 : c[0] == 'm' ? 2 : -1;
    if (rank < 0) throw FormatError("bad column kind in '" + c + "'");
    if (rank < last_rank) throw FormatError("columns must be grouped as x, y, m");
    last_rank = rank;
    std::vector<std::string>& target = rank == 0 ? d.x_names : rank == 1 ? d.y_names : d.meta_names;
    target.push_back(c.substr(2));
  }
  if (expected && (d.x_names != expected->x_names || d.y_names != expected->y_names ||
                   d.meta_names != expected->meta_names)) {
    throw FormatError("dataset column schema does not match the expected schema");
  }
  const auto nx = static_cast<Eigen::Index>(d.x_names.size());
  const auto ny = static_cast<Eigen::Index>(d.y_names.size());
  const auto nm = static_cast<Eigen::Index>(d.meta_names.size());
  d.x = Matrix(nx, n);
  d.y = Matrix(ny, n);
  d.meta = Matrix(nm, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto tok = next_tokens(is, "sample " + std::to_string(j));
    if (static_cast<Eigen::Index>(tok.size()) != nx + ny + nm) {
      throw FormatError("sample " + std::to_string(j) + " has " + std::to_string(tok.size()) + " values");
    }
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < nx; ++i) d.x(i, j) = parse_double(tok[k++]);
    for (Eigen::Index i = 0; i < ny; ++i) d.y(i, j) = parse_double(tok[k++]);
    for (Eigen::Index i = 0; i < nm; ++i) d.meta(i, j) = parse_double(tok[k++]);
  }
  std::string rest;
  while (std::getline(is, rest)) {
    if (!split_ws(rest).empty()) throw FormatError("dataset has more rows than declared");
  }
  return d;
}

void save_split(const std::filesystem::path& dir, const SplitDataset& s) {
  std::filesystem::create_directories(dir);
  save_dataset(dir / "train.txt", s.train);
  save_dataset(dir / "test.txt", s.test);
  KeyValueFile kv;
  kv.set("format", std::string("gtnet-split"));
  kv.set("version", 1LL);
  kv.set("ratio", s.ratio);
  kv.set("seed", std::to_string(s.seed));
  kv.set("train", static_cast<long long>(s.train.size()));
  kv.set("test", static_cast<long long>(s.test.size()));
  kv.save(dir / "split.txt");
}

SplitDataset load_split(const std::filesystem::path& dir) {
  const KeyValueFile kv = KeyValueFile::load(dir / "split.txt");
  if (!kv.has("format") || kv.get("format") != "gtnet-split" || kv.get_int("version") != 1) {
    throw FormatError("'" + (dir / "split.txt").string() + "' is not a split description");
  }
  SplitDataset s;
  s.ratio = kv.get_double("ratio");
  s.seed = std::stoull(kv.get("seed"));
  s.train = load_dataset(dir / "train.txt");
  s.test = load_dataset(dir / "test.txt", &s.train);
  if (static_cast<long long>(s.train.size()) != kv.get_int("train") ||
      static_cast<long long>(s.test.size()) != kv.get_int("test")) {
    throw FormatError("split sizes do not match the data files");
  }
  return s;
}

}  // namespace gtnet::data
