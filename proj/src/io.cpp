#include "rcc/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace rcc {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> tokens(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',' || ch == ' ' || ch == '\t') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

template <typename T>
bool parse_number(const std::string& s, T& out) {
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && p == end;
}

const std::string& lookup(const KeyValues& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw FormatError("missing key '" + key + "'");
  return it->second;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::string format_list(const Eigen::Ref<const Eigen::VectorXd>& v) {
  std::string out;
  for (Index i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += format_double(v(i));
  }
  return out;
}

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("line " + std::to_string(n) + ": expected key = value");
    std::string key = trim(std::string_view(line).substr(0, eq));
    if (key.empty()) throw FormatError("line " + std::to_string(n) + ": empty key");
    kv[key] = trim(std::string_view(line).substr(eq + 1));
  }
  return kv;
}

KeyValues read_key_values(const std::filesystem::path& path) { return parse_key_values(read_text(path)); }

double get_double(const KeyValues& kv, const std::string& key) {
  const std::string& s = lookup(kv, key);
  double v = 0;
  if (!parse_number(s, v)) throw FormatError("key '" + key + "': not a number: " + s);
  return v;
}

long long get_int(const KeyValues& kv, const std::string& key) {
  const std::string& s = lookup(kv, key);
  long long v = 0;
  if (!parse_number(s, v)) throw FormatError("key '" + key + "': not an integer: " + s);
  return v;
}

Eigen::VectorXd get_list(const KeyValues& kv, const std::string& key) {
  const auto t = tokens(lookup(kv, key));
  Eigen::VectorXd v(static_cast<Index>(t.size()));
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!parse_number(t[i], v(static_cast<Index>(i)))) throw FormatError("key '" + key + "': not a number: " + t[i]);
  }
  return v;
}

std::vector<long long> get_int_list(const KeyValues& kv, const std::string& key) {
  std::vector<long long> out;
  for (const auto& t : tokens(lookup(kv, key))) {
    long long v = 0;
    if (!parse_number(t, v)) throw FormatError("key '" + key + "': not an integer: " + t);
    out.push_back(v);
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
  if (!out) throw FormatError("write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  const std::string s = read_text(path);
  return {s.begin(), s.end()};
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  write_text(path, std::string(bytes.begin(), bytes.end()));
}

// ---------------------------------------------------------------------------

std::string format_raster(const SymbolGrid& pixels, int alphabet_size) {
  std::string out = "RCCIMG " + std::to_string(alphabet_size) + ' ' + std::to_string(pixels.rows()) + ' ' +
                    std::to_string(pixels.cols()) + '\n';
  for (Index r = 0; r < pixels.rows(); ++r) {
    for (Index c = 0; c < pixels.cols(); ++c) {
      if (c) out += ' ';
      out += std::to_string(pixels(r, c));
    }
    out += '\n';
  }
  return out;
}

Raster parse_raster(const std::string& text) {
  std::istringstream in(text);
  std::string magic;
  long long q = 0, m = 0, n = 0;
  if (!(in >> magic >> q >> m >> n) || magic != "RCCIMG") throw FormatError("not an RCCIMG raster");
  if (q < 2 || m < 1 || n < 1) throw FormatError("raster header out of range");
  Raster r;
  r.alphabet_size = static_cast<int>(q);
  r.pixels.resize(m, n);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j)
      if (!(in >> r.pixels(i, j))) throw FormatError("raster truncated");
  std::string extra;
  if (in >> extra) throw FormatError("trailing data after raster");
  check_symbols(r.pixels, r.alphabet_size);
  return r;
}

void write_raster(const std::filesystem::path& path, const SymbolGrid& pixels, int alphabet_size) {
  write_text(path, format_raster(pixels, alphabet_size));
}

Raster read_raster(const std::filesystem::path& path) { return parse_raster(read_text(path)); }

// ---------------------------------------------------------------------------

std::string format_model(const ModelFile& m) {
  const auto& f = m.family;
  std::ostringstream o;
  o << "q = " << f.alphabet_size() << '\n'
    << "rows = " << m.theta.rows() << '\n'
    << "cols = " << m.cols << '\n'
    << "node_stat = " << format_list(f.node_stat()) << '\n'
    << "edge_stat_h = " << format_list(f.edge_stat_h().reshaped<Eigen::RowMajor>()) << '\n'
    << "edge_stat_v = " << format_list(f.edge_stat_v().reshaped<Eigen::RowMajor>()) << '\n'
    << "theta_node = " << format_list(m.theta.node) << '\n'
    << "theta_h = " << format_list(m.theta.horizontal) << '\n'
    << "theta_v = " << format_list(m.theta.vertical) << '\n';
  return o.str();
}

ModelFile parse_model(const KeyValues& kv) {
  const long long q = get_int(kv, "q");
  if (q < 2 || q > 4096) throw FormatError("q out of range");
  const Eigen::VectorXd h = get_list(kv, "edge_stat_h");
  const Eigen::VectorXd v = get_list(kv, "edge_stat_v");
  if (h.size() != q * q || v.size() != q * q) throw FormatError("edge tables need q*q entries");
  ModelFile m;
  m.family = PairwiseFamily(get_list(kv, "node_stat"), h.reshaped<Eigen::RowMajor>(q, q),
                            v.reshaped<Eigen::RowMajor>(q, q));
  m.theta.node = get_list(kv, "theta_node");
  m.theta.horizontal = get_list(kv, "theta_h");
  m.theta.vertical = get_list(kv, "theta_v");
  m.theta.validate();
  if (get_int(kv, "rows") != m.theta.rows()) throw FormatError("rows disagrees with theta_node");
  m.cols = get_int(kv, "cols");
  if (m.cols < 1) throw FormatError("cols must be positive");
  return m;
}

std::string format_fit(const FitResult& fit) {
  const LatticeShape s = fit.theta.shape();
  std::ostringstream o;
  o << "rows = " << s.rows << '\n'
    << "cols = " << s.cols << '\n'
    << "converged = " << (fit.converged ? 1 : 0) << '\n'
    << "iterations = " << fit.iterations << '\n'
    << "gradient_norm = " << format_double(fit.gradient_norm) << '\n'
    << "objective = " << (fit.objective_trace.empty() ? "nan" : format_double(fit.objective_trace.back())) << '\n'
    << "armijo = " << format_double(fit.armijo) << '\n'
    << "shrink = " << format_double(fit.shrink) << '\n'
    << "initial_step = " << format_double(fit.initial_step) << '\n'
    << "round_off_steps = " << fit.round_off_steps << '\n'
    << "theta = " << format_list(fit.theta.flatten()) << '\n'
    << "target = " << format_list(fit.target.flatten()) << '\n'
    << "achieved = " << format_list(fit.achieved.flatten()) << '\n';
  for (const auto& w : fit.warnings) o << "# warning: " << w << '\n';
  return o.str();
}

BlockParameters parse_block_parameters(const KeyValues& kv) {
  const LatticeShape s(get_int(kv, "rows"), get_int(kv, "cols"));
  return BlockParameters::unflatten(s, get_list(kv, "theta"));
}

std::string format_manifest(const SampleManifest& m) {
  std::ostringstream o;
  o << "generator = " << m.generator << '\n'
    << "seed = " << m.seed << '\n'
    << "burn_in = " << m.burn_in << '\n'
    << "thinning = " << m.thinning << '\n'
    << "sample_count = " << m.sample_count << '\n'
    << "model_hash = " << hex64(m.model_hash) << '\n'
    << "files =";
  for (const auto& f : m.files) o << ' ' << f;
  o << '\n';
  return o.str();
}

SampleManifest parse_manifest(const KeyValues& kv) {
  SampleManifest m;
  m.generator = lookup(kv, "generator");
  const std::string& seed = lookup(kv, "seed");
  if (!parse_number(seed, m.seed)) throw FormatError("key 'seed': not an integer");
  m.burn_in = static_cast<int>(get_int(kv, "burn_in"));
  m.thinning = static_cast<int>(get_int(kv, "thinning"));
  m.sample_count = static_cast<int>(get_int(kv, "sample_count"));
  std::string hash = lookup(kv, "model_hash");
  if (hash.rfind("0x", 0) == 0) hash.erase(0, 2);
  auto [p, ec] = std::from_chars(hash.data(), hash.data() + hash.size(), m.model_hash, 16);
  if (ec != std::errc() || p != hash.data() + hash.size()) throw FormatError("key 'model_hash': not hex");
  m.files = tokens(lookup(kv, "files"));
  if (static_cast<int>(m.files.size()) != m.sample_count) throw FormatError("manifest lists the wrong file count");
  return m;
}

}  // namespace rcc
