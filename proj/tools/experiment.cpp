#include "experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include "rcc/codec.hpp"
#include "rcc/gibbs.hpp"
#include "rcc/io.hpp"

namespace rcc::cli {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool tiles(Index rows, Index n_l, Index n_s) {
  // rows = (k + 1) n_L + k n_S with k >= 1
  return rows >= 2 * n_l + n_s && (rows - n_l) % (n_l + n_s) == 0;
}

ModelFile load_model(const ExperimentSpec& spec) { return parse_model(read_key_values(spec.model_path)); }

template <typename Fn>
void parallel_for(std::size_t count, int jobs, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    for (std::size_t i; (i = next++) < count;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = count;
      }
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(count)));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::string num(double v) { return std::isnan(v) ? "" : format_double(v); }

}  // namespace

void ExperimentSpec::validate() const {
  if (model_path.empty()) {
    if (q < 2 || q > 16) throw FormatError("q must be in [2, 16]");
    if (rows < 3 || cols < 1) throw FormatError("lattice needs rows >= 3 and cols >= 1");
  }
  if (!std::isfinite(theta_node) || !std::isfinite(theta_edge)) throw FormatError("theta must be finite");
  if (pairs.size() % 2 != 0) throw FormatError("pairs needs an even number of entries");
  for (Index n : line_heights)
    if (n < 1) throw FormatError("line heights must be positive");
  for (Index n : strip_heights)
    if (n < 1) throw FormatError("strip heights must be positive");
  for (Index n : pairs)
    if (n < 1) throw FormatError("pair entries must be positive");
  if (burn_in < 0 || thinning < 1 || samples < 0) throw FormatError("bad sampler settings");
  if (!(fit_tolerance > 0) || max_iter < 1) throw FormatError("bad fit settings");
  if (max_n < 1 || max_gap < 1) throw FormatError("max_n and max_gap must be positive");
  if (jobs < 1) throw FormatError("jobs must be positive");
}

PairwiseFamily ExperimentSpec::family() const {
  if (!model_path.empty()) return load_model(*this).family;
  if (q == 2) return PairwiseFamily::ising();
  Eigen::VectorXd node = Eigen::VectorXd::LinSpaced(q, 0.0, 1.0);
  Eigen::MatrixXd same = Eigen::MatrixXd::Identity(q, q);
  return PairwiseFamily(node, same, same);
}

LatticeModel ExperimentSpec::model(Index height) const {
  if (!model_path.empty()) {
    const ModelFile m = load_model(*this);
    if (height > m.theta.rows()) throw FormatError("model file has fewer rows than requested");
    return LatticeModel(m.family, m.theta.restrict({0, height}), m.cols);
  }
  return LatticeModel(family(), ParameterField::homogeneous(height, theta_node, theta_edge), cols);
}

OracleOptions ExperimentSpec::oracle_options() const {
  OracleOptions o;
  o.fit.tolerance = fit_tolerance;
  o.fit.max_iter = max_iter;
  return o;
}

std::vector<SweepPoint> sweep_points(const ExperimentSpec& spec, const std::function<void(const std::string&)>& log) {
  const Index rows = spec.model_path.empty() ? spec.rows : load_model(spec).theta.rows();
  std::vector<std::pair<Index, Index>> grid;
  if (!spec.pairs.empty()) {
    for (std::size_t i = 0; i + 1 < spec.pairs.size(); i += 2) grid.emplace_back(spec.pairs[i], spec.pairs[i + 1]);
  } else {
    for (Index l : spec.line_heights)
      for (Index s : spec.strip_heights) grid.emplace_back(l, s);
  }
  std::vector<SweepPoint> out;
  for (auto [l, s] : grid) {
    Index m = rows;
    if (spec.auto_rows)
      while (m >= 2 * l + s && !tiles(m, l, s)) --m;
    if (!tiles(m, l, s)) {
      log("skip (" + std::to_string(l) + "," + std::to_string(s) + "): " + std::to_string(rows) +
          " rows do not tile as (k+1)*n_L + k*n_S");
      continue;
    }
    if (m != rows) {
      log("(" + std::to_string(l) + "," + std::to_string(s) + "): using " + std::to_string(m) + " of " +
          std::to_string(rows) + " rows");
    }
    out.push_back({l, s, m});
  }
  return out;
}

std::vector<SweepRow> run_sweep(const ExperimentSpec& spec, const std::vector<SweepPoint>& points) {
  // One row process and one sample set per lattice height, shared by points.
  std::map<Index, std::unique_ptr<RowProcess>> truths;
  std::map<Index, std::vector<SymbolGrid>> samples;
  for (const auto& p : points) {
    if (truths.count(p.rows)) continue;
    const LatticeModel m = spec.model(p.rows);
    truths[p.rows] = std::make_unique<RowProcess>(m);
    if (spec.samples > 0) {
      SamplerConfig cfg;
      cfg.burn_in = spec.burn_in;
      cfg.thinning = spec.thinning;
      cfg.seed = spec.seed;
      cfg.sample_count = spec.samples;
      samples[p.rows] = gibbs_sample(m, cfg);
    }
  }

  std::vector<SweepRow> rows(points.size());
  parallel_for(points.size(), spec.jobs, [&](std::size_t i) {
    const auto start = std::chrono::steady_clock::now();
    const SweepPoint& p = points[i];
    const RowProcess& truth = *truths.at(p.rows);
    const LatticeModel& global = truth.model();
    const CutsetLayout layout = build_layout(p.rows, p.line_height, p.strip_height);
    SweepRow& row = rows[i];
    row.point = p;
    row.exact = total_rate(truth, layout, spec.oracle_options());
    row.emp_line_rate = row.emp_strip_rate = row.coded_rate = kNaN;

    if (spec.samples > 0) {
      const int q = global.alphabet_size();
      const LatticeModel reduced(global.family, row.exact.centered_theta);
      const ChainPosterior line_post(column_chain(reduced));
      const RowRange line = centered_rows(p.rows, p.line_height);
      const RowRange strip = centered_rows(p.rows, p.strip_height);
      const LatticeModel strip_model = global.restrict(strip);
      const ParameterField theta = spec.model_path.empty()
                                       ? ParameterField::homogeneous(p.rows, spec.theta_node, spec.theta_edge)
                                       : load_model(spec).theta.restrict({0, p.rows});
      double line_nats = 0.0, strip_nats = 0.0, coded = 0.0;
      for (const SymbolGrid& img : samples.at(p.rows)) {
        line_nats -= log_probability(line_post, column_states(img, line, q));
        const BoundaryClamp clamp = strip_boundary(global, strip, img);
        const ChainPosterior strip_post(column_chain(strip_model, &clamp));
        strip_nats -= log_probability(strip_post, column_states(img, strip, q));
        coded += encode_image(img, global.family, theta, row.exact.centered_theta, layout).rate;
      }
      const double n = static_cast<double>(spec.samples);
      const double width = static_cast<double>(global.shape().cols);
      row.emp_line_rate = line_nats / (n * kLn2 * p.line_height * width);
      row.emp_strip_rate = strip_nats / (n * kLn2 * p.strip_height * width);
      row.coded_rate = coded / n;
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  });
  return rows;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string rates_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream o;
  o << "n_L,n_S,rows,cols,k,line_rate,strip_rate,combined_exact,combined_approx,layout_rate,entropy_rate,"
       "correlation_term,distribution_term,direct_total,proportional_total,line_bits_per_row,strip_bits_per_row,"
       "emp_line_rate,emp_strip_rate,coded_rate,seconds\n";
  for (const auto& r : rows) {
    const auto& e = r.exact;
    const double width = static_cast<double>(e.centered_theta.shape().cols);
    o << r.point.line_height << ',' << r.point.strip_height << ',' << r.point.rows << ',' << width << ','
      << e.strip_count << ',' << num(e.line_rate) << ',' << num(e.strip_rate) << ',' << num(e.combined_exact) << ','
      << num(e.combined_approx) << ',' << num(e.layout_rate) << ',' << num(e.entropy_rate) << ','
      << num(e.redundancy.correlation_term) << ',' << num(e.redundancy.distribution_term) << ','
      << num(e.redundancy.direct_total) << ',' << num(e.redundancy.proportional_total) << ','
      << num(e.line_rate * width) << ',' << num(e.strip_rate * width) << ',' << num(r.emp_line_rate) << ','
      << num(r.emp_strip_rate) << ',' << num(r.coded_rate) << ',' << num(r.seconds) << '\n';
  }
  return o.str();
}

std::string redundancy_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream o;
  o << "n_L,n_S,rows,k,correlation_term,distribution_term,total,direct_total,identity_residual,"
       "approx_correlation,approx_distribution,proportional_total,correlation_nats,distribution_nats,direct_nats\n";
  for (const auto& r : rows) {
    const auto& d = r.exact.redundancy;
    o << r.point.line_height << ',' << r.point.strip_height << ',' << r.point.rows << ',' << r.exact.strip_count
      << ',' << num(d.correlation_term) << ',' << num(d.distribution_term) << ',' << num(d.total) << ','
      << num(d.direct_total) << ',' << num(d.total - d.direct_total) << ',' << num(d.approx_correlation) << ','
      << num(d.approx_distribution) << ',' << num(d.proportional_total) << ',' << num(d.correlation_nats) << ','
      << num(d.distribution_nats) << ',' << num(d.direct_nats) << '\n';
  }
  return o.str();
}

std::vector<LedgerEntry> run_verify(const ExperimentSpec& spec) {
  VerifyOptions v;
  v.max_n = spec.max_n;
  v.max_gap = spec.max_gap;
  v.oracle = spec.oracle_options();
  const Index rows = spec.model_path.empty() ? spec.rows : load_model(spec).theta.rows();
  return verify_propositions(spec.model(rows), v);
}

std::string ledger_csv(const std::vector<LedgerEntry>& ledger) {
  std::ostringstream o;
  o << "check,status,values,detail\n";
  for (const auto& e : ledger) {
    std::string values;
    for (std::size_t i = 0; i < e.values.size(); ++i) values += (i ? " " : "") + format_double(e.values[i]);
    o << csv_field(e.check) << ',' << e.status << ',' << values << ',' << csv_field(e.detail) << '\n';
  }
  return o.str();
}

}  // namespace rcc::cli
