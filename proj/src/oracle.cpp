#include "rcc/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rcc {

namespace {

double entropy_of(const Eigen::VectorXd& p) {
  double h = 0.0;
  for (Index i = 0; i < p.size(); ++i)
    if (p(i) > 0.0) h -= p(i) * std::log(p(i));
  return h;
}

double entropy_of(const Eigen::MatrixXd& p) {
  double h = 0.0;
  const double* d = p.data();
  for (Index i = 0; i < p.size(); ++i)
    if (d[i] > 0.0) h -= d[i] * std::log(d[i]);
  return h;
}

Eigen::VectorXd shifted_exp(const Eigen::VectorXd& v) { return (v.array() - v.maxCoeff()).exp(); }

void check_row(const RowProcess& p, Index r) {
  if (r < 0 || r >= p.rows()) throw FormatError("row index outside lattice");
}

LatticeModel reduced_model(const RowProcess& truth, const BlockParameters& theta_star) {
  return LatticeModel(truth.model().family, theta_star);
}

struct ReducedSummary {
  double log_partition = 0.0;
  double entropy = 0.0;
  MomentField moments;
};

ReducedSummary summarize(const LatticeModel& reduced, std::size_t cap) {
  const LatticeShape s = reduced.shape();
  const bool by_columns = s.rows <= s.cols;
  const ChainPosterior post(by_columns ? column_chain(reduced, nullptr, cap) : row_chain(reduced, cap));
  ReducedSummary out;
  out.log_partition = post.log_partition();
  out.entropy = chain_entropy(post);
  out.moments = by_columns ? column_chain_moments(reduced, post) : row_chain_moments(reduced, post);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// RowProcess

RowProcess::RowProcess(LatticeModel model, std::size_t state_cap)
    : model_(std::move(model)), posterior_(row_chain(model_, state_cap)) {
  moments_ = row_chain_moments(model_, posterior_);
}

double RowProcess::entropy() const { return chain_entropy(posterior_); }

double RowProcess::row_entropy(Index r) const {
  check_row(*this, r);
  return entropy_of(posterior_.node_marginal(r));
}

double RowProcess::pair_entropy(Index r) const {
  check_row(*this, r);
  check_row(*this, r + 1);
  const auto& chain = posterior_.chain();
  // log p(s, s') = alpha_r(s) + log psi(s, s') + node_{r+1}(s') + beta_{r+1}(s') - log Z
  return posterior_.log_partition() - posterior_.node_marginal(r).dot(posterior_.log_forward(r)) -
         posterior_.expected_pair_log(r) -
         posterior_.node_marginal(r + 1).dot(chain.log_node[r + 1] + posterior_.log_backward(r + 1));
}

double RowProcess::conditional_entropy(Index r) const {
  if (r < 1) throw FormatError("conditional entropy needs a previous row");
  return pair_entropy(r - 1) - row_entropy(r - 1);
}

double RowProcess::block_entropy(const RowRange& range) const {
  if (range.size() < 1 || range.begin < 0 || range.end > rows()) throw FormatError("row block outside lattice");
  double h = row_entropy(range.begin);
  for (Index t = range.begin + 1; t < range.end; ++t) h += conditional_entropy(t);
  return h;
}

Eigen::MatrixXd RowProcess::joint_table(Index i, Index j) const {
  check_row(*this, i);
  check_row(*this, j);
  if (j <= i) throw FormatError("joint_table needs i < j");
  const auto& chain = posterior_.chain();
  Eigen::MatrixXd x = Eigen::MatrixXd(shifted_exp(posterior_.log_forward(i)).asDiagonal());
  for (Index t = i; t < j; ++t) {
    x = chain.log_pair[t]->propagate(x);
    const Eigen::VectorXd w = t + 1 == j ? shifted_exp(chain.log_node[j] + posterior_.log_backward(j))
                                         : shifted_exp(chain.log_node[t + 1]);
    x.array().rowwise() *= w.transpose().array();
    x /= x.maxCoeff();
  }
  return x / x.sum();
}

double RowProcess::joint_entropy(Index i, Index j) const {
  if (i > j) std::swap(i, j);
  if (i == j) return row_entropy(i);
  if (j == i + 1) return pair_entropy(i);
  {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    auto it = joint_cache_.find({i, j});
    if (it != joint_cache_.end()) return it->second;
  }
  const double h = entropy_of(joint_table(i, j));
  std::lock_guard<std::mutex> lock(cache_mutex_);
  joint_cache_[{i, j}] = h;
  return h;
}

double RowProcess::mutual_information(Index i, Index j) const {
  if (i > j) std::swap(i, j);
  if (i == j) return row_entropy(i);
  // Summed directly so small values keep their relative accuracy.
  const Eigen::MatrixXd p = joint_table(i, j);
  const Eigen::VectorXd pu = p.rowwise().sum();
  const Eigen::VectorXd pw = p.colwise().sum().transpose();
  double mi = 0.0;
  for (Index w = 0; w < p.cols(); ++w)
    for (Index u = 0; u < p.rows(); ++u)
      if (p(u, w) > 0.0) mi += p(u, w) * std::log(p(u, w) / (pu(u) * pw(w)));
  return mi;
}

// ---------------------------------------------------------------------------
// Lines and strips

RowRange centered_rows(Index rows, Index height) {
  if (height < 1 || height > rows) throw FormatError("block height outside lattice");
  const Index begin = (rows - height) / 2;
  return {begin, begin + height};
}

LineFit fit_line(const RowProcess& truth, const RowRange& range, const OracleOptions& options) {
  LineFit out;
  out.range = range;
  out.fit = fit(truth.model().family, truth.moments().rows(range), truth.model().theta.rows(range), options.fit);
  return out;
}

double strip_conditional_entropy(const RowProcess& truth, const RowRange& strip) {
  if (strip.begin < 1 || strip.end >= truth.rows() || strip.size() < 1) {
    throw FormatError("strip needs a boundary row on each side");
  }
  return truth.block_entropy({strip.begin - 1, strip.end + 1}) - truth.joint_entropy(strip.begin - 1, strip.end);
}

double strip_rate(const RowProcess& truth, Index strip_height) {
  const RowRange s = centered_rows(truth.rows(), strip_height);
  return strip_conditional_entropy(truth, s) / (static_cast<double>(strip_height * truth.cols()) * kLn2);
}

double line_cross_entropy(const RowProcess& truth, const RowRange& range, const BlockParameters& theta_star) {
  const LatticeModel reduced = reduced_model(truth, theta_star);
  if (!(reduced.shape() == LatticeShape(range.size(), truth.cols()))) throw LayoutMismatch("theta* shape differs");
  return lattice_log_partition(reduced) - theta_star.dot(truth.moments().rows(range));
}

double line_rate(const RowProcess& truth, const RowRange& range, const BlockParameters& theta_star,
                 double tolerance) {
  const LatticeModel reduced = reduced_model(truth, theta_star);
  if (!(reduced.shape() == LatticeShape(range.size(), truth.cols()))) throw LayoutMismatch("theta* shape differs");
  const ReducedSummary s = summarize(reduced, default_state_cap());
  const double gap = (s.moments - truth.moments().rows(range)).max_abs();
  if (gap > tolerance) {
    throw MomentMismatch("reduced-model moments miss the block moments by " + std::to_string(gap));
  }
  return s.entropy / (static_cast<double>(range.size() * truth.cols()) * kLn2);
}

double line_rate(const RowProcess& truth, Index line_height, const OracleOptions& options) {
  const RowRange r = centered_rows(truth.rows(), line_height);
  const LineFit f = fit_line(truth, r, options);
  return line_rate(truth, r, f.fit.theta, options.moment_tolerance);
}

double line_divergence(const RowProcess& truth, const RowRange& range, const BlockParameters& theta_star) {
  return line_cross_entropy(truth, range, theta_star) - truth.block_entropy(range);
}

double mutual_info_rows(const RowProcess& truth, Index i, Index j) { return truth.mutual_information(i, j); }

// ---------------------------------------------------------------------------
// Layout-level rates

RedundancyReport redundancy_decomposition(const RowProcess& truth, const CutsetLayout& layout,
                                          std::span<const LineFit> fits, const LineFit& centered_line) {
  if (layout.rows() != truth.rows()) throw LayoutMismatch("layout height differs from lattice");
  if (fits.size() != layout.lines.size()) throw LayoutMismatch("one fit per line required");
  const double pixels = static_cast<double>(truth.rows() * truth.cols());
  const double n_l = static_cast<double>(layout.line_height);
  const double n_s = static_cast<double>(layout.strip_height);

  RedundancyReport rep;
  double sum_line_entropy_plus_d = 0.0;
  for (std::size_t i = 0; i < layout.lines.size(); ++i) {
    const RowRange& line = layout.lines[i];
    if (!(fits[i].range == line)) throw LayoutMismatch("fit does not cover its line");
    const double h = truth.block_entropy(line);
    const double d = line_cross_entropy(truth, line, fits[i].fit.theta) - h;
    rep.distribution_nats += d;
    sum_line_entropy_plus_d += h + d;
  }

  // H(X_U) along the chain of lines; consecutive lines only talk through
  // the last row of the earlier one.
  double h_union = truth.block_entropy(layout.lines[0]);
  for (std::size_t i = 1; i < layout.lines.size(); ++i) {
    const Index prev = layout.lines[i - 1].end - 1;
    const RowRange& line = layout.lines[i];
    double h_joint = truth.joint_entropy(prev, line.begin);
    for (Index t = line.begin + 1; t < line.end; ++t) h_joint += truth.conditional_entropy(t);
    h_union += h_joint - truth.row_entropy(prev);
    rep.correlation_nats += truth.mutual_information(prev, line.begin);
  }
  rep.direct_nats = sum_line_entropy_plus_d - h_union;

  const double scale = 1.0 / (pixels * kLn2);
  rep.correlation_term = rep.correlation_nats * scale;
  rep.distribution_term = rep.distribution_nats * scale;
  rep.total = rep.correlation_term + rep.distribution_term;
  rep.direct_total = rep.direct_nats * scale;

  const Index gap_first = (truth.rows() - layout.strip_height - 2) / 2;
  const double i_c = truth.mutual_information(gap_first, gap_first + layout.strip_height + 1);
  const double d_c = line_divergence(truth, centered_line.range, centered_line.fit.theta);
  const double period = (n_l + n_s) * static_cast<double>(truth.cols()) * kLn2;
  rep.approx_correlation = i_c / period;
  rep.approx_distribution = d_c / period;
  rep.proportional_total = (n_s * i_c + n_l * d_c) / period;
  return rep;
}

RateReport total_rate(const RowProcess& truth, const CutsetLayout& layout, const OracleOptions& options) {
  if (layout.rows() != truth.rows()) throw LayoutMismatch("layout height differs from lattice");
  RateReport rep;
  rep.line_height = layout.line_height;
  rep.strip_height = layout.strip_height;
  rep.strip_count = layout.strip_count;
  rep.rows = layout.rows();

  const LineFit centered = fit_line(truth, centered_rows(truth.rows(), layout.line_height), options);
  rep.centered_theta = centered.fit.theta;
  rep.line_rate = line_rate(truth, centered.range, centered.fit.theta, options.moment_tolerance);
  rep.strip_rate = strip_rate(truth, layout.strip_height);

  const double k = static_cast<double>(layout.strip_count);
  const double n_l = static_cast<double>(layout.line_height);
  const double n_s = static_cast<double>(layout.strip_height);
  rep.combined_exact = ((k + 1.0) * n_l * rep.line_rate + k * n_s * rep.strip_rate) / static_cast<double>(rep.rows);
  rep.combined_approx = (n_l * rep.line_rate + n_s * rep.strip_rate) / (n_l + n_s);

  std::vector<LineFit> fits;
  fits.reserve(layout.lines.size());
  double codelength = 0.0;
  for (const auto& line : layout.lines) {
    fits.push_back(line == centered.range ? centered : fit_line(truth, line, options));
    codelength += line_cross_entropy(truth, line, fits.back().fit.theta);
  }
  for (const auto& strip : layout.strips) codelength += strip_conditional_entropy(truth, strip);

  const double pixels = static_cast<double>(truth.rows() * truth.cols());
  rep.layout_rate = codelength / (pixels * kLn2);
  rep.entropy_rate = truth.entropy() / (pixels * kLn2);
  rep.redundancy = redundancy_decomposition(truth, layout, fits, centered);
  return rep;
}

// ---------------------------------------------------------------------------
// Nested blocks

NestedFits fit_nested(const RowProcess& truth, Index max_height, const OracleOptions& options) {
  NestedFits out;
  out.top = centered_rows(truth.rows(), max_height).begin;
  for (Index n = 1; n <= max_height; ++n) out.blocks.push_back(fit_line(truth, {out.top, out.top + n}, options));
  return out;
}

double nested_divergence(const RowProcess& truth, const NestedFits& nested, Index source, Index j) {
  const Index available = static_cast<Index>(nested.blocks.size());
  if (j < 1 || j > available || source < 0 || source > available || (source > 0 && source < j)) {
    throw FormatError("nested divergence indices out of range");
  }
  const BlockParameters& theta_j = nested.blocks[j - 1].fit.theta;
  const LatticeModel reduced_j = reduced_model(truth, theta_j);

  MomentField mu;
  double h = 0.0;
  if (source == 0) {
    const RowRange b{nested.top, nested.top + j};
    mu = truth.moments().rows(b);
    h = truth.block_entropy(b);
  } else {
    const RowProcess src(reduced_model(truth, nested.blocks[source - 1].fit.theta));
    mu = src.moments().rows({0, j});
    h = src.block_entropy({0, j});
  }
  return lattice_log_partition(reduced_j) - theta_j.dot(mu) - h;
}

RecursionCheck divergence_recursion(const RowProcess& truth, const NestedFits& nested, Index n) {
  if (n < 2 || n > static_cast<Index>(nested.blocks.size())) throw FormatError("recursion level out of range");
  const LineFit& bn = nested.blocks[n - 1];
  const LineFit& bp = nested.blocks[n - 2];
  const RowProcess reduced_n(reduced_model(truth, bn.fit.theta));

  RecursionCheck c;
  c.n = n;
  c.lhs = line_divergence(truth, bn.range, bn.fit.theta);
  c.rhs = line_divergence(truth, bp.range, bp.fit.theta) - nested_divergence(truth, nested, n, n - 1) +
          reduced_n.conditional_entropy(n - 1) - truth.conditional_entropy(nested.top + n - 1);
  return c;
}

RecursionCheck nested_divergence_recursion(const RowProcess& truth, const NestedFits& nested, Index m) {
  if (m < 2 || m + 1 > static_cast<Index>(nested.blocks.size())) throw FormatError("recursion level out of range");
  const RowProcess reduced_m(reduced_model(truth, nested.blocks[m - 1].fit.theta));
  const RowProcess reduced_next(reduced_model(truth, nested.blocks[m].fit.theta));

  RecursionCheck c;
  c.n = m;
  c.lhs = nested_divergence(truth, nested, m + 1, m);
  c.rhs = nested_divergence(truth, nested, m + 1, m - 1) - nested_divergence(truth, nested, m, m - 1) +
          reduced_m.conditional_entropy(m - 1) - reduced_next.conditional_entropy(m - 1);
  return c;
}

// ---------------------------------------------------------------------------
// Proposition ledger

std::string ordering_status(std::span<const double> values, int sign, double margin, double degenerate) {
  if (values.size() < 2) return "info";
  bool strict = true;
  bool flat = true;
  for (std::size_t i = 0; i + 1 < values.size(); ++i) {
    const double d = sign * (values[i + 1] - values[i]);
    strict = strict && d > margin;
    flat = flat && std::abs(d) <= degenerate;
  }
  if (strict) return "pass";
  if (flat) return "degenerate-equal";
  return "fail";
}

std::vector<LedgerEntry> verify_propositions(const LatticeModel& model, const VerifyOptions& options) {
  const RowProcess truth(model);
  const Index M = truth.rows();
  std::vector<LedgerEntry> ledger;

  std::vector<double> strips;
  for (Index n = 1; n <= options.max_n && n <= M - 2; ++n) strips.push_back(strip_rate(truth, n));
  ledger.push_back({"strip_rate_increasing", ordering_status(strips, +1, options.margin, options.degenerate), strips,
                    "centered strips n_S = 1.." + std::to_string(strips.size()) + ", bits/pixel"});

  std::vector<double> lines;
  std::vector<double> divergences;
  for (Index n = 1; n <= options.max_n && n <= M; ++n) {
    const RowRange r = centered_rows(M, n);
    const LineFit f = fit_line(truth, r, options.oracle);
    lines.push_back(line_rate(truth, r, f.fit.theta, options.oracle.moment_tolerance));
    divergences.push_back(line_divergence(truth, r, f.fit.theta));
  }
  ledger.push_back({"line_rate_decreasing", ordering_status(lines, -1, options.margin, options.degenerate), lines,
                    "centered lines n_L = 1.." + std::to_string(lines.size()) + ", bits/pixel"});

  if (!lines.empty() && !strips.empty()) {
    const double lo = *std::min_element(lines.begin(), lines.end());
    const double hi = *std::max_element(strips.begin(), strips.end());
    const double gap = lo - hi;
    const std::string status = gap > options.margin               ? "pass"
                               : std::abs(gap) <= options.degenerate ? "degenerate-equal"
                                                                     : "fail";
    ledger.push_back({"lines_above_strips", status, {lo, hi}, "min line rate, max strip rate"});
  }

  std::vector<double> mi;
  const Index max_gap = std::min(options.max_gap, M - 2);
  if (max_gap >= 1) {
    const Index j = std::min(M - 1, (M + max_gap + 1) / 2);
    for (Index g = 1; g <= max_gap; ++g) mi.push_back(truth.mutual_information(j - g - 1, j));
    ledger.push_back({"row_information_decreasing", ordering_status(mi, -1, options.margin, options.degenerate), mi,
                      "I(r_j; r_{j-g-1}) for g = 1.." + std::to_string(max_gap) + ", j = " + std::to_string(j) +
                          ", nats"});
  }

  // Redundancy identity on the first valid layout with n_L, n_S <= max_n.
  bool found = false;
  for (Index nl = 1; nl <= options.max_n && !found; ++nl) {
    for (Index ns = 1; ns <= options.max_n && !found; ++ns) {
      CutsetLayout layout;
      try {
        layout = build_layout(M, nl, ns);
      } catch (const NoValidTiling&) {
        continue;
      }
      found = true;
      const RateReport rep = total_rate(truth, layout, options.oracle);
      const auto& red = rep.redundancy;
      const double residual = red.correlation_nats + red.distribution_nats - red.direct_nats;
      const std::string layout_name = "(" + std::to_string(nl) + "," + std::to_string(ns) + ")";
      ledger.push_back({"redundancy_identity",
                        std::abs(residual) <= options.identity_tolerance ? "pass" : "fail",
                        {red.correlation_nats, red.distribution_nats, red.direct_nats, residual},
                        "layout " + layout_name + ": correlation, distribution, direct (nats), residual"});
      const double rate_residual = rep.layout_rate - rep.entropy_rate - rep.redundancy.direct_total;
      ledger.push_back({"rate_identity", std::abs(rate_residual) <= options.identity_tolerance ? "pass" : "fail",
                        {rep.layout_rate, rep.entropy_rate, rep.redundancy.direct_total, rate_residual},
                        "layout " + layout_name + ": layout rate = entropy rate + redundancy (bits/pixel)"});
    }
  }
  if (!found) ledger.push_back({"redundancy_identity", "info", {}, "no valid layout with n_L, n_S <= max_n"});

  if (options.max_n >= 2 && options.max_n <= M) {
    const NestedFits nested = fit_nested(truth, options.max_n, options.oracle);
    for (Index n = 2; n <= options.max_n; ++n) {
      const RecursionCheck c = divergence_recursion(truth, nested, n);
      ledger.push_back({"divergence_recursion_n" + std::to_string(n),
                        std::abs(c.residual()) <= options.identity_tolerance ? "pass" : "fail",
                        {c.lhs, c.rhs, c.residual()}, "lhs, rhs, residual (nats)"});
    }
    for (Index m = 2; m + 1 <= options.max_n; ++m) {
      const RecursionCheck c = nested_divergence_recursion(truth, nested, m);
      ledger.push_back({"nested_divergence_recursion_m" + std::to_string(m),
                        std::abs(c.residual()) <= options.identity_tolerance ? "pass" : "fail",
                        {c.lhs, c.rhs, c.residual()}, "lhs, rhs, residual (nats)"});
    }
  }

  std::vector<double> per_row;
  for (std::size_t i = 0; i < divergences.size(); ++i) per_row.push_back(divergences[i] / static_cast<double>(i + 1));
  ledger.push_back({"line_divergence_curve", "info", divergences, "D(X_B || X~_B) for n_L = 1.., nats; not asserted"});
  ledger.push_back({"line_divergence_per_row", "info", per_row, "D / n_L, nats; not asserted"});

  double worst_divergence = 0.0;
  for (double d : divergences) worst_divergence = std::min(worst_divergence, d);
  ledger.push_back({"divergence_nonnegative", worst_divergence >= -1e-12 ? "pass" : "fail", {worst_divergence},
                    "smallest line divergence (nats)"});
  return ledger;
}

bool falsified(std::span<const LedgerEntry> ledger) {
  return std::any_of(ledger.begin(), ledger.end(), [](const LedgerEntry& e) { return e.status == "fail"; });
}

}  // namespace rcc
