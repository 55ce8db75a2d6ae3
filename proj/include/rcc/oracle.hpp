#pragma once

// Exact information quantities of lattice MRFs at desk scale.
//
// Rows of a lattice form a Markov chain (row_chain), so block entropies,
// two-row joints across a gap and mutual informations all come from one
// forward-backward pass plus products of row transfer kernels. Everything
// here is in nats unless the name says bits.

#include <map>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rcc/chain.hpp"
#include "rcc/moment_match.hpp"

namespace rcc {

class RowProcess {
 public:
  explicit RowProcess(LatticeModel model, std::size_t state_cap = default_state_cap());

  const LatticeModel& model() const { return model_; }
  const ChainPosterior& posterior() const { return posterior_; }
  Index rows() const { return model_.shape().rows; }
  Index cols() const { return model_.shape().cols; }

  double entropy() const;                         // H(X_V)
  double row_entropy(Index r) const;              // H(r)
  double pair_entropy(Index r) const;             // H(r, r + 1)
  double conditional_entropy(Index r) const;      // H(r | r - 1), r >= 1
  double block_entropy(const RowRange& range) const;
  double joint_entropy(Index i, Index j) const;   // H(r_i, r_j), i <= j
  double mutual_information(Index i, Index j) const;

  // Joint table of rows i < j, entry (u, w) = p(r_i = u, r_j = w).
  Eigen::MatrixXd joint_table(Index i, Index j) const;

  const MomentField& moments() const { return moments_; }

 private:
  LatticeModel model_;
  ChainPosterior posterior_;
  MomentField moments_;
  mutable std::mutex cache_mutex_;
  mutable std::map<std::pair<Index, Index>, double> joint_cache_;
};

struct OracleOptions {
  FitOptions fit = [] {
    FitOptions f;
    f.tolerance = 1e-11;
    f.max_iter = 200000;
    return f;
  }();
  double moment_tolerance = 1e-8;  // MomentMismatch threshold for a supplied theta*
};

inline constexpr double kLn2 = 0.69314718055994530942;

// Block of `height` rows at the vertical center: begin = (rows - height) / 2.
RowRange centered_rows(Index rows, Index height);

// Moment-matching reduced model of a row block, fitted to the true block
// moments with the restricted true parameter as warm start.
struct LineFit {
  RowRange range;
  FitResult fit;
  LatticeModel reduced(const PairwiseFamily& family) const { return LatticeModel(family, fit.theta); }
};
LineFit fit_line(const RowProcess& truth, const RowRange& range, const OracleOptions& options = {});

// H(X_S | X_dS) for a strip with a row on each side.
double strip_conditional_entropy(const RowProcess& truth, const RowRange& strip);
// Centered strip, bits per pixel.
double strip_rate(const RowProcess& truth, Index strip_height);

// Phi_B(theta*) - <theta*, mu_B>: expected codelength of the true block
// marginal under the reduced model.
double line_cross_entropy(const RowProcess& truth, const RowRange& range, const BlockParameters& theta_star);

// Entropy of the reduced model on the block, bits per pixel. Throws
// MomentMismatch when its moments miss the true block moments by more than
// `tolerance`.
double line_rate(const RowProcess& truth, const RowRange& range, const BlockParameters& theta_star,
                 double tolerance = 1e-8);
// Centered block of height n, fitted here.
double line_rate(const RowProcess& truth, Index line_height, const OracleOptions& options = {});

// D(X_B || X~_B) = cross entropy - H(X_B).
double line_divergence(const RowProcess& truth, const RowRange& range, const BlockParameters& theta_star);

double mutual_info_rows(const RowProcess& truth, Index i, Index j);

// Redundancy of coding the lines of a layout independently with their
// reduced models. *_nats are raw sums; the rest are bits per pixel.
struct RedundancyReport {
  double correlation_term = 0.0;   // sum_i I(first row of L_i; last row of L_{i-1}) / |V|
  double distribution_term = 0.0;  // sum_i D_i / |V|
  double total = 0.0;              // correlation_term + distribution_term
  double direct_total = 0.0;       // (sum_i (H(L_i) + D_i) - H(X_U)) / |V|
  double correlation_nats = 0.0;
  double distribution_nats = 0.0;
  double direct_nats = 0.0;
  // Centered single-period forms: (I + D) / ((n_L + n_S) N), and the
  // proportional weighting (n_S I + n_L D) / ((n_L + n_S) N).
  double approx_correlation = 0.0;
  double approx_distribution = 0.0;
  double proportional_total = 0.0;
};

// fits[i] must cover layout.lines[i].
RedundancyReport redundancy_decomposition(const RowProcess& truth, const CutsetLayout& layout,
                                          std::span<const LineFit> fits, const LineFit& centered_line);

struct RateReport {
  Index line_height = 0;
  Index strip_height = 0;
  Index strip_count = 0;
  Index rows = 0;
  double line_rate = 0.0;        // centered, bits per pixel
  double strip_rate = 0.0;       // centered, bits per pixel
  double combined_exact = 0.0;   // weights ((k + 1) n_L, k n_S) / M
  double combined_approx = 0.0;  // weights (n_L, n_S) / (n_L + n_S)
  double layout_rate = 0.0;      // every line and strip at its own position
  double entropy_rate = 0.0;     // H(X_V) / |V|
  RedundancyReport redundancy;
  BlockParameters centered_theta;  // theta* of the centered line
};

RateReport total_rate(const RowProcess& truth, const CutsetLayout& layout, const OracleOptions& options = {});

// Top-aligned nested blocks B_1 .. B_max sharing the first row of the
// centered B_max.
struct NestedFits {
  Index top = 0;
  std::vector<LineFit> blocks;  // blocks[n - 1] covers [top, top + n)
};
NestedFits fit_nested(const RowProcess& truth, Index max_height, const OracleOptions& options = {});

// Divergence between the marginal of the top j rows under source i and the
// reduced model of B_j. Source 0 is the true model; source i >= 1 is the
// reduced model of B_i (i >= j).
double nested_divergence(const RowProcess& truth, const NestedFits& nested, Index source, Index j);

struct RecursionCheck {
  Index n = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  double residual() const { return lhs - rhs; }
};
// D_n = D_{n-1} - D(X~~_{B_n} || X~_{B_{n-1}}) + H~_n(r_n | r_{n-1}) - H(r_n | r_{n-1}).
RecursionCheck divergence_recursion(const RowProcess& truth, const NestedFits& nested, Index n);
// D(X~~_{B_{m+1}} || X~_{B_m}) expanded one level down.
RecursionCheck nested_divergence_recursion(const RowProcess& truth, const NestedFits& nested, Index m);

struct LedgerEntry {
  std::string check;
  std::string status;  // pass, fail, degenerate-equal, info
  std::vector<double> values;
  std::string detail;
};

struct VerifyOptions {
  Index max_n = 4;
  Index max_gap = 5;
  double margin = 1e-10;          // strict orderings need differences above this
  double degenerate = 1e-9;       // all differences below this: degenerate-equal
  double identity_tolerance = 1e-8;
  OracleOptions oracle;
};

std::vector<LedgerEntry> verify_propositions(const LatticeModel& model, const VerifyOptions& options = {});
bool falsified(std::span<const LedgerEntry> ledger);

// Status of a sequence that should be strictly increasing (sign = +1) or
// decreasing (sign = -1).
std::string ordering_status(std::span<const double> values, int sign, double margin, double degenerate);

}  // namespace rcc
