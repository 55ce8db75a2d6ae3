#pragma once

// Exact inference on superpixel chains.
//
// A chain has T supernodes; supernode t takes one of state_size(t) states.
// Node potentials are arbitrary log tables. Pair potentials are stored as a
// sum of per-digit log tables: supernode states are mixed-radix numbers
// (digit 0 least significant) and
//
//   log psi(s, s') = sum_d F_d(s_d, s'_d).
//
// Chains built from lattices factor this way (one digit per pixel of a
// column or row), which keeps kernel products at O(S q D) rather than
// O(S^2). A generic dense table is the single-digit case.
//
// Messages are log-domain; each step shifts by its maximum and runs the
// kernel product in the linear domain, so bounded potentials never
// overflow.

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "rcc/lattice.hpp"

namespace rcc {

class PairPotential {
 public:
  explicit PairPotential(std::vector<Eigen::MatrixXd> log_factors);
  static PairPotential dense(Eigen::MatrixXd log_table);

  Index rows() const { return rows_; }  // states of the earlier supernode
  Index cols() const { return cols_; }  // states of the later supernode
  const std::vector<Eigen::MatrixXd>& log_factors() const { return log_factors_; }

  double log_value(Index from, Index to) const;
  Eigen::VectorXd log_row(Index from) const;
  Eigen::VectorXd log_col(Index to) const;
  Eigen::MatrixXd dense_log() const;

  // The linear kernel is K = exp(log psi - log_shift()).
  double log_shift() const { return log_shift_; }

  // x * K for x with rows() columns; returns cols() columns.
  Eigen::MatrixXd propagate(const Eigen::MatrixXd& x) const;
  // y * K^T for y with cols() columns; returns rows() columns.
  Eigen::MatrixXd pullback(const Eigen::MatrixXd& y) const;

  // Normalized joint tables of each digit pair under
  // p(s, s') proportional to left(s) K(s, s') right(s'), left/right >= 0.
  std::vector<Eigen::MatrixXd> factor_marginals(const Eigen::VectorXd& left, const Eigen::VectorXd& right) const;

  // E[log psi(s, s')] under the same joint.
  double expected_log(const Eigen::VectorXd& left, const Eigen::VectorXd& right) const;

 private:
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x, bool transpose, std::optional<std::size_t> skip) const;

  std::vector<Eigen::MatrixXd> log_factors_;
  static constexpr Index kGroupLimit = 16;

  std::vector<Eigen::MatrixXd> kernels_;  // exp(F_d - max F_d)
  std::vector<Eigen::MatrixXd> grouped_;  // kernels_ merged in digit runs
  double log_shift_ = 0.0;
  Index rows_ = 1;
  Index cols_ = 1;
};

struct SuperpixelChain {
  std::vector<Eigen::VectorXd> log_node;                     // T tables
  std::vector<std::shared_ptr<const PairPotential>> log_pair;  // T - 1 tables

  Index length() const { return static_cast<Index>(log_node.size()); }
  Index state_size(Index t) const { return log_node[t].size(); }
  void validate() const;
};

// Forward-backward results. log_forward(t) includes node t; log_backward(t)
// sums over nodes after t given s_t.
class ChainPosterior {
 public:
  explicit ChainPosterior(SuperpixelChain chain);

  const SuperpixelChain& chain() const { return chain_; }
  Index length() const { return chain_.length(); }
  double log_partition() const { return log_partition_; }
  const Eigen::VectorXd& log_forward(Index t) const { return log_forward_[t]; }
  const Eigen::VectorXd& log_backward(Index t) const { return log_backward_[t]; }
  const Eigen::VectorXd& node_marginal(Index t) const { return node_marginals_[t]; }

  // Dense joint of supernodes (t, t + 1). Size rows x cols of the potential.
  Eigen::MatrixXd pair_marginal(Index t) const;
  std::vector<Eigen::MatrixXd> factor_marginals(Index t) const;
  double expected_pair_log(Index t) const;

 private:
  // Linear-domain weights (max-shifted) of the two ends of pair t.
  Eigen::VectorXd left_weights(Index t) const;
  Eigen::VectorXd right_weights(Index t) const;

  SuperpixelChain chain_;
  std::vector<Eigen::VectorXd> log_forward_;
  std::vector<Eigen::VectorXd> log_backward_;
  std::vector<Eigen::VectorXd> node_marginals_;
  double log_partition_ = 0.0;
};

double log_partition(const SuperpixelChain& chain);
ChainPosterior marginals(const SuperpixelChain& chain);

// p(s_t | s_0 .. s_{t-1}); only the previous state matters. Pass
// std::nullopt for t = 0.
Eigen::VectorXd sequential_conditional(const ChainPosterior& posterior, Index t, std::optional<Index> previous);

// log p(s_0 .. s_{T-1}) under the chain joint.
double log_probability(const ChainPosterior& posterior, std::span<const Index> states);

// Entropy in nats: log Z minus the expected total log potential.
double chain_entropy(const ChainPosterior& posterior);

// Exact forward-filter backward-sample draw.
std::vector<Index> sample_chain(const ChainPosterior& posterior, std::mt19937_64& rng);
std::vector<Index> sample_chain(const ChainPosterior& posterior, std::uint64_t seed);

// Uniform double in [0, 1) from the top 53 bits of one generator output.
// Fixed conversion so sample streams are identical across standard libraries.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// ---------------------------------------------------------------------------
// Lattice clustering.

// Largest supernode state count that inference will build. RCC_STATE_CAP in
// the environment overrides the default of 4096.
std::size_t default_state_cap();

// Vertical terms between a block and fixed rows just above/below it.
struct BoundaryClamp {
  std::optional<Eigen::VectorXi> above;  // symbols of the row above the block
  std::optional<Eigen::VectorXi> below;  // symbols of the row below the block
  Eigen::VectorXd above_coupling;        // theta of vertical edges (above, top row)
  Eigen::VectorXd below_coupling;        // theta of vertical edges (bottom row, below)
};

// Boundary of rows [range) of a global model, read from a full configuration.
BoundaryClamp strip_boundary(const LatticeModel& global, const RowRange& range, const SymbolGrid& pixels);

// Chain over the columns of a block: supernode c enumerates the pixels of
// column c, top pixel in digit 0.
SuperpixelChain column_chain(const LatticeModel& block, const BoundaryClamp* clamp = nullptr,
                             std::size_t state_cap = default_state_cap());

// Chain over the rows of a lattice: supernode r enumerates row r, left pixel
// in digit 0.
SuperpixelChain row_chain(const LatticeModel& model, std::size_t state_cap = default_state_cap());

// Supernode state of each column of rows [range).
std::vector<Index> column_states(const SymbolGrid& pixels, const RowRange& range, int alphabet_size);

// Expected statistics of a block from its column-chain posterior.
MomentField column_chain_moments(const LatticeModel& block, const ChainPosterior& posterior);
MomentField row_chain_moments(const LatticeModel& model, const ChainPosterior& posterior);

// Moments of the whole lattice, clustering along the cheaper direction.
MomentField lattice_moments(const LatticeModel& model, std::size_t state_cap = default_state_cap());
double lattice_log_partition(const LatticeModel& model, std::size_t state_cap = default_state_cap());

}  // namespace rcc
