#include <cstdlib>
#include <string>

#include "rcc/chain.hpp"

namespace rcc {

namespace {

// digits(s, r): symbol of pixel r in supernode state s, pixel 0 least significant.
RowMatrix<int> digit_table(int q, Index pixels, std::size_t cap) {
  std::size_t states = 1;
  for (Index r = 0; r < pixels; ++r) {
    states *= static_cast<std::size_t>(q);
    if (states > cap) {
      throw StateSpaceTooLarge("supernode of " + std::to_string(pixels) + " pixels with q = " + std::to_string(q) +
                               " exceeds the state cap of " + std::to_string(cap));
    }
  }
  RowMatrix<int> d(static_cast<Index>(states), pixels);
  for (Index s = 0; s < d.rows(); ++s) {
    Index v = s;
    for (Index r = 0; r < pixels; ++r) {
      d(s, r) = static_cast<int>(v % q);
      v /= q;
    }
  }
  return d;
}

}  // namespace

std::size_t default_state_cap() {
  if (const char* env = std::getenv("RCC_STATE_CAP")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return 4096;
}

BoundaryClamp strip_boundary(const LatticeModel& global, const RowRange& range, const SymbolGrid& pixels) {
  const LatticeShape s = global.shape();
  if (pixels.rows() != s.rows || pixels.cols() != s.cols) throw LayoutMismatch("configuration shape differs from model");
  if (range.begin < 0 || range.end > s.rows || range.size() < 1) throw FormatError("row range outside lattice");
  BoundaryClamp clamp;
  if (range.begin > 0) {
    clamp.above = pixels.row(range.begin - 1).transpose();
    clamp.above_coupling = global.theta.vertical.row(range.begin - 1).transpose();
  }
  if (range.end < s.rows) {
    clamp.below = pixels.row(range.end).transpose();
    clamp.below_coupling = global.theta.vertical.row(range.end - 1).transpose();
  }
  return clamp;
}

SuperpixelChain column_chain(const LatticeModel& block, const BoundaryClamp* clamp, std::size_t state_cap) {
  const LatticeShape shape = block.shape();
  const int q = block.alphabet_size();
  const auto digits = digit_table(q, shape.rows, state_cap);
  const Index S = digits.rows();
  const auto& t = block.family.node_stat();
  const auto& th = block.family.edge_stat_h();
  const auto& tv = block.family.edge_stat_v();
  const auto& theta = block.theta;

  SuperpixelChain chain;
  chain.log_node.reserve(shape.cols);
  for (Index c = 0; c < shape.cols; ++c) {
    Eigen::VectorXd node(S);
    for (Index s = 0; s < S; ++s) {
      double e = 0.0;
      for (Index r = 0; r < shape.rows; ++r) e += theta.node(r, c) * t(digits(s, r));
      for (Index r = 0; r + 1 < shape.rows; ++r) e += theta.vertical(r, c) * tv(digits(s, r), digits(s, r + 1));
      if (clamp && clamp->above) e += clamp->above_coupling(c) * tv((*clamp->above)(c), digits(s, 0));
      if (clamp && clamp->below) e += clamp->below_coupling(c) * tv(digits(s, shape.rows - 1), (*clamp->below)(c));
      node(s) = e;
    }
    chain.log_node.push_back(std::move(node));
  }

  for (Index c = 0; c + 1 < shape.cols; ++c) {
    if (c > 0 && theta.horizontal.col(c) == theta.horizontal.col(c - 1)) {
      chain.log_pair.push_back(chain.log_pair.back());
      continue;
    }
    std::vector<Eigen::MatrixXd> factors;
    factors.reserve(shape.rows);
    for (Index r = 0; r < shape.rows; ++r) factors.push_back(theta.horizontal(r, c) * th);
    chain.log_pair.push_back(std::make_shared<const PairPotential>(std::move(factors)));
  }
  return chain;
}

SuperpixelChain row_chain(const LatticeModel& model, std::size_t state_cap) {
  return column_chain(model.transposed(), nullptr, state_cap);
}

std::vector<Index> column_states(const SymbolGrid& pixels, const RowRange& range, int alphabet_size) {
  std::vector<Index> states(pixels.cols(), 0);
  for (Index c = 0; c < pixels.cols(); ++c) {
    Index v = 0;
    for (Index r = range.end - 1; r >= range.begin; --r) v = v * alphabet_size + pixels(r, c);
    states[c] = v;
  }
  return states;
}

MomentField column_chain_moments(const LatticeModel& block, const ChainPosterior& posterior) {
  const LatticeShape shape = block.shape();
  const int q = block.alphabet_size();
  const auto digits = digit_table(q, shape.rows, static_cast<std::size_t>(posterior.chain().state_size(0)));
  const auto& t = block.family.node_stat();
  const auto& th = block.family.edge_stat_h();
  const auto& tv = block.family.edge_stat_v();

  MomentField m = MomentField::zeros(shape);
  for (Index c = 0; c < shape.cols; ++c) {
    const Eigen::VectorXd& p = posterior.node_marginal(c);
    for (Index s = 0; s < p.size(); ++s) {
      for (Index r = 0; r < shape.rows; ++r) m.node(r, c) += p(s) * t(digits(s, r));
      for (Index r = 0; r + 1 < shape.rows; ++r) m.vertical(r, c) += p(s) * tv(digits(s, r), digits(s, r + 1));
    }
  }
  for (Index c = 0; c + 1 < shape.cols; ++c) {
    const auto f = posterior.factor_marginals(c);
    for (Index r = 0; r < shape.rows; ++r) m.horizontal(r, c) = f[r].cwiseProduct(th).sum();
  }
  return m;
}

MomentField row_chain_moments(const LatticeModel& model, const ChainPosterior& posterior) {
  return column_chain_moments(model.transposed(), posterior).transposed();
}

MomentField lattice_moments(const LatticeModel& model, std::size_t state_cap) {
  const LatticeShape s = model.shape();
  if (s.rows <= s.cols) return column_chain_moments(model, ChainPosterior(column_chain(model, nullptr, state_cap)));
  return row_chain_moments(model, ChainPosterior(row_chain(model, state_cap)));
}

double lattice_log_partition(const LatticeModel& model, std::size_t state_cap) {
  const LatticeShape s = model.shape();
  if (s.rows <= s.cols) return log_partition(column_chain(model, nullptr, state_cap));
  return log_partition(row_chain(model, state_cap));
}

}  // namespace rcc
