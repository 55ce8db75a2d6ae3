#pragma once

#include <random>

#include "rcc/chain.hpp"
#include "rcc/lattice.hpp"

namespace rcc::testing {

inline double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

// Random statistic tables; q = 2 gives the Ising family.
inline PairwiseFamily random_family(int q, std::mt19937_64& rng) {
  if (q == 2) return PairwiseFamily::ising();
  Eigen::VectorXd node(q);
  Eigen::MatrixXd h(q, q), v(q, q);
  for (int a = 0; a < q; ++a) node(a) = uniform(rng, -1, 1);
  for (int a = 0; a < q; ++a)
    for (int b = 0; b < q; ++b) {
      h(a, b) = uniform(rng, -1, 1);
      v(a, b) = uniform(rng, -1, 1);
    }
  return PairwiseFamily(node, h, v);
}

inline BlockParameters random_parameters(const LatticeShape& shape, std::mt19937_64& rng, double scale = 1.0) {
  BlockParameters t = BlockParameters::zeros(shape);
  for (auto* m : {&t.node, &t.horizontal, &t.vertical})
    for (Index i = 0; i < m->size(); ++i) m->data()[i] = uniform(rng, -scale, scale);
  return t;
}

inline LatticeModel random_model(int q, Index rows, Index cols, std::mt19937_64& rng, double scale = 1.0) {
  return LatticeModel(random_family(q, rng), random_parameters({rows, cols}, rng, scale));
}

inline LatticeModel ising(Index rows, Index cols, double edge, double node = 0.0) {
  return LatticeModel(PairwiseFamily::ising(), ParameterField::homogeneous(rows, node, edge), cols);
}

inline SymbolGrid random_grid(Index rows, Index cols, int q, std::mt19937_64& rng) {
  SymbolGrid x(rows, cols);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = static_cast<int>(rng() % static_cast<unsigned>(q));
  return x;
}

// Per-pixel and per-edge marginals from the column chain of a block, for
// comparison with enumeration. Pair tables are indexed (first, second).
struct LatticeMarginals {
  std::vector<Eigen::VectorXd> node;        // raster order
  std::vector<Eigen::MatrixXd> horizontal;  // raster order
  std::vector<Eigen::MatrixXd> vertical;    // raster order
};

inline int digit(Index state, Index r, int q) {
  for (Index i = 0; i < r; ++i) state /= q;
  return static_cast<int>(state % q);
}

inline LatticeMarginals chain_marginals(const LatticeModel& model) {
  const LatticeShape s = model.shape();
  const int q = model.alphabet_size();
  const ChainPosterior post(column_chain(model));
  LatticeMarginals out;
  out.node.assign(s.sites(), Eigen::VectorXd::Zero(q));
  out.horizontal.assign(s.horizontal_edges(), Eigen::MatrixXd::Zero(q, q));
  out.vertical.assign(s.vertical_edges(), Eigen::MatrixXd::Zero(q, q));
  for (Index c = 0; c < s.cols; ++c) {
    const Eigen::VectorXd& p = post.node_marginal(c);
    for (Index st = 0; st < p.size(); ++st)
      for (Index r = 0; r < s.rows; ++r) {
        out.node[r * s.cols + c](digit(st, r, q)) += p(st);
        if (r + 1 < s.rows) out.vertical[r * s.cols + c](digit(st, r, q), digit(st, r + 1, q)) += p(st);
      }
    if (c + 1 == s.cols) continue;
    const Eigen::MatrixXd pm = post.pair_marginal(c);
    for (Index a = 0; a < pm.rows(); ++a)
      for (Index b = 0; b < pm.cols(); ++b)
        for (Index r = 0; r < s.rows; ++r)
          out.horizontal[r * (s.cols - 1) + c](digit(a, r, q), digit(b, r, q)) += pm(a, b);
  }
  return out;
}

}  // namespace rcc::testing
