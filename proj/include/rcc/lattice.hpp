#pragma once

// Lattices, pairwise exponential families, parameters and the line/strip
// cutset layout.
//
// Component ordering is fixed everywhere (inner products, gradients, files):
// nodes in raster order, then horizontal edges in raster order, then
// vertical edges in raster order. Horizontal edge (r, c) joins (r, c) and
// (r, c + 1); vertical edge (r, c) joins (r, c) and (r + 1, c).

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <vector>

#include "rcc/errors.hpp"

namespace rcc {

using Index = Eigen::Index;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// M x N array of symbols in [0, q).
using SymbolGrid = RowMatrix<int>;

struct LatticeShape {
  Index rows = 0;
  Index cols = 0;

  LatticeShape() = default;
  LatticeShape(Index rows, Index cols);

  Index sites() const { return rows * cols; }
  Index horizontal_edges() const { return rows * (cols - 1); }
  Index vertical_edges() const { return (rows - 1) * cols; }
  Index components() const { return sites() + horizontal_edges() + vertical_edges(); }

  friend bool operator==(const LatticeShape&, const LatticeShape&) = default;
};

// Half-open range of row indices [begin, end).
struct RowRange {
  Index begin = 0;
  Index end = 0;

  Index size() const { return end - begin; }
  friend bool operator==(const RowRange&, const RowRange&) = default;
};

// Alphabet plus node and edge statistic tables. Edge tables are indexed
// (first endpoint, second endpoint): (left, right) for horizontal edges and
// (top, bottom) for vertical ones.
class PairwiseFamily {
 public:
  PairwiseFamily(Eigen::VectorXd node_stat, Eigen::MatrixXd edge_stat_h, Eigen::MatrixXd edge_stat_v);

  // q = 2 with symbols mapped 0 -> -1, 1 -> +1; t_i(x) = x, t_ij = x_i x_j.
  static PairwiseFamily ising();

  int alphabet_size() const { return static_cast<int>(node_stat_.size()); }
  const Eigen::VectorXd& node_stat() const { return node_stat_; }
  const Eigen::MatrixXd& edge_stat_h() const { return edge_stat_h_; }
  const Eigen::MatrixXd& edge_stat_v() const { return edge_stat_v_; }

  // Rank test of the local design table [1, t(a), t(b), t_e(a, b)] over all
  // symbol pairs, for both edge orientations.
  bool is_minimal() const;

  // Family of the transposed lattice: horizontal and vertical tables swap.
  PairwiseFamily transposed() const;

  friend bool operator==(const PairwiseFamily&, const PairwiseFamily&);

 private:
  Eigen::VectorXd node_stat_;
  Eigen::MatrixXd edge_stat_h_;
  Eigen::MatrixXd edge_stat_v_;
};

// One value per node, per horizontal edge and per vertical edge of a lattice.
// Holds both exponential parameters and moments, which share the layout.
template <typename Scalar>
struct SiteField {
  RowMatrix<Scalar> node;        // M x N
  RowMatrix<Scalar> horizontal;  // M x (N - 1)
  RowMatrix<Scalar> vertical;    // (M - 1) x N

  static SiteField zeros(const LatticeShape& shape) {
    SiteField f;
    f.node = RowMatrix<Scalar>::Zero(shape.rows, shape.cols);
    f.horizontal = RowMatrix<Scalar>::Zero(shape.rows, shape.cols - 1);
    f.vertical = RowMatrix<Scalar>::Zero(shape.rows - 1, shape.cols);
    return f;
  }

  LatticeShape shape() const { return {node.rows(), node.cols()}; }

  Vector<Scalar> flatten() const {
    Vector<Scalar> out(node.size() + horizontal.size() + vertical.size());
    out << node.template reshaped<Eigen::RowMajor>(), horizontal.template reshaped<Eigen::RowMajor>(),
        vertical.template reshaped<Eigen::RowMajor>();
    return out;
  }

  static SiteField unflatten(const LatticeShape& shape, const Vector<Scalar>& flat) {
    SiteField f = zeros(shape);
    if (flat.size() != shape.components()) {
      throw FormatError("component vector length does not match lattice shape");
    }
    Index at = 0;
    for (auto* m : {&f.node, &f.horizontal, &f.vertical}) {
      m->template reshaped<Eigen::RowMajor>() = flat.segment(at, m->size());
      at += m->size();
    }
    return f;
  }

  // Components of the induced subgraph on a block of rows.
  SiteField rows(const RowRange& range) const {
    SiteField f;
    f.node = node.middleRows(range.begin, range.size());
    f.horizontal = horizontal.middleRows(range.begin, range.size());
    f.vertical = vertical.middleRows(range.begin, range.size() - 1);
    return f;
  }

  SiteField transposed() const {
    SiteField f;
    f.node = node.transpose();
    f.horizontal = vertical.transpose();
    f.vertical = horizontal.transpose();
    return f;
  }

  Scalar dot(const SiteField& other) const {
    return (node.cwiseProduct(other.node)).sum() + (horizontal.cwiseProduct(other.horizontal)).sum() +
           (vertical.cwiseProduct(other.vertical)).sum();
  }

  Scalar max_abs() const {
    Scalar m = 0;
    for (const auto* t : {&node, &horizontal, &vertical}) {
      if (t->size() > 0) m = std::max(m, t->cwiseAbs().maxCoeff());
    }
    return m;
  }

  SiteField& operator+=(const SiteField& o) {
    node += o.node;
    horizontal += o.horizontal;
    vertical += o.vertical;
    return *this;
  }
  SiteField& operator-=(const SiteField& o) {
    node -= o.node;
    horizontal -= o.horizontal;
    vertical -= o.vertical;
    return *this;
  }
  SiteField& operator*=(Scalar s) {
    node *= s;
    horizontal *= s;
    vertical *= s;
    return *this;
  }
  friend SiteField operator+(SiteField a, const SiteField& b) { return a += b; }
  friend SiteField operator-(SiteField a, const SiteField& b) { return a -= b; }
  friend SiteField operator*(Scalar s, SiteField a) { return a *= s; }
  friend bool operator==(const SiteField& a, const SiteField& b) {
    return a.shape() == b.shape() && a.node == b.node && a.horizontal == b.horizontal &&
           a.vertical == b.vertical;
  }
};

using BlockParameters = SiteField<double>;
using MomentField = SiteField<double>;
using MomentVector = Eigen::VectorXd;

// Row-invariant parameters of the global model: one value per row for node
// and horizontal-edge terms, one per adjacent row pair for vertical edges.
// There is no column dimension in storage.
struct ParameterField {
  Eigen::VectorXd node;        // M
  Eigen::VectorXd horizontal;  // M
  Eigen::VectorXd vertical;    // M - 1

  // Homogeneous field: the same node and edge parameter everywhere.
  static ParameterField homogeneous(Index rows, double node_param, double edge_param);

  Index rows() const { return node.size(); }
  BlockParameters expand(Index cols) const;
  ParameterField restrict(const RowRange& range) const;
  void validate() const;

  friend bool operator==(const ParameterField&, const ParameterField&);
};

// An exponential-family MRF on a rectangular lattice with per-site
// parameters. Global models come from ParameterField::expand; reduced
// models on a block carry freely varying fitted parameters.
struct LatticeModel {
  PairwiseFamily family;
  BlockParameters theta;

  LatticeModel(PairwiseFamily family, BlockParameters theta);
  LatticeModel(PairwiseFamily family, const ParameterField& theta, Index cols);

  LatticeShape shape() const { return theta.shape(); }
  int alphabet_size() const { return family.alphabet_size(); }

  // <theta, t(x)> summed in the fixed raster order.
  double energy(const SymbolGrid& pixels) const;

  LatticeModel restrict(const RowRange& range) const;
  LatticeModel transposed() const;
};

// Alternating line/strip tiling of the rows: line, strip, line, ..., line.
struct CutsetLayout {
  Index line_height = 0;
  Index strip_height = 0;
  Index strip_count = 0;
  std::vector<RowRange> lines;   // strip_count + 1 ranges
  std::vector<RowRange> strips;  // strip_count ranges

  Index rows() const { return (strip_count + 1) * line_height + strip_count * strip_height; }
};

// Throws NoValidTiling unless rows = (k + 1) n_L + k n_S for some k >= 1.
CutsetLayout build_layout(Index rows, Index line_height, Index strip_height);

void check_symbols(const SymbolGrid& pixels, int alphabet_size);

// t(x) as a site field and flattened in the normative component order.
MomentField statistic_field(const SymbolGrid& pixels, const PairwiseFamily& family);
MomentVector statistic(const SymbolGrid& pixels, const PairwiseFamily& family);

// Moments of the uniform distribution (theta = 0): table means.
MomentField uniform_moments(const PairwiseFamily& family, const LatticeShape& shape);

// Smallest distance from any moment component to the boundary of the
// interval spanned by its statistic table. Non-positive when a component
// sits on or outside that interval.
double hull_margin(const MomentField& moments, const PairwiseFamily& family);

}  // namespace rcc
