#include "rcc/lattice.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace rcc {

namespace {

bool all_finite(const Eigen::MatrixXd& m) { return m.array().isFinite().all(); }

bool same_vector(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == b.size() && a == b;
}

}  // namespace

LatticeShape::LatticeShape(Index rows_, Index cols_) : rows(rows_), cols(cols_) {
  if (rows < 1 || cols < 1) throw FormatError("lattice dimensions must be positive");
}

PairwiseFamily::PairwiseFamily(Eigen::VectorXd node_stat, Eigen::MatrixXd edge_stat_h,
                               Eigen::MatrixXd edge_stat_v)
    : node_stat_(std::move(node_stat)), edge_stat_h_(std::move(edge_stat_h)), edge_stat_v_(std::move(edge_stat_v)) {
  const Index q = node_stat_.size();
  if (q < 2 || q > 255) throw FormatError("alphabet size must lie in [2, 255]");
  if (edge_stat_h_.rows() != q || edge_stat_h_.cols() != q || edge_stat_v_.rows() != q ||
      edge_stat_v_.cols() != q) {
    throw FormatError("edge statistic tables must be q x q");
  }
  if (!all_finite(node_stat_) || !all_finite(edge_stat_h_) || !all_finite(edge_stat_v_)) {
    throw FormatError("statistic tables must be finite");
  }
}

PairwiseFamily PairwiseFamily::ising() {
  Eigen::Vector2d spin(-1.0, 1.0);
  Eigen::Matrix2d pair = spin * spin.transpose();
  return PairwiseFamily(spin, pair, pair);
}

bool PairwiseFamily::is_minimal() const {
  const Index q = alphabet_size();
  auto full_rank = [&](const Eigen::MatrixXd& edge) {
    Eigen::MatrixXd design(q * q, 4);
    for (Index a = 0; a < q; ++a) {
      for (Index b = 0; b < q; ++b) {
        design.row(a * q + b) << 1.0, node_stat_(a), node_stat_(b), edge(a, b);
      }
    }
    return design.colPivHouseholderQr().rank() == 4;
  };
  return full_rank(edge_stat_h_) && full_rank(edge_stat_v_);
}

PairwiseFamily PairwiseFamily::transposed() const { return PairwiseFamily(node_stat_, edge_stat_v_, edge_stat_h_); }

bool operator==(const PairwiseFamily& a, const PairwiseFamily& b) {
  return same_vector(a.node_stat_, b.node_stat_) && a.edge_stat_h_.rows() == b.edge_stat_h_.rows() &&
         a.edge_stat_h_ == b.edge_stat_h_ && a.edge_stat_v_ == b.edge_stat_v_;
}

ParameterField ParameterField::homogeneous(Index rows, double node_param, double edge_param) {
  if (rows < 1) throw FormatError("parameter field needs at least one row");
  ParameterField f;
  f.node = Eigen::VectorXd::Constant(rows, node_param);
  f.horizontal = Eigen::VectorXd::Constant(rows, edge_param);
  f.vertical = Eigen::VectorXd::Constant(rows - 1, edge_param);
  return f;
}

void ParameterField::validate() const {
  if (node.size() < 1 || horizontal.size() != node.size() || vertical.size() != node.size() - 1) {
    throw FormatError("row parameter lengths must be M, M and M - 1");
  }
  if (!node.allFinite() || !horizontal.allFinite() || !vertical.allFinite()) {
    throw FormatError("parameters must be finite");
  }
}

BlockParameters ParameterField::expand(Index cols) const {
  validate();
  BlockParameters p = BlockParameters::zeros(LatticeShape(rows(), cols));
  p.node.colwise() = node;
  p.horizontal.colwise() = horizontal;
  p.vertical.colwise() = vertical;
  return p;
}

ParameterField ParameterField::restrict(const RowRange& range) const {
  if (range.begin < 0 || range.end > rows() || range.size() < 1) throw FormatError("row range outside parameter field");
  ParameterField f;
  f.node = node.segment(range.begin, range.size());
  f.horizontal = horizontal.segment(range.begin, range.size());
  f.vertical = vertical.segment(range.begin, range.size() - 1);
  return f;
}

bool operator==(const ParameterField& a, const ParameterField& b) {
  return same_vector(a.node, b.node) && same_vector(a.horizontal, b.horizontal) && same_vector(a.vertical, b.vertical);
}

LatticeModel::LatticeModel(PairwiseFamily family_, BlockParameters theta_)
    : family(std::move(family_)), theta(std::move(theta_)) {
  const LatticeShape s = theta.shape();
  if (s.rows < 1 || s.cols < 1 || theta.horizontal.rows() != s.rows || theta.horizontal.cols() != s.cols - 1 ||
      theta.vertical.rows() != s.rows - 1 || theta.vertical.cols() != s.cols) {
    throw FormatError("parameter tables are inconsistent with the lattice shape");
  }
  if (!theta.node.allFinite() || !theta.horizontal.allFinite() || !theta.vertical.allFinite()) {
    throw FormatError("parameters must be finite");
  }
}

LatticeModel::LatticeModel(PairwiseFamily family_, const ParameterField& theta_, Index cols)
    : LatticeModel(std::move(family_), theta_.expand(cols)) {}

double LatticeModel::energy(const SymbolGrid& x) const {
  const LatticeShape s = shape();
  if (x.rows() != s.rows || x.cols() != s.cols) throw LayoutMismatch("configuration shape differs from model");
  const auto& t = family.node_stat();
  const auto& th = family.edge_stat_h();
  const auto& tv = family.edge_stat_v();
  double e = 0.0;
  for (Index r = 0; r < s.rows; ++r)
    for (Index c = 0; c < s.cols; ++c) e += theta.node(r, c) * t(x(r, c));
  for (Index r = 0; r < s.rows; ++r)
    for (Index c = 0; c + 1 < s.cols; ++c) e += theta.horizontal(r, c) * th(x(r, c), x(r, c + 1));
  for (Index r = 0; r + 1 < s.rows; ++r)
    for (Index c = 0; c < s.cols; ++c) e += theta.vertical(r, c) * tv(x(r, c), x(r + 1, c));
  return e;
}

LatticeModel LatticeModel::restrict(const RowRange& range) const {
  if (range.begin < 0 || range.end > shape().rows || range.size() < 1) {
    throw FormatError("row range outside lattice");
  }
  return LatticeModel(family, theta.rows(range));
}

LatticeModel LatticeModel::transposed() const { return LatticeModel(family.transposed(), theta.transposed()); }

CutsetLayout build_layout(Index rows, Index line_height, Index strip_height) {
  if (rows < 1 || line_height < 1 || strip_height < 1) {
    throw NoValidTiling("rows, line height and strip height must be positive");
  }
  const Index period = line_height + strip_height;
  if ((rows - line_height) % period != 0 || (rows - line_height) / period < 1) {
    throw NoValidTiling("no k >= 1 with " + std::to_string(rows) + " = (k+1)*" + std::to_string(line_height) +
                        " + k*" + std::to_string(strip_height));
  }
  CutsetLayout layout;
  layout.line_height = line_height;
  layout.strip_height = strip_height;
  layout.strip_count = (rows - line_height) / period;
  Index at = 0;
  for (Index i = 0; i <= layout.strip_count; ++i) {
    layout.lines.push_back({at, at + line_height});
    at += line_height;
    if (i < layout.strip_count) {
      layout.strips.push_back({at, at + strip_height});
      at += strip_height;
    }
  }
  return layout;
}

void check_symbols(const SymbolGrid& pixels, int alphabet_size) {
  if (pixels.size() == 0) throw FormatError("empty configuration");
  if (pixels.minCoeff() < 0 || pixels.maxCoeff() >= alphabet_size) {
    throw FormatError("pixel symbol outside [0, q)");
  }
}

MomentField statistic_field(const SymbolGrid& x, const PairwiseFamily& family) {
  check_symbols(x, family.alphabet_size());
  const LatticeShape s(x.rows(), x.cols());
  MomentField f = MomentField::zeros(s);
  for (Index r = 0; r < s.rows; ++r) {
    for (Index c = 0; c < s.cols; ++c) {
      f.node(r, c) = family.node_stat()(x(r, c));
      if (c + 1 < s.cols) f.horizontal(r, c) = family.edge_stat_h()(x(r, c), x(r, c + 1));
      if (r + 1 < s.rows) f.vertical(r, c) = family.edge_stat_v()(x(r, c), x(r + 1, c));
    }
  }
  return f;
}

MomentVector statistic(const SymbolGrid& x, const PairwiseFamily& family) {
  return statistic_field(x, family).flatten();
}

MomentField uniform_moments(const PairwiseFamily& family, const LatticeShape& shape) {
  MomentField f = MomentField::zeros(shape);
  f.node.setConstant(family.node_stat().mean());
  f.horizontal.setConstant(family.edge_stat_h().mean());
  f.vertical.setConstant(family.edge_stat_v().mean());
  return f;
}

double hull_margin(const MomentField& moments, const PairwiseFamily& family) {
  double margin = std::numeric_limits<double>::infinity();
  auto scan = [&](const RowMatrix<double>& m, double lo, double hi) {
    if (m.size() == 0) return;
    margin = std::min(margin, std::min(m.minCoeff() - lo, hi - m.maxCoeff()));
  };
  scan(moments.node, family.node_stat().minCoeff(), family.node_stat().maxCoeff());
  scan(moments.horizontal, family.edge_stat_h().minCoeff(), family.edge_stat_h().maxCoeff());
  scan(moments.vertical, family.edge_stat_v().minCoeff(), family.edge_stat_v().maxCoeff());
  return margin;
}

}  // namespace rcc
