#include "rcc/chain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace rcc {

namespace {

double log_sum_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  Eigen::VectorXd p = (logits.array() - logits.maxCoeff()).exp();
  return p / p.sum();
}

Eigen::VectorXd shifted_exp(const Eigen::VectorXd& v, double& shift) {
  shift = v.maxCoeff();
  return (v.array() - shift).exp();
}

Index draw(const Eigen::VectorXd& weights, std::mt19937_64& rng) {
  const double u = uniform01(rng) * weights.sum();
  double acc = 0.0;
  for (Index i = 0; i < weights.size(); ++i) {
    acc += weights(i);
    if (u < acc) return i;
  }
  // u landed on the rounding tail; take the last state with positive weight.
  for (Index i = weights.size() - 1; i >= 0; --i)
    if (weights(i) > 0.0) return i;
  return weights.size() - 1;
}

}  // namespace

// ---------------------------------------------------------------------------
// PairPotential

PairPotential::PairPotential(std::vector<Eigen::MatrixXd> log_factors) : log_factors_(std::move(log_factors)) {
  if (log_factors_.empty()) throw FormatError("pair potential needs at least one factor");
  for (const auto& f : log_factors_) {
    if (f.size() == 0 || !f.allFinite()) throw FormatError("pair potential factors must be non-empty and finite");
    const double m = f.maxCoeff();
    kernels_.push_back((f.array() - m).exp().matrix());
    log_shift_ += m;
    rows_ *= f.rows();
    cols_ *= f.cols();
  }
  // Runs of adjacent digits merged into one Kronecker kernel: a handful of
  // wider GEMMs beats one memory pass per binary digit.
  for (std::size_t d = 0; d < kernels_.size();) {
    Eigen::MatrixXd k = kernels_[d++];
    while (d < kernels_.size() && k.rows() * kernels_[d].rows() <= kGroupLimit &&
           k.cols() * kernels_[d].cols() <= kGroupLimit) {
      const Eigen::MatrixXd& hi = kernels_[d++];
      Eigen::MatrixXd next(k.rows() * hi.rows(), k.cols() * hi.cols());
      for (Index a = 0; a < hi.rows(); ++a)
        for (Index b = 0; b < hi.cols(); ++b) next.block(a * k.rows(), b * k.cols(), k.rows(), k.cols()) = hi(a, b) * k;
      k.swap(next);
    }
    grouped_.push_back(std::move(k));
  }
}

PairPotential PairPotential::dense(Eigen::MatrixXd log_table) {
  std::vector<Eigen::MatrixXd> f;
  f.push_back(std::move(log_table));
  return PairPotential(std::move(f));
}

double PairPotential::log_value(Index from, Index to) const {
  double v = 0.0;
  for (const auto& f : log_factors_) {
    v += f(from % f.rows(), to % f.cols());
    from /= f.rows();
    to /= f.cols();
  }
  return v;
}

Eigen::VectorXd PairPotential::log_row(Index from) const {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(1);
  for (const auto& f : log_factors_) {
    const Index a = from % f.rows();
    from /= f.rows();
    Eigen::VectorXd next(v.size() * f.cols());
    for (Index b = 0; b < f.cols(); ++b) next.segment(b * v.size(), v.size()) = v.array() + f(a, b);
    v.swap(next);
  }
  return v;
}

Eigen::VectorXd PairPotential::log_col(Index to) const {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(1);
  for (const auto& f : log_factors_) {
    const Index b = to % f.cols();
    to /= f.cols();
    Eigen::VectorXd next(v.size() * f.rows());
    for (Index a = 0; a < f.rows(); ++a) next.segment(a * v.size(), v.size()) = v.array() + f(a, b);
    v.swap(next);
  }
  return v;
}

Eigen::MatrixXd PairPotential::dense_log() const {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(1, 1);
  for (const auto& f : log_factors_) {
    Eigen::MatrixXd next(d.rows() * f.rows(), d.cols() * f.cols());
    for (Index a = 0; a < f.rows(); ++a)
      for (Index b = 0; b < f.cols(); ++b)
        next.block(a * d.rows(), b * d.cols(), d.rows(), d.cols()) = d.array() + f(a, b);
    d.swap(next);
  }
  return d;
}

// Applies the Kronecker product of the digit kernels to the column index of
// x, one digit at a time. The column index of x is viewed as
// (inner, digit d, outer); each outer slab is a small GEMM against K_d.
Eigen::MatrixXd PairPotential::apply(const Eigen::MatrixXd& x, bool transpose, std::optional<std::size_t> skip) const {
  const std::vector<Eigen::MatrixXd>& kernels = skip ? kernels_ : grouped_;
  const std::size_t digits = kernels.size();
  std::vector<Index> size(digits);
  for (std::size_t d = 0; d < digits; ++d) size[d] = transpose ? kernels[d].cols() : kernels[d].rows();

  // The first applied digit reads x in place; big inputs are never copied.
  Eigen::MatrixXd cur;
  const Eigen::MatrixXd* src_matrix = &x;
  const Index rows = x.rows();
  for (std::size_t d = 0; d < digits; ++d) {
    if (skip && *skip == d) continue;
    const Eigen::MatrixXd& k = kernels[d];
    const Index in = size[d];
    const Index out = transpose ? k.rows() : k.cols();
    Index inner = rows;
    for (std::size_t e = 0; e < d; ++e) inner *= size[e];
    Index outer = 1;
    for (std::size_t e = d + 1; e < digits; ++e) outer *= size[e];

    Eigen::MatrixXd next(rows, inner / rows * out * outer);
    for (Index o = 0; o < outer; ++o) {
      Eigen::Map<const Eigen::MatrixXd> src(src_matrix->data() + inner * in * o, inner, in);
      Eigen::Map<Eigen::MatrixXd> dst(next.data() + inner * out * o, inner, out);
      if (transpose)
        dst.noalias() = src * k.transpose();
      else
        dst.noalias() = src * k;
    }
    size[d] = out;
    cur.swap(next);
    src_matrix = &cur;
  }
  if (src_matrix == &x) return x;
  return cur;
}

Eigen::MatrixXd PairPotential::propagate(const Eigen::MatrixXd& x) const {
  if (x.cols() != rows_) throw FormatError("propagate: width does not match potential");
  return apply(x, false, std::nullopt);
}

Eigen::MatrixXd PairPotential::pullback(const Eigen::MatrixXd& y) const {
  if (y.cols() != cols_) throw FormatError("pullback: width does not match potential");
  return apply(y, true, std::nullopt);
}

std::vector<Eigen::MatrixXd> PairPotential::factor_marginals(const Eigen::VectorXd& left,
                                                             const Eigen::VectorXd& right) const {
  const std::size_t digits = kernels_.size();
  std::vector<Eigen::MatrixXd> out;
  out.reserve(digits);
  for (std::size_t d = 0; d < digits; ++d) {
    // Left weights pushed through every digit except d; digit d keeps its
    // input size so it can be paired with the right weights directly.
    const Eigen::MatrixXd lt = apply(left.transpose(), false, d);
    const Index in = kernels_[d].rows();
    const Index outd = kernels_[d].cols();
    Index inner = 1;
    for (std::size_t e = 0; e < d; ++e) inner *= kernels_[e].cols();
    Index outer = 1;
    for (std::size_t e = d + 1; e < digits; ++e) outer *= kernels_[e].cols();

    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(in, outd);
    for (Index o = 0; o < outer; ++o) {
      Eigen::Map<const Eigen::MatrixXd> l(lt.data() + inner * in * o, inner, in);
      Eigen::Map<const Eigen::MatrixXd> r(right.data() + inner * outd * o, inner, outd);
      g.noalias() += l.transpose() * r;
    }
    Eigen::MatrixXd p = kernels_[d].cwiseProduct(g);
    p /= p.sum();
    out.push_back(std::move(p));
  }
  return out;
}

double PairPotential::expected_log(const Eigen::VectorXd& left, const Eigen::VectorXd& right) const {
  const auto m = factor_marginals(left, right);
  double e = 0.0;
  for (std::size_t d = 0; d < m.size(); ++d) e += m[d].cwiseProduct(log_factors_[d]).sum();
  return e;
}

// ---------------------------------------------------------------------------
// SuperpixelChain and posterior

void SuperpixelChain::validate() const {
  if (log_node.empty()) throw FormatError("chain must have at least one node");
  if (log_pair.size() + 1 != log_node.size()) throw FormatError("chain needs T - 1 pair potentials");
  for (const auto& n : log_node)
    if (n.size() < 1 || !n.allFinite()) throw FormatError("node potentials must be non-empty and finite");
  for (std::size_t t = 0; t < log_pair.size(); ++t) {
    if (!log_pair[t]) throw FormatError("missing pair potential");
    if (log_pair[t]->rows() != log_node[t].size() || log_pair[t]->cols() != log_node[t + 1].size()) {
      throw FormatError("pair potential dimensions disagree with state sizes");
    }
  }
}

ChainPosterior::ChainPosterior(SuperpixelChain chain) : chain_(std::move(chain)) {
  chain_.validate();
  const Index T = chain_.length();
  log_forward_.resize(T);
  log_backward_.resize(T);
  node_marginals_.resize(T);

  log_forward_[0] = chain_.log_node[0];
  for (Index t = 0; t + 1 < T; ++t) {
    const PairPotential& pair = *chain_.log_pair[t];
    double shift = 0.0;
    const Eigen::VectorXd w = shifted_exp(log_forward_[t], shift);
    const Eigen::VectorXd next = pair.propagate(w.transpose()).transpose();
    log_forward_[t + 1] = chain_.log_node[t + 1].array() + shift + pair.log_shift() + next.array().log();
  }

  log_backward_[T - 1] = Eigen::VectorXd::Zero(chain_.state_size(T - 1));
  for (Index t = T - 2; t >= 0; --t) {
    const PairPotential& pair = *chain_.log_pair[t];
    double shift = 0.0;
    const Eigen::VectorXd w = shifted_exp(chain_.log_node[t + 1] + log_backward_[t + 1], shift);
    const Eigen::VectorXd prev = pair.pullback(w.transpose()).transpose();
    log_backward_[t] = shift + pair.log_shift() + prev.array().log();
  }

  log_partition_ = log_sum_exp(log_forward_[T - 1]);
  for (Index t = 0; t < T; ++t) node_marginals_[t] = softmax(log_forward_[t] + log_backward_[t]);
}

Eigen::VectorXd ChainPosterior::left_weights(Index t) const {
  double shift = 0.0;
  return shifted_exp(log_forward_[t], shift);
}

Eigen::VectorXd ChainPosterior::right_weights(Index t) const {
  double shift = 0.0;
  return shifted_exp(chain_.log_node[t + 1] + log_backward_[t + 1], shift);
}

Eigen::MatrixXd ChainPosterior::pair_marginal(Index t) const {
  const PairPotential& pair = *chain_.log_pair[t];
  Eigen::MatrixXd joint = pair.propagate(Eigen::MatrixXd(left_weights(t).asDiagonal()));
  joint *= right_weights(t).asDiagonal();
  return joint / joint.sum();
}

std::vector<Eigen::MatrixXd> ChainPosterior::factor_marginals(Index t) const {
  return chain_.log_pair[t]->factor_marginals(left_weights(t), right_weights(t));
}

double ChainPosterior::expected_pair_log(Index t) const {
  return chain_.log_pair[t]->expected_log(left_weights(t), right_weights(t));
}

double log_partition(const SuperpixelChain& chain) {
  chain.validate();
  Eigen::VectorXd alpha = chain.log_node[0];
  for (Index t = 0; t + 1 < chain.length(); ++t) {
    double shift = 0.0;
    const Eigen::VectorXd w = shifted_exp(alpha, shift);
    const Eigen::VectorXd next = chain.log_pair[t]->propagate(w.transpose()).transpose();
    alpha = chain.log_node[t + 1].array() + shift + chain.log_pair[t]->log_shift() + next.array().log();
  }
  return log_sum_exp(alpha);
}

ChainPosterior marginals(const SuperpixelChain& chain) { return ChainPosterior(chain); }

Eigen::VectorXd sequential_conditional(const ChainPosterior& posterior, Index t, std::optional<Index> previous) {
  const auto& chain = posterior.chain();
  Eigen::VectorXd logits = chain.log_node[t] + posterior.log_backward(t);
  if (t > 0) {
    if (!previous) throw FormatError("sequential_conditional needs the previous state for t > 0");
    logits += chain.log_pair[t - 1]->log_row(*previous);
  }
  return softmax(logits);
}

double log_probability(const ChainPosterior& posterior, std::span<const Index> states) {
  const auto& chain = posterior.chain();
  if (static_cast<Index>(states.size()) != chain.length()) throw FormatError("state sequence length differs from chain");
  double lp = -posterior.log_partition();
  for (Index t = 0; t < chain.length(); ++t) {
    lp += chain.log_node[t](states[t]);
    if (t + 1 < chain.length()) lp += chain.log_pair[t]->log_value(states[t], states[t + 1]);
  }
  return lp;
}

double chain_entropy(const ChainPosterior& posterior) {
  const auto& chain = posterior.chain();
  double h = posterior.log_partition();
  for (Index t = 0; t < chain.length(); ++t) {
    h -= posterior.node_marginal(t).dot(chain.log_node[t]);
    if (t + 1 < chain.length()) h -= posterior.expected_pair_log(t);
  }
  return h;
}

std::vector<Index> sample_chain(const ChainPosterior& posterior, std::mt19937_64& rng) {
  const auto& chain = posterior.chain();
  const Index T = chain.length();
  std::vector<Index> s(T);
  s[T - 1] = draw(softmax(posterior.log_forward(T - 1)), rng);
  for (Index t = T - 2; t >= 0; --t) {
    s[t] = draw(softmax(posterior.log_forward(t) + chain.log_pair[t]->log_col(s[t + 1])), rng);
  }
  return s;
}

std::vector<Index> sample_chain(const ChainPosterior& posterior, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_chain(posterior, rng);
}

}  // namespace rcc
