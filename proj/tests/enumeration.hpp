#pragma once

// Brute-force reference for small lattices. Visits every configuration,
// so only usable when q^(M N) stays around 2^20 or below. Shares nothing
// with the chain engine beyond LatticeModel::energy.

#include <cmath>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rcc/lattice.hpp"

namespace rcc::testing {

class Enumeration {
 public:
  explicit Enumeration(const LatticeModel& model) : model_(model), shape_(model.shape()), q_(model.alphabet_size()) {
    count_ = 1;
    for (Index i = 0; i < shape_.sites(); ++i) {
      count_ *= q_;
      if (count_ > (Index{1} << 22)) throw std::runtime_error("enumeration too large");
    }
    logp_.resize(count_);
    double m = -INFINITY;
    for (Index i = 0; i < count_; ++i) {
      logp_[i] = model_.energy(config(i));
      m = std::max(m, logp_[i]);
    }
    double z = 0.0;
    for (double v : logp_) z += std::exp(v - m);
    log_z_ = m + std::log(z);
    for (double& v : logp_) v -= log_z_;
  }

  Index count() const { return count_; }
  double log_partition() const { return log_z_; }
  double log_prob(Index i) const { return logp_[i]; }
  double prob(Index i) const { return std::exp(logp_[i]); }

  // Pixel at raster position k is digit k of the index.
  SymbolGrid config(Index i) const {
    SymbolGrid x(shape_.rows, shape_.cols);
    for (Index r = 0; r < shape_.rows; ++r)
      for (Index c = 0; c < shape_.cols; ++c) {
        x(r, c) = static_cast<int>(i % q_);
        i /= q_;
      }
    return x;
  }

  Index index_of(const SymbolGrid& x) const {
    Index i = 0;
    for (Index r = shape_.rows - 1; r >= 0; --r)
      for (Index c = shape_.cols - 1; c >= 0; --c) i = i * q_ + x(r, c);
    return i;
  }

  // Marginal over a list of (row, col) sites; index = sum x_j q^j.
  Eigen::VectorXd marginal(const std::vector<std::pair<Index, Index>>& sites) const {
    Index size = 1;
    for (std::size_t j = 0; j < sites.size(); ++j) size *= q_;
    Eigen::VectorXd p = Eigen::VectorXd::Zero(size);
    for (Index i = 0; i < count_; ++i) {
      const SymbolGrid x = config(i);
      Index k = 0;
      for (auto it = sites.rbegin(); it != sites.rend(); ++it) k = k * q_ + x(it->first, it->second);
      p(k) += prob(i);
    }
    return p;
  }

  std::vector<std::pair<Index, Index>> rows(Index begin, Index end) const {
    std::vector<std::pair<Index, Index>> s;
    for (Index r = begin; r < end; ++r)
      for (Index c = 0; c < shape_.cols; ++c) s.emplace_back(r, c);
    return s;
  }

  static double entropy(const Eigen::VectorXd& p) {
    double h = 0.0;
    for (Index i = 0; i < p.size(); ++i)
      if (p(i) > 0.0) h -= p(i) * std::log(p(i));
    return h;
  }

  double entropy() const {
    double h = 0.0;
    for (Index i = 0; i < count_; ++i) h -= prob(i) * logp_[i];
    return h;
  }

  double sites_entropy(const std::vector<std::pair<Index, Index>>& sites) const { return entropy(marginal(sites)); }
  double rows_entropy(Index begin, Index end) const { return sites_entropy(rows(begin, end)); }

  MomentField moments() const {
    MomentField m = MomentField::zeros(shape_);
    for (Index i = 0; i < count_; ++i) {
      MomentField t = statistic_field(config(i), model_.family);
      t *= prob(i);
      m += t;
    }
    return m;
  }

 private:
  LatticeModel model_;
  LatticeShape shape_;
  Index q_;
  Index count_ = 1;
  std::vector<double> logp_;
  double log_z_ = 0.0;
};

}  // namespace rcc::testing
