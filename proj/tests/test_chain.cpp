#include <doctest.h>

#include <cmath>

#include "enumeration.hpp"
#include "helpers.hpp"
#include "rcc/chain.hpp"

using namespace rcc;
using rcc::testing::Enumeration;

namespace {

std::vector<Eigen::MatrixXd> random_factors(std::mt19937_64& rng, const std::vector<std::pair<int, int>>& dims) {
  std::vector<Eigen::MatrixXd> f;
  for (auto [r, c] : dims) {
    Eigen::MatrixXd m(r, c);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = testing::uniform(rng, -2, 2);
    f.push_back(m);
  }
  return f;
}

SuperpixelChain random_chain(std::mt19937_64& rng, const std::vector<Index>& sizes) {
  SuperpixelChain c;
  for (Index s : sizes) {
    Eigen::VectorXd v(s);
    for (Index i = 0; i < s; ++i) v(i) = testing::uniform(rng, -1, 1);
    c.log_node.push_back(v);
  }
  for (std::size_t t = 0; t + 1 < sizes.size(); ++t) {
    auto f = random_factors(rng, {{static_cast<int>(sizes[t]), static_cast<int>(sizes[t + 1])}});
    c.log_pair.push_back(std::make_shared<PairPotential>(std::move(f)));
  }
  return c;
}

// Every joint state of a short chain.
template <typename Fn>
void each_path(const std::vector<Index>& sizes, Fn&& fn) {
  std::vector<Index> s(sizes.size(), 0);
  for (;;) {
    fn(s);
    std::size_t i = 0;
    while (i < s.size() && ++s[i] == sizes[i]) s[i++] = 0;
    if (i == s.size()) return;
  }
}

double path_log_weight(const SuperpixelChain& c, const std::vector<Index>& s) {
  double w = 0.0;
  for (std::size_t t = 0; t < s.size(); ++t) w += c.log_node[t](s[t]);
  for (std::size_t t = 0; t + 1 < s.size(); ++t) w += c.log_pair[t]->log_value(s[t], s[t + 1]);
  return w;
}

}  // namespace

TEST_CASE("digit-factored potential matches its dense table") {
  std::mt19937_64 rng(11);
  // 5 binary digits exercise merged kernels; mixed radix exercises the rest.
  for (const auto& dims : std::vector<std::vector<std::pair<int, int>>>{
           {{2, 2}, {2, 2}, {2, 2}, {2, 2}, {2, 2}}, {{3, 2}, {2, 3}, {3, 3}}, {{4, 4}}}) {
    const PairPotential p(random_factors(rng, dims));
    const Eigen::MatrixXd dense = p.dense_log();
    REQUIRE(dense.rows() == p.rows());
    REQUIRE(dense.cols() == p.cols());
    const Eigen::MatrixXd k = (dense.array() - p.log_shift()).exp().matrix();

    for (Index a = 0; a < p.rows(); ++a) {
      CHECK((p.log_row(a) - dense.row(a).transpose()).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(p.log_value(a, p.cols() - 1) == doctest::Approx(dense(a, p.cols() - 1)));
    }
    for (Index b = 0; b < p.cols(); ++b) CHECK((p.log_col(b) - dense.col(b)).cwiseAbs().maxCoeff() < 1e-12);

    Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, p.rows()).cwiseAbs();
    CHECK((p.propagate(x) - x * k).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::MatrixXd y = Eigen::MatrixXd::Random(2, p.cols()).cwiseAbs();
    CHECK((p.pullback(y) - y * k.transpose()).cwiseAbs().maxCoeff() < 1e-12);

    const Eigen::VectorXd left = Eigen::VectorXd::Random(p.rows()).cwiseAbs();
    const Eigen::VectorXd right = Eigen::VectorXd::Random(p.cols()).cwiseAbs();
    Eigen::MatrixXd joint = left.asDiagonal() * k * right.asDiagonal();
    joint /= joint.sum();
    CHECK(p.expected_log(left, right) == doctest::Approx(joint.cwiseProduct(dense).sum()).epsilon(1e-12));

    const auto fm = p.factor_marginals(left, right);
    Index rstride = 1, cstride = 1;
    for (std::size_t d = 0; d < dims.size(); ++d) {
      Eigen::MatrixXd expect = Eigen::MatrixXd::Zero(dims[d].first, dims[d].second);
      for (Index a = 0; a < p.rows(); ++a)
        for (Index b = 0; b < p.cols(); ++b) expect((a / rstride) % dims[d].first, (b / cstride) % dims[d].second) += joint(a, b);
      CHECK((fm[d] - expect).cwiseAbs().maxCoeff() < 1e-12);
      rstride *= dims[d].first;
      cstride *= dims[d].second;
    }
  }
}

TEST_CASE("forward-backward against path enumeration") {
  std::mt19937_64 rng(12);
  const std::vector<Index> sizes{3, 4, 2, 3};
  const SuperpixelChain c = random_chain(rng, sizes);
  const ChainPosterior post(c);

  double m = -INFINITY;
  each_path(sizes, [&](const auto& s) { m = std::max(m, path_log_weight(c, s)); });
  double z = 0.0;
  each_path(sizes, [&](const auto& s) { z += std::exp(path_log_weight(c, s) - m); });
  const double log_z = m + std::log(z);
  CHECK(post.log_partition() == doctest::Approx(log_z).epsilon(1e-13));
  CHECK(log_partition(c) == doctest::Approx(log_z).epsilon(1e-13));

  std::vector<Eigen::VectorXd> node;
  for (Index s : sizes) node.push_back(Eigen::VectorXd::Zero(s));
  Eigen::MatrixXd pair01 = Eigen::MatrixXd::Zero(3, 4);
  double h = 0.0;
  each_path(sizes, [&](const auto& s) {
    const double lp = path_log_weight(c, s) - log_z;
    const double p = std::exp(lp);
    for (std::size_t t = 0; t < s.size(); ++t) node[t](s[t]) += p;
    pair01(s[0], s[1]) += p;
    h -= p * lp;

    std::vector<Index> states(s.begin(), s.end());
    CHECK(log_probability(post, states) == doctest::Approx(lp).epsilon(1e-12));
    double seq = std::log(sequential_conditional(post, 0, std::nullopt)(s[0]));
    for (std::size_t t = 1; t < s.size(); ++t) seq += std::log(sequential_conditional(post, t, s[t - 1])(s[t]));
    CHECK(seq == doctest::Approx(lp).epsilon(1e-12));
  });
  for (std::size_t t = 0; t < sizes.size(); ++t) CHECK((post.node_marginal(t) - node[t]).cwiseAbs().maxCoeff() < 1e-13);
  CHECK((post.pair_marginal(0) - pair01).cwiseAbs().maxCoeff() < 1e-13);
  CHECK(chain_entropy(post) == doctest::Approx(h).epsilon(1e-12));
}

TEST_CASE("chain sampling follows the joint") {
  std::mt19937_64 rng(13);
  const std::vector<Index> sizes{2, 3};
  const ChainPosterior post(random_chain(rng, sizes));
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(2, 3);
  std::mt19937_64 draw(7);
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const auto s = sample_chain(post, draw);
    counts(s[0], s[1]) += 1;
  }
  const Eigen::MatrixXd p = post.pair_marginal(0);
  for (Index a = 0; a < 2; ++a)
    for (Index b = 0; b < 3; ++b) {
      const double sd = std::sqrt(p(a, b) * (1 - p(a, b)) / n);
      CHECK(std::abs(counts(a, b) / n - p(a, b)) < 5 * sd);
    }
  CHECK(sample_chain(post, 99) == sample_chain(post, 99));
}

TEST_CASE("lattice chains against enumeration") {
  std::mt19937_64 rng(14);
  for (int q : {2, 3}) {
    const LatticeModel m = testing::random_model(q, 3, 3, rng);
    const Enumeration e(m);
    CHECK(lattice_log_partition(m) == doctest::Approx(e.log_partition()).epsilon(1e-13));
    CHECK(ChainPosterior(column_chain(m)).log_partition() == doctest::Approx(e.log_partition()).epsilon(1e-13));
    CHECK(ChainPosterior(row_chain(m)).log_partition() == doctest::Approx(e.log_partition()).epsilon(1e-13));

    const MomentField exact = e.moments();
    const ChainPosterior cp(column_chain(m));
    const ChainPosterior rp(row_chain(m));
    CHECK((column_chain_moments(m, cp) - exact).max_abs() < 1e-12);
    CHECK((row_chain_moments(m, rp) - exact).max_abs() < 1e-12);
    CHECK((lattice_moments(m) - exact).max_abs() < 1e-12);

    const SymbolGrid x = testing::random_grid(3, 3, q, rng);
    const auto states = column_states(x, {0, 3}, q);
    CHECK(log_probability(cp, states) == doctest::Approx(e.log_prob(e.index_of(x))).epsilon(1e-12));
  }
}

TEST_CASE("clamped strip is the exact conditional") {
  std::mt19937_64 rng(15);
  const LatticeModel global(PairwiseFamily::ising(), testing::random_parameters({4, 3}, rng));
  const Enumeration e(global);
  const SymbolGrid x = testing::random_grid(4, 3, 2, rng);
  const RowRange strip{1, 3};

  // p(strip | rows 0 and 3) by enumeration
  double joint = 0.0, boundary = 0.0;
  for (Index i = 0; i < e.count(); ++i) {
    const SymbolGrid y = e.config(i);
    if (y.row(0) != x.row(0) || y.row(3) != x.row(3)) continue;
    boundary += e.prob(i);
    if (y == x) joint += e.prob(i);
  }
  const BoundaryClamp clamp = strip_boundary(global, strip, x);
  REQUIRE(clamp.above);
  REQUIRE(clamp.below);
  const ChainPosterior post(column_chain(global.restrict(strip), &clamp));
  CHECK(log_probability(post, column_states(x, strip, 2)) == doctest::Approx(std::log(joint / boundary)).epsilon(1e-12));

  // A strip at the top edge has no row above.
  const BoundaryClamp top = strip_boundary(global, {0, 2}, x);
  CHECK_FALSE(top.above);
  CHECK(top.below);
}

TEST_CASE("state cap") {
  const LatticeModel m = testing::ising(6, 2, 0.3);
  CHECK_THROWS_AS(column_chain(m, nullptr, 32), StateSpaceTooLarge);
  CHECK_NOTHROW(column_chain(m, nullptr, 64));
  CHECK_NOTHROW(row_chain(m, 4));
}
