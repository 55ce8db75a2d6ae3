#include <doctest.h>

#include <cmath>

#include "enumeration.hpp"
#include "helpers.hpp"
#include "rcc/oracle.hpp"

using namespace rcc;
using rcc::testing::Enumeration;

namespace {

// 8 x 2 with non-stationary parameters: 2^16 configurations.
LatticeModel small_model(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return LatticeModel(PairwiseFamily::ising(), testing::random_parameters({8, 2}, rng, 0.8));
}

// Joint distribution of a block of rows; index = raster digits of the block.
Eigen::VectorXd block_marginal(const Enumeration& e, const RowRange& r) { return e.marginal(e.rows(r.begin, r.end)); }

// -E_p log p~ for p a block marginal, by enumerating the reduced model.
double cross_entropy(const Eigen::VectorXd& p, const LatticeModel& reduced) {
  const Enumeration q(reduced);
  double ce = 0.0;
  for (Index i = 0; i < p.size(); ++i) ce -= p(i) * q.log_prob(i);
  return ce;
}

}  // namespace

TEST_CASE("row process entropies against enumeration") {
  const LatticeModel m = small_model(21);
  const Enumeration e(m);
  const RowProcess truth(m);
  CHECK(truth.entropy() == doctest::Approx(e.entropy()).epsilon(1e-12));
  CHECK((truth.moments() - e.moments()).max_abs() < 1e-12);
  for (Index r = 0; r < 8; ++r) CHECK(truth.row_entropy(r) == doctest::Approx(e.rows_entropy(r, r + 1)).epsilon(1e-12));
  for (Index r = 0; r + 1 < 8; ++r)
    CHECK(truth.pair_entropy(r) == doctest::Approx(e.rows_entropy(r, r + 2)).epsilon(1e-12));
  for (Index r = 1; r < 8; ++r) {
    CHECK(truth.conditional_entropy(r) ==
          doctest::Approx(e.rows_entropy(r - 1, r + 1) - e.rows_entropy(r - 1, r)).epsilon(1e-12));
  }
  CHECK(truth.block_entropy({2, 6}) == doctest::Approx(e.rows_entropy(2, 6)).epsilon(1e-12));

  for (auto [i, j] : std::vector<std::pair<Index, Index>>{{0, 1}, {1, 4}, {2, 7}}) {
    auto sites = e.rows(i, i + 1);
    for (const auto& s : e.rows(j, j + 1)) sites.push_back(s);
    const Eigen::VectorXd p = e.marginal(sites);
    const Eigen::MatrixXd t = truth.joint_table(i, j);
    CHECK((t.reshaped() - p).cwiseAbs().maxCoeff() < 1e-13);
    CHECK(truth.joint_entropy(i, j) == doctest::Approx(Enumeration::entropy(p)).epsilon(1e-12));
    const double mi = e.rows_entropy(i, i + 1) + e.rows_entropy(j, j + 1) - Enumeration::entropy(p);
    CHECK(truth.mutual_information(i, j) == doctest::Approx(mi).epsilon(1e-10));
    CHECK(mutual_info_rows(truth, i, j) == doctest::Approx(mi).epsilon(1e-10));
  }
}

TEST_CASE("strip conditional entropy against enumeration") {
  const LatticeModel m = small_model(22);
  const Enumeration e(m);
  const RowProcess truth(m);
  for (RowRange s : {RowRange{1, 2}, RowRange{2, 5}, RowRange{3, 7}}) {
    const double expect = e.rows_entropy(s.begin - 1, s.end + 1) - [&] {
      auto sites = e.rows(s.begin - 1, s.begin);
      for (const auto& x : e.rows(s.end, s.end + 1)) sites.push_back(x);
      return e.sites_entropy(sites);
    }();
    CHECK(strip_conditional_entropy(truth, s) == doctest::Approx(expect).epsilon(1e-11));
  }
  CHECK(centered_rows(8, 3) == RowRange{2, 5});
  CHECK(centered_rows(9, 2) == RowRange{3, 5});
}

TEST_CASE("line fit and cross entropy against enumeration") {
  // Three columns: with two, a 2-row reduced model would be exact.
  std::mt19937_64 rng(23);
  const LatticeModel m(PairwiseFamily::ising(), testing::random_parameters({6, 3}, rng, 0.8));
  const Enumeration e(m);
  const RowProcess truth(m);
  const RowRange r{2, 4};
  const LineFit f = fit_line(truth, r);
  REQUIRE(f.fit.converged);
  const LatticeModel reduced = f.reduced(m.family);
  const Enumeration er(reduced);
  CHECK((er.moments() - e.moments().rows(r)).max_abs() < 1e-9);

  const Eigen::VectorXd p = block_marginal(e, r);
  const double ce = cross_entropy(p, reduced);
  CHECK(line_cross_entropy(truth, r, f.fit.theta) == doctest::Approx(ce).epsilon(1e-11));
  // Moment matching: the cross entropy is the reduced model's own entropy.
  CHECK(ce == doctest::Approx(er.entropy()).epsilon(1e-9));
  CHECK(line_rate(truth, r, f.fit.theta) == doctest::Approx(er.entropy() / (6 * kLn2)).epsilon(1e-9));
  const double d = line_divergence(truth, r, f.fit.theta);
  CHECK(d == doctest::Approx(ce - Enumeration::entropy(p)).epsilon(1e-9));
  CHECK(d > 1e-6);

  // Any other parameter is a worse code for the block.
  BlockParameters other = f.fit.theta;
  other.node(0, 0) += 0.05;
  CHECK(line_cross_entropy(truth, r, other) > ce);
  CHECK_THROWS_AS(line_rate(truth, r, other), MomentMismatch);
}

TEST_CASE("layout rate and redundancy against enumeration") {
  const LatticeModel m = small_model(24).restrict({0, 7});
  const Enumeration e(m);
  const RowProcess truth(m);
  const CutsetLayout layout = build_layout(7, 1, 2);  // lines 0, 3, 6
  const RateReport rep = total_rate(truth, layout);
  const double pixels = 14.0;

  double lines_ce = 0.0;
  for (const auto& r : layout.lines) {
    lines_ce += cross_entropy(block_marginal(e, r), LatticeModel(m.family, fit_line(truth, r).fit.theta));
  }
  double strips_h = 0.0;
  for (const auto& s : layout.strips) strips_h += strip_conditional_entropy(truth, s);
  CHECK(rep.layout_rate == doctest::Approx((lines_ce + strips_h) / (pixels * kLn2)).epsilon(1e-9));
  CHECK(rep.entropy_rate == doctest::Approx(e.entropy() / (pixels * kLn2)).epsilon(1e-12));
  CHECK(rep.layout_rate == doctest::Approx(rep.entropy_rate + rep.redundancy.direct_total).epsilon(1e-10));

  // Direct redundancy: line cross entropies minus the joint entropy of the lines.
  std::vector<std::pair<Index, Index>> u;
  for (const auto& r : layout.lines)
    for (const auto& s : e.rows(r.begin, r.end)) u.push_back(s);
  CHECK(rep.redundancy.direct_nats == doctest::Approx(lines_ce - e.sites_entropy(u)).epsilon(1e-9));
  CHECK(std::abs(rep.redundancy.total - rep.redundancy.direct_total) < 1e-10);
  CHECK(rep.redundancy.correlation_term >= 0.0);
  CHECK(rep.redundancy.distribution_term >= 0.0);

  const double k = 2.0;
  CHECK(rep.combined_exact == doctest::Approx(((k + 1) * rep.line_rate + k * 2 * rep.strip_rate) / 7).epsilon(1e-14));
  CHECK(rep.combined_approx == doctest::Approx((rep.line_rate + 2 * rep.strip_rate) / 3).epsilon(1e-14));
}

TEST_CASE("nested divergences against enumeration") {
  std::mt19937_64 rng(25);
  const LatticeModel m(PairwiseFamily::ising(), testing::random_parameters({6, 3}, rng, 0.8));
  const Enumeration e(m);
  const RowProcess truth(m);
  const NestedFits nested = fit_nested(truth, 3);
  CHECK(nested.top == centered_rows(6, 3).begin);
  REQUIRE(nested.blocks.size() == 3);

  for (Index j = 1; j <= 3; ++j) {
    const LineFit& bj = nested.blocks[j - 1];
    CHECK(bj.range == RowRange{nested.top, nested.top + j});
    const LatticeModel reduced_j = bj.reduced(m.family);
    // Source 0: the true marginal of the top j rows.
    const Eigen::VectorXd p = block_marginal(e, bj.range);
    CHECK(nested_divergence(truth, nested, 0, j) ==
          doctest::Approx(cross_entropy(p, reduced_j) - Enumeration::entropy(p)).epsilon(1e-9));
    // Source i > j: marginal of the reduced model of B_i on its top j rows.
    for (Index i = j + 1; i <= 3; ++i) {
      const Enumeration ei(nested.blocks[i - 1].reduced(m.family));
      const Eigen::VectorXd pi = ei.marginal(ei.rows(0, j));
      CHECK(nested_divergence(truth, nested, i, j) ==
            doctest::Approx(cross_entropy(pi, reduced_j) - Enumeration::entropy(pi)).epsilon(1e-9));
    }
  }
  CHECK(nested_divergence(truth, nested, 0, 3) > 1e-6);
  for (Index n = 2; n <= 3; ++n) CHECK(std::abs(divergence_recursion(truth, nested, n).residual()) < 1e-9);
  CHECK(std::abs(nested_divergence_recursion(truth, nested, 2).residual()) < 1e-9);
}

TEST_CASE("verify ledger") {
  SUBCASE("independent pixels are degenerate") {
    VerifyOptions o;
    o.max_n = 3;
    o.max_gap = 3;
    const auto ledger = verify_propositions(testing::ising(12, 3, 0.0), o);
    CHECK_FALSE(falsified(ledger));
    int degenerate = 0;
    for (const auto& e : ledger) {
      if (e.check == "strip_rate_increasing" || e.check == "line_rate_decreasing") {
        CHECK(e.status == "degenerate-equal");
        for (double v : e.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
      }
      degenerate += e.status == "degenerate-equal";
    }
    CHECK(degenerate >= 2);
  }
  SUBCASE("ferromagnet passes") {
    VerifyOptions o;
    o.max_n = 3;
    o.max_gap = 3;
    const auto ledger = verify_propositions(testing::ising(12, 3, 0.4), o);
    for (const auto& e : ledger) CHECK_MESSAGE(e.status != "fail", e.check);
    CHECK_FALSE(falsified(ledger));
  }
  const std::vector<double> up{1, 2, 3}, flat{1, 1, 1}, bumpy{1, 3, 2};
  CHECK(ordering_status(up, +1, 1e-10, 1e-9) == "pass");
  CHECK(ordering_status(up, -1, 1e-10, 1e-9) == "fail");
  CHECK(ordering_status(flat, +1, 1e-10, 1e-9) == "degenerate-equal");
  CHECK(ordering_status(bumpy, +1, 1e-10, 1e-9) == "fail");
}
