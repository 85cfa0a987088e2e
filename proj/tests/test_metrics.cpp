#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "biaslens/error.hpp"
#include "biaslens/metrics.hpp"
#include "biaslens/rng.hpp"

using namespace biaslens;

namespace {

ContingencyTable random_table(Rng& rng, std::size_t rows, std::size_t cols, int max_count) {
  std::vector<std::int64_t> c(rows * cols);
  for (auto& v : c) v = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(max_count) + 1));
  if (std::accumulate(c.begin(), c.end(), std::int64_t{0}) == 0) c[0] = 1;
  return ContingencyTable(rows, cols, c);
}

// Exhaustive oracle: pad to square, try every permutation.
std::int64_t brute_force_matched(const ContingencyTable& t) {
  const std::size_t m = std::max(t.rows(), t.cols());
  std::vector<int> perm(m);
  std::iota(perm.begin(), perm.end(), 0);
  std::int64_t best = 0;
  do {
    std::int64_t s = 0;
    for (std::size_t col = 0; col < m; ++col) {
      const auto row = static_cast<std::size_t>(perm[col]);
      if (row < t.rows() && col < t.cols()) s += t.at(row, col);
    }
    best = std::max(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Direct entropy formula on joint probabilities.
double direct_nmi(const ContingencyTable& t) {
  const double n = static_cast<double>(t.n());
  std::vector<double> pa(t.rows(), 0.0), pb(t.cols(), 0.0);
  for (std::size_t a = 0; a < t.rows(); ++a)
    for (std::size_t b = 0; b < t.cols(); ++b) {
      pa[a] += t.at(a, b) / n;
      pb[b] += t.at(a, b) / n;
    }
  double ha = 0.0, hb = 0.0, mi = 0.0;
  for (double p : pa)
    if (p > 0) ha -= p * std::log(p);
  for (double p : pb)
    if (p > 0) hb -= p * std::log(p);
  for (std::size_t a = 0; a < t.rows(); ++a)
    for (std::size_t b = 0; b < t.cols(); ++b) {
      const double p = t.at(a, b) / n;
      if (p > 0) mi += p * std::log(p / (pa[a] * pb[b]));
    }
  if (ha == 0.0 && hb == 0.0) return 100.0;
  return 100.0 * 2.0 * mi / (ha + hb);
}

ContingencyTable permute_cols(const ContingencyTable& t, const std::vector<int>& perm) {
  std::vector<std::int64_t> c(t.rows() * t.cols());
  for (std::size_t a = 0; a < t.rows(); ++a)
    for (std::size_t b = 0; b < t.cols(); ++b) c[a * t.cols() + perm[b]] = t.at(a, b);
  return ContingencyTable(t.rows(), t.cols(), c);
}

Matrix blobs(Rng& rng, std::vector<int>& labels, int k, std::size_t per, std::size_t d, double sep) {
  Matrix z(per * k, d);
  labels.clear();
  for (int c = 0; c < k; ++c)
    for (std::size_t i = 0; i < per; ++i) {
      const std::size_t r = c * per + i;
      for (std::size_t j = 0; j < d; ++j) z(r, j) = rng.normal() + (j == static_cast<std::size_t>(c) ? sep : 0.0);
      labels.push_back(c);
    }
  return z;
}

}  // namespace

TEST_CASE("contingency counts and validation") {
  const std::vector<int> t{0, 0, 1, 2, 2, 2};
  const std::vector<int> p{1, 1, 0, 0, 0, 1};
  const auto tab = contingency(t, p);
  CHECK(tab.rows() == 3);
  CHECK(tab.cols() == 2);
  CHECK(tab.n() == 6);
  CHECK(tab.counts() == std::vector<std::int64_t>{0, 2, 1, 0, 2, 1});
  CHECK(tab.row_sums() == std::vector<std::int64_t>{2, 1, 3});
  CHECK(tab.col_sums() == std::vector<std::int64_t>{3, 3});
  CHECK(tab.transposed().at(1, 0) == 2);
  CHECK(contingency(t, p, 4, 5).rows() == 4);
  CHECK(contingency(t, p, 4, 5).cols() == 5);
  CHECK_THROWS_AS(ContingencyTable(2, 2, {1, -1, 0, 0}), DataError);
  CHECK_THROWS_AS(ContingencyTable(2, 2, {0, 0, 0, 0}), DataError);
  const std::vector<int> short_p{1};
  CHECK_THROWS_AS(contingency(t, short_p), DataError);
}

TEST_CASE("contingency recount property") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> a(200), b(200);
    for (auto& v : a) v = static_cast<int>(rng.below(4));
    for (auto& v : b) v = static_cast<int>(rng.below(6));
    const auto tab = contingency(a, b);
    for (std::size_t r = 0; r < tab.rows(); ++r)
      for (std::size_t c = 0; c < tab.cols(); ++c) {
        std::int64_t count = 0;
        for (std::size_t i = 0; i < a.size(); ++i) count += a[i] == static_cast<int>(r) && b[i] == static_cast<int>(c);
        REQUIRE(tab.at(r, c) == count);
      }
  }
}

TEST_CASE("Hungarian: diagonal table and constant predictions") {
  const ContingencyTable diag(3, 3, {7, 0, 0, 0, 5, 0, 0, 0, 9});
  const auto m = hungarian_accuracy(diag);
  CHECK(m.accuracy == 1.0);
  CHECK(m.mapping == std::vector<int>{0, 1, 2});

  // One predicted cluster: best is the majority class.
  const ContingencyTable one(3, 1, {10, 30, 20});
  CHECK(hungarian_accuracy(one).accuracy == doctest::Approx(0.5));
  CHECK(hungarian_accuracy(one).mapping == std::vector<int>{1});

  // More clusters than labels: the extra cluster is unmatched.
  const ContingencyTable wide(2, 3, {5, 1, 4, 0, 6, 0});
  const auto w = hungarian_accuracy(wide);
  CHECK(w.matched == 11);
  CHECK(w.mapping[1] == 1);
  CHECK(w.mapping[0] == 0);
  CHECK(w.mapping[2] == -1);
}

TEST_CASE("Hungarian equals the exhaustive permutation maximum") {
  Rng rng(2025);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t r = 1 + rng.below(7);
    const std::size_t c = 1 + rng.below(7);
    const auto t = random_table(rng, r, c, trial % 2 ? 50 : 3);
    const auto m = hungarian_accuracy(t);
    REQUIRE(m.matched == brute_force_matched(t));
    REQUIRE(m.accuracy == static_cast<double>(m.matched) / static_cast<double>(t.n()));
    // mapping realizes the matched count
    std::int64_t s = 0;
    for (std::size_t col = 0; col < t.cols(); ++col)
      if (m.mapping[col] >= 0) s += t.at(static_cast<std::size_t>(m.mapping[col]), col);
    REQUIRE(s == m.matched);
  }
}

TEST_CASE("Hungarian: uniform random predictions sit at chance") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    std::vector<int> y(45000), p(45000);
    for (std::size_t i = 0; i < y.size(); ++i) {
      y[i] = static_cast<int>(i % 3);
      p[i] = static_cast<int>(rng.below(3));
    }
    CHECK(std::abs(hungarian_accuracy(contingency(y, p)).accuracy - 1.0 / 3.0) <= 0.01);
  }
}

TEST_CASE("solve_assignment minimizes total cost") {
  const std::vector<std::int64_t> cost{4, 1, 3, 2, 0, 5, 3, 2, 2};
  const auto a = solve_assignment(cost, 3);
  std::int64_t total = 0;
  for (int r = 0; r < 3; ++r) total += cost[r * 3 + a[r]];
  CHECK(total == 5);
}

TEST_CASE("NMI: identity, independence and a direct-entropy oracle") {
  CHECK(std::abs(nmi(ContingencyTable(3, 3, {4, 0, 0, 0, 9, 0, 0, 0, 2})) - 100.0) <= 1e-9);
  CHECK(std::abs(nmi(ContingencyTable(3, 3, {0, 4, 0, 0, 0, 9, 2, 0, 0})) - 100.0) <= 1e-9);
  CHECK(std::abs(nmi(ContingencyTable(2, 2, {25, 25, 25, 25}))) <= 1e-9);
  CHECK(nmi(ContingencyTable(1, 1, {17})) == 100.0);

  const ContingencyTable t(2, 2, {5, 0, 1, 4});
  CHECK(std::abs(nmi(t) - direct_nmi(t)) <= 1e-9);
  MESSAGE("NMI [[5,0],[1,4]] = " << nmi(t));
}

TEST_CASE("NMI fuzz against the oracle, product tables, invariances") {
  Rng rng(99);
  for (int trial = 0; trial < 500; ++trial) {
    const auto t = random_table(rng, 1 + rng.below(6), 1 + rng.below(6), 40);
    const double v = nmi(t);
    REQUIRE(std::abs(v - direct_nmi(t)) <= 1e-9);
    REQUIRE(v >= 0.0);
    REQUIRE(v <= 100.0);
    REQUIRE(std::abs(v - nmi(t.transposed())) <= 1e-9);
    std::vector<int> perm(t.cols());
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    const auto pt = permute_cols(t, perm);
    REQUIRE(std::abs(v - nmi(pt)) <= 1e-9);
    REQUIRE(hungarian_accuracy(pt).matched == hungarian_accuracy(t).matched);
  }
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t r = 1 + rng.below(5), c = 1 + rng.below(5);
    std::vector<std::int64_t> a(r), b(c), cells;
    for (auto& v : a) v = 1 + static_cast<std::int64_t>(rng.below(9));
    for (auto& v : b) v = 1 + static_cast<std::int64_t>(rng.below(9));
    for (auto x : a)
      for (auto y : b) cells.push_back(x * y);
    const ContingencyTable prod(r, c, cells);
    if (r == 1 && c == 1) continue;
    REQUIRE(std::abs(nmi(prod)) <= 1e-9);
  }
}

TEST_CASE("confusion rows sum to 100") {
  const auto d = confusion_normalized(ContingencyTable(2, 2, {3, 0, 0, 8}));
  CHECK(d.percent(0, 0) == 100.0);
  CHECK(d.percent(1, 1) == 100.0);
  const auto u = confusion_normalized(ContingencyTable(3, 3, std::vector<std::int64_t>(9, 4)));
  for (std::size_t i = 0; i < 9; ++i) CHECK(u.percent.data()[i] == doctest::Approx(100.0 / 3.0));
  const auto e = confusion_normalized(ContingencyTable(2, 2, {0, 0, 2, 3}));
  CHECK(e.undefined_row[0]);
  CHECK_FALSE(e.undefined_row[1]);
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto t = random_table(rng, 1 + rng.below(6), 1 + rng.below(6), 30);
    const auto c = confusion_normalized(t);
    for (std::size_t r = 0; r < t.rows(); ++r) {
      if (c.undefined_row[r]) continue;
      double s = 0.0;
      for (std::size_t j = 0; j < t.cols(); ++j) s += c.percent(r, j);
      REQUIRE(std::abs(s - 100.0) <= 1e-6);
    }
  }
}

TEST_CASE("granularity sweep: planted blobs peak at k=3") {
  Rng rng(1);
  std::vector<int> labels;
  const Matrix z = blobs(rng, labels, 3, 100, 5, 12.0);
  const std::vector<int> ks{2, 3, 4, 5, 6, 7, 8, 9, 10};
  const auto pts = granularity_sweep(z, labels, ks, 10, 0);
  REQUIRE(pts.size() == ks.size());
  const auto best = std::max_element(pts.begin(), pts.end(), [](auto& a, auto& b) { return a.nmi < b.nmi; });
  CHECK(best->k == 3);
  CHECK(best->nmi >= 95.0);
  const auto again = granularity_sweep(z, labels, ks, 10, 0);
  for (std::size_t i = 0; i < pts.size(); ++i) CHECK(again[i].nmi == pts[i].nmi);
}

TEST_CASE("granularity sweep: random labels stay near zero NMI") {
  Rng rng(2);
  Matrix z(3000, 4);
  std::vector<int> y(3000);
  for (std::size_t i = 0; i < 3000; ++i) {
    for (std::size_t j = 0; j < 4; ++j) z(i, j) = rng.normal();
    y[i] = static_cast<int>(rng.below(3));
  }
  const std::vector<int> ks{2, 3, 4, 5, 6, 7, 8, 9, 10};
  for (const auto& p : granularity_sweep(z, y, ks, 3, 0)) CHECK(p.nmi <= 3.0);
}

TEST_CASE("granularity sweep: k = n gives the one-point-per-cluster value") {
  Rng rng(4);
  Matrix z(12, 2);
  std::vector<int> y(12);
  for (std::size_t i = 0; i < 12; ++i) {
    z(i, 0) = static_cast<double>(i) * 3.0;
    z(i, 1) = rng.uniform();
    y[i] = static_cast<int>(i % 3);
  }
  const std::vector<int> ks{12};
  const auto p = granularity_sweep(z, y, ks, 2, 0);
  const double h_true = std::log(3.0);
  CHECK(p[0].nmi == doctest::Approx(100.0 * 2.0 * h_true / (h_true + std::log(12.0))).epsilon(1e-9));
  const std::vector<int> too_big{13};
  CHECK_THROWS_AS(granularity_sweep(z, y, too_big, 1, 0), UsageError);
}
