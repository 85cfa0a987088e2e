#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "biaslens/cluster.hpp"
#include "biaslens/error.hpp"
#include "biaslens/metrics.hpp"
#include "biaslens/reduce.hpp"
#include "biaslens/rng.hpp"

using namespace biaslens;

namespace {

Matrix two_blobs(Rng& rng, std::vector<int>& labels, std::size_t per, std::size_t d, double sep) {
  Matrix x(2 * per, d);
  labels.assign(2 * per, 0);
  for (std::size_t i = 0; i < 2 * per; ++i) {
    labels[i] = i < per ? 0 : 1;
    for (std::size_t j = 0; j < d; ++j) x(i, j) = rng.normal() + (j == 0 && i >= per ? sep : 0.0);
  }
  return x;
}

std::vector<double> column_variance(const Matrix& z) {
  const auto m = column_means(z);
  std::vector<double> v(z.cols(), 0.0);
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t j = 0; j < z.cols(); ++j) v[j] += (z(i, j) - m[j]) * (z(i, j) - m[j]);
  for (auto& e : v) e /= static_cast<double>(z.rows() - 1);
  return v;
}

// Direct trustworthiness: penalizes output neighbours that are far in input rank.
double trustworthiness(const Matrix& x, const Matrix& y, std::size_t k) {
  const std::size_t n = x.rows();
  double penalty = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> dx(n), dy(n);
    for (std::size_t j = 0; j < n; ++j) {
      dx[j] = squared_distance(x.row(i), x.row(j));
      dy[j] = squared_distance(y.row(i), y.row(j));
    }
    auto by = [&](const std::vector<double>& d) {
      auto o = order;
      std::stable_sort(o.begin(), o.end(), [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });
      o.erase(std::find(o.begin(), o.end(), i));
      return o;
    };
    const auto ox = by(dx);
    const auto oy = by(dy);
    std::vector<std::size_t> rank(n, 0);
    for (std::size_t r = 0; r < ox.size(); ++r) rank[ox[r]] = r + 1;
    for (std::size_t r = 0; r < k; ++r) {
      const std::size_t j = oy[r];
      if (rank[j] > k) penalty += static_cast<double>(rank[j] - k);
    }
  }
  const double nk = static_cast<double>(n) * static_cast<double>(k);
  return 1.0 - 2.0 / (nk * (2.0 * n - 3.0 * k - 1.0)) * penalty;
}

}  // namespace

TEST_CASE("Jacobi eigensolver satisfies A v = lambda v") {
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    const std::size_t m = 2 + rng.below(6);
    Matrix a(m, m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j <= i; ++j) a(i, j) = a(j, i) = rng.normal();
    const auto e = jacobi_eigen(a);
    double trace = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) trace += a(i, i);
    for (double v : e.values) sum += v;
    CHECK(sum == doctest::Approx(trace).epsilon(1e-10));
    for (std::size_t c = 0; c + 1 < m; ++c) CHECK(e.values[c] >= e.values[c + 1]);
    for (std::size_t c = 0; c < m; ++c) {
      for (std::size_t i = 0; i < m; ++i) {
        double av = 0.0;
        for (std::size_t j = 0; j < m; ++j) av += a(i, j) * e.vectors(c, j);
        REQUIRE(std::abs(av - e.values[c] * e.vectors(c, i)) <= 1e-9);
      }
      for (std::size_t c2 = 0; c2 < m; ++c2)
        REQUIRE(std::abs(dot(e.vectors.row(c), e.vectors.row(c2)) - (c == c2 ? 1.0 : 0.0)) <= 1e-10);
    }
  }
}

TEST_CASE("QL eigensolver agrees with Jacobi") {
  Rng rng(21);
  for (int t = 0; t < 30; ++t) {
    const std::size_t m = 1 + rng.below(40);
    Matrix a(m, m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j <= i; ++j) a(i, j) = a(j, i) = t % 3 == 0 ? static_cast<double>(rng.below(3)) : rng.normal();
    const auto q = symmetric_eigen(a);
    const auto j = jacobi_eigen(a);
    for (std::size_t c = 0; c < m; ++c) {
      REQUIRE(std::abs(q.values[c] - j.values[c]) <= 1e-9 * (1.0 + std::abs(j.values[c])));
      for (std::size_t i = 0; i < m; ++i) {
        double av = 0.0;
        for (std::size_t k = 0; k < m; ++k) av += a(i, k) * q.vectors(c, k);
        REQUIRE(std::abs(av - q.values[c] * q.vectors(c, i)) <= 1e-9 * (1.0 + std::abs(q.values[c])));
      }
      for (std::size_t c2 = 0; c2 < m; ++c2)
        REQUIRE(std::abs(dot(q.vectors.row(c), q.vectors.row(c2)) - (c == c2 ? 1.0 : 0.0)) <= 1e-10);
    }
  }
}

TEST_CASE("PCA with fewer rows than columns matches the covariance oracle") {
  Rng rng(22);
  Matrix x(12, 30);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) x(i, j) = rng.normal() * (1.0 + 0.2 * static_cast<double>(j));
  const auto model = pca_fit(x, 5);
  CHECK_FALSE(model.rank_deficient);
  const auto means = column_means(x);
  Matrix cov(30, 30);
  for (std::size_t i = 0; i < 12; ++i)
    for (std::size_t p = 0; p < 30; ++p)
      for (std::size_t q = 0; q < 30; ++q) cov(p, q) += (x(i, p) - means[p]) * (x(i, q) - means[q]) / 11.0;
  const auto oracle = jacobi_eigen(cov);
  for (std::size_t c = 0; c < 5; ++c) {
    CHECK(model.explained_variance[c] == doctest::Approx(oracle.values[c]).epsilon(1e-9));
    CHECK(std::abs(std::abs(dot(model.components.row(c), oracle.vectors.row(c))) - 1.0) <= 1e-8);
  }
  const auto var = column_variance(pca_transform(model, x));
  for (std::size_t c = 0; c < 5; ++c) CHECK(var[c] == doctest::Approx(model.explained_variance[c]).epsilon(1e-9));
}

TEST_CASE("PCA: data along e2 gives +e2") {
  Matrix x(50, 3);
  for (std::size_t i = 0; i < 50; ++i) x(i, 1) = static_cast<double>(i) - 20.0;
  const auto model = pca_fit(x, 1);
  CHECK(model.components(0, 0) == doctest::Approx(0.0));
  CHECK(model.components(0, 1) == doctest::Approx(1.0));
  CHECK(model.components(0, 2) == doctest::Approx(0.0));
}

TEST_CASE("PCA: two points, first component along their difference") {
  Matrix x(2, 3);
  const double a[3] = {1.0, -2.0, 0.5};
  const double b[3] = {-1.0, 4.0, 2.5};
  for (int j = 0; j < 3; ++j) {
    x(0, j) = a[j];
    x(1, j) = b[j];
  }
  const auto model = pca_fit(x, 1);
  double d2 = 0.0;
  for (int j = 0; j < 3; ++j) d2 += (a[j] - b[j]) * (a[j] - b[j]);
  // covariance is diff diff^T / 2, whose top eigenvalue is |diff|^2 / 2
  CHECK(model.explained_variance[0] == doctest::Approx(d2 / 2.0));
  const double norm = std::sqrt(d2);
  for (int j = 0; j < 3; ++j) CHECK(std::abs(model.components(0, j)) == doctest::Approx(std::abs(b[j] - a[j]) / norm));
  CHECK(model.components(0, 1) > 0.0);  // the largest-magnitude entry
  CHECK_THROWS_AS(pca_fit(x, 2), UsageError);
}

TEST_CASE("PCA: isotropic Gaussian has near-equal variances") {
  Rng rng(2);
  Matrix x(10000, 5);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < 5; ++j) x(i, j) = rng.normal();
  const auto m = pca_fit(x, 2);
  CHECK(std::abs(m.explained_variance[0] - m.explained_variance[1]) / m.explained_variance[0] <= 0.10);
}

TEST_CASE("PCA: transform properties") {
  Rng rng(3);
  Matrix x(300, 6);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < 6; ++j) x(i, j) = rng.normal() * (1.0 + static_cast<double>(j)) + 3.0;
  const auto model = pca_fit(x, 4);
  const Matrix z = pca_transform(model, x);
  const auto var = column_variance(z);
  const auto means = column_means(z);
  for (std::size_t c = 0; c < 4; ++c) {
    CHECK(std::abs(var[c] - model.explained_variance[c]) <= 1e-6);
    CHECK(std::abs(means[c]) <= 1e-9);
    for (std::size_t c2 = 0; c2 < 4; ++c2)
      CHECK(std::abs(dot(model.components.row(c), model.components.row(c2)) - (c == c2 ? 1.0 : 0.0)) <= 1e-10);
  }
  double total = 0.0;
  for (double v : column_variance(x)) total += v;
  double kept = std::accumulate(model.explained_variance.begin(), model.explained_variance.end(), 0.0);
  CHECK(kept <= total * (1.0 + 1e-12));
  const auto full = pca_fit(x, 6);
  CHECK(std::accumulate(full.explained_variance.begin(), full.explained_variance.end(), 0.0) ==
        doctest::Approx(total).epsilon(1e-9));

  Matrix at_mean(3, 6);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 6; ++j) at_mean(i, j) = model.mean[j];
  const Matrix zero = pca_transform(model, at_mean);
  for (std::size_t i = 0; i < zero.data().size(); ++i) CHECK(std::abs(zero.data()[i]) <= 1e-12);
  CHECK_THROWS_AS(pca_transform(model, Matrix(2, 5)), DataError);
}

TEST_CASE("PCA: rank-deficient input is flagged") {
  Matrix x(10, 4);
  for (std::size_t i = 0; i < 10; ++i) {
    x(i, 0) = static_cast<double>(i);
    x(i, 1) = 2.0 * static_cast<double>(i);
  }
  const auto m = pca_fit(x, 3);
  CHECK(m.rank_deficient);
  CHECK(m.explained_variance[1] == 0.0);
  CHECK(m.explained_variance[2] == 0.0);
}

TEST_CASE("UMAP curve parameters for min_dist 0.1") {
  const auto c = fit_umap_curve(0.1);
  CHECK(c.a == doctest::Approx(1.577).epsilon(0.01));
  CHECK(c.b == doctest::Approx(0.895).epsilon(0.01));
}

TEST_CASE("exact kNN lists self first and sorted distances") {
  Rng rng(4);
  Matrix x(40, 3);
  for (auto& v : x.data()) v = rng.normal();
  const auto g = exact_knn(x, 5);
  for (std::size_t i = 0; i < 40; ++i) {
    CHECK(g.index[i * 5] == i);
    CHECK(g.distance[i * 5] == 0.0);
    for (std::size_t r = 1; r < 5; ++r) CHECK(g.distance[i * 5 + r] >= g.distance[i * 5 + r - 1]);
    // no point outside the list is closer than the last neighbour
    for (std::size_t j = 0; j < 40; ++j) {
      const auto begin = g.index.begin() + static_cast<std::ptrdiff_t>(i * 5);
      if (std::find(begin, begin + 5, j) != begin + 5) continue;
      CHECK(std::sqrt(squared_distance(x.row(i), x.row(j))) >= g.distance[i * 5 + 4] - 1e-12);
    }
  }
}

TEST_CASE("fuzzy set is symmetric with weights in (0, 1]") {
  Rng rng(5);
  Matrix x(60, 4);
  for (auto& v : x.data()) v = rng.normal();
  const auto edges = fuzzy_simplicial_set(exact_knn(x, 8), 60);
  std::map<std::pair<std::size_t, std::size_t>, double> w;
  for (const auto& e : edges) {
    CHECK(e.weight > 0.0);
    CHECK(e.weight <= 1.0 + 1e-12);
    CHECK(e.head != e.tail);
    w[{e.head, e.tail}] = e.weight;
  }
  for (const auto& [key, val] : w) {
    const auto it = w.find({key.second, key.first});
    REQUIRE(it != w.end());
    CHECK(it->second == doctest::Approx(val));
  }
}

TEST_CASE("UMAP: two blobs separate, trustworthy, deterministic") {
  Rng rng(6);
  std::vector<int> labels;
  const Matrix x = two_blobs(rng, labels, 300, 10, 20.0);
  ReductionConfig cfg;
  cfg.out_dim = 2;
  cfg.seed = 3;
  const Matrix z = umap_embed(x, cfg);
  REQUIRE(z.rows() == 600);
  REQUIRE(z.cols() == 2);
  for (double v : z.data()) REQUIRE(std::isfinite(v));
  const auto r = kmeans(z, 2, 10, 0);
  CHECK(hungarian_accuracy(contingency(labels, r.assignments)).accuracy >= 0.99);
  CHECK(z == umap_embed(x, cfg));
  CHECK(z == reduce(x, cfg));

  const Matrix small = x.select_rows([] {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < 600; i += 3) idx.push_back(i);
    return idx;
  }());
  cfg.out_dim = 10;
  const double t = trustworthiness(small, umap_embed(small, cfg), 15);
  MESSAGE("trustworthiness(k=15) = " << t);
  CHECK(t >= 0.90);
  // no coincident outputs for distinct inputs
  const Matrix zs = umap_embed(small, cfg);
  double min_d = INFINITY;
  for (std::size_t i = 0; i < zs.rows(); ++i)
    for (std::size_t j = i + 1; j < zs.rows(); ++j) min_d = std::min(min_d, squared_distance(zs.row(i), zs.row(j)));
  CHECK(min_d > 0.0);
}

TEST_CASE("UMAP: duplicate rows land together") {
  Rng rng(7);
  std::vector<int> labels;
  const Matrix base = two_blobs(rng, labels, 100, 8, 10.0);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < base.rows(); ++i) {
    idx.push_back(i);
    idx.push_back(i);
  }
  const Matrix x = base.select_rows(idx);
  ReductionConfig cfg;
  cfg.out_dim = 2;
  const Matrix z = umap_embed(x, cfg);
  int close = 0;
  for (std::size_t i = 0; i < x.rows(); i += 2) close += std::sqrt(squared_distance(z.row(i), z.row(i + 1))) <= 0.2;
  MESSAGE("duplicate pairs within 2 min_dist: " << close << " / " << x.rows() / 2);
  CHECK(close >= static_cast<int>(0.95 * x.rows() / 2));
}

TEST_CASE("reduce dispatch and validation") {
  Rng rng(8);
  Matrix x(40, 5);
  for (auto& v : x.data()) v = rng.normal();
  ReductionConfig none;
  none.backend = Backend::none;
  CHECK(reduce(x, none) == x);
  ReductionConfig pca;
  pca.backend = Backend::pca;
  pca.out_dim = 3;
  CHECK(reduce(x, pca) == pca_transform(pca_fit(x, 3), x));
  ReductionConfig bad;
  bad.out_dim = 6;
  CHECK_THROWS_AS(reduce(x, bad), UsageError);
  ReductionConfig too_few;
  too_few.out_dim = 2;
  CHECK_THROWS_AS(umap_embed(Matrix(10, 3), too_few), DataError);
  Matrix nan_x = x;
  nan_x(0, 0) = NAN;
  CHECK_THROWS_AS(reduce(nan_x, pca), DataError);
  CHECK(parse_backend("pca") == Backend::pca);
  CHECK_THROWS_AS(parse_backend("tsne"), UsageError);
}

TEST_CASE("all three backends recover well-separated blobs") {
  Rng rng(9);
  Matrix x(450, 16);
  std::vector<int> labels(450);
  for (std::size_t i = 0; i < 450; ++i) {
    labels[i] = static_cast<int>(i / 150);
    for (std::size_t j = 0; j < 16; ++j) x(i, j) = rng.normal() + (j == static_cast<std::size_t>(labels[i]) ? 12.0 : 0.0);
  }
  for (auto b : {Backend::umap, Backend::pca, Backend::none}) {
    ReductionConfig cfg;
    cfg.backend = b;
    cfg.out_dim = 5;
    const auto r = kmeans(reduce(x, cfg), 3, 10, 0);
    CHECK(hungarian_accuracy(contingency(labels, r.assignments)).accuracy >= 0.99);
  }
}
