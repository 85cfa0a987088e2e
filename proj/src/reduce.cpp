#include "biaslens/reduce.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <tuple>

#include "biaslens/error.hpp"
#include "biaslens/parallel.hpp"
#include "biaslens/rng.hpp"

namespace biaslens {

std::string_view to_string(Backend b) {
  switch (b) {
    case Backend::umap:
      return "umap";
    case Backend::pca:
      return "pca";
    case Backend::none:
      return "none";
  }
  return "unknown";
}

Backend parse_backend(std::string_view name) {
  if (name == "umap") return Backend::umap;
  if (name == "pca") return Backend::pca;
  if (name == "none") return Backend::none;
  throw UsageError("unknown backend '" + std::string(name) + "' (expected umap|pca|none)");
}

void ReductionConfig::validate(std::size_t input_dim) const {
  if (backend == Backend::none) return;
  if (out_dim < 1) throw UsageError("out_dim must be >= 1");
  if (static_cast<std::size_t>(out_dim) > input_dim)
    throw UsageError("out_dim " + std::to_string(out_dim) + " exceeds input dimension " + std::to_string(input_dim));
  if (backend == Backend::umap) {
    if (umap_neighbors < 2) throw UsageError("umap_neighbors must be >= 2");
    if (umap_min_dist < 0.0) throw UsageError("umap_min_dist must be >= 0");
    if (umap_epochs < 1) throw UsageError("umap_epochs must be >= 1");
  }
}

std::string ReductionConfig::describe() const {
  std::ostringstream s;
  s << to_string(backend);
  if (backend != Backend::none) s << ":dim=" << out_dim;
  if (backend == Backend::umap)
    s << ",neighbors=" << umap_neighbors << ",min_dist=" << umap_min_dist << ",epochs=" << umap_epochs
      << ",seed=" << seed;
  return s.str();
}

SymmetricEigen jacobi_eigen(Matrix a, double rel_tol, int max_sweeps) {
  const std::size_t d = a.rows();
  if (a.cols() != d) throw UsageError("jacobi_eigen needs a square matrix");
  Matrix v(d, d);
  for (std::size_t i = 0; i < d; ++i) v(i, i) = 1.0;

  double trace = 0.0;
  for (std::size_t i = 0; i < d; ++i) trace += std::abs(a(i, i));
  const double threshold = rel_tol * std::max(trace, std::numeric_limits<double>::min());

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < d; ++p)
      for (std::size_t q = p + 1; q < d; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(off) <= threshold) break;

    for (std::size_t p = 0; p < d; ++p)
      for (std::size_t q = p + 1; q < d; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= std::numeric_limits<double>::min()) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < d; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < d; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < d; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
  }

  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });
  SymmetricEigen out{std::vector<double>(d), Matrix(d, d)};
  for (std::size_t r = 0; r < d; ++r) {
    out.values[r] = a(order[r], order[r]);
    for (std::size_t k = 0; k < d; ++k) out.vectors(r, k) = v(k, order[r]);
  }
  return out;
}

SymmetricEigen symmetric_eigen(Matrix a) {
  const int n = static_cast<int>(a.rows());
  if (a.cols() != a.rows()) throw UsageError("symmetric_eigen needs a square matrix");
  if (n == 0) return {};
  Matrix& v = a;
  std::vector<double> d(static_cast<std::size_t>(n)), e(static_cast<std::size_t>(n));
  auto at = [&](int r, int c) -> double& { return v(static_cast<std::size_t>(r), static_cast<std::size_t>(c)); };
  auto D = [&](int i) -> double& { return d[static_cast<std::size_t>(i)]; };
  auto E = [&](int i) -> double& { return e[static_cast<std::size_t>(i)]; };

  // Householder reduction to tridiagonal form.
  for (int j = 0; j < n; ++j) D(j) = at(n - 1, j);
  for (int i = n - 1; i > 0; --i) {
    double scale = 0.0, h = 0.0;
    for (int k = 0; k < i; ++k) scale += std::abs(D(k));
    if (scale == 0.0) {
      E(i) = D(i - 1);
      for (int j = 0; j < i; ++j) {
        D(j) = at(i - 1, j);
        at(i, j) = 0.0;
        at(j, i) = 0.0;
      }
    } else {
      for (int k = 0; k < i; ++k) {
        D(k) /= scale;
        h += D(k) * D(k);
      }
      double f = D(i - 1);
      double g = std::sqrt(h);
      if (f > 0) g = -g;
      E(i) = scale * g;
      h -= f * g;
      D(i - 1) = f - g;
      for (int j = 0; j < i; ++j) E(j) = 0.0;
      for (int j = 0; j < i; ++j) {
        f = D(j);
        at(j, i) = f;
        g = E(j) + at(j, j) * f;
        for (int k = j + 1; k <= i - 1; ++k) {
          g += at(k, j) * D(k);
          E(k) += at(k, j) * f;
        }
        E(j) = g;
      }
      f = 0.0;
      for (int j = 0; j < i; ++j) {
        E(j) /= h;
        f += E(j) * D(j);
      }
      const double hh = f / (h + h);
      for (int j = 0; j < i; ++j) E(j) -= hh * D(j);
      for (int j = 0; j < i; ++j) {
        f = D(j);
        g = E(j);
        for (int k = j; k <= i - 1; ++k) at(k, j) -= (f * E(k) + g * D(k));
        D(j) = at(i - 1, j);
        at(i, j) = 0.0;
      }
    }
    D(i) = h;
  }
  for (int i = 0; i < n - 1; ++i) {
    at(n - 1, i) = at(i, i);
    at(i, i) = 1.0;
    const double h = D(i + 1);
    if (h != 0.0) {
      for (int k = 0; k <= i; ++k) D(k) = at(k, i + 1) / h;
      for (int j = 0; j <= i; ++j) {
        double g = 0.0;
        for (int k = 0; k <= i; ++k) g += at(k, i + 1) * at(k, j);
        for (int k = 0; k <= i; ++k) at(k, j) -= g * D(k);
      }
    }
    for (int k = 0; k <= i; ++k) at(k, i + 1) = 0.0;
  }
  for (int j = 0; j < n; ++j) {
    D(j) = at(n - 1, j);
    at(n - 1, j) = 0.0;
  }
  at(n - 1, n - 1) = 1.0;
  E(0) = 0.0;

  // Implicit QL on the tridiagonal matrix. Eigenvectors are kept as rows of w.
  Matrix w(static_cast<std::size_t>(n), static_cast<std::size_t>(n));
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) w(static_cast<std::size_t>(c), static_cast<std::size_t>(r)) = at(r, c);
  for (int i = 1; i < n; ++i) E(i - 1) = E(i);
  E(n - 1) = 0.0;
  double f = 0.0, tst1 = 0.0;
  const double eps = std::numeric_limits<double>::epsilon();
  for (int l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(D(l)) + std::abs(E(l)));
    int m = l;
    while (m < n && std::abs(E(m)) > eps * tst1) ++m;
    if (m == n) m = n - 1;
    if (m > l) {
      int iter = 0;
      do {
        if (++iter > 200) throw DataError("symmetric_eigen did not converge");
        double g = D(l);
        double p = (D(l + 1) - g) / (2.0 * E(l));
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        D(l) = E(l) / (p + r);
        D(l + 1) = E(l) * (p + r);
        const double dl1 = D(l + 1);
        double h = g - D(l);
        for (int i = l + 2; i < n; ++i) D(i) -= h;
        f += h;
        p = D(m);
        double c = 1.0, c2 = 1.0, c3 = 1.0, s = 0.0, s2 = 0.0;
        const double el1 = E(l + 1);
        for (int i = m - 1; i >= l; --i) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * E(i);
          h = c * p;
          r = std::hypot(p, E(i));
          E(i + 1) = s * r;
          s = E(i) / r;
          c = p / r;
          p = c * D(i) - s * g;
          D(i + 1) = h + s * (c * g + s * D(i));
          double* wi = &w(static_cast<std::size_t>(i), 0);
          double* wj = &w(static_cast<std::size_t>(i + 1), 0);
          for (int k = 0; k < n; ++k) {
            const double t = wj[k];
            wj[k] = s * wi[k] + c * t;
            wi[k] = c * wi[k] - s * t;
          }
        }
        p = -s * s2 * c3 * el1 * E(l) / dl1;
        E(l) = s * p;
        D(l) = c * p;
      } while (std::abs(E(l)) > eps * tst1);
    }
    D(l) += f;
    E(l) = 0.0;
  }

  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return d[i] > d[j]; });
  SymmetricEigen out{std::vector<double>(order.size()), Matrix(order.size(), order.size())};
  for (std::size_t r = 0; r < order.size(); ++r) {
    out.values[r] = d[order[r]];
    auto src = w.row(order[r]);
    std::copy(src.begin(), src.end(), out.vectors.row(r).begin());
  }
  return out;
}

PcaModel pca_fit(const Matrix& x, int out_dim) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  if (n < 2) throw UsageError("pca_fit needs at least 2 rows");
  if (out_dim < 1 || static_cast<std::size_t>(out_dim) > std::min(n - 1, d))
    throw UsageError("pca out_dim must be in [1, min(n-1, d)]");
  for (double v : x.data())
    if (!std::isfinite(v)) throw DataError("pca input contains non-finite values");

  PcaModel m;
  m.mean = column_means(x);
  Matrix centered(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) centered(i, j) = x(i, j) - m.mean[j];
  const double denom = static_cast<double>(n - 1);
  const auto k = static_cast<std::size_t>(out_dim);
  m.components = Matrix(k, d);

  double trace = 0.0;
  for (double v : centered.data()) trace += v * v;
  trace /= denom;
  const double floor = 1e-12 * trace;

  if (n < d) {
    // Gram matrix C C^T / (n-1) shares the nonzero spectrum; map u to C^T u.
    Matrix gram(n, n);
    parallel_for(n, [&](std::size_t p) {
      for (std::size_t q = p; q < n; ++q) gram(p, q) = dot(centered.row(p), centered.row(q)) / denom;
    });
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = 0; q < p; ++q) gram(p, q) = gram(q, p);
    const auto eig = symmetric_eigen(std::move(gram));
    for (std::size_t r = 0; r < k; ++r) {
      double ev = eig.values[r];
      if (ev <= floor) {
        m.rank_deficient = true;
        break;
      }
      auto comp = m.components.row(r);
      for (std::size_t i = 0; i < n; ++i) {
        const double u = eig.vectors(r, i);
        auto row = centered.row(i);
        for (std::size_t j = 0; j < d; ++j) comp[j] += u * row[j];
      }
      const double norm = std::sqrt(dot(comp, comp));
      for (auto& c : comp) c /= norm;
      m.explained_variance.push_back(ev);
    }
  }
  if (n >= d || m.rank_deficient) {
    m.rank_deficient = false;
    m.explained_variance.clear();
    Matrix cov(d, d);
    for (std::size_t i = 0; i < n; ++i) {
      auto row = centered.row(i);
      for (std::size_t p = 0; p < d; ++p) {
        const double cp = row[p];
        double* dst = &cov(p, 0);
        for (std::size_t q = p; q < d; ++q) dst[q] += cp * row[q];
      }
    }
    for (std::size_t p = 0; p < d; ++p)
      for (std::size_t q = p; q < d; ++q) {
        cov(p, q) /= denom;
        cov(q, p) = cov(p, q);
      }
    const auto eig = symmetric_eigen(std::move(cov));
    for (std::size_t r = 0; r < k; ++r) {
      auto src = eig.vectors.row(r);
      std::copy(src.begin(), src.end(), m.components.row(r).begin());
      double ev = eig.values[r];
      if (ev <= floor) {
        m.rank_deficient = true;
        ev = 0.0;
      }
      m.explained_variance.push_back(ev);
    }
  }

  for (std::size_t r = 0; r < k; ++r) {
    auto comp = m.components.row(r);
    std::size_t arg = 0;
    for (std::size_t j = 1; j < d; ++j)
      if (std::abs(comp[j]) > std::abs(comp[arg])) arg = j;
    if (comp[arg] < 0)
      for (auto& c : comp) c = -c;
  }
  return m;
}

Matrix pca_transform(const PcaModel& model, const Matrix& x) {
  if (x.cols() != model.mean.size())
    throw DataError("pca_transform: dimension mismatch (" + std::to_string(x.cols()) + " vs " +
                    std::to_string(model.mean.size()) + ")");
  const std::size_t k = model.components.rows();
  Matrix z(x.rows(), k);
  std::vector<double> centered(x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto row = x.row(i);
    for (std::size_t j = 0; j < x.cols(); ++j) centered[j] = row[j] - model.mean[j];
    for (std::size_t c = 0; c < k; ++c) z(i, c) = dot(centered, model.components.row(c));
  }
  return z;
}

CurveParams fit_umap_curve(double min_dist, double spread) {
  constexpr int kPoints = 300;
  std::vector<double> xs(kPoints), ys(kPoints);
  for (int i = 0; i < kPoints; ++i) {
    xs[i] = 3.0 * spread * i / (kPoints - 1);
    ys[i] = xs[i] < min_dist ? 1.0 : std::exp(-(xs[i] - min_dist) / spread);
  }
  auto residuals = [&](double a, double b, std::vector<double>& r, std::vector<double>& ja, std::vector<double>& jb) {
    double sse = 0.0;
    for (int i = 0; i < kPoints; ++i) {
      const double x = xs[i];
      const double p = x > 0 ? std::pow(x, 2.0 * b) : 0.0;
      const double f = 1.0 / (1.0 + a * p);
      r[i] = f - ys[i];
      sse += r[i] * r[i];
      ja[i] = -p * f * f;
      jb[i] = x > 0 ? -a * p * 2.0 * std::log(x) * f * f : 0.0;
    }
    return sse;
  };

  // Levenberg-Marquardt on two parameters.
  double a = 1.0;
  double b = 1.0;
  double lambda = 1e-3;
  std::vector<double> r(kPoints), ja(kPoints), jb(kPoints), r2(kPoints), ja2(kPoints), jb2(kPoints);
  double sse = residuals(a, b, r, ja, jb);
  for (int it = 0; it < 500; ++it) {
    double aa = 0, ab = 0, bb = 0, ga = 0, gb = 0;
    for (int i = 0; i < kPoints; ++i) {
      aa += ja[i] * ja[i];
      ab += ja[i] * jb[i];
      bb += jb[i] * jb[i];
      ga += ja[i] * r[i];
      gb += jb[i] * r[i];
    }
    const double m11 = aa * (1.0 + lambda);
    const double m22 = bb * (1.0 + lambda);
    const double det = m11 * m22 - ab * ab;
    if (std::abs(det) < 1e-300) break;
    const double da = -(m22 * ga - ab * gb) / det;
    const double db = -(m11 * gb - ab * ga) / det;
    const double na = a + da;
    const double nb = b + db;
    if (na > 0 && nb > 0) {
      const double nsse = residuals(na, nb, r2, ja2, jb2);
      if (nsse < sse) {
        const bool done = sse - nsse < 1e-15 * std::max(1.0, sse);
        a = na;
        b = nb;
        sse = nsse;
        r.swap(r2);
        ja.swap(ja2);
        jb.swap(jb2);
        lambda = std::max(lambda * 0.3, 1e-12);
        if (done) break;
        continue;
      }
    }
    lambda *= 10.0;
    if (lambda > 1e12) break;
  }
  return {a, b};
}

KnnGraph exact_knn(const Matrix& x, std::size_t k) {
  const std::size_t n = x.rows();
  if (k < 1 || k > n) throw UsageError("knn k must be in [1, n]");
  KnnGraph g{k, std::vector<std::size_t>(n * k), std::vector<double>(n * k)};
  parallel_for(n, [&](std::size_t i) {
    std::vector<std::pair<double, std::size_t>> cand;
    cand.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) cand.emplace_back(squared_distance(x.row(i), x.row(j)), j);
    const std::size_t take = k - 1;
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end());
    g.index[i * k] = i;
    g.distance[i * k] = 0.0;
    for (std::size_t t = 0; t < take; ++t) {
      g.index[i * k + 1 + t] = cand[t].second;
      g.distance[i * k + 1 + t] = std::sqrt(cand[t].first);
    }
  });
  return g;
}

std::vector<FuzzyEdge> fuzzy_simplicial_set(const KnnGraph& knn, std::size_t n) {
  const std::size_t k = knn.k;
  const double target = std::log2(static_cast<double>(k));
  double global_mean = 0.0;
  for (double d : knn.distance) global_mean += d;
  global_mean /= static_cast<double>(knn.distance.size());

  std::vector<FuzzyEdge> directed;
  directed.reserve(n * (k - 1));
  for (std::size_t i = 0; i < n; ++i) {
    const double* dist = &knn.distance[i * k];
    double rho = 0.0;
    for (std::size_t t = 1; t < k; ++t)
      if (dist[t] > 0.0) {
        rho = dist[t];
        break;
      }
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    double mid = 1.0;
    for (int it = 0; it < 64; ++it) {
      double psum = 0.0;
      for (std::size_t t = 1; t < k; ++t) {
        const double d = dist[t] - rho;
        psum += d > 0.0 ? std::exp(-d / mid) : 1.0;
      }
      if (std::abs(psum - target) < 1e-5) break;
      if (psum > target) {
        hi = mid;
        mid = (lo + hi) / 2.0;
      } else {
        lo = mid;
        mid = std::isinf(hi) ? mid * 2.0 : (lo + hi) / 2.0;
      }
    }
    double mean_i = 0.0;
    for (std::size_t t = 0; t < k; ++t) mean_i += dist[t];
    mean_i /= static_cast<double>(k);
    const double sigma = std::max(mid, 1e-3 * (rho > 0.0 ? mean_i : global_mean));

    for (std::size_t t = 1; t < k; ++t) {
      const double d = dist[t] - rho;
      const double w = d <= 0.0 ? 1.0 : std::exp(-d / sigma);
      directed.push_back({i, knn.index[i * k + t], w});
    }
  }

  // Fuzzy union w_ij + w_ji - w_ij w_ji over the symmetrized support.
  std::vector<std::tuple<std::size_t, std::size_t, double, bool>> both;
  both.reserve(directed.size() * 2);
  for (const auto& e : directed) {
    both.emplace_back(e.head, e.tail, e.weight, true);
    both.emplace_back(e.tail, e.head, e.weight, false);
  }
  std::sort(both.begin(), both.end(), [](const auto& l, const auto& r) {
    return std::tie(std::get<0>(l), std::get<1>(l), std::get<3>(l)) <
           std::tie(std::get<0>(r), std::get<1>(r), std::get<3>(r));
  });
  std::vector<FuzzyEdge> out;
  for (std::size_t i = 0; i < both.size();) {
    const auto [h, t, w, fwd] = both[i];
    double w_fwd = 0.0;
    double w_rev = 0.0;
    std::size_t j = i;
    for (; j < both.size() && std::get<0>(both[j]) == h && std::get<1>(both[j]) == t; ++j)
      (std::get<3>(both[j]) ? w_fwd : w_rev) = std::get<2>(both[j]);
    const double w_union = w_fwd + w_rev - w_fwd * w_rev;
    if (w_union > 0.0) out.push_back({h, t, w_union});
    i = j;
  }
  return out;
}

namespace {

inline double clip4(double v) { return std::clamp(v, -4.0, 4.0); }

}  // namespace

Matrix umap_embed(const Matrix& x, const ReductionConfig& cfg) {
  cfg.validate(x.cols());
  const std::size_t n = x.rows();
  const auto k = static_cast<std::size_t>(cfg.umap_neighbors);
  if (n <= k) throw DataError("umap needs more points than neighbors (n=" + std::to_string(n) + ")");
  for (double v : x.data())
    if (!std::isfinite(v)) throw DataError("umap input contains non-finite values");

  const auto knn = exact_knn(x, k);
  auto edges = fuzzy_simplicial_set(knn, n);
  const int epochs = cfg.umap_epochs;
  double max_w = 0.0;
  for (const auto& e : edges) max_w = std::max(max_w, e.weight);
  std::erase_if(edges, [&](const FuzzyEdge& e) { return e.weight < max_w / epochs; });

  const auto curve = fit_umap_curve(cfg.umap_min_dist);
  const double a = curve.a;
  const double b = curve.b;
  constexpr double kGamma = 1.0;
  constexpr double kNegativeRate = 5.0;

  const auto dim = static_cast<std::size_t>(cfg.out_dim);
  Matrix emb(n, dim);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < dim; ++c)
      emb(i, c) = -10.0 + 20.0 * to_unit(derive_key(cfg.seed, {0x1417, i, c}));

  const std::size_t m = edges.size();
  std::vector<double> per_sample(m), next_sample(m), per_negative(m), next_negative(m);
  for (std::size_t e = 0; e < m; ++e) {
    per_sample[e] = max_w / edges[e].weight;
    next_sample[e] = per_sample[e];
    per_negative[e] = per_sample[e] / kNegativeRate;
    next_negative[e] = per_negative[e];
  }

  std::vector<double> delta(dim);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const double alpha = 1.0 - static_cast<double>(epoch) / epochs;
    for (std::size_t e = 0; e < m; ++e) {
      if (next_sample[e] > epoch) continue;
      double* cur = &emb(edges[e].head, 0);
      double* oth = &emb(edges[e].tail, 0);

      double d2 = 0.0;
      for (std::size_t c = 0; c < dim; ++c) {
        delta[c] = cur[c] - oth[c];
        d2 += delta[c] * delta[c];
      }
      if (d2 > 0.0) {
        const double coeff = -2.0 * a * b * std::pow(d2, b - 1.0) / (a * std::pow(d2, b) + 1.0);
        for (std::size_t c = 0; c < dim; ++c) {
          const double g = clip4(coeff * delta[c]) * alpha;
          cur[c] += g;
          oth[c] -= g;
        }
      }
      next_sample[e] += per_sample[e];

      const auto n_neg = static_cast<int>((epoch - next_negative[e]) / per_negative[e]);
      Rng rng(derive_key(cfg.seed, {0x2b1d, static_cast<std::uint64_t>(epoch), e}));
      for (int p = 0; p < n_neg; ++p) {
        const std::size_t j = rng.below(n);
        if (j == edges[e].head) continue;
        const double* neg = &emb(j, 0);
        double nd2 = 0.0;
        for (std::size_t c = 0; c < dim; ++c) {
          delta[c] = cur[c] - neg[c];
          nd2 += delta[c] * delta[c];
        }
        double coeff = 0.0;
        if (nd2 > 0.0) coeff = 2.0 * kGamma * b / ((0.001 + nd2) * (a * std::pow(nd2, b) + 1.0));
        for (std::size_t c = 0; c < dim; ++c) {
          const double g = coeff > 0.0 ? clip4(coeff * delta[c]) : 4.0;
          cur[c] += g * alpha;
        }
      }
      next_negative[e] += n_neg * per_negative[e];
    }
  }
  return emb;
}

Matrix reduce(const Matrix& x, const ReductionConfig& cfg) {
  cfg.validate(x.cols());
  switch (cfg.backend) {
    case Backend::none:
      return x;
    case Backend::pca:
      return pca_transform(pca_fit(x, cfg.out_dim), x);
    case Backend::umap:
      return umap_embed(x, cfg);
  }
  throw UsageError("unknown backend");
}

}  // namespace biaslens
