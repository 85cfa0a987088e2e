#include "biaslens/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <string>
#include <tuple>

#include "biaslens/error.hpp"
#include "biaslens/parallel.hpp"
#include "biaslens/rng.hpp"

namespace biaslens {

std::string_view to_string(Algorithm a) { return a == Algorithm::kmeans ? "kmeans" : "ward"; }

Algorithm parse_algorithm(std::string_view name) {
  if (name == "kmeans") return Algorithm::kmeans;
  if (name == "ward") return Algorithm::ward;
  throw UsageError("unknown algorithm '" + std::string(name) + "' (expected kmeans|ward)");
}

namespace {

void check_input(const Matrix& z, int k) {
  if (z.rows() == 0 || z.cols() == 0) throw DataError("clustering needs a non-empty matrix");
  if (k < 1) throw UsageError("k must be >= 1");
  if (static_cast<std::size_t>(k) > z.rows())
    throw UsageError("k = " + std::to_string(k) + " exceeds the number of points (" + std::to_string(z.rows()) + ")");
}

std::uint64_t row_hash(std::span<const double> row) {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (double v : row) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &v, sizeof bits);
    h = mix64(h ^ bits);
  }
  return h;
}

void nearest(const Matrix& z, const Matrix& centroids, std::vector<int>& assign) {
  const auto k = centroids.rows();
  for (std::size_t i = 0; i < z.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (std::size_t c = 0; c < k; ++c) {
      const double d = squared_distance(z.row(i), centroids.row(c));
      if (d < best) {
        best = d;
        arg = static_cast<int>(c);
      }
    }
    assign[i] = arg;
  }
}

void repair_empty(const Matrix& z, std::vector<int>& assign, Matrix& centroids) {
  const auto k = centroids.rows();
  std::vector<std::size_t> counts(k, 0);
  for (int a : assign) ++counts[static_cast<std::size_t>(a)];
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] != 0) continue;
    double far = -1.0;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < z.rows(); ++i) {
      const auto own = static_cast<std::size_t>(assign[i]);
      if (counts[own] < 2) continue;
      const double d = squared_distance(z.row(i), centroids.row(own));
      if (d > far) {
        far = d;
        arg = i;
      }
    }
    if (far < 0.0) continue;  // fewer points than clusters with mass; cannot happen when k <= n
    --counts[static_cast<std::size_t>(assign[arg])];
    assign[arg] = static_cast<int>(c);
    ++counts[c];
    auto src = z.row(arg);
    std::copy(src.begin(), src.end(), centroids.row(c).begin());
  }
}

Matrix kmeanspp_seed(const Matrix& z, int k, std::uint64_t seed, int restart,
                     const std::vector<std::uint64_t>& content) {
  const std::size_t n = z.rows();
  Matrix centroids(static_cast<std::size_t>(k), z.cols());
  std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
  std::vector<char> chosen(n, 0);
  for (int step = 0; step < k; ++step) {
    // Weighted draw by exponential race: argmin E_i / w_i with E_i ~ Exp(1).
    std::size_t best = n;
    double best_key = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      const double w = step == 0 ? 1.0 : min_d2[i];
      if (!(w > 0.0)) continue;
      const double u = to_unit(derive_key(seed, {static_cast<std::uint64_t>(restart), static_cast<std::uint64_t>(step),
                                                 content[i]})) +
                       0x1.0p-54;
      const double key = -std::log(u) / w;
      if (key < best_key) {
        best_key = key;
        best = i;
      }
    }
    if (best == n) {
      // All remaining points coincide with chosen centers; take the first unused row.
      best = static_cast<std::size_t>(std::find(chosen.begin(), chosen.end(), 0) - chosen.begin());
      if (best == n) best = 0;
    }
    chosen[best] = 1;
    auto src = z.row(best);
    std::copy(src.begin(), src.end(), centroids.row(static_cast<std::size_t>(step)).begin());
    for (std::size_t i = 0; i < n; ++i) min_d2[i] = std::min(min_d2[i], squared_distance(z.row(i), src));
  }
  return centroids;
}

LloydRun lloyd_with_content(const Matrix& z, int k, std::uint64_t seed, int restart,
                            const std::vector<std::uint64_t>& content) {
  LloydRun run;
  run.centroids = kmeanspp_seed(z, k, seed, restart, content);
  run.assignments.resize(z.rows());
  nearest(z, run.centroids, run.assignments);
  repair_empty(z, run.assignments, run.centroids);

  std::vector<int> next(z.rows());
  for (;;) {
    run.centroids = cluster_means(z, run.assignments, k);
    run.trace.push_back(clustering_objective(z, run.assignments, run.centroids));
    ++run.iterations;
    nearest(z, run.centroids, next);
    repair_empty(z, next, run.centroids);
    const bool fixpoint = next == run.assignments;
    run.assignments.swap(next);
    if (fixpoint || run.iterations >= kMaxLloydIterations) break;
  }
  run.objective = clustering_objective(z, run.assignments, run.centroids);
  return run;
}

std::vector<std::uint64_t> content_keys(const Matrix& z) {
  std::vector<std::uint64_t> keys(z.rows());
  for (std::size_t i = 0; i < z.rows(); ++i) keys[i] = row_hash(z.row(i));
  return keys;
}

}  // namespace

Matrix cluster_means(const Matrix& z, std::span<const int> assignments, int k) {
  Matrix m(static_cast<std::size_t>(k), z.cols());
  std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
  for (std::size_t i = 0; i < z.rows(); ++i) {
    const auto c = static_cast<std::size_t>(assignments[i]);
    ++counts[c];
    auto dst = m.row(c);
    auto src = z.row(i);
    for (std::size_t j = 0; j < z.cols(); ++j) dst[j] += src[j];
  }
  for (std::size_t c = 0; c < counts.size(); ++c)
    if (counts[c] > 0)
      for (double& v : m.row(c)) v /= static_cast<double>(counts[c]);
  return m;
}

double clustering_objective(const Matrix& z, std::span<const int> assignments, const Matrix& centroids) {
  double s = 0.0;
  for (std::size_t i = 0; i < z.rows(); ++i)
    s += squared_distance(z.row(i), centroids.row(static_cast<std::size_t>(assignments[i])));
  return s;
}

LloydRun lloyd_run(const Matrix& z, int k, std::uint64_t seed, int restart) {
  check_input(z, k);
  return lloyd_with_content(z, k, seed, restart, content_keys(z));
}

ClusterResult kmeans(const Matrix& z, int k, int restarts, std::uint64_t seed) {
  check_input(z, k);
  if (restarts < 1) throw UsageError("restarts must be >= 1");
  const auto content = content_keys(z);
  std::vector<LloydRun> runs(static_cast<std::size_t>(restarts));
  parallel_for(runs.size(), [&](std::size_t r) {
    runs[r] = lloyd_with_content(z, k, seed, static_cast<int>(r), content);
    runs[r].trace.clear();
  });

  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r) {
    const double a = runs[r].objective;
    const double b = runs[best].objective;
    if (a < b - 1e-12 * std::max(std::abs(a), std::abs(b))) best = r;
  }

  ClusterResult res;
  res.k = k;
  res.restarts = restarts;
  res.seed = seed;
  res.algorithm = Algorithm::kmeans;
  res.best_restart = static_cast<int>(best);
  for (const auto& r : runs) res.restart_objectives.push_back(r.objective);
  res.assignments = std::move(runs[best].assignments);
  res.centroids = std::move(runs[best].centroids);
  res.objective = runs[best].objective;
  return res;
}

WardResult ward_linkage(const Matrix& z, int k) {
  check_input(z, k);
  const std::size_t n = z.rows();
  const std::size_t d = z.cols();

  std::vector<int> size(n, 1);
  Matrix centroid = z;
  std::vector<char> active(n, 1);
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);

  auto cost = [&](std::size_t a, std::size_t b) {
    const double na = size[a];
    const double nb = size[b];
    return na * nb / (na + nb) * squared_distance(centroid.row(a), centroid.row(b));
  };
  // Lexicographic (cost, partner id) comparison for nearest-neighbour bookkeeping.
  auto better = [](double c1, std::size_t p1, double c2, std::size_t p2) {
    return c1 < c2 || (c1 == c2 && p1 < p2);
  };

  std::vector<std::size_t> nn(n, n);
  std::vector<double> nn_cost(n, std::numeric_limits<double>::infinity());
  auto refresh = [&](std::size_t a) {
    nn[a] = n;
    nn_cost[a] = std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < n; ++b) {
      if (b == a || !active[b]) continue;
      const double c = cost(a, b);
      if (better(c, b, nn_cost[a], nn[a])) {
        nn_cost[a] = c;
        nn[a] = b;
      }
    }
  };
  for (std::size_t a = 0; a < n; ++a) refresh(a);

  WardResult out;
  std::size_t remaining = n;
  std::vector<std::size_t> stale;
  while (remaining > static_cast<std::size_t>(k)) {
    std::size_t pick = n;
    for (std::size_t a = 0; a < n; ++a) {
      if (!active[a] || nn[a] == n) continue;
      if (pick == n) {
        pick = a;
        continue;
      }
      const auto cand = std::make_tuple(nn_cost[a], std::min(a, nn[a]), std::max(a, nn[a]));
      const auto cur = std::make_tuple(nn_cost[pick], std::min(pick, nn[pick]), std::max(pick, nn[pick]));
      if (cand < cur) pick = a;
    }
    const std::size_t lo = std::min(pick, nn[pick]);
    const std::size_t hi = std::max(pick, nn[pick]);
    const double merge_cost = nn_cost[pick];

    const double nlo = size[lo];
    const double nhi = size[hi];
    for (std::size_t j = 0; j < d; ++j)
      centroid(lo, j) = (nlo * centroid(lo, j) + nhi * centroid(hi, j)) / (nlo + nhi);
    size[lo] += size[hi];
    active[hi] = 0;
    parent[hi] = lo;
    --remaining;
    out.merges.push_back({static_cast<int>(lo), static_cast<int>(hi), merge_cost, size[lo]});

    stale.clear();
    for (std::size_t c = 0; c < n; ++c) {
      if (!active[c] || c == lo) continue;
      if (nn[c] == lo || nn[c] == hi) {
        stale.push_back(c);
        continue;
      }
      const double cc = cost(c, lo);
      if (better(cc, lo, nn_cost[c], nn[c])) {
        nn_cost[c] = cc;
        nn[c] = lo;
      }
    }
    refresh(lo);
    for (auto c : stale) refresh(c);
  }

  auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  std::vector<int> label_of(n, -1);
  int next = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (active[i]) label_of[i] = next++;

  ClusterResult& res = out.clusters;
  res.algorithm = Algorithm::ward;
  res.k = k;
  res.restarts = 1;
  res.assignments.resize(n);
  for (std::size_t i = 0; i < n; ++i) res.assignments[i] = label_of[find(i)];
  res.centroids = cluster_means(z, res.assignments, k);
  res.objective = clustering_objective(z, res.assignments, res.centroids);
  return out;
}

ClusterResult ward(const Matrix& z, int k) { return ward_linkage(z, k).clusters; }

std::vector<int> relabel_canonical(std::span<const int> assignments) {
  std::vector<int> map;
  std::vector<int> out(assignments.size());
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    const int a = assignments[i];
    if (a < 0) throw DataError("negative cluster index");
    if (static_cast<std::size_t>(a) >= map.size()) map.resize(static_cast<std::size_t>(a) + 1, -1);
    if (map[static_cast<std::size_t>(a)] < 0)
      map[static_cast<std::size_t>(a)] = static_cast<int>(std::count_if(map.begin(), map.end(), [](int m) { return m >= 0; }));
    out[i] = map[static_cast<std::size_t>(a)];
  }
  return out;
}

ClusterResult relabel_canonical(const ClusterResult& result) {
  ClusterResult out = result;
  out.assignments = relabel_canonical(result.assignments);
  if (!result.centroids.empty()) {
    // New index of each old cluster; clusters that never occur keep trailing slots.
    std::vector<int> new_of(static_cast<std::size_t>(result.k), -1);
    for (std::size_t i = 0; i < result.assignments.size(); ++i)
      new_of[static_cast<std::size_t>(result.assignments[i])] = out.assignments[i];
    int next = 1 + *std::max_element(out.assignments.begin(), out.assignments.end());
    for (auto& v : new_of)
      if (v < 0) v = next++;
    for (std::size_t c = 0; c < new_of.size(); ++c) {
      auto src = result.centroids.row(c);
      std::copy(src.begin(), src.end(), out.centroids.row(static_cast<std::size_t>(new_of[c])).begin());
    }
  }
  return out;
}

}  // namespace biaslens
