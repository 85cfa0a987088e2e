#include "biaslens/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "biaslens/cluster.hpp"
#include "biaslens/error.hpp"

namespace biaslens {

ContingencyTable::ContingencyTable(std::size_t rows, std::size_t cols, std::vector<std::int64_t> counts)
    : rows_(rows), cols_(cols), counts_(std::move(counts)) {
  if (counts_.size() != rows_ * cols_) throw DataError("contingency counts do not match shape");
  for (auto c : counts_) {
    if (c < 0) throw DataError("negative contingency count");
    n_ += c;
  }
  if (n_ < 1) throw DataError("contingency table is empty");
}

std::vector<std::int64_t> ContingencyTable::row_sums() const {
  std::vector<std::int64_t> s(rows_, 0);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) s[r] += at(r, c);
  return s;
}

std::vector<std::int64_t> ContingencyTable::col_sums() const {
  std::vector<std::int64_t> s(cols_, 0);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) s[c] += at(r, c);
  return s;
}

ContingencyTable ContingencyTable::transposed() const {
  std::vector<std::int64_t> t(counts_.size());
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t[c * rows_ + r] = at(r, c);
  return {cols_, rows_, std::move(t)};
}

ContingencyTable contingency(std::span<const int> y_true, std::span<const int> y_pred, std::size_t min_rows,
                             std::size_t min_cols) {
  if (y_true.size() != y_pred.size())
    throw DataError("label length mismatch: " + std::to_string(y_true.size()) + " vs " + std::to_string(y_pred.size()));
  if (y_true.empty()) throw DataError("contingency of empty labellings");
  std::size_t rows = min_rows;
  std::size_t cols = min_cols;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] < 0 || y_pred[i] < 0) throw DataError("negative label");
    rows = std::max(rows, static_cast<std::size_t>(y_true[i]) + 1);
    cols = std::max(cols, static_cast<std::size_t>(y_pred[i]) + 1);
  }
  std::vector<std::int64_t> counts(rows * cols, 0);
  for (std::size_t i = 0; i < y_true.size(); ++i) ++counts[static_cast<std::size_t>(y_true[i]) * cols + y_pred[i]];
  return {rows, cols, std::move(counts)};
}

std::vector<int> solve_assignment(std::span<const std::int64_t> cost, std::size_t n) {
  if (cost.size() != n * n) throw UsageError("assignment cost matrix must be square");
  if (n == 0) return {};
  // 1-indexed potentials formulation; column 0 is a virtual source.
  constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;
  std::vector<std::int64_t> u(n + 1, 0), v(n + 1, 0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      std::int64_t delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const std::int64_t cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n, -1);
  for (std::size_t j = 1; j <= n; ++j)
    if (p[j] != 0) row_to_col[p[j] - 1] = static_cast<int>(j - 1);
  return row_to_col;
}

MatchResult hungarian_accuracy(const ContingencyTable& table) {
  const std::size_t k = std::max(table.rows(), table.cols());
  std::int64_t max_count = 0;
  for (auto c : table.counts()) max_count = std::max(max_count, c);
  // Rows are clusters, columns labels; cost = max - count so minimizing cost maximizes agreement.
  std::vector<std::int64_t> cost(k * k, max_count);
  for (std::size_t label = 0; label < table.rows(); ++label)
    for (std::size_t cl = 0; cl < table.cols(); ++cl) cost[cl * k + label] = max_count - table.at(label, cl);
  const auto assign = solve_assignment(cost, k);

  MatchResult m;
  m.mapping.assign(table.cols(), -1);
  for (std::size_t cl = 0; cl < table.cols(); ++cl) {
    const auto label = static_cast<std::size_t>(assign[cl]);
    if (label < table.rows()) {
      m.mapping[cl] = static_cast<int>(label);
      m.matched += table.at(label, cl);
    }
  }
  m.accuracy = static_cast<double>(m.matched) / static_cast<double>(table.n());
  return m;
}

double nmi(const ContingencyTable& table) {
  const double n = static_cast<double>(table.n());
  const auto a = table.row_sums();
  const auto b = table.col_sums();
  auto entropy = [n](const std::vector<std::int64_t>& marg) {
    double h = 0.0;
    for (auto c : marg)
      if (c > 0) {
        const double p = static_cast<double>(c) / n;
        h -= p * std::log(p);
      }
    return h;
  };
  const double h_true = entropy(a);
  const double h_pred = entropy(b);
  if (h_true + h_pred <= 0.0) return 100.0;

  double mi = 0.0;
  for (std::size_t r = 0; r < table.rows(); ++r)
    for (std::size_t c = 0; c < table.cols(); ++c) {
      const auto nij = table.at(r, c);
      if (nij == 0) continue;
      const double pij = static_cast<double>(nij) / n;
      mi += pij * std::log(n * static_cast<double>(nij) / (static_cast<double>(a[r]) * static_cast<double>(b[c])));
    }
  return std::clamp(100.0 * 2.0 * mi / (h_true + h_pred), 0.0, 100.0);
}

NormalizedConfusion confusion_normalized(const ContingencyTable& table) {
  NormalizedConfusion out{Matrix(table.rows(), table.cols()), std::vector<bool>(table.rows(), false)};
  const auto sums = table.row_sums();
  for (std::size_t r = 0; r < table.rows(); ++r) {
    if (sums[r] == 0) {
      out.undefined_row[r] = true;
      for (std::size_t c = 0; c < table.cols(); ++c) out.percent(r, c) = std::nan("");
      continue;
    }
    for (std::size_t c = 0; c < table.cols(); ++c)
      out.percent(r, c) = 100.0 * static_cast<double>(table.at(r, c)) / static_cast<double>(sums[r]);
  }
  return out;
}

std::vector<SweepPoint> granularity_sweep(const Matrix& z, std::span<const int> y_true, std::span<const int> k_range,
                                          int restarts, std::uint64_t seed) {
  if (y_true.size() != z.rows()) throw DataError("label count does not match rows");
  std::vector<SweepPoint> out;
  for (int k : k_range) {
    if (k < 1 || static_cast<std::size_t>(k) > z.rows()) throw UsageError("sweep k out of range");
    const auto res = kmeans(z, k, restarts, seed);
    const auto table = contingency(y_true, res.assignments);
    out.push_back({k, nmi(table), hungarian_accuracy(table).accuracy});
  }
  return out;
}

}  // namespace biaslens
