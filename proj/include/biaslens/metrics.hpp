#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "biaslens/matrix.hpp"

namespace biaslens {

/// k_true x k_pred joint count matrix of a labelling and a clustering.
class ContingencyTable {
 public:
  ContingencyTable() = default;
  /// Throws DataError unless all counts are non-negative and their sum is >= 1.
  ContingencyTable(std::size_t rows, std::size_t cols, std::vector<std::int64_t> counts);

  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
  [[nodiscard]] std::int64_t n() const noexcept { return n_; }
  [[nodiscard]] std::int64_t at(std::size_t r, std::size_t c) const noexcept { return counts_[r * cols_ + c]; }
  [[nodiscard]] const std::vector<std::int64_t>& counts() const noexcept { return counts_; }

  [[nodiscard]] std::vector<std::int64_t> row_sums() const;
  [[nodiscard]] std::vector<std::int64_t> col_sums() const;
  [[nodiscard]] ContingencyTable transposed() const;

  friend bool operator==(const ContingencyTable&, const ContingencyTable&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::int64_t n_ = 0;
  std::vector<std::int64_t> counts_;
};

/// counts[a][b] = #{i : y_true[i] = a, y_pred[i] = b}. Labels must be >= 0;
/// the table has max(label) + 1 rows/columns unless larger sizes are requested.
ContingencyTable contingency(std::span<const int> y_true, std::span<const int> y_pred, std::size_t min_rows = 0,
                             std::size_t min_cols = 0);

/// Minimum-cost perfect assignment on a square cost matrix (row -> column).
/// O(n^3) shortest augmenting path with potentials; integer costs keep it exact.
std::vector<int> solve_assignment(std::span<const std::int64_t> cost, std::size_t n);

struct MatchResult {
  double accuracy = 0.0;       // in [0, 1]
  std::int64_t matched = 0;    // accuracy * n
  std::vector<int> mapping;    // cluster -> label, -1 when the cluster is left unmatched
};

/// Best injective cluster -> label matching. Rectangular tables are zero padded.
MatchResult hungarian_accuracy(const ContingencyTable& table);

/// 100 * 2 I / (H_true + H_pred), natural log. Both entropies zero gives 100.
double nmi(const ContingencyTable& table);

struct NormalizedConfusion {
  Matrix percent;                  // rows sum to 100 where defined
  std::vector<bool> undefined_row; // true-class rows with no items
};

NormalizedConfusion confusion_normalized(const ContingencyTable& table);

struct SweepPoint {
  int k = 0;
  double nmi = 0.0;
  double accuracy = 0.0;
};

/// k-means for each k in `k_range`, scored against y_true.
std::vector<SweepPoint> granularity_sweep(const Matrix& z, std::span<const int> y_true, std::span<const int> k_range,
                                          int restarts, std::uint64_t seed);

}  // namespace biaslens
