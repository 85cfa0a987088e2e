#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "biaslens/matrix.hpp"

namespace biaslens {

enum class Backend : std::uint8_t { umap, pca, none };

std::string_view to_string(Backend b);
Backend parse_backend(std::string_view name);

struct ReductionConfig {
  Backend backend = Backend::umap;
  int out_dim = 20;
  int umap_neighbors = 15;
  double umap_min_dist = 0.1;
  int umap_epochs = 200;
  std::uint64_t seed = 0;

  /// Throws UsageError when out_dim exceeds `input_dim` or other fields are out of range.
  void validate(std::size_t input_dim) const;
  /// Compact description recorded as the model tag of reduced matrices.
  [[nodiscard]] std::string describe() const;
};

struct PcaModel {
  std::vector<double> mean;
  Matrix components;  // out_dim x d, orthonormal rows
  std::vector<double> explained_variance;
  bool rank_deficient = false;  // fewer than out_dim positive eigenvalues
};

/// Eigenvalues in descending order and the matching eigenvectors as rows.
struct SymmetricEigen {
  std::vector<double> values;
  Matrix vectors;
};
/// Householder tridiagonalization followed by implicit QL.
SymmetricEigen symmetric_eigen(Matrix a);
/// Cyclic Jacobi rotations. Slower, kept as an independent cross-check.
SymmetricEigen jacobi_eigen(Matrix a, double rel_tol = 1e-12, int max_sweeps = 100);

/// Top eigenvectors of the sample covariance (1/(n-1) normalization). Each
/// component's largest-magnitude entry is made positive.
PcaModel pca_fit(const Matrix& x, int out_dim);

/// (x - mean) * components^T.
Matrix pca_transform(const PcaModel& model, const Matrix& x);

/// Parameters of the low-dimensional similarity 1 / (1 + a d^(2b)), fitted to
/// the min_dist-offset exponential by least squares (spread 1).
struct CurveParams {
  double a = 0.0;
  double b = 0.0;
};
CurveParams fit_umap_curve(double min_dist, double spread = 1.0);

/// Exact k-NN graph (row i lists its k nearest rows, itself first).
struct KnnGraph {
  std::size_t k = 0;
  std::vector<std::size_t> index;  // n * k
  std::vector<double> distance;    // n * k, Euclidean
};
KnnGraph exact_knn(const Matrix& x, std::size_t k);

/// Symmetric fuzzy graph as a weighted edge list (i, j, w) containing both directions.
struct FuzzyEdge {
  std::size_t head = 0;
  std::size_t tail = 0;
  double weight = 0.0;
};
std::vector<FuzzyEdge> fuzzy_simplicial_set(const KnnGraph& knn, std::size_t n);

/// UMAP: exact k-NN, per-point sigma search, fuzzy union, then a
/// negative-sampling SGD layout from a uniform [-10, 10] initialization.
/// The layout runs in a fixed edge order with counter-based negative
/// sampling, so the output depends only on the input and the config.
Matrix umap_embed(const Matrix& x, const ReductionConfig& cfg);

/// Dispatch on cfg.backend. `none` returns x unchanged.
Matrix reduce(const Matrix& x, const ReductionConfig& cfg);

}  // namespace biaslens
