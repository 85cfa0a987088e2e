#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "biaslens/matrix.hpp"

namespace biaslens {

enum class Algorithm : std::uint8_t { kmeans, ward };

std::string_view to_string(Algorithm a);
Algorithm parse_algorithm(std::string_view name);

struct ClusterResult {
  std::vector<int> assignments;
  Matrix centroids;  // k x d cluster means
  double objective = 0.0;
  int k = 0;
  int restarts = 1;
  std::uint64_t seed = 0;
  Algorithm algorithm = Algorithm::kmeans;
  std::vector<double> restart_objectives;  // k-means only
  int best_restart = 0;
};

/// One Lloyd run from k-means++ seeding. Exposed for inspection and tests.
struct LloydRun {
  std::vector<int> assignments;
  Matrix centroids;
  double objective = 0.0;
  int iterations = 0;
  std::vector<double> trace;  // objective after every centroid update
};

constexpr int kMaxLloydIterations = 300;

/// k-means++ seeding followed by Lloyd iteration until the assignment is a
/// fixpoint (or kMaxLloydIterations).
///
/// Seeding randomness is keyed on (seed, restart, step, row content) rather
/// than row position, so permuting the input permutes the output. Assignment
/// ties go to the lowest cluster index. Empty clusters are re-seeded with the
/// point farthest from its centroid.
LloydRun lloyd_run(const Matrix& z, int k, std::uint64_t seed, int restart);

/// Best of `restarts` Lloyd runs by objective. Objectives within 1e-12
/// relative are treated as tied and the lower restart index wins.
ClusterResult kmeans(const Matrix& z, int k, int restarts, std::uint64_t seed);

/// Sum of squared distances from each row to its assigned centroid.
double clustering_objective(const Matrix& z, std::span<const int> assignments, const Matrix& centroids);

/// Cluster means for a given assignment (k x d). Empty clusters get zero rows.
Matrix cluster_means(const Matrix& z, std::span<const int> assignments, int k);

struct WardMerge {
  int a = 0;  // cluster ids are the lowest original index of their members
  int b = 0;
  double cost = 0.0;  // n_a n_b / (n_a + n_b) * |c_a - c_b|^2
  int size = 0;       // size of the merged cluster
};

struct WardResult {
  ClusterResult clusters;
  std::vector<WardMerge> merges;
};

/// Greedy agglomeration minimizing the Ward increase until k clusters remain.
/// Ties are broken by the lexicographically smallest (id_a, id_b) pair.
WardResult ward_linkage(const Matrix& z, int k);
ClusterResult ward(const Matrix& z, int k);

/// Renumbers clusters by order of first appearance.
std::vector<int> relabel_canonical(std::span<const int> assignments);
ClusterResult relabel_canonical(const ClusterResult& result);

}  // namespace biaslens
