#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "biaslens/cluster.hpp"
#include "biaslens/corpus.hpp"
#include "biaslens/imglab.hpp"
#include "biaslens/metrics.hpp"
#include "biaslens/probe.hpp"
#include "biaslens/reduce.hpp"

namespace biaslens {

inline constexpr const char* kToolkitVersion = "biaslens 0.1.0";

struct ExperimentConfig {
  ReductionConfig reduction;
  int k = 0;  // 0 means one cluster per dataset
  int restarts = 100;
  std::vector<std::uint64_t> seeds{0};
  Algorithm algorithm = Algorithm::kmeans;
  std::string report_path;

  void validate() const;
  [[nodiscard]] nlohmann::json to_json() const;
};

/// FNV-1a 64 of the canonical JSON text, as 16 hex digits.
std::string config_hash(const nlohmann::json& config);

/// Fixed method choices recorded with every report.
nlohmann::json provenance();

struct Spread {
  double mean = 0.0;
  double stddev = 0.0;  // population
  double min = 0.0;
  double max = 0.0;

  static Spread of(std::span<const double> values);
  [[nodiscard]] nlohmann::json to_json() const;
};

struct SeedOutcome {
  std::uint64_t seed = 0;
  double accuracy_pct = 0.0;
  double nmi_pct = 0.0;
  ContingencyTable table;
  MatchResult match;
  std::vector<int> assignments;
};

/// reduce -> cluster -> Hungarian accuracy + NMI for one seed.
SeedOutcome cluster_and_score(const Matrix& x, std::span<const int> labels, int k, ReductionConfig reduction,
                              Algorithm algorithm, int restarts, std::uint64_t seed);

struct AssessmentReport {
  std::string config_hash;
  nlohmann::json config;
  std::vector<std::string> datasets;
  std::string model_tag;
  int k = 0;
  std::vector<SeedOutcome> per_seed;
  Spread accuracy_pct;
  Spread nmi_pct;

  [[nodiscard]] nlohmann::json to_json() const;
};

/// Unsupervised semantic-bias assessment over every configured seed.
AssessmentReport assess_semantic_bias(const EmbeddingSet& set, const ExperimentConfig& cfg);

struct RobustnessCell {
  Backend backend = Backend::umap;
  Algorithm algorithm = Algorithm::kmeans;
  int dims = 0;
  Spread accuracy_pct;
  Spread nmi_pct;
  double deviation = 0.0;  // |accuracy - row median|, points
  bool flagged = false;
};

struct RobustnessTable {
  std::string config_hash;
  nlohmann::json config;
  std::vector<RobustnessCell> cells;  // rows are (backend, algorithm), columns are dims
  double max_deviation = 0.0;
  std::size_t flag_count = 0;
  double flag_threshold = 5.0;

  [[nodiscard]] nlohmann::json to_json() const;
};

/// Cross product of dims x backends x algorithms. A row is one
/// (backend, algorithm) pair across dims; cells further than
/// `flag_threshold` accuracy points from their row median are flagged.
RobustnessTable robustness_matrix(const EmbeddingSet& set, std::span<const int> dims,
                                  std::span<const Backend> backends, std::span<const Algorithm> algorithms,
                                  const ExperimentConfig& base, double flag_threshold = 5.0);

struct ArtifactConfig {
  int res_a = 100;
  int res_b = 640;
  int n_per = 600;
  int final_side = 64;
  int mid = 0;  // 0 means final_side / 2
  std::uint64_t seed = 0;
  std::vector<TextureKind> kinds{TextureKind::value_noise, TextureKind::blob_field, TextureKind::stripe_warp};
  ProbeConfig probe;
  ExperimentConfig clustering;
  int residual_sample = 64;  // images per corpus used for the mean |residual|
  bool run_clustering = true;
  bool run_two_step = true;
  bool allow_equal_resolutions = false;  // control runs only

  [[nodiscard]] nlohmann::json to_json() const;
};

struct ArtifactReport {
  std::string config_hash;
  nlohmann::json config;
  double probe_accuracy = 0.0;           // one-step test accuracy
  double probe_train_accuracy = 0.0;
  std::optional<double> two_step_probe_accuracy;
  std::optional<double> clustering_accuracy;
  std::optional<double> clustering_nmi_pct;
  double residual_mean_abs_a = 0.0;
  double residual_mean_abs_b = 0.0;
  ContingencyTable probe_confusion;

  [[nodiscard]] nlohmann::json to_json() const;
};

/// Two fake corpora from one texture process at native sizes res_a^2 and
/// res_b^2, resized to final_side^2 and featurized as raw pixels. Reports a
/// linear probe (2:1 stratified split), the unsupervised pipeline, the
/// two-step resize ablation and the mean absolute residual per corpus.
ArtifactReport artifact_channel_experiment(const ArtifactConfig& cfg);

struct TwoCorpusConfig {
  ExperimentConfig clustering;
  ProbeConfig probe;
  int knn_k = 10;
  double train_fraction = 2.0 / 3.0;
  std::uint64_t seed = 0;
};

struct MethodRow {
  std::string method;
  double accuracy_pct = 0.0;
  std::optional<double> nmi_pct;
};

struct TwoCorpusReport {
  std::string config_hash;
  nlohmann::json config;
  std::vector<MethodRow> rows;  // random chance, linear probe, k-NN, clustering

  [[nodiscard]] nlohmann::json to_json() const;
};

/// Merges A (label 0) and B (label 1), then compares supervised separability
/// (probe and k-NN on a held-out split) against unsupervised clustering.
TwoCorpusReport two_corpus_probe_vs_cluster(const EmbeddingSet& a, const EmbeddingSet& b, const TwoCorpusConfig& cfg);

}  // namespace biaslens
