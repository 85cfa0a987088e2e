#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "biaslens/corpus.hpp"
#include "biaslens/matrix.hpp"
#include "biaslens/metrics.hpp"

namespace biaslens {

struct ProbeConfig {
  double learning_rate = 0.1;
  int epochs = 500;
  double l2 = 1e-4;
  std::uint64_t seed = 0;
  /// Train on per-feature standardized inputs; the scaling is folded back
  /// into weights and bias, so the stored model acts on raw features.
  bool standardize = true;
};

/// Multinomial logistic regression on frozen features.
struct ProbeModel {
  Matrix weights;  // k x d
  std::vector<double> bias;
  std::vector<std::string> classes;
  ProbeConfig config;
  std::vector<double> loss_trace;  // accepted losses, non-increasing

  [[nodiscard]] nlohmann::json to_json() const;
  static ProbeModel from_json(const nlohmann::json& j);
};

/// Mean cross-entropy plus (l2 / 2) |W|^2 (bias unpenalized) and its gradient.
struct LossAndGradient {
  double loss = 0.0;
  Matrix grad_w;
  std::vector<double> grad_b;
};
LossAndGradient probe_loss(const Matrix& x, std::span<const int> y, const Matrix& w, std::span<const double> b,
                           double l2);

/// Full-batch gradient descent. A step that would raise the loss is rejected
/// and the learning rate halved, so the accepted loss never increases.
ProbeModel train_linear_probe(const Matrix& x, std::span<const int> y, const ProbeConfig& cfg,
                              std::vector<std::string> classes = {});

/// Arg-max class per row, ties to the lowest class index.
std::vector<int> probe_predict(const ProbeModel& model, const Matrix& x);

struct ProbeEvaluation {
  double accuracy = 0.0;
  ContingencyTable confusion;  // true x predicted
};
ProbeEvaluation eval_probe(const ProbeModel& model, const Matrix& x, std::span<const int> y);

/// Euclidean k-NN majority vote. Distance ties go to the lower training index,
/// vote ties to the lowest class index.
std::vector<int> knn_classify(const Matrix& x_train, std::span<const int> y_train, const Matrix& x_test, int k);

/// Text-prompt embeddings grouped by semantic category. Rows are unit norm.
struct PromptBank {
  struct Category {
    std::string name;
    Matrix prompts;  // m x d
  };
  std::vector<Category> categories;
  std::string model_tag;

  /// Categories from the dataset list, prompt rows grouped by label (normalized to unit length).
  static PromptBank from_embeddings(const EmbeddingSet& set);
  [[nodiscard]] std::size_t dim() const;
};

/// The nine default prompts, three per category.
struct PromptTemplate {
  std::string category;
  std::vector<std::string> prompts;
};
const std::vector<PromptTemplate>& default_prompts();

struct Characterization {
  std::vector<std::string> datasets;
  std::vector<std::string> categories;
  Matrix percent;                          // datasets x categories, rows sum to 100 where counted
  std::vector<std::vector<std::int64_t>> counts;
  std::size_t excluded_zero_norm = 0;
  std::vector<int> assigned;               // per image, -1 when excluded or masked
};

/// Assigns each image to the category of its most cosine-similar prompt and
/// aggregates per dataset. `include` (optional) masks which rows take part.
Characterization characterize(const Matrix& images, std::span<const int> dataset_labels,
                              const std::vector<std::string>& datasets, const PromptBank& bank,
                              std::span<const char> include = {});

/// Stratified split: for each class, the first `train_fraction` of a seeded
/// permutation goes to training. Returns sorted train and test index lists.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};
Split stratified_split(std::span<const int> labels, double train_fraction, std::uint64_t seed);

}  // namespace biaslens
