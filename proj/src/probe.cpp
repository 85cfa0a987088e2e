#include "biaslens/probe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "biaslens/error.hpp"
#include "biaslens/parallel.hpp"
#include "biaslens/rng.hpp"

namespace biaslens {

namespace {

int class_count(std::span<const int> y) {
  int k = 0;
  for (int v : y) {
    if (v < 0) throw DataError("negative class label");
    k = std::max(k, v + 1);
  }
  return k;
}

}  // namespace

LossAndGradient probe_loss(const Matrix& x, std::span<const int> y, const Matrix& w, std::span<const double> b,
                           double l2) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  const std::size_t k = w.rows();
  LossAndGradient out{0.0, Matrix(k, d), std::vector<double>(k, 0.0)};
  std::vector<double> logits(k);
  for (std::size_t i = 0; i < n; ++i) {
    auto xi = x.row(i);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      logits[c] = dot(xi, w.row(c)) + b[c];
      mx = std::max(mx, logits[c]);
    }
    double z = 0.0;
    for (std::size_t c = 0; c < k; ++c) z += std::exp(logits[c] - mx);
    const double log_z = mx + std::log(z);
    const auto yi = static_cast<std::size_t>(y[i]);
    out.loss += log_z - logits[yi];
    for (std::size_t c = 0; c < k; ++c) {
      const double g = std::exp(logits[c] - log_z) - (c == yi ? 1.0 : 0.0);
      out.grad_b[c] += g;
      double* gw = &out.grad_w(c, 0);
      for (std::size_t j = 0; j < d; ++j) gw[j] += g * xi[j];
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  out.loss *= inv_n;
  double reg = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    out.grad_b[c] *= inv_n;
    for (std::size_t j = 0; j < d; ++j) {
      out.grad_w(c, j) = out.grad_w(c, j) * inv_n + l2 * w(c, j);
      reg += w(c, j) * w(c, j);
    }
  }
  out.loss += 0.5 * l2 * reg;
  return out;
}

ProbeModel train_linear_probe(const Matrix& x, std::span<const int> y, const ProbeConfig& cfg,
                              std::vector<std::string> classes) {
  if (x.rows() != y.size()) throw DataError("probe: label count does not match rows");
  if (x.rows() == 0) throw DataError("probe: empty training set");
  const int k = std::max(class_count(y), 2);
  std::vector<char> present(static_cast<std::size_t>(k), 0);
  for (int v : y) present[static_cast<std::size_t>(v)] = 1;
  if (std::count(present.begin(), present.end(), 1) < 2) throw DataError("probe: training labels cover a single class");
  if (x.rows() < static_cast<std::size_t>(k)) throw DataError("probe: fewer rows than classes");
  if (cfg.epochs < 1 || !(cfg.learning_rate > 0.0) || cfg.l2 < 0.0) throw UsageError("probe: invalid config");

  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  std::vector<double> mean(d, 0.0), scale(d, 1.0);
  Matrix xs = x;
  if (cfg.standardize) {
    mean = column_means(x);
    for (std::size_t j = 0; j < d; ++j) {
      double ss = 0.0;
      for (std::size_t i = 0; i < n; ++i) ss += (x(i, j) - mean[j]) * (x(i, j) - mean[j]);
      const double sd = std::sqrt(ss / static_cast<double>(n));
      scale[j] = sd > 1e-12 ? sd : 1.0;
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) xs(i, j) = (x(i, j) - mean[j]) / scale[j];
  }

  Matrix w(static_cast<std::size_t>(k), d);
  std::vector<double> b(static_cast<std::size_t>(k), 0.0);
  auto cur = probe_loss(xs, y, w, b, cfg.l2);
  ProbeModel model;
  model.loss_trace.push_back(cur.loss);
  double lr = cfg.learning_rate;
  Matrix w_try(static_cast<std::size_t>(k), d);
  std::vector<double> b_try(static_cast<std::size_t>(k));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < w.data().size(); ++i) w_try.data()[i] = w.data()[i] - lr * cur.grad_w.data()[i];
    for (std::size_t c = 0; c < b.size(); ++c) b_try[c] = b[c] - lr * cur.grad_b[c];
    auto next = probe_loss(xs, y, w_try, b_try, cfg.l2);
    if (std::isfinite(next.loss) && next.loss <= cur.loss) {
      std::swap(w, w_try);
      std::swap(b, b_try);
      cur = std::move(next);
      model.loss_trace.push_back(cur.loss);
    } else {
      lr *= 0.5;
    }
  }

  // Fold standardization into the raw-feature model.
  model.weights = Matrix(static_cast<std::size_t>(k), d);
  model.bias = b;
  for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c)
    for (std::size_t j = 0; j < d; ++j) {
      model.weights(c, j) = w(c, j) / scale[j];
      model.bias[c] -= w(c, j) * mean[j] / scale[j];
    }
  if (classes.empty())
    for (int c = 0; c < k; ++c) classes.push_back("class" + std::to_string(c));
  if (classes.size() != static_cast<std::size_t>(k)) throw UsageError("probe: class name count does not match labels");
  model.classes = std::move(classes);
  model.config = cfg;
  return model;
}

std::vector<int> probe_predict(const ProbeModel& model, const Matrix& x) {
  if (x.cols() != model.weights.cols())
    throw DataError("probe: dimension mismatch (" + std::to_string(x.cols()) + " vs " +
                    std::to_string(model.weights.cols()) + ")");
  std::vector<int> pred(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double best = -std::numeric_limits<double>::infinity();
    int arg = 0;
    for (std::size_t c = 0; c < model.weights.rows(); ++c) {
      const double s = dot(x.row(i), model.weights.row(c)) + model.bias[c];
      if (s > best) {
        best = s;
        arg = static_cast<int>(c);
      }
    }
    pred[i] = arg;
  }
  return pred;
}

ProbeEvaluation eval_probe(const ProbeModel& model, const Matrix& x, std::span<const int> y) {
  if (x.rows() != y.size()) throw DataError("probe: label count does not match rows");
  const auto pred = probe_predict(model, x);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < y.size(); ++i) hit += pred[i] == y[i];
  const auto k = model.weights.rows();
  return {static_cast<double>(hit) / static_cast<double>(y.size()), contingency(y, pred, k, k)};
}

nlohmann::json ProbeModel::to_json() const {
  return {{"classes", classes},
          {"k", weights.rows()},
          {"d", weights.cols()},
          {"weights", weights.data()},
          {"bias", bias},
          {"train_config",
           {{"learning_rate", config.learning_rate},
            {"epochs", config.epochs},
            {"l2", config.l2},
            {"seed", config.seed},
            {"standardize", config.standardize}}}};
}

ProbeModel ProbeModel::from_json(const nlohmann::json& j) {
  ProbeModel m;
  try {
    const auto k = j.at("k").get<std::size_t>();
    const auto d = j.at("d").get<std::size_t>();
    m.weights = Matrix(k, d, j.at("weights").get<std::vector<double>>());
    m.bias = j.at("bias").get<std::vector<double>>();
    m.classes = j.at("classes").get<std::vector<std::string>>();
    const auto& tc = j.at("train_config");
    m.config.learning_rate = tc.at("learning_rate").get<double>();
    m.config.epochs = tc.at("epochs").get<int>();
    m.config.l2 = tc.at("l2").get<double>();
    m.config.seed = tc.at("seed").get<std::uint64_t>();
    m.config.standardize = tc.value("standardize", true);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed probe model: ") + e.what());
  } catch (const UsageError& e) {
    throw DataError(std::string("malformed probe model: ") + e.what());
  }
  if (m.bias.size() != m.weights.rows() || m.classes.size() != m.weights.rows() || m.weights.rows() < 2)
    throw DataError("malformed probe model: inconsistent shapes");
  for (double v : m.weights.data())
    if (!std::isfinite(v)) throw DataError("malformed probe model: non-finite weight");
  return m;
}

std::vector<int> knn_classify(const Matrix& x_train, std::span<const int> y_train, const Matrix& x_test, int k) {
  if (k <= 0) throw UsageError("knn: k must be >= 1");
  if (x_train.rows() != y_train.size()) throw DataError("knn: label count does not match rows");
  if (static_cast<std::size_t>(k) > x_train.rows()) throw UsageError("knn: k exceeds training size");
  if (x_train.cols() != x_test.cols()) throw DataError("knn: dimension mismatch");
  const int classes = class_count(y_train);
  std::vector<int> pred(x_test.rows());
  parallel_for(x_test.rows(), [&](std::size_t t) {
    std::vector<std::pair<double, std::size_t>> cand(x_train.rows());
    for (std::size_t i = 0; i < x_train.rows(); ++i) cand[i] = {squared_distance(x_test.row(t), x_train.row(i)), i};
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
    std::vector<int> votes(static_cast<std::size_t>(classes), 0);
    for (int j = 0; j < k; ++j) ++votes[static_cast<std::size_t>(y_train[cand[static_cast<std::size_t>(j)].second])];
    pred[t] = static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
  });
  return pred;
}

PromptBank PromptBank::from_embeddings(const EmbeddingSet& set) {
  set.validate();
  PromptBank bank;
  bank.model_tag = set.model_tag;
  for (std::size_t c = 0; c < set.datasets.size(); ++c) {
    std::vector<double> rows;
    for (std::size_t i = 0; i < set.n; ++i) {
      if (set.labels[i] != c) continue;
      auto r = set.row(i);
      double norm = 0.0;
      for (float v : r) norm += static_cast<double>(v) * v;
      norm = std::sqrt(norm);
      if (norm == 0.0) throw DataError("prompt bank contains a zero vector");
      for (float v : r) rows.push_back(v / norm);
    }
    const std::size_t m = rows.size() / set.d;
    if (m == 0) throw DataError("prompt category '" + set.datasets[c] + "' has no prompts");
    bank.categories.push_back({set.datasets[c], Matrix(m, set.d, std::move(rows))});
  }
  return bank;
}

std::size_t PromptBank::dim() const { return categories.empty() ? 0 : categories.front().prompts.cols(); }

const std::vector<PromptTemplate>& default_prompts() {
  static const std::vector<PromptTemplate> prompts = {
      {"Person/Indoor", {"man, woman", "indoor scene", "clothing photograph"}},
      {"Commercial", {"product photograph", "logo, cartoon", "text, diagram"}},
      {"Scenic/Outdoor", {"natural view", "car, bus, truck, bike", "street, building"}},
  };
  return prompts;
}

Characterization characterize(const Matrix& images, std::span<const int> dataset_labels,
                              const std::vector<std::string>& datasets, const PromptBank& bank,
                              std::span<const char> include) {
  if (images.rows() != dataset_labels.size()) throw DataError("characterize: label count does not match rows");
  if (!include.empty() && include.size() != images.rows()) throw DataError("characterize: mask size mismatch");
  if (bank.categories.empty()) throw DataError("characterize: empty prompt bank");
  if (bank.dim() != images.cols()) throw DataError("characterize: image and prompt dimensions differ");

  Characterization out;
  out.datasets = datasets;
  for (const auto& c : bank.categories) out.categories.push_back(c.name);
  out.counts.assign(datasets.size(), std::vector<std::int64_t>(out.categories.size(), 0));
  out.assigned.assign(images.rows(), -1);

  for (std::size_t i = 0; i < images.rows(); ++i) {
    if (!include.empty() && !include[i]) continue;
    const auto label = static_cast<std::size_t>(dataset_labels[i]);
    if (label >= datasets.size()) throw DataError("characterize: dataset label out of range");
    const double norm = std::sqrt(dot(images.row(i), images.row(i)));
    if (norm == 0.0) {
      ++out.excluded_zero_norm;
      continue;
    }
    double best = -std::numeric_limits<double>::infinity();
    int arg = 0;
    for (std::size_t c = 0; c < bank.categories.size(); ++c) {
      const auto& p = bank.categories[c].prompts;
      for (std::size_t r = 0; r < p.rows(); ++r) {
        const double sim = dot(images.row(i), p.row(r)) / norm;
        if (sim > best) {
          best = sim;
          arg = static_cast<int>(c);
        }
      }
    }
    out.assigned[i] = arg;
    ++out.counts[label][static_cast<std::size_t>(arg)];
  }

  out.percent = Matrix(datasets.size(), out.categories.size());
  for (std::size_t r = 0; r < datasets.size(); ++r) {
    const auto total = std::accumulate(out.counts[r].begin(), out.counts[r].end(), std::int64_t{0});
    for (std::size_t c = 0; c < out.categories.size(); ++c)
      out.percent(r, c) = total > 0 ? 100.0 * static_cast<double>(out.counts[r][c]) / static_cast<double>(total) : 0.0;
  }
  return out;
}

Split stratified_split(std::span<const int> labels, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw UsageError("train fraction must be in (0, 1)");
  const int k = class_count(labels);
  Split s;
  for (int c = 0; c < k; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == c) members.push_back(i);
    Rng rng(derive_key(seed, {0x5971, static_cast<std::uint64_t>(c)}));
    for (std::size_t i = members.size(); i > 1; --i) std::swap(members[i - 1], members[rng.below(i)]);
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(members.size())));
    s.train.insert(s.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.test.insert(s.test.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train), members.end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

}  // namespace biaslens
