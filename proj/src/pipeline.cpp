#include "biaslens/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

#include "biaslens/error.hpp"
#include "biaslens/parallel.hpp"
#include "biaslens/rng.hpp"

namespace biaslens {

namespace {

nlohmann::json reduction_json(const ReductionConfig& r) {
  return {{"backend", to_string(r.backend)},
          {"out_dim", r.out_dim},
          {"umap_neighbors", r.umap_neighbors},
          {"umap_min_dist", r.umap_min_dist},
          {"umap_epochs", r.umap_epochs}};
}

nlohmann::json probe_json(const ProbeConfig& p) {
  return {{"learning_rate", p.learning_rate},
          {"epochs", p.epochs},
          {"l2", p.l2},
          {"seed", p.seed},
          {"standardize", p.standardize}};
}

nlohmann::json cell(nlohmann::json settings, double accuracy_pct, std::optional<double> nmi_pct,
                    nlohmann::json spread) {
  return {{"settings", std::move(settings)},
          {"accuracy_pct", accuracy_pct},
          {"nmi_pct", nmi_pct ? nlohmann::json(*nmi_pct) : nlohmann::json(nullptr)},
          {"spread", std::move(spread)}};
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

int resolve_k(int k, std::size_t datasets) { return k > 0 ? k : static_cast<int>(datasets); }

}  // namespace

void ExperimentConfig::validate() const {
  if (restarts < 1) throw UsageError("restarts must be >= 1");
  if (seeds.empty()) throw UsageError("at least one seed is required");
  if (k < 0) throw UsageError("k must be positive or auto");
}

nlohmann::json ExperimentConfig::to_json() const {
  return {{"reduction", reduction_json(reduction)},
          {"k", k > 0 ? nlohmann::json(k) : nlohmann::json("auto")},
          {"restarts", restarts},
          {"seeds", seeds},
          {"algorithm", to_string(algorithm)}};
}

std::string config_hash(const nlohmann::json& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json provenance() {
  return {{"toolkit", kToolkitVersion},
          {"kmeans_init", "k-means++ (content-keyed exponential race)"},
          {"kmeans_convergence", "assignment fixpoint or 300 iterations"},
          {"kmeans_empty_cluster", "re-seed with the point farthest from its centroid"},
          {"ward", "greedy minimum Ward increase, ties by lowest cluster ids"},
          {"accuracy", "Hungarian matching on zero-padded contingency table"},
          {"nmi", "2I/(H_true+H_pred), natural log, percent"},
          {"interpolation", "bilinear, align-corners=false, edge clamp, no antialias"},
          {"kde", "Gaussian kernel, Silverman bandwidth"}};
}

Spread Spread::of(std::span<const double> values) {
  Spread s;
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(ss / static_cast<double>(values.size()));
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  s.min = *mn;
  s.max = *mx;
  return s;
}

nlohmann::json Spread::to_json() const { return {{"mean", mean}, {"std", stddev}, {"min", min}, {"max", max}}; }

SeedOutcome cluster_and_score(const Matrix& x, std::span<const int> labels, int k, ReductionConfig reduction,
                              Algorithm algorithm, int restarts, std::uint64_t seed) {
  reduction.seed = seed;
  const Matrix z = reduce(x, reduction);
  const ClusterResult res = algorithm == Algorithm::kmeans ? kmeans(z, k, restarts, seed) : ward(z, k);
  SeedOutcome out;
  out.seed = seed;
  out.table = contingency(labels, res.assignments);
  out.match = hungarian_accuracy(out.table);
  out.accuracy_pct = 100.0 * out.match.accuracy;
  out.nmi_pct = nmi(out.table);
  out.assignments = res.assignments;
  return out;
}

nlohmann::json AssessmentReport::to_json() const {
  nlohmann::json seeds = nlohmann::json::array();
  for (const auto& s : per_seed)
    seeds.push_back({{"seed", s.seed},
                     {"accuracy_pct", s.accuracy_pct},
                     {"nmi_pct", s.nmi_pct},
                     {"contingency", {{"rows", s.table.rows()}, {"cols", s.table.cols()}, {"counts", s.table.counts()}}},
                     {"mapping", s.match.mapping}});
  nlohmann::json settings = config;
  settings["k_resolved"] = k;
  return {{"experiment", "assess_semantic_bias"},
          {"config_hash", config_hash},
          {"cells", {cell(settings, accuracy_pct.mean, nmi_pct.mean,
                          {{"accuracy_pct", accuracy_pct.to_json()}, {"nmi_pct", nmi_pct.to_json()}})}},
          {"per_seed", seeds},
          {"datasets", datasets},
          {"provenance", [&] {
             auto p = provenance();
             p["input_model_tag"] = model_tag;
             return p;
           }()}};
}

AssessmentReport assess_semantic_bias(const EmbeddingSet& set, const ExperimentConfig& cfg) {
  set.validate();
  cfg.validate();
  if (set.datasets.size() < 2) throw DataError("assessment needs at least two datasets");
  AssessmentReport rep;
  rep.k = resolve_k(cfg.k, set.datasets.size());
  rep.config = cfg.to_json();
  rep.config["input"] = {{"n", set.n}, {"d", set.d}, {"model_tag", set.model_tag}};
  rep.config_hash = config_hash(rep.config);
  rep.datasets = set.datasets;
  rep.model_tag = set.model_tag;

  const Matrix x = set.to_matrix();
  const auto labels = set.label_vector();
  std::vector<double> acc, nm;
  for (auto seed : cfg.seeds) {
    rep.per_seed.push_back(cluster_and_score(x, labels, rep.k, cfg.reduction, cfg.algorithm, cfg.restarts, seed));
    acc.push_back(rep.per_seed.back().accuracy_pct);
    nm.push_back(rep.per_seed.back().nmi_pct);
  }
  rep.accuracy_pct = Spread::of(acc);
  rep.nmi_pct = Spread::of(nm);
  return rep;
}

nlohmann::json RobustnessTable::to_json() const {
  nlohmann::json cs = nlohmann::json::array();
  for (const auto& c : cells) {
    auto j = cell({{"backend", to_string(c.backend)}, {"algorithm", to_string(c.algorithm)}, {"dims", c.dims}},
                  c.accuracy_pct.mean, c.nmi_pct.mean,
                  {{"accuracy_pct", c.accuracy_pct.to_json()}, {"nmi_pct", c.nmi_pct.to_json()}});
    j["deviation_from_row_median"] = c.deviation;
    j["flagged"] = c.flagged;
    cs.push_back(std::move(j));
  }
  return {{"experiment", "robustness_matrix"},
          {"config_hash", config_hash},
          {"config", config},
          {"cells", cs},
          {"max_deviation", max_deviation},
          {"flag_threshold", flag_threshold},
          {"flag_count", flag_count},
          {"provenance", provenance()}};
}

RobustnessTable robustness_matrix(const EmbeddingSet& set, std::span<const int> dims,
                                  std::span<const Backend> backends, std::span<const Algorithm> algorithms,
                                  const ExperimentConfig& base, double flag_threshold) {
  set.validate();
  base.validate();
  if (dims.empty() || backends.empty() || algorithms.empty()) throw UsageError("robustness lists must be non-empty");
  RobustnessTable t;
  t.flag_threshold = flag_threshold;
  t.config = base.to_json();
  t.config["dims"] = std::vector<int>(dims.begin(), dims.end());
  t.config["backends"] = nlohmann::json::array();
  for (auto b : backends) t.config["backends"].push_back(to_string(b));
  t.config["algorithms"] = nlohmann::json::array();
  for (auto a : algorithms) t.config["algorithms"].push_back(to_string(a));
  t.config["input"] = {{"n", set.n}, {"d", set.d}, {"model_tag", set.model_tag}};
  t.config_hash = config_hash(t.config);

  const Matrix x = set.to_matrix();
  const auto labels = set.label_vector();
  const int k = resolve_k(base.k, set.datasets.size());

  for (auto backend : backends) {
    for (int dim : dims) {
      ReductionConfig rc = base.reduction;
      rc.backend = backend;
      rc.out_dim = dim;
      rc.validate(set.d);
      // One reduction per (backend, dim, seed), shared by all algorithms.
      std::vector<Matrix> reduced;
      for (auto seed : base.seeds) {
        rc.seed = seed;
        reduced.push_back(reduce(x, rc));
      }
      for (auto algorithm : algorithms) {
        std::vector<double> acc, nm;
        for (std::size_t s = 0; s < base.seeds.size(); ++s) {
          const auto res = algorithm == Algorithm::kmeans ? kmeans(reduced[s], k, base.restarts, base.seeds[s])
                                                          : ward(reduced[s], k);
          const auto table = contingency(labels, res.assignments);
          acc.push_back(100.0 * hungarian_accuracy(table).accuracy);
          nm.push_back(nmi(table));
        }
        t.cells.push_back({backend, algorithm, dim, Spread::of(acc), Spread::of(nm)});
      }
    }
  }
  // Cells were produced backend-major, dims, then algorithm; order rows as (backend, algorithm) x dims.
  std::stable_sort(t.cells.begin(), t.cells.end(), [](const RobustnessCell& l, const RobustnessCell& r) {
    return std::make_tuple(static_cast<int>(l.backend), static_cast<int>(l.algorithm)) <
           std::make_tuple(static_cast<int>(r.backend), static_cast<int>(r.algorithm));
  });
  for (std::size_t start = 0; start < t.cells.size(); start += dims.size()) {
    std::vector<double> row;
    for (std::size_t i = start; i < start + dims.size(); ++i) row.push_back(t.cells[i].accuracy_pct.mean);
    const double med = median(row);
    for (std::size_t i = start; i < start + dims.size(); ++i) {
      auto& c = t.cells[i];
      c.deviation = std::abs(c.accuracy_pct.mean - med);
      c.flagged = c.deviation > flag_threshold;
      t.max_deviation = std::max(t.max_deviation, c.deviation);
      t.flag_count += c.flagged;
    }
  }
  return t;
}

nlohmann::json ArtifactConfig::to_json() const {
  nlohmann::json k = nlohmann::json::array();
  for (auto kind : kinds) k.push_back(to_string(kind));
  return {{"res_a", res_a},
          {"res_b", res_b},
          {"n_per", n_per},
          {"final_side", final_side},
          {"mid", mid > 0 ? mid : final_side / 2},
          {"seed", seed},
          {"texture_kinds", k},
          {"probe", probe_json(probe)},
          {"clustering", clustering.to_json()},
          {"residual_sample", residual_sample},
          {"run_clustering", run_clustering},
          {"run_two_step", run_two_step},
          {"split", "2:1 stratified"}};
}

nlohmann::json ArtifactReport::to_json() const {
  nlohmann::json cells = nlohmann::json::array();
  cells.push_back(cell({{"method", "linear probe"}, {"resize", "one-step"}}, 100.0 * probe_accuracy, std::nullopt,
                       {{"train_accuracy_pct", 100.0 * probe_train_accuracy}}));
  if (two_step_probe_accuracy)
    cells.push_back(cell({{"method", "linear probe"}, {"resize", "two-step"}}, 100.0 * *two_step_probe_accuracy,
                         std::nullopt, nullptr));
  if (clustering_accuracy)
    cells.push_back(cell({{"method", "clustering"}, {"resize", "one-step"}}, 100.0 * *clustering_accuracy,
                         clustering_nmi_pct, nullptr));
  return {{"experiment", "artifact_channel"},
          {"config_hash", config_hash},
          {"config", config},
          {"cells", cells},
          {"residual_mean_abs", {{"corpus_a", residual_mean_abs_a}, {"corpus_b", residual_mean_abs_b}}},
          {"probe_confusion",
           {{"rows", probe_confusion.rows()}, {"cols", probe_confusion.cols()}, {"counts", probe_confusion.counts()}}},
          {"provenance", provenance()}};
}

ArtifactReport artifact_channel_experiment(const ArtifactConfig& cfg) {
  if (cfg.res_a < 8 || cfg.res_b < 8 || cfg.final_side < 2) throw UsageError("artifact: sizes out of range");
  if (cfg.res_a == cfg.res_b && !cfg.allow_equal_resolutions) throw UsageError("artifact: resolutions must differ");
  if (cfg.n_per < 100 && !cfg.allow_equal_resolutions) throw UsageError("artifact: n_per must be >= 100");
  if (cfg.kinds.empty()) throw UsageError("artifact: no texture kinds");
  const int mid = cfg.mid > 0 ? cfg.mid : std::max(1, cfg.final_side / 2);

  const auto per = static_cast<std::size_t>(cfg.n_per);
  const std::size_t n = 2 * per;
  const std::size_t dim = static_cast<std::size_t>(cfg.final_side) * cfg.final_side * 3;
  Matrix one(n, dim);
  Matrix two(cfg.run_two_step ? n : 0, cfg.run_two_step ? dim : 0);
  std::vector<double> residual(n, -1.0);
  std::vector<int> labels(n);

  parallel_for(n, [&](std::size_t i) {
    const std::size_t corpus = i / per;
    const std::size_t j = i % per;
    const int res = corpus == 0 ? cfg.res_a : cfg.res_b;
    FakeSpec spec{res, res, cfg.kinds[j % cfg.kinds.size()], derive_key(cfg.seed, {0xfa4e, corpus, j}), 3};
    const Image native = gen_fake(spec);
    labels[i] = static_cast<int>(corpus);
    const auto f1 = pixel_features(resize_bilinear(native, cfg.final_side, cfg.final_side), cfg.final_side);
    std::copy(f1.begin(), f1.end(), one.row(i).begin());
    if (cfg.run_two_step) {
      const auto f2 = pixel_features(two_step_resize(native, mid, cfg.final_side), cfg.final_side);
      std::copy(f2.begin(), f2.end(), two.row(i).begin());
    }
    if (j < static_cast<std::size_t>(cfg.residual_sample))
      residual[i] = residual_image(native, cfg.final_side).mean_abs();
  });

  ArtifactReport rep;
  rep.config = cfg.to_json();
  rep.config_hash = config_hash(rep.config);
  double sum_a = 0, sum_b = 0;
  std::size_t cnt_a = 0, cnt_b = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (residual[i] < 0) continue;
    (i < per ? sum_a : sum_b) += residual[i];
    ++(i < per ? cnt_a : cnt_b);
  }
  rep.residual_mean_abs_a = cnt_a ? sum_a / static_cast<double>(cnt_a) : 0.0;
  rep.residual_mean_abs_b = cnt_b ? sum_b / static_cast<double>(cnt_b) : 0.0;

  const auto split = stratified_split(labels, 2.0 / 3.0, cfg.seed);
  std::vector<int> y_train, y_test;
  for (auto i : split.train) y_train.push_back(labels[i]);
  for (auto i : split.test) y_test.push_back(labels[i]);
  const std::vector<std::string> classes{"res" + std::to_string(cfg.res_a), "res" + std::to_string(cfg.res_b)};

  auto probe_on = [&](const Matrix& feats, ArtifactReport* full) {
    const Matrix train = feats.select_rows(split.train);
    const auto model = train_linear_probe(train, y_train, cfg.probe, classes);
    const auto ev = eval_probe(model, feats.select_rows(split.test), y_test);
    if (full) {
      full->probe_train_accuracy = eval_probe(model, train, y_train).accuracy;
      full->probe_confusion = ev.confusion;
    }
    return ev.accuracy;
  };
  rep.probe_accuracy = probe_on(one, &rep);
  if (cfg.run_two_step) rep.two_step_probe_accuracy = probe_on(two, nullptr);

  if (cfg.run_clustering) {
    const auto seed = cfg.clustering.seeds.empty() ? cfg.seed : cfg.clustering.seeds.front();
    const auto out = cluster_and_score(one, labels, 2, cfg.clustering.reduction, cfg.clustering.algorithm,
                                       cfg.clustering.restarts, seed);
    rep.clustering_accuracy = out.accuracy_pct / 100.0;
    rep.clustering_nmi_pct = out.nmi_pct;
  }
  return rep;
}

nlohmann::json TwoCorpusReport::to_json() const {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& r : rows) cells.push_back(cell({{"method", r.method}}, r.accuracy_pct, r.nmi_pct, nullptr));
  return {{"experiment", "two_corpus_probe_vs_cluster"},
          {"config_hash", config_hash},
          {"config", config},
          {"cells", cells},
          {"provenance", provenance()}};
}

TwoCorpusReport two_corpus_probe_vs_cluster(const EmbeddingSet& a, const EmbeddingSet& b, const TwoCorpusConfig& cfg) {
  a.validate();
  b.validate();
  if (a.d != b.d) throw DataError("two-corpus comparison needs equal dimensions");
  cfg.clustering.validate();

  EmbeddingSet merged;
  merged.n = a.n + b.n;
  merged.d = a.d;
  merged.vectors = a.vectors;
  merged.vectors.insert(merged.vectors.end(), b.vectors.begin(), b.vectors.end());
  merged.labels.assign(a.n, 0);
  merged.labels.insert(merged.labels.end(), b.n, 1);
  merged.datasets = {"A:" + a.model_tag, "B:" + b.model_tag};
  merged.model_tag = a.model_tag + "|" + b.model_tag;

  TwoCorpusReport rep;
  rep.config = {{"clustering", cfg.clustering.to_json()},
                {"probe", probe_json(cfg.probe)},
                {"knn_k", cfg.knn_k},
                {"train_fraction", cfg.train_fraction},
                {"seed", cfg.seed},
                {"input", {{"n_a", a.n}, {"n_b", b.n}, {"d", a.d}}}};
  rep.config_hash = config_hash(rep.config);

  const Matrix x = merged.to_matrix();
  const auto labels = merged.label_vector();
  const auto split = stratified_split(labels, cfg.train_fraction, cfg.seed);
  std::vector<int> y_train, y_test;
  for (auto i : split.train) y_train.push_back(labels[i]);
  for (auto i : split.test) y_test.push_back(labels[i]);
  const Matrix x_train = x.select_rows(split.train);
  const Matrix x_test = x.select_rows(split.test);

  rep.rows.push_back({"random chance", 50.0, std::nullopt});
  const auto model = train_linear_probe(x_train, y_train, cfg.probe, merged.datasets);
  rep.rows.push_back({"linear probe", 100.0 * eval_probe(model, x_test, y_test).accuracy, std::nullopt});
  const auto knn = knn_classify(x_train, y_train, x_test, cfg.knn_k);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < knn.size(); ++i) hit += knn[i] == y_test[i];
  rep.rows.push_back({"k-NN", 100.0 * static_cast<double>(hit) / static_cast<double>(knn.size()), std::nullopt});

  ExperimentConfig cc = cfg.clustering;
  cc.k = 2;
  const auto assessed = assess_semantic_bias(merged, cc);
  rep.rows.push_back({"clustering", assessed.accuracy_pct.mean, assessed.nmi_pct.mean});
  return rep;
}

}  // namespace biaslens
