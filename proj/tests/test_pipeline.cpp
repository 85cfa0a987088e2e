#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "biaslens/error.hpp"
#include "biaslens/pipeline.hpp"
#include "biaslens/rng.hpp"

using namespace biaslens;

namespace {

EmbeddingSet planted(std::uint64_t seed, std::size_t per, std::size_t k, std::size_t d, double sep) {
  Rng rng(seed);
  EmbeddingSet s;
  s.n = per * k;
  s.d = d;
  s.model_tag = "synthetic";
  for (std::size_t c = 0; c < k; ++c) s.datasets.push_back("set" + std::to_string(c));
  for (std::size_t i = 0; i < s.n; ++i) {
    const auto c = static_cast<std::uint16_t>(i / per);
    s.labels.push_back(c);
    for (std::size_t j = 0; j < d; ++j) s.vectors.push_back(static_cast<float>(rng.normal() + (j == c ? sep : 0.0)));
  }
  return s;
}

EmbeddingSet null_set(std::uint64_t seed, std::size_t n, std::size_t k, std::size_t d) {
  Rng rng(seed);
  EmbeddingSet s;
  s.n = n;
  s.d = d;
  s.model_tag = "synthetic";
  for (std::size_t c = 0; c < k; ++c) s.datasets.push_back("set" + std::to_string(c));
  for (std::size_t i = 0; i < n; ++i) {
    s.labels.push_back(static_cast<std::uint16_t>(rng.below(k)));
    for (std::size_t j = 0; j < d; ++j) s.vectors.push_back(static_cast<float>(rng.normal()));
  }
  return s;
}

ExperimentConfig fast_config(Backend b, Algorithm a) {
  ExperimentConfig cfg;
  cfg.reduction.backend = b;
  cfg.reduction.out_dim = 10;
  cfg.algorithm = a;
  cfg.restarts = 10;
  return cfg;
}

}  // namespace

TEST_CASE("planted blobs are recovered by every backend and algorithm") {
  const auto set = planted(1, 150, 3, 32, 8.0);
  for (auto b : {Backend::umap, Backend::pca, Backend::none})
    for (auto a : {Algorithm::kmeans, Algorithm::ward}) {
      const auto r = assess_semantic_bias(set, fast_config(b, a));
      CHECK(r.k == 3);
      CHECK(r.accuracy_pct.mean >= 99.0);
      CHECK(r.nmi_pct.mean >= 95.0);
    }
}

TEST_CASE("identically distributed datasets stay near chance") {
  const auto set = null_set(2, 1500, 3, 16);
  auto cfg = fast_config(Backend::pca, Algorithm::kmeans);
  cfg.seeds = {0, 1, 2};
  const auto r = assess_semantic_bias(set, cfg);
  MESSAGE("null accuracy " << r.accuracy_pct.mean << " nmi " << r.nmi_pct.mean);
  CHECK(std::abs(r.accuracy_pct.mean - 100.0 / 3.0) <= 3.0);
  CHECK(r.nmi_pct.mean <= 2.0);
  CHECK(r.per_seed.size() == 3);
  CHECK(r.accuracy_pct.min <= r.accuracy_pct.mean);
  CHECK(r.accuracy_pct.max >= r.accuracy_pct.mean);
}

TEST_CASE("assessment validates its inputs") {
  auto set = planted(3, 20, 2, 4, 5.0);
  ExperimentConfig cfg = fast_config(Backend::none, Algorithm::kmeans);
  cfg.seeds.clear();
  CHECK_THROWS_AS(assess_semantic_bias(set, cfg), UsageError);
  cfg = fast_config(Backend::none, Algorithm::kmeans);
  cfg.restarts = 0;
  CHECK_THROWS_AS(assess_semantic_bias(set, cfg), UsageError);
  set.datasets.resize(1);
  for (auto& l : set.labels) l = 0;
  CHECK_THROWS_AS(assess_semantic_bias(set, fast_config(Backend::none, Algorithm::kmeans)), DataError);
}

TEST_CASE("report JSON is byte-identical across runs and carries the schema") {
  const auto set = planted(4, 60, 3, 12, 4.0);
  auto cfg = fast_config(Backend::umap, Algorithm::kmeans);
  cfg.seeds = {0, 7};
  const auto a = assess_semantic_bias(set, cfg).to_json().dump();
  const auto b = assess_semantic_bias(set, cfg).to_json().dump();
  CHECK(a == b);
  const auto j = nlohmann::json::parse(a);
  for (const char* key : {"experiment", "config_hash", "cells", "provenance"}) CHECK(j.contains(key));
  REQUIRE(j["cells"].size() == 1);
  for (const char* key : {"settings", "accuracy_pct", "nmi_pct", "spread"}) CHECK(j["cells"][0].contains(key));
  auto hashed = cfg.to_json();
  hashed["input"] = {{"n", set.n}, {"d", set.d}, {"model_tag", set.model_tag}};
  CHECK(j["config_hash"] == config_hash(hashed));
  CHECK(a.find("time") == std::string::npos);
}

TEST_CASE("config hash is FNV-1a of the canonical dump") {
  const nlohmann::json empty = nlohmann::json::object();
  // FNV-1a 64 of "{}"
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : std::string("{}")) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  CHECK(config_hash(empty) == hex);
  ExperimentConfig a, b;
  b.restarts = 99;
  CHECK(config_hash(a.to_json()) != config_hash(b.to_json()));
}

TEST_CASE("spread statistics") {
  const std::vector<double> v{1.0, 2.0, 3.0, 6.0};
  const auto s = Spread::of(v);
  CHECK(s.mean == doctest::Approx(3.0));
  CHECK(s.stddev == doctest::Approx(std::sqrt(3.5)));
  CHECK(s.min == 1.0);
  CHECK(s.max == 6.0);
}

TEST_CASE("1x1 robustness matrix equals the assessment") {
  const auto set = planted(5, 80, 3, 12, 3.0);
  auto cfg = fast_config(Backend::pca, Algorithm::ward);
  cfg.reduction.out_dim = 6;
  const std::vector<int> dims{6};
  const std::vector<Backend> backends{Backend::pca};
  const std::vector<Algorithm> algos{Algorithm::ward};
  const auto t = robustness_matrix(set, dims, backends, algos, cfg);
  const auto r = assess_semantic_bias(set, cfg);
  REQUIRE(t.cells.size() == 1);
  CHECK(t.cells[0].accuracy_pct.mean == r.accuracy_pct.mean);
  CHECK(t.cells[0].nmi_pct.mean == r.nmi_pct.mean);
  CHECK(t.cells[0].deviation == 0.0);
  CHECK(t.flag_count == 0);
}

TEST_CASE("robustness matrix on planted blobs has no flags") {
  const auto set = planted(6, 100, 3, 64, 8.0);
  const std::vector<int> dims{20, 30, 40, 50};
  const std::vector<Backend> backends{Backend::umap, Backend::pca};
  const std::vector<Algorithm> algos{Algorithm::kmeans, Algorithm::ward};
  const auto t = robustness_matrix(set, dims, backends, algos, fast_config(Backend::umap, Algorithm::kmeans));
  CHECK(t.cells.size() == 16);
  for (const auto& c : t.cells) CHECK(c.accuracy_pct.mean >= 99.0);
  CHECK(t.flag_count == 0);
  CHECK(t.max_deviation <= 1.0);
  CHECK(t.to_json()["cells"].size() == 16);
  const std::vector<int> none;
  CHECK_THROWS_AS(robustness_matrix(set, none, backends, algos, fast_config(Backend::umap, Algorithm::kmeans)),
                  UsageError);
}

TEST_CASE("two-corpus comparison: identical corpora are indistinguishable") {
  const auto a = null_set(7, 400, 1, 8);
  auto b = a;
  b.datasets = {"copy"};
  TwoCorpusConfig cfg;
  cfg.clustering = fast_config(Backend::pca, Algorithm::kmeans);
  cfg.clustering.reduction.out_dim = 4;
  const auto r = two_corpus_probe_vs_cluster(a, b, cfg);
  REQUIRE(r.rows.size() == 4);
  CHECK(r.rows[0].method == "random chance");
  CHECK(r.rows[0].accuracy_pct == 50.0);
  const auto& clu = r.rows[3];
  CHECK(clu.accuracy_pct == 50.0);
  REQUIRE(clu.nmi_pct.has_value());
  CHECK(*clu.nmi_pct <= 1e-9);
  CHECK(std::abs(r.rows[1].accuracy_pct - 50.0) <= 10.0);
}

TEST_CASE("two-corpus comparison: corpora 6 sigma apart are separated by every method") {
  const auto a = null_set(8, 300, 1, 8);
  auto b = null_set(9, 300, 1, 8);
  for (std::size_t i = 0; i < b.n; ++i) b.vectors[i * b.d] += 6.0f;
  b.datasets = {"shifted"};
  TwoCorpusConfig cfg;
  cfg.clustering = fast_config(Backend::none, Algorithm::kmeans);
  const auto r = two_corpus_probe_vs_cluster(a, b, cfg);
  for (std::size_t i = 1; i < 4; ++i) CHECK(r.rows[i].accuracy_pct >= 99.0);
  b.d = 7;
  CHECK_THROWS_AS(two_corpus_probe_vs_cluster(a, b, cfg), DataError);
}

TEST_CASE("small artifact run: shape, determinism and validation") {
  ArtifactConfig cfg;
  cfg.res_a = 32;
  cfg.res_b = 160;
  cfg.n_per = 120;
  cfg.final_side = 16;
  cfg.residual_sample = 8;
  cfg.probe.epochs = 100;
  cfg.clustering.restarts = 5;
  cfg.clustering.reduction.backend = Backend::pca;
  cfg.clustering.reduction.out_dim = 10;
  const auto r = artifact_channel_experiment(cfg);
  CHECK(r.probe_accuracy >= 0.0);
  CHECK(r.probe_accuracy <= 1.0);
  REQUIRE(r.two_step_probe_accuracy.has_value());
  REQUIRE(r.clustering_accuracy.has_value());
  CHECK(r.clustering_accuracy.value() >= 0.5);
  CHECK(r.residual_mean_abs_a > 0.0);
  CHECK(r.residual_mean_abs_b > 0.0);
  CHECK(r.probe_confusion.n() == 80);
  CHECK(r.to_json().dump() == artifact_channel_experiment(cfg).to_json().dump());

  auto bad = cfg;
  bad.res_b = bad.res_a;
  CHECK_THROWS_AS(artifact_channel_experiment(bad), UsageError);
  bad = cfg;
  bad.n_per = 50;
  CHECK_THROWS_AS(artifact_channel_experiment(bad), UsageError);
  bad.allow_equal_resolutions = true;
  bad.run_clustering = false;
  bad.run_two_step = false;
  const auto ctrl = artifact_channel_experiment(bad);
  CHECK_FALSE(ctrl.clustering_accuracy.has_value());
  CHECK_FALSE(ctrl.two_step_probe_accuracy.has_value());
}
