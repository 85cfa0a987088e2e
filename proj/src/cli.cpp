#include "biaslens/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "biaslens/corpus.hpp"
#include "biaslens/error.hpp"
#include "biaslens/imglab.hpp"
#include "biaslens/pipeline.hpp"
#include "biaslens/plot.hpp"
#include "biaslens/resolution.hpp"
#include "biaslens/rng.hpp"

namespace biaslens {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Options {
  std::vector<std::string> in;
  std::string manifest;
  std::string out;
  std::string k = "auto";
  int restarts = 100;
  std::vector<std::uint64_t> seeds{0};
  std::vector<int> dims{20};
  std::vector<std::string> backends{"umap"};
  std::vector<std::string> algorithms{"kmeans"};
  int mid = 0;
  int final_side = 0;
  bool csv = false;

  // subcommand specific
  std::string svg;
  std::string misclassified;
  std::string kind = "value-noise";
  int size = 100;
  int count = 1;
  std::string dataset;
  std::string preview;
  bool box3 = false;
  int neighbors = 15;
  double min_dist = 0.1;
  int epochs = 200;
  std::string bank;
  bool all_images = false;
  std::string model;
  int probe_epochs = 500;
  double lr = 0.1;
  double l2 = 1e-4;
  int knn_k = 10;
  int res_a = 100;
  int res_b = 640;
  int n_per = 600;
  std::vector<std::string> kinds{"value-noise", "blob-field", "stripe-warp"};
  int residual_sample = 64;
  bool no_clustering = false;
  bool no_two_step = false;
  bool allow_equal = false;
};

std::string format_number(double v) {
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write '" + path + "'");
  f << text;
  if (!f) throw IoError("write failed for '" + path + "'");
}

void emit(const Options& o, std::ostream& out, const json& report, const std::string& csv_text) {
  const std::string text = o.csv ? csv_text : report.dump(2) + "\n";
  if (o.out.empty())
    out << text;
  else
    write_text(o.out, text);
}

int parse_k(const std::string& k) {
  if (k == "auto") return 0;
  try {
    std::size_t pos = 0;
    const int v = std::stoi(k, &pos);
    if (pos == k.size() && v >= 1) return v;
  } catch (const std::exception&) {
  }
  throw UsageError("--k must be 'auto' or a positive integer, got '" + k + "'");
}

/// "2-10", "2,3,5" or a single integer.
std::vector<int> parse_k_range(const std::string& spec) {
  std::vector<int> ks;
  const auto dash = spec.find('-');
  try {
    if (dash != std::string::npos) {
      const int lo = std::stoi(spec.substr(0, dash));
      const int hi = std::stoi(spec.substr(dash + 1));
      if (lo < 1 || hi < lo) throw UsageError("bad k range '" + spec + "'");
      for (int k = lo; k <= hi; ++k) ks.push_back(k);
    } else {
      std::stringstream ss(spec);
      std::string item;
      while (std::getline(ss, item, ',')) ks.push_back(std::stoi(item));
    }
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception&) {
    throw UsageError("bad k range '" + spec + "'");
  }
  if (ks.empty() || *std::min_element(ks.begin(), ks.end()) < 1) throw UsageError("bad k range '" + spec + "'");
  return ks;
}

const std::string& single(const std::vector<std::string>& v, const char* flag) {
  if (v.size() != 1) throw UsageError(std::string(flag) + " takes a single value here");
  return v.front();
}

EmbeddingSet load_inputs(const Options& o) {
  if (o.in.empty()) throw UsageError("--in is required");
  std::vector<EmbeddingSet> sets;
  for (const auto& p : o.in) sets.push_back(read_embeddings(p));
  return sets.size() == 1 ? std::move(sets.front()) : merge_sets(sets);
}

ExperimentConfig experiment_config(const Options& o) {
  ExperimentConfig cfg;
  cfg.reduction.backend = parse_backend(single(o.backends, "--backend"));
  if (o.dims.size() != 1) throw UsageError("--dims takes a single value here");
  cfg.reduction.out_dim = o.dims.front();
  cfg.reduction.umap_neighbors = o.neighbors;
  cfg.reduction.umap_min_dist = o.min_dist;
  cfg.reduction.umap_epochs = o.epochs;
  cfg.k = parse_k(o.k);
  cfg.restarts = o.restarts;
  cfg.seeds = o.seeds;
  cfg.algorithm = parse_algorithm(single(o.algorithms, "--algorithm"));
  cfg.report_path = o.out;
  cfg.validate();
  return cfg;
}

ProbeConfig probe_config(const Options& o) {
  ProbeConfig p;
  p.learning_rate = o.lr;
  p.epochs = o.probe_epochs;
  p.l2 = o.l2;
  p.seed = o.seeds.front();
  if (!(p.learning_rate > 0.0) || p.epochs < 1 || p.l2 < 0.0) throw UsageError("invalid probe hyperparameters");
  return p;
}

void print_seeds(std::ostream& err, const std::vector<std::uint64_t>& seeds) {
  err << "seed:";
  for (auto s : seeds) err << ' ' << s;
  err << '\n';
}

int cmd_stats(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.manifest.empty()) throw UsageError("--manifest is required");
  const auto m = load_manifest(o.manifest);
  const auto names = m.datasets();
  std::map<std::string, std::vector<double>> proxies;
  std::map<std::string, double> proxy_by_path;
  for (const auto& r : m.records) {
    const double p = resolution_proxy(r.width, r.height);
    proxies[r.dataset].push_back(p);
    proxy_by_path[r.path] = p;
  }
  std::vector<ResolutionProfile> profiles;
  for (const auto& name : names) profiles.push_back(kde_fit(proxies[name], std::nullopt, name));
  const auto grid = covering_grid(profiles, 512);
  print_seeds(err, {o.seeds.front()});

  json report{{"experiment", "resolution_stats"}};
  json jp = json::array();
  std::vector<std::vector<double>> densities;
  for (const auto& p : profiles) {
    densities.push_back(kde_eval(p, grid));
    std::vector<std::size_t> sizes;
    for (std::size_t s : {20, 50, 100, 200, 500, 1000, 2000})
      if (s <= p.samples.size()) sizes.push_back(s);
    json conv = json::array();
    for (const auto& row : kde_convergence_report(p.samples, sizes, o.seeds.front()))
      conv.push_back({{"size", row.size}, {"l1", row.l1}});
    double mean = 0.0;
    for (double v : p.samples) mean += v;
    json entry{{"dataset", p.dataset}, {"n", p.samples.size()},          {"bandwidth", p.bandwidth},
               {"mean_proxy", mean / static_cast<double>(p.samples.size())}, {"convergence", conv}};
    jp.push_back(entry);
  }
  report["profiles"] = jp;
  json jo = json::array();
  for (std::size_t a = 0; a < profiles.size(); ++a)
    for (std::size_t b = a + 1; b < profiles.size(); ++b) {
      const auto ov = overlap_coefficient(profiles[a], profiles[b], grid);
      jo.push_back({{"a", profiles[a].dataset},
                    {"b", profiles[b].dataset},
                    {"coefficient", ov.coefficient},
                    {"grid_too_narrow", ov.grid_too_narrow}});
    }
  report["overlap"] = jo;
  report["config"] = {{"seed", o.seeds.front()}, {"grid_points", grid.size()}, {"kernel", "gaussian"},
                      {"bandwidth_rule", "silverman"}};
  report["config_hash"] = config_hash(report["config"]);
  report["provenance"] = provenance();

  std::vector<double> markers;
  if (!o.misclassified.empty()) {
    std::ifstream f(o.misclassified);
    if (!f) throw IoError("cannot open '" + o.misclassified + "'");
    std::string line;
    while (std::getline(f, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const auto it = proxy_by_path.find(line);
      if (it == proxy_by_path.end()) throw DataError("misclassified path '" + line + "' is not in the manifest");
      markers.push_back(it->second);
    }
    report["misclassified"] = markers.size();
  }
  if (!o.svg.empty()) {
    PlotSpec plot;
    plot.kind = PlotKind::kde_lines;
    plot.title = "Resolution distribution";
    plot.x_label = "resolution proxy (px)";
    plot.y_label = "density";
    for (std::size_t i = 0; i < profiles.size(); ++i) plot.series.push_back({profiles[i].dataset, grid, densities[i]});
    plot.markers = markers;
    emit_svg(plot, o.svg);
  }

  std::string csv = "dataset,x,density\n";
  for (std::size_t i = 0; i < profiles.size(); ++i)
    for (std::size_t j = 0; j < grid.size(); ++j)
      csv += profiles[i].dataset + "," + format_number(grid[j]) + "," + format_number(densities[i][j]) + "\n";
  emit(o, out, report, csv);
  return 0;
}

int cmd_fake_gen(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.out.empty()) throw UsageError("--out directory is required");
  if (o.count < 1) throw UsageError("--count must be >= 1");
  const TextureKind kind = parse_texture_kind(o.kind);
  fs::create_directories(o.out);
  print_seeds(err, {o.seeds.front()});
  CorpusManifest manifest;
  const std::string dataset = o.dataset.empty() ? "fake" + std::to_string(o.size) : o.dataset;
  for (int i = 0; i < o.count; ++i) {
    FakeSpec spec{o.size, o.size, kind, derive_key(o.seeds.front(), {static_cast<std::uint64_t>(i)}), 3};
    const Image img = gen_fake(spec);
    std::ostringstream name;
    name << "fake_" << std::setw(5) << std::setfill('0') << i << ".png";
    write_png(img, fs::path(o.out) / name.str());
    manifest.records.push_back({name.str(), dataset, static_cast<std::uint32_t>(o.size),
                                static_cast<std::uint32_t>(o.size)});
  }
  std::ofstream mf(fs::path(o.out) / "manifest.csv");
  if (!mf) throw IoError("cannot write '" + (fs::path(o.out) / "manifest.csv").string() + "'");
  write_manifest(manifest, mf);
  out << json{{"experiment", "fake_gen"},
              {"kind", to_string(kind)},
              {"size", o.size},
              {"count", o.count},
              {"seed", o.seeds.front()},
              {"directory", o.out}}
             .dump(2)
      << "\n";
  return 0;
}

int cmd_residual(const Options& o, std::ostream& out, std::ostream&) {
  const Image img = read_png(single(o.in, "--in"));
  const int pipeline = o.final_side > 0 ? o.final_side : 224;
  const auto pre = o.box3 ? Prefilter::box3 : Prefilter::none;
  const ResidualImage res = residual_image(img, pipeline, pre);
  if (!o.out.empty()) write_residual(res, o.out);
  if (!o.preview.empty()) write_png(residual_preview(res), o.preview);
  json report{{"experiment", "residual"},
              {"width", res.width},
              {"height", res.height},
              {"channels", res.channels},
              {"pipeline_size", pipeline},
              {"prefilter", o.box3 ? "box3" : "none"},
              {"mean_abs", res.mean_abs()},
              {"max_abs", res.max_abs()}};
  if (o.mid > 0) {
    const Image direct = resize_bilinear(img, pipeline, pipeline, pre);
    const Image two = two_step_resize(img, o.mid, pipeline, pre);
    double ss = 0.0;
    for (std::size_t i = 0; i < direct.pixels.size(); ++i) {
      const double d = static_cast<double>(direct.pixels[i]) - two.pixels[i];
      ss += d * d;
    }
    report["two_step_l2"] = std::sqrt(ss);
    report["mid"] = o.mid;
  }
  out << report.dump(2) << "\n";
  return 0;
}

int cmd_cluster(const Options& o, std::ostream& out, std::ostream& err) {
  const EmbeddingSet set = load_inputs(o);
  const ExperimentConfig cfg = experiment_config(o);
  print_seeds(err, cfg.seeds);
  const auto rep = assess_semantic_bias(set, cfg);
  std::string csv = "seed,accuracy_pct,nmi_pct\n";
  for (const auto& s : rep.per_seed)
    csv += std::to_string(s.seed) + "," + format_number(s.accuracy_pct) + "," + format_number(s.nmi_pct) + "\n";
  emit(o, out, rep.to_json(), csv);
  return 0;
}

int cmd_sweep(const Options& o, std::ostream& out, std::ostream& err) {
  const EmbeddingSet set = load_inputs(o);
  ExperimentConfig cfg = experiment_config(o);
  std::vector<int> ks;
  if (o.k == "auto") {
    for (int k = 2; k <= static_cast<int>(std::max<std::size_t>(2, 2 * set.datasets.size())); ++k) ks.push_back(k);
  } else {
    ks = parse_k_range(o.k);
  }
  cfg.reduction.seed = cfg.seeds.front();
  cfg.reduction.validate(set.d);
  print_seeds(err, {cfg.seeds.front()});
  const Matrix z = reduce(set.to_matrix(), cfg.reduction);
  const auto labels = set.label_vector();
  const auto points = granularity_sweep(z, labels, ks, cfg.restarts, cfg.seeds.front());

  json config = cfg.to_json();
  config["k_range"] = ks;
  json cells = json::array();
  std::string csv = "k,nmi_pct,accuracy_pct\n";
  PlotSpec plot{PlotKind::sweep_line, {{"NMI", {}, {}}, {"accuracy", {}, {}}}, "Granularity sweep", "k", "percent", {}};
  for (const auto& p : points) {
    const double acc_pct = 100.0 * p.accuracy;
    cells.push_back({{"settings", {{"k", p.k}}}, {"accuracy_pct", acc_pct}, {"nmi_pct", p.nmi}, {"spread", nullptr}});
    csv += std::to_string(p.k) + "," + format_number(p.nmi) + "," + format_number(acc_pct) + "\n";
    plot.series[0].x.push_back(p.k);
    plot.series[0].y.push_back(p.nmi);
    plot.series[1].x.push_back(p.k);
    plot.series[1].y.push_back(acc_pct);
  }
  if (!o.svg.empty()) emit_svg(plot, o.svg);
  emit(o, out,
       {{"experiment", "granularity_sweep"},
        {"config_hash", config_hash(config)},
        {"config", config},
        {"cells", cells},
        {"provenance", provenance()}},
       csv);
  return 0;
}

int cmd_matrix(const Options& o, std::ostream& out, std::ostream& err) {
  const EmbeddingSet set = load_inputs(o);
  Options base_opts = o;
  base_opts.backends = {"umap"};
  base_opts.algorithms = {"kmeans"};
  base_opts.dims = {o.dims.front()};
  const ExperimentConfig base = experiment_config(base_opts);
  std::vector<Backend> backends;
  for (const auto& b : o.backends) backends.push_back(parse_backend(b));
  std::vector<Algorithm> algorithms;
  for (const auto& a : o.algorithms) algorithms.push_back(parse_algorithm(a));
  print_seeds(err, base.seeds);
  const auto table = robustness_matrix(set, o.dims, backends, algorithms, base);
  std::string csv = "backend,algorithm,dims,accuracy_pct,nmi_pct,deviation,flagged\n";
  for (const auto& c : table.cells)
    csv += std::string(to_string(c.backend)) + "," + std::string(to_string(c.algorithm)) + "," +
           std::to_string(c.dims) + "," + format_number(c.accuracy_pct.mean) + "," + format_number(c.nmi_pct.mean) +
           "," + format_number(c.deviation) + "," + (c.flagged ? "1" : "0") + "\n";
  emit(o, out, table.to_json(), csv);
  return 0;
}

int cmd_probe(const Options& o, std::ostream& out, std::ostream& err) {
  const EmbeddingSet set = load_inputs(o);
  const ProbeConfig pcfg = probe_config(o);
  print_seeds(err, {pcfg.seed});
  const Matrix x = set.to_matrix();
  const auto labels = set.label_vector();
  const auto split = stratified_split(labels, 2.0 / 3.0, pcfg.seed);
  std::vector<int> y_train, y_test;
  for (auto i : split.train) y_train.push_back(labels[i]);
  for (auto i : split.test) y_test.push_back(labels[i]);
  const Matrix x_train = x.select_rows(split.train);
  const Matrix x_test = x.select_rows(split.test);
  const auto model = train_linear_probe(x_train, y_train, pcfg, set.datasets);
  const auto ev = eval_probe(model, x_test, y_test);
  const auto knn = knn_classify(x_train, y_train, x_test, o.knn_k);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < knn.size(); ++i) hit += knn[i] == y_test[i];
  const double knn_acc = 100.0 * static_cast<double>(hit) / static_cast<double>(std::max<std::size_t>(1, knn.size()));
  if (!o.model.empty()) write_text(o.model, model.to_json().dump() + "\n");

  json config{{"probe", {{"learning_rate", pcfg.learning_rate}, {"epochs", pcfg.epochs}, {"l2", pcfg.l2},
                         {"seed", pcfg.seed}, {"standardize", pcfg.standardize}}},
              {"knn_k", o.knn_k},
              {"split", "2:1 stratified"},
              {"input", {{"n", set.n}, {"d", set.d}, {"model_tag", set.model_tag}}}};
  json cells = json::array();
  cells.push_back({{"settings", {{"method", "linear probe"}}},
                   {"accuracy_pct", 100.0 * ev.accuracy},
                   {"nmi_pct", nullptr},
                   {"spread", nullptr}});
  cells.push_back(
      {{"settings", {{"method", "k-NN"}}}, {"accuracy_pct", knn_acc}, {"nmi_pct", nullptr}, {"spread", nullptr}});
  json report{{"experiment", "linear_probe"},
              {"config_hash", config_hash(config)},
              {"config", config},
              {"cells", cells},
              {"confusion", {{"rows", ev.confusion.rows()}, {"cols", ev.confusion.cols()}, {"counts", ev.confusion.counts()}}},
              {"provenance", provenance()}};
  const std::string csv = "method,accuracy_pct\nlinear probe," + format_number(100.0 * ev.accuracy) + "\nk-NN," +
                          format_number(knn_acc) + "\n";
  emit(o, out, report, csv);
  return 0;
}

int cmd_compare(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.in.size() != 2) throw UsageError("compare needs exactly two --in files");
  const EmbeddingSet a = read_embeddings(o.in[0]);
  const EmbeddingSet b = read_embeddings(o.in[1]);
  TwoCorpusConfig cfg;
  cfg.clustering = experiment_config(o);
  cfg.probe = probe_config(o);
  cfg.knn_k = o.knn_k;
  cfg.seed = o.seeds.front();
  print_seeds(err, cfg.clustering.seeds);
  const auto rep = two_corpus_probe_vs_cluster(a, b, cfg);
  std::string csv = "method,accuracy_pct,nmi_pct\n";
  for (const auto& r : rep.rows)
    csv += r.method + "," + format_number(r.accuracy_pct) + "," + (r.nmi_pct ? format_number(*r.nmi_pct) : "") + "\n";
  emit(o, out, rep.to_json(), csv);
  return 0;
}

int cmd_characterize(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.bank.empty()) throw UsageError("--bank is required");
  const EmbeddingSet set = load_inputs(o);
  const PromptBank bank = PromptBank::from_embeddings(read_embeddings(o.bank));
  const Matrix x = set.to_matrix();
  const auto labels = set.label_vector();

  std::vector<char> include;
  json selection{{"mode", o.all_images ? "all-images" : "correctly-clustered"}};
  if (!o.all_images) {
    const ExperimentConfig cfg = experiment_config(o);
    print_seeds(err, {cfg.seeds.front()});
    const int k = cfg.k > 0 ? cfg.k : static_cast<int>(set.datasets.size());
    const auto outcome =
        cluster_and_score(x, labels, k, cfg.reduction, cfg.algorithm, cfg.restarts, cfg.seeds.front());
    include.resize(set.n);
    std::size_t kept = 0;
    for (std::size_t i = 0; i < set.n; ++i) {
      const int mapped = outcome.match.mapping[outcome.assignments[i]];
      include[i] = mapped == labels[i];
      kept += include[i];
    }
    selection["clustering"] = cfg.to_json();
    selection["clustering_accuracy_pct"] = outcome.accuracy_pct;
    selection["images_kept"] = kept;
  }
  const auto ch = characterize(x, labels, set.datasets, bank, include);

  json rows = json::array();
  std::string csv = "dataset";
  for (const auto& c : ch.categories) csv += "," + c;
  csv += "\n";
  for (std::size_t d = 0; d < ch.datasets.size(); ++d) {
    json pct = json::object();
    csv += ch.datasets[d];
    for (std::size_t c = 0; c < ch.categories.size(); ++c) {
      pct[ch.categories[c]] = ch.percent(d, c);
      csv += "," + format_number(ch.percent(d, c));
    }
    csv += "\n";
    rows.push_back({{"dataset", ch.datasets[d]}, {"percent", pct}, {"counts", ch.counts[d]}});
  }
  json config{{"selection", selection}, {"bank_model_tag", bank.model_tag}, {"input_model_tag", set.model_tag}};
  emit(o, out,
       {{"experiment", "characterize"},
        {"config_hash", config_hash(config)},
        {"config", config},
        {"categories", ch.categories},
        {"rows", rows},
        {"excluded_zero_norm", ch.excluded_zero_norm},
        {"provenance", provenance()}},
       csv);
  return 0;
}

int cmd_artifact(const Options& o, std::ostream& out, std::ostream& err) {
  ArtifactConfig cfg;
  cfg.res_a = o.res_a;
  cfg.res_b = o.res_b;
  cfg.n_per = o.n_per;
  cfg.final_side = o.final_side > 0 ? o.final_side : 64;
  cfg.mid = o.mid;
  cfg.seed = o.seeds.front();
  cfg.kinds.clear();
  for (const auto& k : o.kinds) cfg.kinds.push_back(parse_texture_kind(k));
  cfg.probe = probe_config(o);
  cfg.clustering = experiment_config(o);
  cfg.residual_sample = o.residual_sample;
  cfg.run_clustering = !o.no_clustering;
  cfg.run_two_step = !o.no_two_step;
  cfg.allow_equal_resolutions = o.allow_equal;
  print_seeds(err, {cfg.seed});
  const auto rep = artifact_channel_experiment(cfg);
  std::string csv = "method,resize,accuracy_pct\nlinear probe,one-step," + format_number(100.0 * rep.probe_accuracy) + "\n";
  if (rep.two_step_probe_accuracy)
    csv += "linear probe,two-step," + format_number(100.0 * *rep.two_step_probe_accuracy) + "\n";
  if (rep.clustering_accuracy) csv += "clustering,one-step," + format_number(100.0 * *rep.clustering_accuracy) + "\n";
  emit(o, out, rep.to_json(), csv);
  return 0;
}

void add_common(CLI::App* sub, Options& o, bool reduction) {
  sub->add_option("--out", o.out, "Write output to this file instead of stdout");
  sub->add_flag("--csv", o.csv, "Emit CSV instead of JSON");
  sub->add_option("--seed", o.seeds, "Seed(s), comma separated")->delimiter(',')->capture_default_str();
  if (!reduction) return;
  sub->add_option("--k", o.k, "Cluster count or 'auto' (one per dataset)")->capture_default_str();
  sub->add_option("--restarts", o.restarts, "k-means restarts")->capture_default_str();
  sub->add_option("--dims", o.dims, "Reduced dimension(s)")->delimiter(',')->capture_default_str();
  sub->add_option("--backend", o.backends, "umap|pca|none")->delimiter(',')->capture_default_str();
  sub->add_option("--algorithm", o.algorithms, "kmeans|ward")->delimiter(',')->capture_default_str();
  sub->add_option("--neighbors", o.neighbors, "UMAP neighbours")->capture_default_str();
  sub->add_option("--min-dist", o.min_dist, "UMAP min_dist")->capture_default_str();
  sub->add_option("--epochs", o.epochs, "UMAP epochs")->capture_default_str();
}

void add_probe(CLI::App* sub, Options& o) {
  sub->add_option("--probe-epochs", o.probe_epochs, "Probe gradient steps")->capture_default_str();
  sub->add_option("--lr", o.lr, "Probe learning rate")->capture_default_str();
  sub->add_option("--l2", o.l2, "Probe L2 penalty")->capture_default_str();
  sub->add_option("--knn", o.knn_k, "k for the k-NN contrast")->capture_default_str();
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"biaslens: dataset bias diagnostics"};
  app.require_subcommand(1);

  auto* stats = app.add_subcommand("stats", "Resolution KDE profiles and pairwise overlap from a manifest");
  stats->add_option("--manifest", o.manifest, "path,dataset,width,height CSV")->required();
  stats->add_option("--svg", o.svg, "Write a KDE overlay plot");
  stats->add_option("--misclassified", o.misclassified, "File of manifest paths to mark on the plot");
  add_common(stats, o, false);

  auto* fake = app.add_subcommand("fake-gen", "Generate procedural texture images");
  fake->add_option("--kind", o.kind, "value-noise|blob-field|stripe-warp")->capture_default_str();
  fake->add_option("--size", o.size, "Side length in pixels")->capture_default_str();
  fake->add_option("--count", o.count, "Number of images")->capture_default_str();
  fake->add_option("--dataset", o.dataset, "Dataset name written to manifest.csv");
  add_common(fake, o, false);

  auto* residual = app.add_subcommand("residual", "Residual image of a down/up resize round trip");
  residual->add_option("--in", o.in, "Input PNG");
  residual->add_option("--final", o.final_side, "Pipeline size (default 224)");
  residual->add_option("--mid", o.mid, "Also report the two-step vs direct L2 difference");
  residual->add_option("--preview", o.preview, "Write an 8-bit preview PNG");
  residual->add_flag("--box3", o.box3, "Apply a 3x3 box prefilter before downsampling");
  residual->add_option("--out", o.out, "Write the RES1 raster");

  auto* cluster = app.add_subcommand("cluster", "Unsupervised semantic-bias assessment");
  cluster->add_option("--in", o.in, "EMB1 file(s); several are merged")->required();
  add_common(cluster, o, true);

  auto* sweep = app.add_subcommand("sweep", "Granularity sweep over k");
  sweep->add_option("--in", o.in, "EMB1 file(s)")->required();
  sweep->add_option("--svg", o.svg, "Write a sweep plot");
  add_common(sweep, o, true);

  auto* matrix = app.add_subcommand("matrix", "Robustness matrix over dims x backends x algorithms");
  matrix->add_option("--in", o.in, "EMB1 file(s)")->required();
  add_common(matrix, o, true);

  auto* probe = app.add_subcommand("probe", "Linear probe and k-NN on a stratified 2:1 split");
  probe->add_option("--in", o.in, "EMB1 file(s)")->required();
  probe->add_option("--model", o.model, "Write the trained probe as JSON");
  add_probe(probe, o);
  add_common(probe, o, false);

  auto* compare = app.add_subcommand("compare", "Two-corpus probe / k-NN / clustering comparison");
  compare->add_option("--in", o.in, "Exactly two EMB1 files (A then B)")->required();
  add_probe(compare, o);
  add_common(compare, o, true);

  auto* charz = app.add_subcommand("characterize", "Prompt-similarity semantic characterization");
  charz->add_option("--in", o.in, "Image EMB1 file(s)")->required();
  charz->add_option("--bank", o.bank, "Prompt bank EMB1 (datasets field = categories)")->required();
  charz->add_flag("--all-images", o.all_images, "Characterize every image, not only correctly clustered ones");
  add_common(charz, o, true);

  auto* art = app.add_subcommand("artifact-lab", "Synthetic artifact-channel experiment");
  art->add_option("--res-a", o.res_a, "Native side of corpus A")->capture_default_str();
  art->add_option("--res-b", o.res_b, "Native side of corpus B")->capture_default_str();
  art->add_option("--n-per", o.n_per, "Images per corpus")->capture_default_str();
  art->add_option("--final", o.final_side, "Final side (default 64)");
  art->add_option("--mid", o.mid, "Two-step intermediate side (default final/2)");
  art->add_option("--kinds", o.kinds, "Texture kinds")->delimiter(',')->capture_default_str();
  art->add_option("--residual-sample", o.residual_sample, "Images per corpus for mean |residual|")
      ->capture_default_str();
  art->add_flag("--no-clustering", o.no_clustering, "Skip the unsupervised pipeline");
  art->add_flag("--no-two-step", o.no_two_step, "Skip the two-step ablation");
  art->add_flag("--allow-equal", o.allow_equal, "Permit res-a == res-b (control runs)");
  add_probe(art, o);
  add_common(art, o, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 1;
  }

  try {
    if (stats->parsed()) return cmd_stats(o, out, err);
    if (fake->parsed()) return cmd_fake_gen(o, out, err);
    if (residual->parsed()) return cmd_residual(o, out, err);
    if (cluster->parsed()) return cmd_cluster(o, out, err);
    if (sweep->parsed()) return cmd_sweep(o, out, err);
    if (matrix->parsed()) return cmd_matrix(o, out, err);
    if (probe->parsed()) return cmd_probe(o, out, err);
    if (compare->parsed()) return cmd_compare(o, out, err);
    if (charz->parsed()) return cmd_characterize(o, out, err);
    if (art->parsed()) return cmd_artifact(o, out, err);
    err << app.help();
    return 1;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace biaslens
