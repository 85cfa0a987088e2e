#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "biaslens/matrix.hpp"

namespace biaslens {

struct ManifestRecord {
  std::string path;
  std::string dataset;
  std::uint32_t width = 0;
  std::uint32_t height = 0;

  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

/// Per-image corpus listing. Row order is preserved from the source file.
struct CorpusManifest {
  std::vector<ManifestRecord> records;

  /// Distinct dataset names in order of first appearance.
  [[nodiscard]] std::vector<std::string> datasets() const;
};

/// Parses `path,dataset,width,height` CSV (header row mandatory).
/// Throws DataError on malformed rows, non-positive dimensions or duplicate paths.
CorpusManifest parse_manifest(std::istream& in, std::string_view source = "<stream>");
CorpusManifest load_manifest(const std::filesystem::path& path);
void write_manifest(const CorpusManifest& manifest, std::ostream& out);

/// N x D feature matrix with per-row dataset labels.
///
/// Vectors are kept as 32-bit floats so a read/write round trip is bit exact.
struct EmbeddingSet {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<float> vectors;  // row-major n*d
  std::vector<std::uint16_t> labels;
  std::vector<std::string> datasets;
  std::string model_tag;

  /// Throws DataError if any invariant is violated.
  void validate() const;

  [[nodiscard]] std::span<const float> row(std::size_t i) const { return {vectors.data() + i * d, d}; }
  [[nodiscard]] Matrix to_matrix() const;
  [[nodiscard]] std::vector<int> label_vector() const { return {labels.begin(), labels.end()}; }

  static EmbeddingSet from_matrix(const Matrix& m, std::vector<std::uint16_t> labels, std::vector<std::string> datasets,
                                  std::string model_tag);

  friend bool operator==(const EmbeddingSet&, const EmbeddingSet&) = default;
};

// EMB1 layout: "EMB1" | u32le header length | JSON header | f32le payload | u16le labels.
std::vector<std::uint8_t> encode_emb1(const EmbeddingSet& set);
EmbeddingSet decode_emb1(std::span<const std::uint8_t> bytes);

EmbeddingSet read_embeddings(const std::filesystem::path& path);
void write_embeddings(const EmbeddingSet& set, const std::filesystem::path& path);

/// Concatenates sets in order. The merged dataset list is the union of names in
/// first-appearance order and labels are remapped by name.
EmbeddingSet merge_sets(std::span<const EmbeddingSet> sets);

/// Seed-controlled uniform sample of `count` distinct indices from [0, n), returned sorted.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t count, std::uint64_t seed);

/// Subset of rows (labels and dataset list carried over).
EmbeddingSet subset(const EmbeddingSet& set, std::span<const std::size_t> idx);

}  // namespace biaslens
