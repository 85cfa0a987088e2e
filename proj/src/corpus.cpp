#include "biaslens/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <map>
#include <numeric>
#include <ostream>
#include <unordered_set>

#include <json.hpp>

#include "biaslens/error.hpp"
#include "biaslens/rng.hpp"

namespace biaslens {

namespace {

constexpr std::string_view kManifestHeader = "path,dataset,width,height";
constexpr std::string_view kEmbMagic = "EMB1";

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string where(std::string_view source, std::size_t line_no) {
  return std::string(source) + ":" + std::to_string(line_no);
}

std::uint32_t parse_dim(std::string_view field, std::string_view source, std::size_t line_no) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty())
    throw DataError(where(source, line_no) + ": non-integer dimension '" + std::string(field) + "'");
  if (v <= 0) throw DataError(where(source, line_no) + ": non-positive dimension");
  if (v > 0xffffffffLL) throw DataError(where(source, line_no) + ": dimension out of range");
  return static_cast<std::uint32_t>(v);
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::vector<std::string> CorpusManifest::datasets() const {
  std::vector<std::string> names;
  for (const auto& r : records)
    if (std::find(names.begin(), names.end(), r.dataset) == names.end()) names.push_back(r.dataset);
  return names;
}

CorpusManifest parse_manifest(std::istream& in, std::string_view source) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(std::string(source) + ": empty manifest");
  if (line != kManifestHeader)
    throw DataError(std::string(source) + ": expected header '" + std::string(kManifestHeader) + "'");

  CorpusManifest m;
  std::unordered_set<std::string> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_commas(line);
    if (fields.size() != 4)
      throw DataError(where(source, line_no) + ": expected 4 columns, got " + std::to_string(fields.size()));
    ManifestRecord r;
    r.path = std::string(fields[0]);
    r.dataset = std::string(fields[1]);
    if (r.path.empty()) throw DataError(where(source, line_no) + ": empty path");
    if (r.dataset.empty()) throw DataError(where(source, line_no) + ": empty dataset name");
    r.width = parse_dim(fields[2], source, line_no);
    r.height = parse_dim(fields[3], source, line_no);
    if (!seen.insert(r.path).second) throw DataError(where(source, line_no) + ": duplicate path '" + r.path + "'");
    m.records.push_back(std::move(r));
  }
  if (m.records.empty()) throw DataError(std::string(source) + ": manifest has no records");
  return m;
}

CorpusManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
  return parse_manifest(in, path.string());
}

void write_manifest(const CorpusManifest& manifest, std::ostream& out) {
  out << kManifestHeader << '\n';
  for (const auto& r : manifest.records) out << r.path << ',' << r.dataset << ',' << r.width << ',' << r.height << '\n';
}

void EmbeddingSet::validate() const {
  if (n < 1 || d < 1) throw DataError("embedding set must have n >= 1 and d >= 1");
  if (vectors.size() != n * d) throw DataError("vector payload size does not match n*d");
  if (labels.size() != n) throw DataError("label count does not match n");
  if (datasets.empty()) throw DataError("embedding set has no dataset names");
  if (datasets.size() > 65535) throw DataError("too many datasets for 16-bit labels");
  for (const auto& name : datasets)
    if (name.empty()) throw DataError("empty dataset name");
  for (std::size_t i = 0; i < n; ++i)
    if (labels[i] >= datasets.size())
      throw DataError("label index " + std::to_string(labels[i]) + " out of range at row " + std::to_string(i));
  for (std::size_t i = 0; i < vectors.size(); ++i)
    if (!std::isfinite(vectors[i])) throw DataError("non-finite value at row " + std::to_string(i / d));
}

Matrix EmbeddingSet::to_matrix() const {
  Matrix m(n, d);
  std::copy(vectors.begin(), vectors.end(), m.data().begin());
  return m;
}

EmbeddingSet EmbeddingSet::from_matrix(const Matrix& m, std::vector<std::uint16_t> labels,
                                       std::vector<std::string> datasets, std::string model_tag) {
  EmbeddingSet s;
  s.n = m.rows();
  s.d = m.cols();
  s.vectors.assign(m.data().begin(), m.data().end());
  s.labels = std::move(labels);
  s.datasets = std::move(datasets);
  s.model_tag = std::move(model_tag);
  s.validate();
  return s;
}

std::vector<std::uint8_t> encode_emb1(const EmbeddingSet& set) {
  set.validate();
  nlohmann::json header = {{"n", set.n},
                           {"d", set.d},
                           {"dtype", "f32"},
                           {"datasets", set.datasets},
                           {"model_tag", set.model_tag}};
  const std::string text = header.dump();

  std::vector<std::uint8_t> out;
  out.reserve(8 + text.size() + set.vectors.size() * 4 + set.labels.size() * 2);
  out.insert(out.end(), kEmbMagic.begin(), kEmbMagic.end());
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  for (float f : set.vectors) {
    std::uint32_t bits = 0;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
  }
  for (std::uint16_t l : set.labels) {
    out.push_back(static_cast<std::uint8_t>(l & 0xff));
    out.push_back(static_cast<std::uint8_t>(l >> 8));
  }
  return out;
}

EmbeddingSet decode_emb1(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kEmbMagic.data(), 4) != 0) throw DataError("bad magic");
  const std::size_t header_len = get_u32(bytes.data() + 4);
  if (bytes.size() < 8 + header_len) throw DataError("header length exceeds file size");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed header: ") + e.what());
  }
  EmbeddingSet s;
  try {
    if (!header.is_object()) throw DataError("header is not a JSON object");
    for (const char* key : {"n", "d", "dtype", "datasets", "model_tag"})
      if (!header.contains(key)) throw DataError(std::string("header missing key '") + key + "'");
    if (!header["n"].is_number_unsigned() || !header["d"].is_number_unsigned())
      throw DataError("header n and d must be non-negative integers");
    if (header["dtype"] != "f32") throw DataError("unsupported dtype (expected f32)");
    s.n = header["n"].get<std::size_t>();
    s.d = header["d"].get<std::size_t>();
    s.datasets = header["datasets"].get<std::vector<std::string>>();
    s.model_tag = header["model_tag"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed header: ") + e.what());
  }
  if (s.n < 1 || s.d < 1) throw DataError("embedding set must have n >= 1 and d >= 1");

  const std::size_t payload = s.n * s.d * 4;
  const std::size_t expected = 8 + header_len + payload + s.n * 2;
  if (bytes.size() != expected)
    throw DataError("payload length mismatch: expected " + std::to_string(expected) + " bytes, got " +
                    std::to_string(bytes.size()));

  const std::uint8_t* p = bytes.data() + 8 + header_len;
  s.vectors.resize(s.n * s.d);
  for (float& f : s.vectors) {
    const std::uint32_t bits = get_u32(p);
    std::memcpy(&f, &bits, 4);
    p += 4;
  }
  s.labels.resize(s.n);
  for (auto& l : s.labels) {
    l = static_cast<std::uint16_t>(p[0] | (p[1] << 8));
    p += 2;
  }
  s.validate();
  return s;
}

EmbeddingSet read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open embeddings '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_emb1(bytes);
  } catch (const IoError&) {
    throw;
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_embeddings(const EmbeddingSet& set, const std::filesystem::path& path) {
  const auto bytes = encode_emb1(set);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

EmbeddingSet merge_sets(std::span<const EmbeddingSet> sets) {
  if (sets.empty()) throw UsageError("merge_sets needs at least one set");
  EmbeddingSet out;
  out.d = sets.front().d;
  std::vector<std::string> tags;
  for (const auto& s : sets) {
    if (s.d != out.d)
      throw DataError("dimension mismatch in merge: " + std::to_string(out.d) + " vs " + std::to_string(s.d));
    std::vector<std::uint16_t> remap(s.datasets.size());
    for (std::size_t j = 0; j < s.datasets.size(); ++j) {
      auto it = std::find(out.datasets.begin(), out.datasets.end(), s.datasets[j]);
      if (it == out.datasets.end()) {
        out.datasets.push_back(s.datasets[j]);
        it = out.datasets.end() - 1;
      }
      remap[j] = static_cast<std::uint16_t>(it - out.datasets.begin());
    }
    out.vectors.insert(out.vectors.end(), s.vectors.begin(), s.vectors.end());
    for (auto l : s.labels) out.labels.push_back(remap.at(l));
    out.n += s.n;
    if (std::find(tags.begin(), tags.end(), s.model_tag) == tags.end()) tags.push_back(s.model_tag);
  }
  for (std::size_t i = 0; i < tags.size(); ++i) out.model_tag += (i ? "+" : "") + tags[i];
  out.validate();
  return out;
}

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t count, std::uint64_t seed) {
  if (count > n) throw UsageError("sample size exceeds population");
  // Partial Fisher-Yates on an index array.
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(derive_key(seed, {0x5a3b1e}));
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.below(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

EmbeddingSet subset(const EmbeddingSet& set, std::span<const std::size_t> idx) {
  EmbeddingSet out;
  out.n = idx.size();
  out.d = set.d;
  out.datasets = set.datasets;
  out.model_tag = set.model_tag;
  out.vectors.reserve(idx.size() * set.d);
  for (auto i : idx) {
    auto r = set.row(i);
    out.vectors.insert(out.vectors.end(), r.begin(), r.end());
    out.labels.push_back(set.labels.at(i));
  }
  return out;
}

}  // namespace biaslens
