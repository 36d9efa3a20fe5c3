#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "plagdet/binary_io.hpp"
#include "plagdet/types.hpp"

namespace plagdet {

/// One catalogued artwork. `path` is opaque to everything except report rendering.
struct ImageRecord {
  std::string id;
  Label label = Label::van_gogh;
  Split split = Split::train;
  std::string path;

  bool operator==(const ImageRecord&) const = default;
};

/// Dense row-major count x dim matrix of f32 features.
class EmbeddingSet {
 public:
  EmbeddingSet() = default;

  EmbeddingSet(std::size_t dim, std::vector<float> values) : dim_(dim), values_(std::move(values)) {
    if (dim_ == 0) throw UsageError("embedding dim must be positive");
    if (values_.size() % dim_ != 0)
      throw UsageError("embedding buffer of " + std::to_string(values_.size()) +
                       " floats is not a multiple of dim " + std::to_string(dim_));
  }

  std::size_t dim() const { return dim_; }
  std::size_t count() const { return dim_ == 0 ? 0 : values_.size() / dim_; }

  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(values_).subspan(i * dim_, dim_);
  }
  std::span<float> row(std::size_t i) { return std::span<float>(values_).subspan(i * dim_, dim_); }

  const std::vector<float>& values() const { return values_; }

  /// Throws ValidationError naming the first row holding a NaN or Inf.
  void check_finite() const {
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i]))
        throw ValidationError("non-finite embedding value at row " + std::to_string(i / dim_) +
                              ", column " + std::to_string(i % dim_));
    }
  }

  bool operator==(const EmbeddingSet&) const = default;

 private:
  std::size_t dim_ = 0;
  std::vector<float> values_;
};

/// Records aligned 1:1 with embedding rows.
class Dataset {
 public:
  Dataset() = default;

  Dataset(std::vector<ImageRecord> records, EmbeddingSet embeddings)
      : records_(std::move(records)), embeddings_(std::move(embeddings)) {
    if (records_.size() != embeddings_.count())
      throw ValidationError("alignment mismatch: " + std::to_string(records_.size()) +
                            " records vs " + std::to_string(embeddings_.count()) +
                            " embedding rows");
    std::unordered_set<std::string_view> seen;
    for (std::size_t i = 0; i < records_.size(); ++i) {
      if (records_[i].id.empty())
        throw ValidationError("record " + std::to_string(i) + " has an empty id");
      if (!seen.insert(records_[i].id).second)
        throw ValidationError("duplicate id '" + records_[i].id + "' at record " +
                              std::to_string(i));
    }
    embeddings_.check_finite();
  }

  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  std::size_t dim() const { return embeddings_.dim(); }

  const std::vector<ImageRecord>& records() const { return records_; }
  const ImageRecord& record(std::size_t i) const { return records_[i]; }
  const EmbeddingSet& embeddings() const { return embeddings_; }
  std::span<const float> vector(std::size_t i) const { return embeddings_.row(i); }

  /// Same records, different feature space (e.g. after projection).
  Dataset with_embeddings(EmbeddingSet emb) const { return Dataset(records_, std::move(emb)); }

  bool operator==(const Dataset&) const = default;

 private:
  std::vector<ImageRecord> records_;
  EmbeddingSet embeddings_;
};

/// Records matching `split` whose label is in `labels`, in original order.
inline Dataset subset(const Dataset& ds, Split split, LabelSet labels) {
  std::vector<ImageRecord> recs;
  std::vector<float> values;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& r = ds.record(i);
    if (r.split != split || !labels.contains(r.label)) continue;
    recs.push_back(r);
    auto row = ds.vector(i);
    values.insert(values.end(), row.begin(), row.end());
  }
  return Dataset(std::move(recs), EmbeddingSet(ds.dim(), std::move(values)));
}

// ---------------------------------------------------------------------------
// On-disk format
//
//   manifest.jsonl : one flat JSON object per line {id, label, split, path}
//   embeddings.pemb: "PEMB" | version u32 | count u32 | dim u32 | count*dim f32
//                    all little-endian, rows in manifest order
// ---------------------------------------------------------------------------

inline constexpr std::string_view kEmbeddingMagic = "PEMB";
inline constexpr std::uint32_t kEmbeddingVersion = 1;
inline constexpr std::size_t kEmbeddingHeaderBytes = 16;

namespace detail {

inline ImageRecord parse_manifest_line(const std::string& line, std::size_t line_no) {
  auto fail = [&](const std::string& why) -> ValidationError {
    return ValidationError("manifest line " + std::to_string(line_no) + ": " + why);
  };
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw fail(std::string("malformed JSON (") + e.what() + ")");
  }
  if (!j.is_object()) throw fail("expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key != "id" && key != "label" && key != "split" && key != "path")
      throw fail("unexpected key '" + key + "'");
    if (!value.is_string()) throw fail("value of '" + key + "' must be a string");
  }
  for (const char* key : {"id", "label", "split", "path"})
    if (!j.contains(key)) throw fail(std::string("missing key '") + key + "'");

  ImageRecord rec;
  rec.id = j["id"].get<std::string>();
  if (rec.id.empty()) throw fail("empty id");
  try {
    rec.label = parse_label(j["label"].get<std::string>());
    rec.split = parse_split(j["split"].get<std::string>());
  } catch (const ValidationError& e) {
    throw fail(e.what());
  }
  rec.path = j["path"].get<std::string>();
  return rec;
}

inline std::string manifest_line(const ImageRecord& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["label"] = std::string(to_string(r.label));
  j["split"] = std::string(to_string(r.split));
  j["path"] = r.path;
  return j.dump();
}

}  // namespace detail

inline std::vector<ImageRecord> read_manifest(const std::string& path) {
  auto bytes = detail::read_file(path);
  std::string text(bytes.begin(), bytes.end());
  std::vector<ImageRecord> records;
  std::unordered_set<std::string> ids;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty())
      throw ValidationError("manifest line " + std::to_string(line_no) + ": empty line");
    auto rec = detail::parse_manifest_line(line, line_no);
    if (!ids.insert(rec.id).second)
      throw ValidationError("manifest line " + std::to_string(line_no) + ": duplicate id '" +
                            rec.id + "'");
    records.push_back(std::move(rec));
  }
  return records;
}

inline EmbeddingSet read_embeddings(const std::string& path) {
  auto bytes = detail::read_file(path);
  if (bytes.size() < kEmbeddingHeaderBytes)
    throw ValidationError("'" + path + "': truncated header (" + std::to_string(bytes.size()) +
                          " bytes)");
  if (!detail::has_magic(bytes, kEmbeddingMagic))
    throw ValidationError("'" + path + "': bad magic, expected PEMB");
  const auto version = detail::get_u32(bytes, 4);
  if (version != kEmbeddingVersion)
    throw ValidationError("'" + path + "': unsupported version " + std::to_string(version));
  const std::uint64_t count = detail::get_u32(bytes, 8);
  const std::uint64_t dim = detail::get_u32(bytes, 12);
  if (dim == 0) throw ValidationError("'" + path + "': dim must be positive");
  const std::uint64_t expected = kEmbeddingHeaderBytes + count * dim * 4;
  if (bytes.size() != expected)
    throw ValidationError("'" + path + "': size " + std::to_string(bytes.size()) +
                          " bytes does not match header count=" + std::to_string(count) +
                          " dim=" + std::to_string(dim) + " (expected " +
                          std::to_string(expected) + ")");
  std::vector<float> values(count * dim);
  for (std::size_t i = 0; i < values.size(); ++i)
    values[i] = detail::get_f32(bytes, kEmbeddingHeaderBytes + 4 * i);
  EmbeddingSet emb(dim, std::move(values));
  emb.check_finite();
  return emb;
}

inline void write_embeddings(const EmbeddingSet& emb, const std::string& path) {
  std::vector<char> out;
  out.reserve(kEmbeddingHeaderBytes + emb.values().size() * 4);
  out.insert(out.end(), kEmbeddingMagic.begin(), kEmbeddingMagic.end());
  detail::put_u32(out, kEmbeddingVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(emb.count()));
  detail::put_u32(out, static_cast<std::uint32_t>(emb.dim()));
  for (float f : emb.values()) detail::put_f32(out, f);
  detail::write_file(path, out);
}

inline Dataset load_dataset(const std::string& manifest_path, const std::string& blob_path) {
  auto records = read_manifest(manifest_path);
  auto emb = read_embeddings(blob_path);
  if (records.size() != emb.count())
    throw ValidationError("count mismatch: manifest has " + std::to_string(records.size()) +
                          " records but blob has count=" + std::to_string(emb.count()));
  if (records.empty()) throw ValidationError("empty dataset rejected");
  return Dataset(std::move(records), std::move(emb));
}

inline void save_dataset(const Dataset& ds, const std::string& manifest_path,
                         const std::string& blob_path) {
  if (ds.empty()) throw ValidationError("refusing to save an empty dataset");
  std::string text;
  for (const auto& r : ds.records()) {
    text += detail::manifest_line(r);
    text += '\n';
  }
  detail::write_text(manifest_path, text);
  write_embeddings(ds.embeddings(), blob_path);
}

}  // namespace plagdet
