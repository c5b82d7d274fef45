#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "preq/gateway.hpp"
#include "preq/pipeline.hpp"

namespace preq {

struct ScoredHit {
  std::string preq_id;
  float score = 0.0f;  // cosine similarity, in [-1, 1]
  int rank = 0;        // 1-based, contiguous

  bool operator==(const ScoredHit&) const = default;
};

// Exact cosine top-k over unit-normalized embeddings. Entry order is the
// canonical pool order; equal scores break ties on it. Immutable after
// build, safe for concurrent searches.
class VectorIndex {
 public:
  VectorIndex() = default;

  static VectorIndex build(const RetrievalPool& pool);
  // Re-normalizes defensively; vectors must share one dimension.
  static VectorIndex from_entries(std::size_t dimension,
                                  std::vector<std::pair<std::string, EmbeddingVector>> entries);

  std::vector<ScoredHit> top_k(const EmbeddingVector& query, int k) const;

  std::size_t size() const { return ids_.size(); }
  std::size_t dimension() const { return dimension_; }
  const std::vector<std::string>& ids() const { return ids_; }
  bool contains(std::string_view preq_id) const;

  // Index directory format: vectors.bin (text header + packed little-endian
  // f32) and ids.txt (one id per line, same order). Round-trips bit-exactly.
  void save(const std::filesystem::path& dir) const;
  static VectorIndex load(const std::filesystem::path& dir);

  bool operator==(const VectorIndex& other) const {
    return dimension_ == other.dimension_ && ids_ == other.ids_ && data_ == other.data_;
  }

 private:
  std::size_t dimension_ = 0;
  std::vector<std::string> ids_;
  std::vector<float> data_;  // row-major, ids_.size() x dimension_
  std::unordered_map<std::string, std::size_t> lookup_;

  void rebuild_lookup();
};

// Low-level vector blob I/O shared by the index and the preQ store sidecar.
// Header line: "preq-vectors 1 <dimension> <count>\n", then count*dimension
// packed little-endian 32-bit floats.
void write_vectors_file(const std::filesystem::path& path, std::size_t dimension,
                        const std::vector<float>& data);
std::pair<std::size_t, std::vector<float>> read_vectors_file(const std::filesystem::path& path);

void write_id_lines(const std::filesystem::path& path, const std::vector<std::string>& ids);
std::vector<std::string> read_id_lines(const std::filesystem::path& path);

}  // namespace preq
