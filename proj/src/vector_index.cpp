#include "preq/vector_index.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

namespace preq {

namespace fs = std::filesystem;

void VectorIndex::rebuild_lookup() {
  lookup_.clear();
  lookup_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!lookup_.emplace(ids_[i], i).second)
      throw ConfigError("duplicate id in index: " + ids_[i]);
  }
}

bool VectorIndex::contains(std::string_view preq_id) const {
  return lookup_.count(std::string(preq_id)) > 0;
}

VectorIndex VectorIndex::from_entries(
    std::size_t dimension, std::vector<std::pair<std::string, EmbeddingVector>> entries) {
  VectorIndex index;
  index.dimension_ = dimension;
  index.ids_.reserve(entries.size());
  index.data_.reserve(entries.size() * dimension);
  for (auto& [id, vec] : entries) {
    if (vec.dimension() != dimension)
      throw ConfigError("index entry " + id + " has dimension " +
                        std::to_string(vec.dimension()) + ", expected " +
                        std::to_string(dimension));
    l2_normalize(vec);
    index.ids_.push_back(std::move(id));
    index.data_.insert(index.data_.end(), vec.values.begin(), vec.values.end());
  }
  index.rebuild_lookup();
  return index;
}

VectorIndex VectorIndex::build(const RetrievalPool& pool) {
  std::size_t dimension = 0;
  std::vector<std::pair<std::string, EmbeddingVector>> entries;
  entries.reserve(pool.size());
  for (const auto& q : pool.preqs) {
    if (!q.embedding) throw ConfigError("preq " + q.id + " has no embedding; cannot build index");
    if (dimension == 0) dimension = q.embedding->dimension();
    entries.emplace_back(q.id, *q.embedding);
  }
  return from_entries(dimension, std::move(entries));
}

std::vector<ScoredHit> VectorIndex::top_k(const EmbeddingVector& query, int k) const {
  if (k < 1) throw ConfigError("k must be >= 1");
  if (size() == 0) return {};
  if (query.dimension() != dimension_)
    throw ConfigError("query dimension " + std::to_string(query.dimension()) +
                      " does not match index dimension " + std::to_string(dimension_));

  std::vector<float> scores(size());
  const float* base = data_.data();
  for (std::size_t i = 0; i < size(); ++i) {
    const float* row = base + i * dimension_;
    float s = 0.0f;
    for (std::size_t d = 0; d < dimension_; ++d) s += row[d] * query.values[d];
    scores[i] = s;
  }

  std::vector<std::size_t> order(size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), size());
  auto better = [&scores](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;  // tie: earlier canonical position wins
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    better);

  std::vector<ScoredHit> hits;
  hits.reserve(take);
  for (std::size_t r = 0; r < take; ++r)
    hits.push_back({ids_[order[r]], scores[order[r]], static_cast<int>(r + 1)});
  return hits;
}

void VectorIndex::save(const fs::path& dir) const {
  fs::create_directories(dir);
  write_vectors_file(dir / "vectors.bin", dimension_, data_);
  write_id_lines(dir / "ids.txt", ids_);
}

VectorIndex VectorIndex::load(const fs::path& dir) {
  auto [dimension, data] = read_vectors_file(dir / "vectors.bin");
  auto ids = read_id_lines(dir / "ids.txt");
  if (dimension == 0 && !ids.empty())
    throw ConfigError("index header declares dimension 0 but ids are present");
  if (dimension > 0 && data.size() != ids.size() * dimension)
    throw ConfigError("index vectors/ids mismatch: " + std::to_string(data.size()) +
                      " floats vs " + std::to_string(ids.size()) + " ids of dimension " +
                      std::to_string(dimension));
  VectorIndex index;
  index.dimension_ = dimension;
  index.data_ = std::move(data);
  index.ids_ = std::move(ids);
  index.rebuild_lookup();
  return index;
}

void write_vectors_file(const fs::path& path, std::size_t dimension,
                        const std::vector<float>& data) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  const std::size_t count = dimension == 0 ? 0 : data.size() / dimension;
  out << "preq-vectors 1 " << dimension << " " << count << "\n";
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (!out) throw Error("write failed: " + path.string());
}

std::pair<std::size_t, std::vector<float>> read_vectors_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("cannot open " + path.string());
  std::string header;
  if (!std::getline(in, header)) throw ConfigError("corrupt vector file header: " + path.string());
  std::istringstream hs(header);
  std::string magic;
  int version = 0;
  std::size_t dimension = 0, count = 0;
  if (!(hs >> magic >> version >> dimension >> count) || magic != "preq-vectors" || version != 1)
    throw ConfigError("corrupt vector file header: " + path.string());
  std::vector<float> data(dimension * count);
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (static_cast<std::size_t>(in.gcount()) != data.size() * sizeof(float))
    throw ConfigError("vector file truncated: " + path.string());
  char extra;
  if (in.read(&extra, 1)) throw ConfigError("vector file has trailing bytes: " + path.string());
  return {dimension, std::move(data)};
}

void write_id_lines(const fs::path& path, const std::vector<std::string>& ids) {
  std::string buf;
  for (const auto& id : ids) {
    buf += id;
    buf += '\n';
  }
  write_text_file(path, buf);
}

std::vector<std::string> read_id_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ArtifactError("cannot open " + path.string());
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) ids.push_back(line);
  }
  return ids;
}

}  // namespace preq
