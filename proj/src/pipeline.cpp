#include "preq/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <mutex>
#include <thread>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "preq/vector_index.hpp"

namespace preq {

using nlohmann::json;
namespace fs = std::filesystem;

char to_char(Modality m) { return static_cast<char>(m); }

Modality modality_from_char(char c) {
  switch (c) {
    case 'M': return Modality::M;
    case 'V': return Modality::V;
    case 'T': return Modality::T;
    default: throw ConfigError(std::string("unknown modality: ") + c);
  }
}

bool ModalitySet::contains(Modality mod) const {
  switch (mod) {
    case Modality::M: return m;
    case Modality::V: return v;
    case Modality::T: return t;
  }
  return false;
}

bool ModalitySet::subset_of(const ModalitySet& other) const {
  return (!m || other.m) && (!v || other.v) && (!t || other.t);
}

std::string ModalitySet::to_string() const {
  std::string out;
  auto add = [&out](const char* tag) {
    if (!out.empty()) out += ',';
    out += tag;
  };
  if (m) add("m");
  if (v) add("v");
  if (t) add("t");
  return out;
}

ModalitySet ModalitySet::parse(std::string_view spec) {
  ModalitySet set{false, false, false};
  for (char c : spec) {
    switch (std::tolower(static_cast<unsigned char>(c))) {
      case 'm': set.m = true; break;
      case 'v': set.v = true; break;
      case 't': set.t = true; break;
      case ',':
      case ' ': break;
      default: throw ConfigError("bad modality spec: " + std::string(spec));
    }
  }
  if (set.empty()) throw ConfigError("modality set must not be empty");
  return set;
}

void GenConfig::validate() const {
  if (max_questions_per_source < 1)
    throw ConfigError("max_questions_per_source must be >= 1");
  if (modalities_enabled.empty()) throw ConfigError("modalities_enabled must not be empty");
}

const PreQ* RetrievalPool::find(std::string_view preq_id) const {
  auto it = position_.find(std::string(preq_id));
  return it == position_.end() ? nullptr : &preqs[it->second];
}

const PreQ& RetrievalPool::at(std::string_view preq_id) const {
  const PreQ* p = find(preq_id);
  if (!p) throw ConfigError("unknown preq id: " + std::string(preq_id));
  return *p;
}

void RetrievalPool::rebuild_lookup() {
  position_.clear();
  position_.reserve(preqs.size());
  for (std::size_t i = 0; i < preqs.size(); ++i) {
    if (!position_.emplace(preqs[i].id, i).second)
      throw ConfigError("duplicate preq id in pool: " + preqs[i].id);
  }
}

std::vector<std::string> dedupe_and_cap(const std::vector<std::string>& questions, int n) {
  if (n < 1) throw ConfigError("cap must be >= 1");
  std::vector<std::string> out;
  std::unordered_set<std::string_view> seen;  // views into the caller's vector
  for (const auto& q : questions) {
    if (static_cast<int>(out.size()) >= n) break;
    if (!seen.insert(q).second) continue;
    out.push_back(q);
  }
  return out;
}

namespace {

std::string make_preq_id(const std::string& passage_id, Modality mod,
                         const std::string& component_id, std::size_t ordinal) {
  return passage_id + ":" + to_char(mod) + (":" + component_id + ":") + std::to_string(ordinal);
}

void append_preqs(std::vector<PreQ>& out, const std::vector<std::string>& questions,
                  const Passage& passage, Modality mod, const std::string& component_id) {
  for (std::size_t i = 0; i < questions.size(); ++i) {
    PreQ q;
    q.id = make_preq_id(passage.id, mod, component_id, i);
    q.text = questions[i];
    q.modality = mod;
    q.source_passage_id = passage.id;
    if (mod == Modality::V) q.source_component_id = component_id;
    out.push_back(std::move(q));
  }
}

}  // namespace

std::vector<PreQ> generate_for_passage(const Passage& passage, const GenConfig& config,
                                       ModelGateway& gateway, PassageGenReport* report) {
  config.validate();
  const int n = config.max_questions_per_source;
  std::vector<PreQ> out;
  PassageGenReport local;
  PassageGenReport& rep = report ? *report : local;
  rep.passage_id = passage.id;

  auto warn = [&rep](std::string msg) {
    rep.warnings.push_back(std::move(msg));
    rep.partial = true;
  };

  if (config.modalities_enabled.m) {
    try {
      GenPayload payload;
      payload.image_refs = {passage.page_image_ref};
      auto qs = dedupe_and_cap(gateway.generate_questions(PromptKind::Multimodal, payload, n), n);
      rep.m_count = static_cast<int>(qs.size());
      append_preqs(out, qs, passage, Modality::M, "");
    } catch (const Error& e) {
      warn("passage " + passage.id + ": multimodal generation failed: " + e.what());
    }
  }
  if (config.modalities_enabled.v) {
    for (const auto& comp : passage.components) {
      try {
        GenPayload payload;
        payload.image_refs = {comp.image_ref};
        auto qs = dedupe_and_cap(gateway.generate_questions(PromptKind::Visual, payload, n), n);
        rep.v_count += static_cast<int>(qs.size());
        append_preqs(out, qs, passage, Modality::V, comp.id);
      } catch (const Error& e) {
        warn("passage " + passage.id + ": visual generation failed for component " + comp.id +
             ": " + e.what());
      }
    }
  }
  if (config.modalities_enabled.t) {
    const std::string text =
        passage.text_surrogate ? *passage.text_surrogate : assemble_text_surrogate(passage);
    if (text.empty()) {
      rep.warnings.push_back("passage " + passage.id +
                             ": empty text surrogate, no textual questions");
    } else {
      try {
        GenPayload payload;
        payload.text = text;
        auto qs = dedupe_and_cap(gateway.generate_questions(PromptKind::Textual, payload, n), n);
        rep.t_count = static_cast<int>(qs.size());
        append_preqs(out, qs, passage, Modality::T, "");
      } catch (const Error& e) {
        warn("passage " + passage.id + ": textual generation failed: " + e.what());
      }
    }
  }
  return out;
}

RetrievalPool build_pool(const Corpus& corpus, const GenConfig& config, ModelGateway& gateway,
                         int workers, BuildReport* report) {
  config.validate();
  const auto passages = corpus.passages();
  std::vector<std::vector<PreQ>> slots(passages.size());
  std::vector<PassageGenReport> reports(passages.size());

  workers = std::max(1, workers);
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  auto run = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= passages.size()) return;
      try {
        slots[i] = generate_for_passage(*passages[i], config, gateway, &reports[i]);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  if (workers == 1 || passages.size() <= 1) {
    run();
  } else {
    std::vector<std::thread> threads;
    const std::size_t count = std::min(static_cast<std::size_t>(workers), passages.size());
    for (std::size_t w = 0; w < count; ++w) threads.emplace_back(run);
    for (auto& th : threads) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  RetrievalPool pool;
  for (auto& slot : slots)
    for (auto& q : slot) pool.preqs.push_back(std::move(q));

  std::vector<std::string> texts;
  texts.reserve(pool.preqs.size());
  for (const auto& q : pool.preqs) texts.push_back(q.text);
  if (!texts.empty()) {
    auto vectors = gateway.embed_texts(texts);
    if (vectors.size() != pool.preqs.size())
      throw ProviderError("embedding count mismatch: asked " + std::to_string(texts.size()) +
                          ", got " + std::to_string(vectors.size()));
    for (std::size_t i = 0; i < vectors.size(); ++i)
      pool.preqs[i].embedding = std::move(vectors[i]);
  }

  for (const auto& q : pool.preqs) pool.by_passage[q.source_passage_id].push_back(q.id);
  pool.rebuild_lookup();
  if (report) report->per_passage = std::move(reports);
  return pool;
}

RetrievalPool filter_pool(const RetrievalPool& pool, const ModalitySet& mask) {
  if (mask.empty()) throw ConfigError("modality mask must not be empty");
  RetrievalPool out;
  for (const auto& q : pool.preqs)
    if (mask.contains(q.modality)) out.preqs.push_back(q);
  for (const auto& q : out.preqs) out.by_passage[q.source_passage_id].push_back(q.id);
  out.rebuild_lookup();
  return out;
}

void save_pool(const RetrievalPool& pool, const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<json> records;
  records.reserve(pool.preqs.size());
  std::size_t dim = 0;
  for (const auto& q : pool.preqs) {
    if (!q.embedding)
      throw ConfigError("preq " + q.id + " has no embedding; cannot persist pool");
    if (dim == 0) dim = q.embedding->dimension();
    json rec = {{"id", q.id},
                {"text", q.text},
                {"modality", std::string(1, to_char(q.modality))},
                {"source_passage_id", q.source_passage_id}};
    if (q.source_component_id) rec["source_component_id"] = *q.source_component_id;
    records.push_back(std::move(rec));
  }
  write_jsonl(dir / "preqs.jsonl", records);

  std::vector<float> data;
  data.reserve(pool.preqs.size() * dim);
  std::vector<std::string> ids;
  ids.reserve(pool.preqs.size());
  for (const auto& q : pool.preqs) {
    if (q.embedding->dimension() != dim)
      throw ConfigError("preq " + q.id + " embedding dimension mismatch");
    data.insert(data.end(), q.embedding->values.begin(), q.embedding->values.end());
    ids.push_back(q.id);
  }
  write_vectors_file(dir / "vectors.bin", dim, data);
  write_id_lines(dir / "ids.txt", ids);
}

RetrievalPool load_pool(const fs::path& dir) {
  const fs::path store = dir / "preqs.jsonl";
  if (!fs::exists(store))
    throw ArtifactError("preQ store not found; run generate (" + store.string() + ")");
  RetrievalPool pool;
  for (const auto& rec : read_jsonl(store)) {
    PreQ q;
    q.id = rec.at("id").get<std::string>();
    q.text = rec.at("text").get<std::string>();
    const std::string mod = rec.at("modality").get<std::string>();
    if (mod.size() != 1) throw ConfigError("bad modality in preq store: " + mod);
    q.modality = modality_from_char(mod[0]);
    q.source_passage_id = rec.at("source_passage_id").get<std::string>();
    if (rec.contains("source_component_id"))
      q.source_component_id = rec.at("source_component_id").get<std::string>();
    pool.preqs.push_back(std::move(q));
  }

  auto [dim, data] = read_vectors_file(dir / "vectors.bin");
  const auto ids = read_id_lines(dir / "ids.txt");
  if (ids.size() != pool.preqs.size() || (dim > 0 && data.size() != ids.size() * dim))
    throw ConfigError("preq store is inconsistent with its embedding sidecar: " + dir.string());
  for (std::size_t i = 0; i < pool.preqs.size(); ++i) {
    if (ids[i] != pool.preqs[i].id)
      throw ConfigError("embedding sidecar id order mismatch at line " + std::to_string(i + 1));
    EmbeddingVector v;
    v.values.assign(data.begin() + static_cast<std::ptrdiff_t>(i * dim),
                    data.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim));
    pool.preqs[i].embedding = std::move(v);
  }

  for (const auto& q : pool.preqs) pool.by_passage[q.source_passage_id].push_back(q.id);
  pool.rebuild_lookup();
  return pool;
}

void save_build_report(const BuildReport& report, const fs::path& path) {
  std::vector<json> records;
  std::size_t total = 0;
  for (const auto& r : report.per_passage) {
    records.push_back({{"passage_id", r.passage_id},
                       {"m_count", r.m_count},
                       {"v_count", r.v_count},
                       {"t_count", r.t_count},
                       {"partial", r.partial},
                       {"warnings", r.warnings}});
    total += static_cast<std::size_t>(r.m_count + r.v_count + r.t_count);
  }
  records.push_back({{"summary", true},
                     {"passages", report.per_passage.size()},
                     {"total_preqs", total}});
  write_jsonl(path, records);
}

}  // namespace preq
