#include "preq/corpus.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace preq {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(ComponentKind kind) {
  switch (kind) {
    case ComponentKind::Table: return "table";
    case ComponentKind::Figure: return "figure";
    case ComponentKind::Chart: return "chart";
    case ComponentKind::Diagram: return "diagram";
    case ComponentKind::Other: return "other";
  }
  return "other";
}

ComponentKind component_kind_from_string(std::string_view s) {
  if (s == "table") return ComponentKind::Table;
  if (s == "figure") return ComponentKind::Figure;
  if (s == "chart") return ComponentKind::Chart;
  if (s == "diagram") return ComponentKind::Diagram;
  if (s == "other") return ComponentKind::Other;
  throw ConfigError("unknown component kind: " + std::string(s));
}

std::size_t Corpus::passage_count() const {
  std::size_t n = 0;
  for (const auto& d : documents) n += d.passages.size();
  return n;
}

std::vector<const Passage*> Corpus::passages() const {
  std::vector<const Passage*> out;
  out.reserve(passage_count());
  for (const auto& d : documents)
    for (const auto& p : d.passages) out.push_back(&p);
  return out;
}

std::vector<Passage*> Corpus::passages() {
  std::vector<Passage*> out;
  out.reserve(passage_count());
  for (auto& d : documents)
    for (auto& p : d.passages) out.push_back(&p);
  return out;
}

const Passage* Corpus::find_passage(std::string_view passage_id) const {
  for (const auto& d : documents)
    for (const auto& p : d.passages)
      if (p.id == passage_id) return &p;
  return nullptr;
}

const std::string& Corpus::document_of(std::string_view passage_id) const {
  const Passage* p = find_passage(passage_id);
  if (!p) throw ConfigError("unknown passage id: " + std::string(passage_id));
  return p->document_id;
}

fs::path Corpus::base_dir() const {
  fs::path p(manifest_path);
  return p.has_parent_path() ? p.parent_path() : fs::path(".");
}

void Corpus::absolutize_image_refs() {
  const fs::path base = base_dir();
  auto fix = [&base](std::string& ref) {
    if (ref.empty()) return;
    fs::path p(ref);
    if (p.is_relative()) ref = (fs::absolute(base) / p).lexically_normal().string();
  };
  for (auto& d : documents)
    for (auto& p : d.passages) {
      fix(p.page_image_ref);
      for (auto& c : p.components) fix(c.image_ref);
    }
}

namespace {

Passage parse_passage_record(const json& rec, std::size_t lineno, const std::string& where) {
  auto ctx = [&](const std::string& msg) {
    return ConfigError(where + " record " + std::to_string(lineno) + ": " + msg);
  };
  Passage p;
  try {
    p.id = rec.at("passage_id").get<std::string>();
    p.document_id = rec.at("document_id").get<std::string>();
    p.page_index = rec.at("page_index").get<int>();
    p.page_image_ref = rec.value("page_image_ref", std::string{});
    if (rec.contains("ocr_blocks")) {
      for (const auto& b : rec.at("ocr_blocks")) {
        p.ocr_blocks.push_back(
            {b.at("text").get<std::string>(), b.at("layout_order").get<int>()});
      }
    }
    if (rec.contains("components")) {
      for (const auto& c : rec.at("components")) {
        Component comp;
        comp.id = c.at("id").get<std::string>();
        comp.kind = component_kind_from_string(c.at("kind").get<std::string>());
        comp.image_ref = c.at("image_ref").get<std::string>();
        comp.layout_order = c.at("layout_order").get<int>();
        if (c.contains("caption") && !c.at("caption").is_null())
          comp.caption = c.at("caption").get<std::string>();
        p.components.push_back(std::move(comp));
      }
    }
    if (rec.contains("text_surrogate") && !rec.at("text_surrogate").is_null())
      p.text_surrogate = rec.at("text_surrogate").get<std::string>();
  } catch (const json::exception& e) {
    throw ctx(e.what());
  }
  return p;
}

void validate_passage(const Passage& p) {
  std::set<int> orders;
  for (const auto& b : p.ocr_blocks) {
    if (!orders.insert(b.layout_order).second)
      throw ConfigError("passage " + p.id + ": duplicate layout_order " +
                        std::to_string(b.layout_order));
  }
  std::unordered_set<std::string> comp_ids;
  for (const auto& c : p.components) {
    if (!orders.insert(c.layout_order).second)
      throw ConfigError("passage " + p.id + ": duplicate layout_order " +
                        std::to_string(c.layout_order));
    if (!comp_ids.insert(c.id).second)
      throw ConfigError("passage " + p.id + ": duplicate component id " + c.id);
  }
}

void check_image_ref(const fs::path& base, const std::string& ref, const std::string& owner,
                     const LoadOptions& options, std::vector<std::string>* warnings) {
  if (ref.empty()) return;
  fs::path p(ref);
  if (p.is_relative()) p = base / p;
  if (!fs::exists(p)) {
    std::string msg = "dangling image reference for " + owner + ": " + ref;
    if (options.strict) throw ConfigError(msg);
    if (warnings) warnings->push_back(msg);
  }
}

}  // namespace

Corpus load_corpus(const fs::path& manifest_path, const LoadOptions& options,
                   std::vector<std::string>* warnings) {
  if (!fs::exists(manifest_path))
    throw ArtifactError("corpus manifest not found: " + manifest_path.string());

  Corpus corpus;
  corpus.manifest_path = manifest_path.string();
  const fs::path base = options.image_base.value_or(corpus.base_dir());

  std::unordered_map<std::string, std::size_t> doc_slot;
  std::unordered_set<std::string> seen_passage_ids;

  const auto records = read_jsonl(manifest_path);
  std::size_t lineno = 0;
  for (const auto& rec : records) {
    ++lineno;
    Passage p = parse_passage_record(rec, lineno, manifest_path.string());
    if (!seen_passage_ids.insert(p.id).second)
      throw ConfigError("duplicate passage id: " + p.id);
    validate_passage(p);
    check_image_ref(base, p.page_image_ref, "passage " + p.id, options, warnings);
    for (const auto& c : p.components)
      check_image_ref(base, c.image_ref, "component " + c.id + " of " + p.id, options, warnings);

    auto [it, inserted] = doc_slot.try_emplace(p.document_id, corpus.documents.size());
    if (inserted) corpus.documents.push_back(Document{p.document_id, {}});
    corpus.documents[it->second].passages.push_back(std::move(p));
  }

  for (auto& doc : corpus.documents) {
    std::stable_sort(doc.passages.begin(), doc.passages.end(),
                     [](const Passage& a, const Passage& b) { return a.page_index < b.page_index; });
    for (std::size_t j = 0; j < doc.passages.size(); ++j) {
      if (doc.passages[j].page_index != static_cast<int>(j))
        throw ConfigError("document " + doc.id + ": page indices not contiguous from 0 (found " +
                          std::to_string(doc.passages[j].page_index) + " at position " +
                          std::to_string(j) + ")");
    }
  }
  return corpus;
}

void save_corpus(const Corpus& corpus, const fs::path& manifest_path) {
  std::vector<json> records;
  for (const auto& doc : corpus.documents) {
    for (const auto& p : doc.passages) {
      json rec;
      rec["passage_id"] = p.id;
      rec["document_id"] = p.document_id;
      rec["page_index"] = p.page_index;
      rec["page_image_ref"] = p.page_image_ref;
      json blocks = json::array();
      for (const auto& b : p.ocr_blocks)
        blocks.push_back({{"text", b.text}, {"layout_order", b.layout_order}});
      rec["ocr_blocks"] = blocks;
      json comps = json::array();
      for (const auto& c : p.components) {
        json cj = {{"id", c.id},
                   {"kind", std::string(to_string(c.kind))},
                   {"image_ref", c.image_ref},
                   {"layout_order", c.layout_order}};
        if (c.caption) cj["caption"] = *c.caption;
        comps.push_back(cj);
      }
      rec["components"] = comps;
      if (p.text_surrogate) rec["text_surrogate"] = *p.text_surrogate;
      records.push_back(std::move(rec));
    }
  }
  write_jsonl(manifest_path, records);
}

std::string assemble_text_surrogate(const Passage& passage, std::vector<std::string>* warnings) {
  struct Block {
    int layout_order;
    std::string text;
  };
  std::vector<Block> blocks;
  blocks.reserve(passage.ocr_blocks.size() + passage.components.size());
  for (const auto& b : passage.ocr_blocks) blocks.push_back({b.layout_order, b.text});
  for (const auto& c : passage.components) {
    if (!c.caption) {
      if (warnings)
        warnings->push_back("passage " + passage.id + ": component " + c.id +
                            " has no caption; skipped in surrogate");
      continue;
    }
    blocks.push_back({c.layout_order, "[" + std::string(to_string(c.kind)) + "] " + *c.caption});
  }
  std::stable_sort(blocks.begin(), blocks.end(),
                   [](const Block& a, const Block& b) { return a.layout_order < b.layout_order; });
  std::string out;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (i > 0) out += "\n\n";
    out += blocks[i].text;
  }
  return out;
}

void assemble_all_surrogates(Corpus& corpus, std::vector<std::string>* warnings) {
  for (Passage* p : corpus.passages()) p->text_surrogate = assemble_text_surrogate(*p, warnings);
}

}  // namespace preq
