#include "preq/synthetic.hpp"

#include <random>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace preq {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// 1x1 grayscale PNG; component and page image placeholders.
constexpr unsigned char kTinyPng[] = {
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48,
    0x44, 0x52, 0x00, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00, 0x01, 0x08, 0x00, 0x00, 0x00,
    0x00, 0x3a, 0x7e, 0x9b, 0x55, 0x00, 0x00, 0x00, 0x0a, 0x49, 0x44, 0x41, 0x54, 0x78,
    0x9c, 0x63, 0x68, 0x00, 0x00, 0x00, 0x82, 0x00, 0x81, 0x77, 0xcd, 0x72, 0xb6, 0x00,
    0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82};

std::string make_keyword(std::mt19937_64& rng, std::unordered_set<std::string>& used) {
  std::uniform_int_distribution<int> letter(0, 25);
  for (;;) {
    std::string kw = "kw";
    for (int i = 0; i < 8; ++i) kw += static_cast<char>('a' + letter(rng));
    if (used.insert(kw).second) return kw;
  }
}

}  // namespace

SyntheticCorpus make_keyword_corpus(const SyntheticSpec& spec) {
  if (spec.passages < 1 || spec.documents < 1)
    throw ConfigError("synthetic corpus needs at least one passage and one document");
  std::mt19937_64 rng(spec.seed);
  std::unordered_set<std::string> used;

  SyntheticCorpus out;
  const int per_doc = (spec.passages + spec.documents - 1) / spec.documents;
  int made = 0;
  for (int d = 0; d < spec.documents && made < spec.passages; ++d) {
    Document doc;
    doc.id = "d" + std::to_string(d);
    for (int j = 0; j < per_doc && made < spec.passages; ++j, ++made) {
      const std::string kw = make_keyword(rng, used);
      Passage p;
      p.id = doc.id + "/p" + std::to_string(j);
      p.document_id = doc.id;
      p.page_index = j;
      const std::string stem = "images/d" + std::to_string(d) + "p" + std::to_string(j);
      p.page_image_ref = stem + ".png";
      p.ocr_blocks.push_back({"Quarterly brief covering " + kw + " operations", 0});
      p.ocr_blocks.push_back({"Analysts track " + kw + " performance across regions", 2});
      if (spec.with_components) {
        Component c;
        c.id = "c0";
        c.kind = made % 2 == 0 ? ComponentKind::Figure : ComponentKind::Table;
        c.image_ref = stem + "_c0.png";
        c.layout_order = 1;
        if (spec.with_captions)
          c.caption = "Summary visual for " + kw + " metrics";
        p.components.push_back(std::move(c));
      }

      EvalQuery q;
      q.query_id = "q" + std::to_string(made);
      q.query_text = kw;
      q.gold_passage_ids = {p.id};
      out.queries.push_back(std::move(q));
      out.keywords.push_back(kw);
      doc.passages.push_back(std::move(p));
    }
    out.corpus.documents.push_back(std::move(doc));
  }
  return out;
}

void write_synthetic_corpus(const SyntheticSpec& spec, const fs::path& dir) {
  const SyntheticCorpus synth = make_keyword_corpus(spec);
  fs::create_directories(dir / "images");

  const std::string png(reinterpret_cast<const char*>(kTinyPng), sizeof kTinyPng);
  for (const Passage* p : synth.corpus.passages()) {
    write_text_file(dir / p->page_image_ref, png);
    for (const auto& c : p->components) write_text_file(dir / c.image_ref, png);
  }

  Corpus corpus = synth.corpus;
  corpus.manifest_path = (dir / "manifest.jsonl").string();
  save_corpus(corpus, dir / "manifest.jsonl");

  std::vector<json> queries;
  for (const auto& q : synth.queries)
    queries.push_back({{"query_id", q.query_id},
                       {"query_text", q.query_text},
                       {"gold_passage_ids", q.gold_passage_ids}});
  write_jsonl(dir / "queries.jsonl", queries);
}

}  // namespace preq
