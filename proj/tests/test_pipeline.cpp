#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>

#include "preq/pipeline.hpp"
#include "test_support.hpp"

using namespace preq;
using preq::test::ScriptedGateway;
using preq::test::TempDir;
using preq::test::make_passage;

namespace {

Corpus two_passage_corpus() {
  Corpus corpus;
  Document doc;
  doc.id = "d0";
  doc.passages.push_back(make_passage("d0/p0", "d0", 0, "alpha beta"));
  doc.passages.push_back(make_passage("d0/p1", "d0", 1, "gamma delta"));
  corpus.documents.push_back(std::move(doc));
  assemble_all_surrogates(corpus);
  return corpus;
}

}  // namespace

TEST_CASE("dedupe_and_cap") {
  CHECK(dedupe_and_cap({"a", "b", "a"}, 50) == std::vector<std::string>{"a", "b"});
  CHECK(dedupe_and_cap({}, 50).empty());
  std::vector<std::string> sixty;
  for (int i = 0; i < 60; ++i) sixty.push_back("q" + std::to_string(i));
  const auto capped = dedupe_and_cap(sixty, 50);
  REQUIRE(capped.size() == 50);
  CHECK(capped.front() == "q0");
  CHECK(capped.back() == "q49");
  CHECK_THROWS_AS(dedupe_and_cap({"a"}, 0), ConfigError);
}

TEST_CASE("generate_for_passage: textual only") {
  ScriptedGateway gw;
  gw.questions_per_call = 3;
  Passage p = make_passage("d0/p0", "d0", 0, "alpha beta");
  p.text_surrogate = assemble_text_surrogate(p);
  GenConfig config;
  config.modalities_enabled = ModalitySet{false, false, true};
  const auto preqs = generate_for_passage(p, config, gw);
  REQUIRE(preqs.size() == 3);
  for (const auto& q : preqs) {
    CHECK(q.modality == Modality::T);
    CHECK(q.source_passage_id == "d0/p0");
    CHECK(!q.source_component_id.has_value());
  }
  CHECK(preqs[0].id == "d0/p0:T::0");
  CHECK(preqs[2].id == "d0/p0:T::2");
}

TEST_CASE("generate_for_passage: visual fan-out per component") {
  ScriptedGateway gw;
  gw.questions_per_call = 2;
  Passage p = make_passage("d0/p0", "d0", 0, "text", 2);
  GenConfig config;
  config.modalities_enabled = ModalitySet{false, true, false};
  const auto preqs = generate_for_passage(p, config, gw);
  REQUIRE(preqs.size() == 4);
  CHECK(preqs[0].source_component_id == "c0");
  CHECK(preqs[2].source_component_id == "c1");
  CHECK(preqs[0].id == "d0/p0:V:c0:0");
  CHECK(preqs[3].id == "d0/p0:V:c1:1");
}

TEST_CASE("generate_for_passage: overshooting gateway is capped at n") {
  ScriptedGateway gw;
  gw.questions_per_call = 60;
  Passage p = make_passage("d0/p0", "d0", 0, "text");
  GenConfig config;
  config.max_questions_per_source = 50;
  config.modalities_enabled = ModalitySet{true, false, false};
  const auto preqs = generate_for_passage(p, config, gw);
  CHECK(preqs.size() == 50);
  for (const auto& q : preqs) CHECK(q.modality == Modality::M);
}

TEST_CASE("generate_for_passage: duplicate questions collapse") {
  ScriptedGateway gw;
  gw.gen_override = [](PromptKind, const GenPayload&, int) {
    return std::vector<std::string>{"same", "same", "other"};
  };
  Passage p = make_passage("d0/p0", "d0", 0, "text");
  p.text_surrogate = "text";
  GenConfig config;
  config.modalities_enabled = ModalitySet{false, false, true};
  const auto preqs = generate_for_passage(p, config, gw);
  REQUIRE(preqs.size() == 2);
  CHECK(preqs[0].text == "same");
  CHECK(preqs[1].text == "other");
}

TEST_CASE("generate_for_passage: one failing modality degrades gracefully") {
  ScriptedGateway gw;
  gw.questions_per_call = 2;
  gw.fail_multimodal = true;
  Passage p = make_passage("d0/p0", "d0", 0, "alpha", 1);
  p.text_surrogate = "alpha";
  GenConfig config;  // all modalities
  PassageGenReport report;
  const auto preqs = generate_for_passage(p, config, gw, &report);
  CHECK(report.partial);
  REQUIRE(report.warnings.size() == 1);
  CHECK(report.m_count == 0);
  CHECK(report.v_count == 2);
  CHECK(report.t_count == 2);
  CHECK(preqs.size() == 4);  // V and T still produced
}

TEST_CASE("build_pool: fan-out arithmetic and by_passage coverage") {
  ScriptedGateway gw;
  gw.questions_per_call = 3;
  Corpus corpus = two_passage_corpus();
  GenConfig config;
  config.modalities_enabled = ModalitySet{false, false, true};
  const RetrievalPool pool = build_pool(corpus, config, gw);
  CHECK(pool.size() == 6);
  REQUIRE(pool.by_passage.size() == 2);
  CHECK(pool.by_passage.at("d0/p0").size() == 3);
  CHECK(pool.by_passage.at("d0/p1").size() == 3);
  for (const auto& q : pool.preqs) {
    REQUIRE(q.embedding.has_value());
    CHECK(q.embedding->dimension() == 64);
  }
}

TEST_CASE("build_pool: all modalities on a one-component passage") {
  ScriptedGateway gw;
  gw.questions_per_call = 2;
  Corpus corpus;
  Document doc;
  doc.id = "d0";
  doc.passages.push_back(make_passage("d0/p0", "d0", 0, "alpha", 1));
  corpus.documents.push_back(std::move(doc));
  assemble_all_surrogates(corpus);
  const RetrievalPool pool = build_pool(corpus, GenConfig{}, gw);
  CHECK(pool.size() == 6);  // 2 M + 2 V + 2 T
}

TEST_CASE("build_pool: visual prompt returning empty list yields no V preqs") {
  ScriptedGateway gw;
  gw.gen_override = [](PromptKind kind, const GenPayload& payload, int) {
    if (kind == PromptKind::Visual) return std::vector<std::string>{};
    return std::vector<std::string>{"q about " + (payload.image_refs.empty()
                                                      ? payload.text
                                                      : payload.image_refs[0])};
  };
  Corpus corpus;
  Document doc;
  doc.id = "d0";
  doc.passages.push_back(make_passage("d0/p0", "d0", 0, "alpha", 1));
  corpus.documents.push_back(std::move(doc));
  assemble_all_surrogates(corpus);
  const RetrievalPool pool = build_pool(corpus, GenConfig{}, gw);
  CHECK(pool.size() == 2);  // M + T only
  for (const auto& q : pool.preqs) CHECK(q.modality != Modality::V);
}

TEST_CASE("build_pool: idempotent under a deterministic gateway") {
  ScriptedGateway gw;
  Corpus corpus = two_passage_corpus();
  const RetrievalPool a = build_pool(corpus, GenConfig{}, gw);
  const RetrievalPool b = build_pool(corpus, GenConfig{}, gw);
  CHECK(a == b);
}

TEST_CASE("build_pool: worker count does not change the result") {
  ScriptedGateway gw;
  Corpus corpus;
  Document doc;
  doc.id = "d0";
  for (int j = 0; j < 9; ++j)
    doc.passages.push_back(make_passage("d0/p" + std::to_string(j), "d0", j,
                                        "tok" + std::to_string(j), j % 3));
  corpus.documents.push_back(std::move(doc));
  assemble_all_surrogates(corpus);
  const RetrievalPool seq = build_pool(corpus, GenConfig{}, gw, 1);
  const RetrievalPool par = build_pool(corpus, GenConfig{}, gw, 4);
  CHECK(seq == par);
}

TEST_CASE("per-source cap holds for every source") {
  ScriptedGateway gw;
  gw.questions_per_call = 9;
  Corpus corpus;
  Document doc;
  doc.id = "d0";
  doc.passages.push_back(make_passage("d0/p0", "d0", 0, "a b c d e f", 2));
  corpus.documents.push_back(std::move(doc));
  assemble_all_surrogates(corpus);
  GenConfig config;
  config.max_questions_per_source = 4;
  const RetrievalPool pool = build_pool(corpus, config, gw);
  std::map<std::string, int> per_source;
  for (const auto& q : pool.preqs) {
    std::string source = q.source_passage_id + ":" + to_char(q.modality);
    if (q.source_component_id) source += ":" + *q.source_component_id;
    ++per_source[source];
  }
  for (const auto& [source, count] : per_source) {
    INFO(source);
    CHECK(count <= 4);
  }
}

TEST_CASE("filter_pool removes exactly the masked-out modalities") {
  ScriptedGateway gw;
  Corpus corpus;
  Document doc;
  doc.id = "d0";
  doc.passages.push_back(make_passage("d0/p0", "d0", 0, "alpha beta", 1));
  doc.passages.push_back(make_passage("d0/p1", "d0", 1, "gamma", 0));
  corpus.documents.push_back(std::move(doc));
  assemble_all_surrogates(corpus);
  const RetrievalPool full = build_pool(corpus, GenConfig{}, gw);

  const RetrievalPool no_v = filter_pool(full, ModalitySet{true, false, true});
  for (const auto& q : no_v.preqs) CHECK(q.modality != Modality::V);
  // set difference: dropped entries are exactly the V ones
  CHECK(full.size() - no_v.size() ==
        static_cast<std::size_t>(std::count_if(full.preqs.begin(), full.preqs.end(),
                                               [](const PreQ& q) { return q.modality == Modality::V; })));

  // subset monotonicity on the plumbing level
  const RetrievalPool t_only = filter_pool(full, ModalitySet{false, false, true});
  for (const auto& q : t_only.preqs) CHECK(no_v.find(q.id) != nullptr);
}

TEST_CASE("pool persistence round-trips") {
  ScriptedGateway gw;
  Corpus corpus;
  Document doc;
  doc.id = "d0";
  doc.passages.push_back(make_passage("d0/p0", "d0", 0, "alpha beta", 2));
  doc.passages.push_back(make_passage("d0/p1", "d0", 1, "gamma"));
  corpus.documents.push_back(std::move(doc));
  assemble_all_surrogates(corpus);
  const RetrievalPool pool = build_pool(corpus, GenConfig{}, gw);
  REQUIRE(std::any_of(pool.preqs.begin(), pool.preqs.end(),
                      [](const PreQ& q) { return q.source_component_id.has_value(); }));
  TempDir tmp("pool");
  save_pool(pool, tmp.path() / "preqs");
  const RetrievalPool loaded = load_pool(tmp.path() / "preqs");
  CHECK(pool == loaded);
}

TEST_CASE("load_pool names the missing upstream command") {
  TempDir tmp("pool");
  try {
    load_pool(tmp.path() / "preqs");
    FAIL("expected ArtifactError");
  } catch (const ArtifactError& e) {
    CHECK(std::string(e.what()).find("run generate") != std::string::npos);
  }
}

TEST_CASE("modality set parsing") {
  CHECK(ModalitySet::parse("m,v,t") == ModalitySet::all());
  CHECK(ModalitySet::parse("T") == ModalitySet{false, false, true});
  CHECK(ModalitySet::parse("M, V") == ModalitySet{true, true, false});
  CHECK_THROWS_AS(ModalitySet::parse(""), ConfigError);
  CHECK_THROWS_AS(ModalitySet::parse("x"), ConfigError);
  CHECK(ModalitySet{false, true, false}.subset_of(ModalitySet::all()));
  CHECK(!ModalitySet::all().subset_of(ModalitySet{false, true, false}));
}
