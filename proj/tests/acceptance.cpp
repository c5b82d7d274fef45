// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Tolerances are pinned in code next to each check.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "frozen_prompts.hpp"
#include "preq/commands.hpp"
#include "preq/eval.hpp"
#include "preq/synthetic.hpp"
#include "preq/vector_index.hpp"
#include "test_support.hpp"

using namespace preq;
using preq::test::ScriptedGateway;
using preq::test::TempDir;
using preq::test::random_unit_vector;

namespace {

struct CheckFailure {
  std::string message;
};

void expect(bool ok, const std::string& message) {
  if (!ok) throw CheckFailure{message};
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ---- criterion 1: exact top-k vs brute force, 100 randomized indices ----

std::vector<std::string> oracle_top_k(const std::vector<std::pair<std::string, EmbeddingVector>>& entries,
                                      const EmbeddingVector& query, int k) {
  struct Row {
    std::size_t pos;
    float score;
  };
  std::vector<Row> rows;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    EmbeddingVector v = entries[i].second;
    l2_normalize(v);
    float s = 0.0f;
    for (std::size_t d = 0; d < v.values.size(); ++d) s += v.values[d] * query.values[d];
    rows.push_back({i, s});
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.pos < b.pos;
  });
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < rows.size() && i < static_cast<std::size_t>(k); ++i)
    ids.push_back(entries[rows[i].pos].first);
  return ids;
}

void criterion_topk_oracle() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937 rng(20250811);
  std::uniform_int_distribution<std::size_t> count_dist(1, 1000);
  std::uniform_int_distribution<std::size_t> dim_dist(2, 64);
  std::uniform_int_distribution<int> k_dist(1, 200);
  for (int round = 0; round < 100; ++round) {
    const std::size_t count = count_dist(rng);
    const std::size_t dim = dim_dist(rng);
    std::vector<std::pair<std::string, EmbeddingVector>> entries;
    entries.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
      entries.emplace_back("e" + std::to_string(i), random_unit_vector(rng, dim));
    if (count > 6) {
      entries[4].second = entries[2].second;  // forced exact ties
      entries[count - 1].second = entries[0].second;
    }
    const VectorIndex index = VectorIndex::from_entries(dim, entries);
    const EmbeddingVector query = random_unit_vector(rng, dim);
    const int k = k_dist(rng);
    const auto hits = index.top_k(query, k);
    const auto expected = oracle_top_k(entries, query, k);
    expect(hits.size() == expected.size(), "hit count mismatch in round " + std::to_string(round));
    for (std::size_t i = 0; i < hits.size(); ++i)
      expect(hits[i].preq_id == expected[i],
             "round " + std::to_string(round) + ": rank " + std::to_string(i + 1) + " got " +
                 hits[i].preq_id + " want " + expected[i]);
  }
  const double elapsed = seconds_since(start);
  expect(elapsed < 5.0, "runtime " + std::to_string(elapsed) + "s exceeds 5s");
}

// ---- criterion 2 ----

void criterion_k_rule() {
  expect(select_k(100001) == 100, "select_k(100001) != 100");
  expect(select_k(100000) == 150, "select_k(100000) != 150");
}

// ---- criterion 3: metric oracles on 50 randomized rank vectors ----

void criterion_metrics() {
  std::mt19937 rng(3141);
  std::uniform_int_distribution<int> len(1, 60), rank(0, 12);
  for (int round = 0; round < 50; ++round) {
    std::vector<std::optional<int>> rs;
    const int n = len(rng);
    for (int i = 0; i < n; ++i) {
      const int r = rank(rng);
      rs.push_back(r == 0 ? std::optional<int>{} : std::optional<int>{r});
    }
    for (int k : {1, 3, 5}) {
      int hits = 0;
      double mrr = 0;
      for (const auto& r : rs)
        if (r && *r <= k) {
          ++hits;
          mrr += 1.0 / *r;
        }
      expect(std::abs(recall_at_k(rs, k) - double(hits) / n) <= 1e-12, "recall oracle mismatch");
      expect(std::abs(mrr_at_k(rs, k) - mrr / n) <= 1e-12, "mrr oracle mismatch");
    }
    expect(recall_at_k(rs, 1) <= recall_at_k(rs, 3) && recall_at_k(rs, 3) <= recall_at_k(rs, 5),
           "recall not monotone in k");
    expect(mrr_at_k(rs, 5) <= recall_at_k(rs, 5) + 1e-15, "mrr@5 exceeds recall@5");
  }
}

// ---- criterion 4: grouping partition invariants on 100 randomized retrievals ----

RetrievalPool random_embedded_pool(std::mt19937& rng, int passages, int per_passage, int dim) {
  RetrievalPool pool;
  for (int p = 0; p < passages; ++p)
    for (int i = 0; i < per_passage; ++i) {
      PreQ q;
      q.id = "p" + std::to_string(p) + ":T::" + std::to_string(i);
      q.text = "text " + q.id;
      q.modality = Modality::T;
      q.source_passage_id = "p" + std::to_string(p);
      q.embedding = random_unit_vector(rng, static_cast<std::size_t>(dim));
      pool.preqs.push_back(std::move(q));
    }
  for (const auto& q : pool.preqs) pool.by_passage[q.source_passage_id].push_back(q.id);
  pool.rebuild_lookup();
  return pool;
}

void criterion_partition() {
  std::mt19937 rng(4004);
  std::uniform_int_distribution<int> pcount(1, 30), qcount(1, 8), kd(1, 120);
  for (int round = 0; round < 100; ++round) {
    const RetrievalPool pool = random_embedded_pool(rng, pcount(rng), qcount(rng), 12);
    const VectorIndex index = VectorIndex::build(pool);
    const auto hits = index.top_k(random_unit_vector(rng, 12), kd(rng));
    const GroupSet set = group_by_passage(hits, pool);

    std::size_t members = 0;
    std::set<std::string> seen_ids;
    std::set<std::string> candidates;
    for (std::size_t g = 0; g < set.groups.size(); ++g) {
      const auto& group = set.groups[g];
      candidates.insert(group.passage_id);
      members += group.members.size();
      if (g > 0)
        expect(set.groups[g - 1].best_rank < group.best_rank, "groups not ascending by best_rank");
      expect(group.best_rank == group.members.front().rank, "best_rank is not the first member");
      for (const auto& m : group.members)
        expect(seen_ids.insert(m.preq_id).second, "hit appears in two groups");
    }
    expect(members == hits.size(), "groups do not partition the hit set");

    // ranked output must select from candidate passages only
    ScriptedGateway gw;
    gw.embed_dimension = 12;
    std::uniform_int_distribution<int> tok(-4, 40);
    std::string raw;
    for (int i = 0; i < 7; ++i) raw += std::to_string(tok(rng)) + ",";
    gw.rank_raw = raw;
    QueryRequest request;
    request.query_text = "round " + std::to_string(round);
    const RankedPassages out = answer_query(request, index, pool, gw);
    std::set<std::string> returned;
    for (const auto& entry : out.passages) {
      expect(returned.insert(entry.passage_id).second, "duplicate passage in output");
    }
    if (!out.passages.empty() && !hits.empty()) {
      const auto own_hits = index.top_k(MockGateway::hash_embed(request.query_text, 12),
                                        select_k(pool.size()));
      const GroupSet own = group_by_passage(own_hits, pool);
      std::set<std::string> own_candidates;
      for (const auto& g : own.groups) own_candidates.insert(g.passage_id);
      for (const auto& entry : out.passages)
        expect(own_candidates.count(entry.passage_id) == 1,
               "output passage not among candidates");
    }
  }
}

// ---- criterion 5: qcluster on == off under the identity mock ranker ----

void criterion_ablation_consistency() {
  SyntheticSpec spec;
  spec.passages = 50;
  spec.documents = 10;
  spec.with_captions = true;
  SyntheticCorpus synth = make_keyword_corpus(spec);
  assemble_all_surrogates(synth.corpus);
  ProviderConfig pc;
  pc.embed_dimension = 2048;
  MockGateway gateway(pc);
  RetrievalPool pool = build_pool(synth.corpus, GenConfig{}, gateway);
  RetrievalEngine engine(std::move(pool), gateway);

  QueryRequest tpl;
  const auto rows = run_qcluster_ablation(synth.queries, tpl, engine, synth.corpus, "fp");
  expect(rows.size() == 2, "expected two ablation rows");
  expect(rows[0].report.recall_at == rows[1].report.recall_at, "recall differs across rows");
  expect(rows[0].report.mrr_at_5 == rows[1].report.mrr_at_5, "mrr differs across rows");
  expect(rows[0].report.per_query == rows[1].report.per_query, "per-query ranks differ");
}

// ---- criterion 6: bundled corpus end to end, checked against the cosine oracle ----

void criterion_mock_end_to_end() {
  const auto start = std::chrono::steady_clock::now();
  TempDir tmp("accept6");
  RunConfig config;
  config.corpus_manifest = std::filesystem::path(PREQ_DATA_DIR) / "sample/manifest.jsonl";
  config.eval_queries = std::filesystem::path(PREQ_DATA_DIR) / "sample/queries.jsonl";
  config.workdir = tmp.path() / "wd";
  config.provider.backend = ProviderConfig::Backend::Mock;
  config.provider.prompt_dir = PREQ_PROMPT_DIR;
  config.workers = 2;

  commands::cmd_caption(config);
  commands::cmd_generate(config);
  commands::cmd_index(config);
  const EvalReport report = commands::cmd_eval(config);

  expect(report.per_query.size() >= 10, "bundled corpus has fewer than 10 queries");
  expect(report.recall_at.at(1) == 1.0, "recall@1 != 1.0");
  expect(report.mrr_at_5 == 1.0, "mrr@5 != 1.0");

  // exhaustive-cosine oracle, independent of the index/grouping path
  const RetrievalPool pool = load_pool(commands::preq_store_dir(config));
  MockGateway gateway(config.provider);
  std::map<std::string, int> reported_rank;
  for (const auto& [qid, rank] : report.per_query) {
    expect(rank.has_value(), "report has an absent rank for " + qid);
    reported_rank[qid] = *rank;
  }
  for (const auto& eq : load_eval_queries(config.eval_queries)) {
    const EmbeddingVector qv = gateway.embed_texts({eq.query_text})[0];
    struct Scored {
      float score;
      std::size_t pos;
      const PreQ* q;
    };
    std::vector<Scored> scored;
    for (std::size_t i = 0; i < pool.preqs.size(); ++i)
      scored.push_back({dot(qv, *pool.preqs[i].embedding), i, &pool.preqs[i]});
    std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.pos < b.pos;
    });
    // first-occurrence order of passages over the full scored scan
    std::vector<std::string> passage_order;
    std::set<std::string> seen;
    for (const auto& s : scored)
      if (seen.insert(s.q->source_passage_id).second)
        passage_order.push_back(s.q->source_passage_id);
    expect(!passage_order.empty() && passage_order[0] == eq.gold_passage_ids[0],
           "oracle disagrees: gold not first for query " + eq.query_id);
    // oracle-derived rank of the gold passage equals the reported rank
    int oracle_rank = 0;
    for (std::size_t i = 0; i < passage_order.size(); ++i)
      if (passage_order[i] == eq.gold_passage_ids[0]) {
        oracle_rank = static_cast<int>(i + 1);
        break;
      }
    expect(reported_rank.at(eq.query_id) == oracle_rank,
           "report rank differs from oracle rank for query " + eq.query_id);
  }

  const double elapsed = seconds_since(start);
  expect(elapsed < 30.0, "pipeline runtime " + std::to_string(elapsed) + "s exceeds 30s");
}

// ---- criterion 7: 1000 fuzzed rank outputs never crash the query path ----

void criterion_rank_fuzz() {
  std::mt19937 rng(777);
  const RetrievalPool pool = random_embedded_pool(rng, 20, 5, 10);
  const VectorIndex index = VectorIndex::build(pool);
  std::set<std::string> valid_passages;
  for (const auto& q : pool.preqs) valid_passages.insert(q.source_passage_id);

  std::uniform_int_distribution<int> len(0, 24);
  std::uniform_int_distribution<int> byte(32, 126);
  std::uniform_int_distribution<int> mode(0, 4);
  for (int round = 0; round < 1000; ++round) {
    std::string raw;
    switch (mode(rng)) {
      case 0:  // pure noise
        for (int i = 0, n = len(rng); i < n; ++i) raw += static_cast<char>(byte(rng));
        break;
      case 1:  // numbers with junk separators
        raw = std::to_string(rng() % 100) + ";" + std::to_string(rng() % 100);
        break;
      case 2:  // huge, negative, duplicate indices
        raw = "999999999999,-3,2,2," + std::to_string(rng() % 50);
        break;
      case 3:  // prose plus trailing digits
        raw = "the answer is groups " + std::to_string(rng() % 9) + ", obviously";
        break;
      default:  // partially valid
        for (int i = 0, n = len(rng) / 3; i < n; ++i) raw += std::to_string(rng() % 40) + ",";
        break;
    }
    ScriptedGateway gw;
    gw.embed_dimension = 10;
    gw.rank_raw = raw;
    QueryRequest request;
    request.query_text = "fuzz " + std::to_string(round);
    RankedPassages out;
    try {
      out = answer_query(request, index, pool, gw);
    } catch (const std::exception& e) {
      expect(false, "answer_query threw on fuzz input: " + std::string(e.what()));
    }
    std::set<std::string> seen;
    expect(out.passages.size() <= 5, "more than 5 passages returned");
    for (const auto& entry : out.passages) {
      expect(valid_passages.count(entry.passage_id) == 1, "unknown passage in output");
      expect(seen.insert(entry.passage_id).second, "duplicate passage in output");
    }
  }
}

// ---- criterion 8: DBSCAN vs full-distance-matrix reference ----

int dbscan_reference(const std::vector<EmbeddingVector>& pts, double eps, int min_pts) {
  const std::size_t n = pts.size();
  std::vector<std::vector<double>> dist(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) dist[i][j] = 1.0 - double(dot(pts[i], pts[j]));
  std::vector<bool> core(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    int within = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (dist[i][j] <= eps) ++within;
    core[i] = within >= min_pts;
  }
  std::vector<int> comp(n, -1);
  int clusters = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i] || comp[i] != -1) continue;
    std::vector<std::size_t> stack{i};
    comp[i] = clusters;
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (std::size_t v = 0; v < n; ++v)
        if (core[v] && comp[v] == -1 && dist[u][v] <= eps) {
          comp[v] = clusters;
          stack.push_back(v);
        }
    }
    ++clusters;
  }
  return clusters;
}

void criterion_dbscan_oracle() {
  std::mt19937 rng(888);
  std::uniform_int_distribution<int> size_dist(1, 200);
  const std::pair<double, int> settings[] = {{0.2, 2}, {0.3, 1}, {0.4, 3}, {0.5, 4}, {0.6, 5}};
  for (int round = 0; round < 100; ++round) {
    const int n = size_dist(rng);
    std::vector<EmbeddingVector> pts;
    pts.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) pts.push_back(random_unit_vector(rng, 6));
    for (const auto& [eps, min_pts] : settings) {
      const int got = dbscan_cluster_count(pts, eps, min_pts);
      const int want = dbscan_reference(pts, eps, min_pts);
      expect(got == want, "round " + std::to_string(round) + " eps " + std::to_string(eps) +
                              " min_pts " + std::to_string(min_pts) + ": got " +
                              std::to_string(got) + " want " + std::to_string(want));
    }
  }
}

// ---- criterion 9: redundancy vs naive double loop ----

void criterion_redundancy_oracle() {
  std::mt19937 rng(909);
  RetrievalPool pool;
  std::map<std::string, std::string> pass_to_doc;
  for (int i = 0; i < 300; ++i) {
    PreQ q;
    q.id = "q" + std::to_string(i);
    q.text = q.id;
    q.modality = Modality::T;
    q.source_passage_id = "p" + std::to_string(i % 30);
    pass_to_doc[q.source_passage_id] = "d" + std::to_string((i % 30) % 7);
    q.embedding = random_unit_vector(rng, 20);
    pool.preqs.push_back(std::move(q));
  }
  pool.rebuild_lookup();
  const std::vector<double> thresholds = {0.5, 0.6, 0.7, 0.8, 0.9};
  const RedundancyReport report = redundancy_analysis(pool, pass_to_doc, thresholds, 2);

  for (double t : thresholds) {
    std::uint64_t cnt_all = 0, cnt_p = 0, cnt_d = 0, pairs = 0, pairs_p = 0, pairs_d = 0;
    for (std::size_t i = 0; i < pool.preqs.size(); ++i)
      for (std::size_t j = i + 1; j < pool.preqs.size(); ++j) {
        float s = 0;
        for (std::size_t d = 0; d < 20; ++d)
          s += pool.preqs[i].embedding->values[d] * pool.preqs[j].embedding->values[d];
        const bool sp = pool.preqs[i].source_passage_id == pool.preqs[j].source_passage_id;
        const bool sd = pass_to_doc.at(pool.preqs[i].source_passage_id) ==
                        pass_to_doc.at(pool.preqs[j].source_passage_id);
        ++pairs;
        pairs_p += sp;
        pairs_d += sd;
        if (double(s) >= t) {
          ++cnt_all;
          cnt_p += sp;
          cnt_d += sd;
        }
      }
    expect(std::abs(report.across_all_fraction.at(t) - 100.0 * cnt_all / pairs) <= 1e-9,
           "across-all fraction off at t=" + std::to_string(t));
    expect(std::abs(report.within_passage_fraction.at(t) - 100.0 * cnt_p / pairs_p) <= 1e-9,
           "within-passage fraction off at t=" + std::to_string(t));
    expect(std::abs(report.within_document_fraction.at(t) - 100.0 * cnt_d / pairs_d) <= 1e-9,
           "within-document fraction off at t=" + std::to_string(t));
  }
  for (std::size_t i = 1; i < thresholds.size(); ++i) {
    expect(report.across_all_fraction.at(thresholds[i]) <=
               report.across_all_fraction.at(thresholds[i - 1]),
           "across-all fraction not monotone");
    expect(report.within_passage_fraction.at(thresholds[i]) <=
               report.within_passage_fraction.at(thresholds[i - 1]),
           "within-passage fraction not monotone");
  }
}

// ---- criterion 10: bit-identical artifacts across two mock runs ----

void criterion_determinism() {
  TempDir tmp("accept10");
  auto run_pipeline = [&](const std::filesystem::path& wd) {
    RunConfig config;
    config.corpus_manifest = std::filesystem::path(PREQ_DATA_DIR) / "sample_mini/manifest.jsonl";
    config.eval_queries = std::filesystem::path(PREQ_DATA_DIR) / "sample_mini/queries.jsonl";
    config.workdir = wd;
    config.provider.backend = ProviderConfig::Backend::Mock;
    config.provider.prompt_dir = PREQ_PROMPT_DIR;
    config.workers = 2;
    commands::cmd_caption(config);
    commands::cmd_generate(config);
    commands::cmd_index(config);
    return commands::cmd_eval(config);
  };
  const EvalReport a = run_pipeline(tmp.path() / "run_a");
  const EvalReport b = run_pipeline(tmp.path() / "run_b");
  expect(a.config_fingerprint == b.config_fingerprint, "report fingerprints differ");

  std::map<std::filesystem::path, std::string> files_a, files_b;
  for (auto* bucket : {&files_a, &files_b}) {
    const auto base = tmp.path() / (bucket == &files_a ? "run_a" : "run_b");
    for (const auto& entry : std::filesystem::recursive_directory_iterator(base))
      if (entry.is_regular_file())
        (*bucket)[std::filesystem::relative(entry.path(), base)] = read_text_file(entry.path());
  }
  expect(!files_a.empty(), "no artifacts written");
  expect(files_a.size() == files_b.size(), "artifact sets differ in size");
  for (const auto& [rel, bytes] : files_a) {
    auto it = files_b.find(rel);
    expect(it != files_b.end(), "artifact missing in second run: " + rel.string());
    expect(it->second == bytes, "artifact differs between runs: " + rel.string());
  }
}

// ---- criterion 11: stored prompts reproduce the documented templates ----

void criterion_prompt_fidelity() {
  const PromptStore store = PromptStore::load(PREQ_PROMPT_DIR);
  expect(store.caption == frozen::kCaption, "caption template drifted");
  expect(store.preq_text == frozen::kPreqText, "textual preQ template drifted");
  expect(store.preq_image == frozen::kPreqImage, "visual/multimodal preQ template drifted");
  expect(store.qcluster_rank == frozen::kQclusterRank, "ranking template drifted");
  for (const char* slot : {"{cfg.max_new_questions}", "{document_text}"})
    expect(store.preq_text.find(slot) != std::string::npos,
           std::string("textual template lost slot ") + slot);
  expect(store.preq_image.find("{cfg.max_new_questions}") != std::string::npos,
         "image template lost its cap slot");
  for (const char* slot : {"{query}", "{questions_text}"})
    expect(store.qcluster_rank.find(slot) != std::string::npos,
           std::string("ranking template lost slot ") + slot);
}

struct Criterion {
  int id;
  std::string name;
  std::function<void()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "top-k equals the brute-force oracle on 100 randomized indices (<5s)",
       criterion_topk_oracle},
      {2, "k rule boundary: select_k(100001)=100, select_k(100000)=150", criterion_k_rule},
      {3, "recall/mrr match enumeration oracles to 1e-12 with monotonicity", criterion_metrics},
      {4, "groups partition retrievals; ranked output stays within candidates",
       criterion_partition},
      {5, "identity-ranker metrics equal fallback metrics on 50 passages",
       criterion_ablation_consistency},
      {6, "bundled keyword corpus: recall@1=1.0, mrr@5=1.0 vs cosine oracle (<30s)",
       criterion_mock_end_to_end},
      {7, "1000 fuzzed rank outputs: no crash, fallback or valid ranking", criterion_rank_fuzz},
      {8, "DBSCAN counts match the reference on 100 point sets x 5 settings",
       criterion_dbscan_oracle},
      {9, "redundancy fractions match the naive O(n^2) oracle to 1e-9", criterion_redundancy_oracle},
      {10, "two mock pipeline runs produce bit-identical artifacts", criterion_determinism},
      {11, "stored prompt templates match the documented text verbatim",
       criterion_prompt_fidelity},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    try {
      criterion.run();
      std::printf("[PASS] %2d. %s\n", criterion.id, criterion.name.c_str());
    } catch (const CheckFailure& f) {
      ++failures;
      std::printf("[FAIL] %2d. %s\n       %s\n", criterion.id, criterion.name.c_str(),
                  f.message.c_str());
    } catch (const std::exception& e) {
      ++failures;
      std::printf("[FAIL] %2d. %s\n       unexpected error: %s\n", criterion.id,
                  criterion.name.c_str(), e.what());
    }
    std::fflush(stdout);
  }
  if (failures > 0) std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
