#include "preq/eval.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <thread>

#include <nlohmann/json.hpp>

namespace preq {

using nlohmann::json;
namespace fs = std::filesystem;

std::vector<EvalQuery> load_eval_queries(const fs::path& path) {
  if (!fs::exists(path)) throw ArtifactError("eval query file not found: " + path.string());
  std::vector<EvalQuery> queries;
  for (const auto& rec : read_jsonl(path)) {
    EvalQuery q;
    q.query_id = rec.at("query_id").get<std::string>();
    q.query_text = rec.at("query_text").get<std::string>();
    q.gold_passage_ids = rec.at("gold_passage_ids").get<std::vector<std::string>>();
    if (q.gold_passage_ids.empty())
      throw ConfigError("query " + q.query_id + " has no gold passage ids");
    queries.push_back(std::move(q));
  }
  return queries;
}

double recall_at_k(const std::vector<std::optional<int>>& first_gold_ranks, int k) {
  if (first_gold_ranks.empty()) return 0.0;
  std::size_t hit = 0;
  for (const auto& r : first_gold_ranks)
    if (r && *r <= k) ++hit;
  return static_cast<double>(hit) / static_cast<double>(first_gold_ranks.size());
}

double mrr_at_k(const std::vector<std::optional<int>>& first_gold_ranks, int k) {
  if (first_gold_ranks.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& r : first_gold_ranks)
    if (r && *r <= k) sum += 1.0 / static_cast<double>(*r);
  return sum / static_cast<double>(first_gold_ranks.size());
}

EvalReport run_eval(const std::vector<EvalQuery>& queries, const QueryRequest& request_template,
                    RetrievalEngine& engine, const Corpus& corpus,
                    const std::string& config_fingerprint) {
  if (queries.empty()) throw ConfigError("empty eval set");
  for (const auto& q : queries)
    for (const auto& gold : q.gold_passage_ids)
      if (!corpus.find_passage(gold))
        throw ConfigError("query " + q.query_id + ": gold passage not in corpus: " + gold);

  EvalReport report;
  report.config_fingerprint = config_fingerprint;

  // Force the masked view to exist before querying so the engine's lazy
  // build happens once, then evaluate sequentially (queries are cheap and
  // the gateway bounds its own parallelism for live runs).
  engine.index_for(request_template.modality_mask);

  std::vector<std::pair<std::string, std::optional<int>>> per_query;
  per_query.reserve(queries.size());
  for (const auto& q : queries) {
    QueryRequest request = request_template;
    request.query_text = q.query_text;
    std::optional<int> first_gold;
    try {
      const RankedPassages result = engine.answer(request);
      for (std::size_t pos = 0; pos < result.passages.size(); ++pos) {
        const auto& gold = q.gold_passage_ids;
        if (std::find(gold.begin(), gold.end(), result.passages[pos].passage_id) != gold.end()) {
          first_gold = static_cast<int>(pos + 1);
          break;
        }
      }
    } catch (const Error& e) {
      report.warnings.push_back("query " + q.query_id + " failed: " + e.what());
    }
    per_query.emplace_back(q.query_id, first_gold);
  }

  std::sort(per_query.begin(), per_query.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  report.per_query = std::move(per_query);

  std::vector<std::optional<int>> ranks;
  ranks.reserve(report.per_query.size());
  for (const auto& [id, r] : report.per_query) ranks.push_back(r);
  for (int k : {1, 3, 5}) report.recall_at[k] = recall_at_k(ranks, k);
  report.mrr_at_5 = mrr_at_k(ranks, 5);
  return report;
}

std::vector<AblationRow> run_modality_ablation(const std::vector<EvalQuery>& queries,
                                               const QueryRequest& request_template,
                                               RetrievalEngine& engine, const Corpus& corpus,
                                               const std::string& config_fingerprint) {
  static const ModalitySet subsets[] = {
      {true, true, true}, {true, true, false}, {true, false, true}, {false, true, true},
      {true, false, false}, {false, true, false}, {false, false, true},
  };
  std::vector<AblationRow> rows;
  for (const auto& mask : subsets) {
    QueryRequest request = request_template;
    request.modality_mask = mask;
    AblationRow row;
    row.label = mask.to_string();
    if (engine.pool_for(mask).size() == 0) {
      // A subset can be empty (for instance V on a corpus without
      // components); report zero metrics rather than failing the sweep.
      row.report.config_fingerprint = config_fingerprint;
      for (int k : {1, 3, 5}) row.report.recall_at[k] = 0.0;
      row.report.warnings.push_back("pool empty under mask " + mask.to_string());
      for (const auto& q : queries) row.report.per_query.emplace_back(q.query_id, std::nullopt);
      std::sort(row.report.per_query.begin(), row.report.per_query.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
    } else {
      row.report = run_eval(queries, request, engine, corpus, config_fingerprint);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<AblationRow> run_qcluster_ablation(const std::vector<EvalQuery>& queries,
                                               const QueryRequest& request_template,
                                               RetrievalEngine& engine, const Corpus& corpus,
                                               const std::string& config_fingerprint) {
  std::vector<AblationRow> rows;
  for (bool use : {true, false}) {
    QueryRequest request = request_template;
    request.use_qcluster = use;
    request.top_passages = std::min(request.top_passages, 5);
    AblationRow row;
    row.label = use ? "qcluster" : "- qcluster";
    row.report = run_eval(queries, request, engine, corpus, config_fingerprint);
    rows.push_back(std::move(row));
  }
  return rows;
}

RedundancyReport redundancy_analysis(const RetrievalPool& pool,
                                     const std::map<std::string, std::string>& passage_to_document,
                                     std::vector<double> thresholds, int workers) {
  std::sort(thresholds.begin(), thresholds.end());
  RedundancyReport report;
  report.thresholds = thresholds;

  const std::size_t n = pool.size();
  if (n < 2) {
    report.warnings.push_back("fewer than 2 preQs; all redundancy fractions are 0");
    for (double t : thresholds) {
      report.within_passage_fraction[t] = 0.0;
      report.within_document_fraction[t] = 0.0;
      report.across_all_fraction[t] = 0.0;
    }
    return report;
  }

  std::size_t dim = 0;
  for (const auto& q : pool.preqs) {
    if (!q.embedding) throw ConfigError("preq " + q.id + " has no embedding");
    if (dim == 0)
      dim = q.embedding->dimension();
    else if (q.embedding->dimension() != dim)
      throw ConfigError("inconsistent embedding dimensions in pool");
  }

  // Group keys for the two "same source" readings.
  std::vector<int> passage_key(n), document_key(n);
  {
    std::map<std::string, int> pk, dk;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& pid = pool.preqs[i].source_passage_id;
      passage_key[i] = pk.try_emplace(pid, static_cast<int>(pk.size())).first->second;
      auto it = passage_to_document.find(pid);
      const std::string doc = it == passage_to_document.end() ? pid : it->second;
      document_key[i] = dk.try_emplace(doc, static_cast<int>(dk.size())).first->second;
    }
  }

  const std::size_t tcount = thresholds.size();
  struct Counts {
    std::vector<std::uint64_t> all, passage, document;
    std::uint64_t pairs_all = 0, pairs_passage = 0, pairs_document = 0;
  };
  auto make_counts = [tcount] {
    Counts c;
    c.all.assign(tcount, 0);
    c.passage.assign(tcount, 0);
    c.document.assign(tcount, 0);
    return c;
  };

  workers = std::max(1, workers);
  std::vector<Counts> partial(static_cast<std::size_t>(workers), make_counts());
  auto scan_rows = [&](std::size_t begin_row, std::size_t stride, Counts& c) {
    for (std::size_t i = begin_row; i < n; i += stride) {
      const float* vi = pool.preqs[i].embedding->values.data();
      for (std::size_t j = i + 1; j < n; ++j) {
        const float* vj = pool.preqs[j].embedding->values.data();
        float s = 0.0f;
        for (std::size_t d = 0; d < dim; ++d) s += vi[d] * vj[d];
        const bool same_passage = passage_key[i] == passage_key[j];
        const bool same_document = document_key[i] == document_key[j];
        ++c.pairs_all;
        if (same_passage) ++c.pairs_passage;
        if (same_document) ++c.pairs_document;
        for (std::size_t t = 0; t < tcount; ++t) {
          if (static_cast<double>(s) < thresholds[t]) break;  // thresholds ascending
          ++c.all[t];
          if (same_passage) ++c.passage[t];
          if (same_document) ++c.document[t];
        }
      }
    }
  };
  if (workers == 1) {
    scan_rows(0, 1, partial[0]);
  } else {
    std::vector<std::thread> threads;
    for (int w = 0; w < workers; ++w)
      threads.emplace_back(scan_rows, static_cast<std::size_t>(w),
                           static_cast<std::size_t>(workers), std::ref(partial[w]));
    for (auto& th : threads) th.join();
  }

  Counts total = make_counts();
  for (const auto& c : partial) {
    total.pairs_all += c.pairs_all;
    total.pairs_passage += c.pairs_passage;
    total.pairs_document += c.pairs_document;
    for (std::size_t t = 0; t < tcount; ++t) {
      total.all[t] += c.all[t];
      total.passage[t] += c.passage[t];
      total.document[t] += c.document[t];
    }
  }

  auto percent = [](std::uint64_t count, std::uint64_t denom) {
    return denom == 0 ? 0.0 : 100.0 * static_cast<double>(count) / static_cast<double>(denom);
  };
  for (std::size_t t = 0; t < tcount; ++t) {
    report.within_passage_fraction[thresholds[t]] = percent(total.passage[t], total.pairs_passage);
    report.within_document_fraction[thresholds[t]] =
        percent(total.document[t], total.pairs_document);
    report.across_all_fraction[thresholds[t]] = percent(total.all[t], total.pairs_all);
  }
  return report;
}

int dbscan_cluster_count(const std::vector<EmbeddingVector>& points, double eps, int min_pts) {
  if (eps <= 0) throw ConfigError("eps must be positive");
  if (min_pts < 1) throw ConfigError("min_pts must be >= 1");
  const std::size_t n = points.size();
  if (n == 0) return 0;

  auto neighbors_of = [&](std::size_t i) {
    std::vector<std::size_t> neighbors;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = 1.0 - static_cast<double>(dot(points[i], points[j]));
      if (d <= eps) neighbors.push_back(j);  // self included
    }
    return neighbors;
  };

  constexpr int kUnvisited = -2;
  constexpr int kNoise = -1;
  std::vector<int> label(n, kUnvisited);
  int clusters = 0;

  for (std::size_t i = 0; i < n; ++i) {
    if (label[i] != kUnvisited) continue;
    auto seed = neighbors_of(i);
    if (static_cast<int>(seed.size()) < min_pts) {
      label[i] = kNoise;
      continue;
    }
    const int cluster = clusters++;
    label[i] = cluster;
    std::deque<std::size_t> frontier(seed.begin(), seed.end());
    while (!frontier.empty()) {
      const std::size_t j = frontier.front();
      frontier.pop_front();
      if (label[j] == kNoise) label[j] = cluster;  // border point
      if (label[j] != kUnvisited) continue;
      label[j] = cluster;
      auto reach = neighbors_of(j);
      if (static_cast<int>(reach.size()) >= min_pts)
        frontier.insert(frontier.end(), reach.begin(), reach.end());
    }
  }
  return clusters;
}

CoverageReport coverage_sweep(const Corpus& corpus, const std::vector<int>& n_values,
                              const GenConfig& config, ModelGateway& gateway, double eps,
                              int min_pts, int workers) {
  if (n_values.empty()) throw ConfigError("coverage sweep needs at least one n value");
  CoverageReport report;
  report.n_values = n_values;
  report.eps = eps;
  report.min_pts = min_pts;
  for (int n : n_values) {
    if (n < 1) throw ConfigError("coverage sweep n values must be >= 1");
    GenConfig capped = config;
    capped.max_questions_per_source = n;
    const RetrievalPool pool = build_pool(corpus, capped, gateway, workers);
    double sum = 0.0;
    std::size_t passages = 0;
    for (const auto& [passage_id, preq_ids] : pool.by_passage) {
      std::vector<EmbeddingVector> points;
      points.reserve(preq_ids.size());
      for (const auto& id : preq_ids) points.push_back(*pool.at(id).embedding);
      sum += dbscan_cluster_count(points, eps, min_pts);
      ++passages;
    }
    report.avg_cluster_count[n] = passages == 0 ? 0.0 : sum / static_cast<double>(passages);
  }
  return report;
}

void export_embeddings(const RetrievalPool& pool, const fs::path& matrix_path,
                       const fs::path& labels_path) {
  std::string matrix, labels;
  labels += "preq_id\tmodality\tsource_passage_id\n";
  for (const auto& q : pool.preqs) {
    if (!q.embedding) throw ConfigError("preq " + q.id + " has no embedding");
    for (std::size_t d = 0; d < q.embedding->dimension(); ++d) {
      if (d) matrix += '\t';
      char buf[48];
      std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(q.embedding->values[d]));
      matrix += buf;
    }
    matrix += '\n';
    labels += q.id + "\t" + to_char(q.modality) + ("\t" + q.source_passage_id + "\n");
  }
  write_text_file(matrix_path, matrix);
  write_text_file(labels_path, labels);
}

}  // namespace preq
