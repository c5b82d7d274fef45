#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "preq/corpus.hpp"
#include "preq/qcluster.hpp"

namespace preq {

struct EvalQuery {
  std::string query_id;
  std::string query_text;
  std::vector<std::string> gold_passage_ids;  // non-empty
};

std::vector<EvalQuery> load_eval_queries(const std::filesystem::path& path);

struct EvalReport {
  std::map<int, double> recall_at;  // k in {1,3,5}
  double mrr_at_5 = 0.0;
  // (query_id, 1-based rank of the first gold passage, absent if none
  // retrieved), sorted by query_id.
  std::vector<std::pair<std::string, std::optional<int>>> per_query;
  std::string config_fingerprint;
  std::vector<std::string> warnings;
};

// Fraction of queries whose first gold rank is <= k.
double recall_at_k(const std::vector<std::optional<int>>& first_gold_ranks, int k);
// Mean reciprocal rank, zero beyond the cutoff.
double mrr_at_k(const std::vector<std::optional<int>>& first_gold_ranks, int k = 5);

// Runs answer_query per eval query against the engine and aggregates
// metrics. Per-query failures are recorded as absent ranks with a warning;
// an empty query set is an error.
EvalReport run_eval(const std::vector<EvalQuery>& queries, const QueryRequest& request_template,
                    RetrievalEngine& engine, const Corpus& corpus,
                    const std::string& config_fingerprint = {});

struct AblationRow {
  std::string label;
  EvalReport report;
};

// All 7 non-empty modality subsets, full set first.
std::vector<AblationRow> run_modality_ablation(const std::vector<EvalQuery>& queries,
                                               const QueryRequest& request_template,
                                               RetrievalEngine& engine, const Corpus& corpus,
                                               const std::string& config_fingerprint = {});

// Q-Cluster on vs off.
std::vector<AblationRow> run_qcluster_ablation(const std::vector<EvalQuery>& queries,
                                               const QueryRequest& request_template,
                                               RetrievalEngine& engine, const Corpus& corpus,
                                               const std::string& config_fingerprint = {});

// Pairwise cosine redundancy. "Within passage" restricts to pairs sharing a
// source passage; "within document" to pairs sharing a source document (the
// two readings of "same source"); fractions are percentages of each group's
// pair count at or above the threshold.
struct RedundancyReport {
  std::vector<double> thresholds;
  std::map<double, double> within_passage_fraction;
  std::map<double, double> within_document_fraction;
  std::map<double, double> across_all_fraction;
  std::vector<std::string> warnings;
};

RedundancyReport redundancy_analysis(
    const RetrievalPool& pool, const std::map<std::string, std::string>& passage_to_document,
    std::vector<double> thresholds = {0.5, 0.6, 0.7, 0.8, 0.9}, int workers = 1);

// DBSCAN cluster count over embeddings with distance 1 - cosine. Standard
// semantics: a point is core when its eps-neighborhood (self included) has
// at least min_pts points; noise is excluded from the count.
int dbscan_cluster_count(const std::vector<EmbeddingVector>& points, double eps, int min_pts);

struct CoverageReport {
  std::vector<int> n_values;
  std::map<int, double> avg_cluster_count;
  double eps = 0.0;
  int min_pts = 0;
};

// For each n, rebuilds the pool capped at n questions per source and reports
// the mean per-passage DBSCAN cluster count (over passages with preQs).
CoverageReport coverage_sweep(const Corpus& corpus, const std::vector<int>& n_values,
                              const GenConfig& config, ModelGateway& gateway, double eps,
                              int min_pts, int workers = 1);

// Plain numeric matrix (one row per preQ, tab-separated) plus a labels file,
// for external projection tools.
void export_embeddings(const RetrievalPool& pool, const std::filesystem::path& matrix_path,
                       const std::filesystem::path& labels_path);

}  // namespace preq
