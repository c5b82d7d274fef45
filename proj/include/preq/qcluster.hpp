#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "preq/gateway.hpp"
#include "preq/pipeline.hpp"
#include "preq/prompts.hpp"
#include "preq/vector_index.hpp"

namespace preq {

struct QueryRequest {
  std::string query_text;
  int top_passages = 5;  // must be <= 5 when use_qcluster (the LLM ranks at most 5 groups)
  bool use_qcluster = true;
  ModalitySet modality_mask = ModalitySet::all();

  void validate() const;
};

// Top-k preQs from one source passage.
struct PreQGroup {
  std::string passage_id;
  std::vector<ScoredHit> members;  // sorted by rank ascending
  int best_rank = 0;               // minimum member rank
};

struct GroupSet {
  std::vector<PreQGroup> groups;  // ascending best_rank
  int m() const { return static_cast<int>(groups.size()); }
};

enum class RankingSource { Llm, Fallback };
std::string_view to_string(RankingSource s);

struct RankedPassages {
  struct Entry {
    std::string passage_id;
    std::vector<std::string> supporting_preq_ids;
  };
  std::vector<Entry> passages;
  RankingSource ranking_source = RankingSource::Fallback;
  int k_used = 0;
  int m_groups = 0;
};

// k rule: pools over 100k entries use k=100, otherwise k=150.
int select_k(std::size_t pool_size);

// Partitions hits by source passage. Group order is ascending best_rank,
// which equals first-occurrence order of each passage in the hit list.
GroupSet group_by_passage(const std::vector<ScoredHit>& hits, const RetrievalPool& pool);

// Numbered group listing for the ranking prompt: "Group i:" then one line
// per member question. Newlines inside question text are escaped so group
// boundaries stay unambiguous.
std::string render_group_listing(const GroupSet& group_set, const RetrievalPool& pool);

// Fills the full ranking prompt template (query + numbered groups).
// Byte-stable for identical inputs.
std::string render_groups_prompt(const PromptStore& store, const std::string& query,
                                 const GroupSet& group_set, const RetrievalPool& pool);

// The "- Qcluster" ordering: passages by the rank of their best-scoring
// preQ, truncated to limit. Equals first-occurrence order over the hit list.
RankedPassages fallback_rank(const GroupSet& group_set, int limit);

struct RetrieverOptions {
  int group_cap = 30;      // largest m presented to the ranking LLM
  int top_k_override = 0;  // 0 = use select_k
};

// Full query path: embed, retrieve top-k, group, LLM-rank with fallback.
// Precondition: index was built over exactly this pool (already filtered by
// the request's modality mask).
RankedPassages answer_query(const QueryRequest& request, const VectorIndex& index,
                            const RetrievalPool& pool, ModelGateway& gateway,
                            const RetrieverOptions& options = {});

// Owns the pool/index pair plus per-mask filtered variants, built lazily, so
// query and ablation paths share one object.
class RetrievalEngine {
 public:
  RetrievalEngine(RetrievalPool pool, ModelGateway& gateway, RetrieverOptions options = {});

  // Installs a prebuilt full-pool index (e.g. the persisted artifact); its id
  // sequence must match the pool exactly.
  void seed_full_view(VectorIndex index);

  RankedPassages answer(const QueryRequest& request);
  const RetrievalPool& pool_for(const ModalitySet& mask);
  const VectorIndex& index_for(const ModalitySet& mask);
  const RetrieverOptions& options() const { return options_; }

 private:
  struct MaskedView {
    RetrievalPool pool;
    VectorIndex index;
  };
  const VectorIndex& full_index();
  MaskedView& filtered_view(const ModalitySet& mask);

  RetrievalPool pool_;
  ModelGateway& gateway_;
  RetrieverOptions options_;
  std::optional<VectorIndex> full_index_;
  std::map<std::string, MaskedView> filtered_;  // keyed by mask string
};

}  // namespace preq
