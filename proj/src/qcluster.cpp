#include "preq/qcluster.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

namespace preq {

void QueryRequest::validate() const {
  if (query_text.empty()) throw ConfigError("query_text must not be empty");
  if (top_passages < 1) throw ConfigError("top_passages must be >= 1");
  if (use_qcluster && top_passages > 5)
    throw ConfigError("top_passages must be <= 5 when use_qcluster is on");
  if (modality_mask.empty()) throw ConfigError("modality_mask must not be empty");
}

std::string_view to_string(RankingSource s) {
  return s == RankingSource::Llm ? "llm" : "fallback";
}

int select_k(std::size_t pool_size) { return pool_size > 100000 ? 100 : 150; }

GroupSet group_by_passage(const std::vector<ScoredHit>& hits, const RetrievalPool& pool) {
  GroupSet set;
  std::unordered_map<std::string, std::size_t> slot;
  for (const auto& hit : hits) {
    const PreQ& q = pool.at(hit.preq_id);  // throws on unknown id
    auto [it, inserted] = slot.try_emplace(q.source_passage_id, set.groups.size());
    if (inserted) {
      set.groups.push_back(PreQGroup{q.source_passage_id, {}, hit.rank});
    }
    set.groups[it->second].members.push_back(hit);
  }
  // Hits arrive rank-ascending, so first-occurrence order is best_rank order
  // and each group's members are already sorted.
  return set;
}

namespace {

std::string escape_newlines(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '\n')
      out += "\\n";
    else if (c == '\r')
      out += "\\r";
    else
      out += c;
  }
  return out;
}

}  // namespace

std::string render_group_listing(const GroupSet& group_set, const RetrievalPool& pool) {
  std::string out;
  for (std::size_t i = 0; i < group_set.groups.size(); ++i) {
    const auto& group = group_set.groups[i];
    out += "Group " + std::to_string(i + 1) + ":\n";
    for (const auto& member : group.members)
      out += "- " + escape_newlines(pool.at(member.preq_id).text) + "\n";
  }
  return out;
}

std::string render_groups_prompt(const PromptStore& store, const std::string& query,
                                 const GroupSet& group_set, const RetrievalPool& pool) {
  return render_qcluster_prompt(store, query, render_group_listing(group_set, pool));
}

namespace {

RankedPassages::Entry entry_for(const PreQGroup& group) {
  RankedPassages::Entry entry;
  entry.passage_id = group.passage_id;
  for (const auto& member : group.members) entry.supporting_preq_ids.push_back(member.preq_id);
  return entry;
}

}  // namespace

RankedPassages fallback_rank(const GroupSet& group_set, int limit) {
  RankedPassages out;
  out.ranking_source = RankingSource::Fallback;
  out.m_groups = group_set.m();
  for (const auto& group : group_set.groups) {
    if (static_cast<int>(out.passages.size()) >= limit) break;
    out.passages.push_back(entry_for(group));
  }
  return out;
}

RankedPassages answer_query(const QueryRequest& request, const VectorIndex& index,
                            const RetrievalPool& pool, ModelGateway& gateway,
                            const RetrieverOptions& options) {
  request.validate();
  if (index.size() != pool.size())
    throw ConfigError("index entry count does not match pool (was the index built over the "
                      "mask-filtered pool?)");

  const EmbeddingVector query_vec = gateway.embed_texts({request.query_text}).at(0);
  const int k = options.top_k_override > 0 ? options.top_k_override : select_k(pool.size());

  RankedPassages empty;
  empty.k_used = k;
  if (index.size() == 0) return empty;

  const auto hits = index.top_k(query_vec, k);
  if (hits.empty()) return empty;

  const GroupSet all_groups = group_by_passage(hits, pool);

  auto fallback = [&] {
    RankedPassages out = fallback_rank(all_groups, request.top_passages);
    out.k_used = k;
    return out;
  };
  if (!request.use_qcluster) return fallback();

  // Cap how many groups the LLM sees; candidates keep best-rank order.
  GroupSet candidates;
  const int cap = options.group_cap > 0 ? options.group_cap : all_groups.m();
  for (int i = 0; i < all_groups.m() && i < cap; ++i)
    candidates.groups.push_back(all_groups.groups[static_cast<std::size_t>(i)]);

  std::vector<int> ranked_indices;
  try {
    ranked_indices = gateway.rank_groups_llm(request.query_text,
                                             render_group_listing(candidates, pool),
                                             candidates.m());
  } catch (const Error&) {
    return fallback();
  }

  // Guard against test doubles and misbehaved backends: drop out-of-range
  // and duplicate indices, keep the valid remainder in model order.
  RankedPassages out;
  out.ranking_source = RankingSource::Llm;
  out.k_used = k;
  out.m_groups = all_groups.m();
  std::unordered_set<int> seen;
  for (int idx : ranked_indices) {
    if (static_cast<int>(out.passages.size()) >= request.top_passages) break;
    if (idx < 1 || idx > candidates.m() || !seen.insert(idx).second) continue;
    out.passages.push_back(entry_for(candidates.groups[static_cast<std::size_t>(idx - 1)]));
  }
  if (out.passages.empty()) return fallback();
  return out;
}

RetrievalEngine::RetrievalEngine(RetrievalPool pool, ModelGateway& gateway,
                                 RetrieverOptions options)
    : pool_(std::move(pool)), gateway_(gateway), options_(options) {}

void RetrievalEngine::seed_full_view(VectorIndex index) {
  if (index.size() != pool_.size())
    throw ConfigError("index size does not match pool; rebuild the index");
  for (std::size_t i = 0; i < pool_.preqs.size(); ++i)
    if (index.ids()[i] != pool_.preqs[i].id)
      throw ConfigError("index id order does not match pool; rebuild the index");
  full_index_ = std::move(index);
}

const VectorIndex& RetrievalEngine::full_index() {
  if (!full_index_) full_index_ = VectorIndex::build(pool_);
  return *full_index_;
}

RetrievalEngine::MaskedView& RetrievalEngine::filtered_view(const ModalitySet& mask) {
  const std::string key = mask.to_string();
  auto it = filtered_.find(key);
  if (it == filtered_.end()) {
    MaskedView view;
    view.pool = filter_pool(pool_, mask);
    view.index = VectorIndex::build(view.pool);
    it = filtered_.emplace(key, std::move(view)).first;
  }
  return it->second;
}

const RetrievalPool& RetrievalEngine::pool_for(const ModalitySet& mask) {
  return mask == ModalitySet::all() ? pool_ : filtered_view(mask).pool;
}

const VectorIndex& RetrievalEngine::index_for(const ModalitySet& mask) {
  return mask == ModalitySet::all() ? full_index() : filtered_view(mask).index;
}

RankedPassages RetrievalEngine::answer(const QueryRequest& request) {
  return answer_query(request, index_for(request.modality_mask),
                      pool_for(request.modality_mask), gateway_, options_);
}

}  // namespace preq
