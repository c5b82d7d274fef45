#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "preq/corpus.hpp"
#include "preq/gateway.hpp"

namespace preq {

// The three complementary preQ modalities: M from the whole page image,
// V from individual components, T from the textual surrogate.
enum class Modality : char { M = 'M', V = 'V', T = 'T' };

char to_char(Modality m);
Modality modality_from_char(char c);

// Which of {M,V,T} are enabled. Used both for generation and as the query
// side ablation mask.
struct ModalitySet {
  bool m = true;
  bool v = true;
  bool t = true;

  bool contains(Modality mod) const;
  bool subset_of(const ModalitySet& other) const;
  int count() const { return (m ? 1 : 0) + (v ? 1 : 0) + (t ? 1 : 0); }
  bool empty() const { return !m && !v && !t; }
  std::string to_string() const;  // "m,v,t" form
  static ModalitySet parse(std::string_view spec);
  static ModalitySet all() { return {true, true, true}; }

  bool operator==(const ModalitySet&) const = default;
};

struct PreQ {
  std::string id;
  std::string text;
  Modality modality = Modality::T;
  std::string source_passage_id;
  std::optional<std::string> source_component_id;  // V only
  std::optional<EmbeddingVector> embedding;

  bool operator==(const PreQ&) const = default;
};

struct GenConfig {
  int max_questions_per_source = 50;  // n; applies per M/T set and per component's V set
  ModalitySet modalities_enabled = ModalitySet::all();

  void validate() const;
};

struct PassageGenReport {
  std::string passage_id;
  int m_count = 0;
  int v_count = 0;
  int t_count = 0;
  std::vector<std::string> warnings;
  bool partial = false;  // some modality failed and was skipped
};

struct BuildReport {
  std::vector<PassageGenReport> per_passage;
};

// The retrieval pool P: all generated preQs in canonical corpus order.
class RetrievalPool {
 public:
  std::vector<PreQ> preqs;
  std::map<std::string, std::vector<std::string>> by_passage;  // passage id -> preq ids

  std::size_t size() const { return preqs.size(); }
  const PreQ* find(std::string_view preq_id) const;
  const PreQ& at(std::string_view preq_id) const;  // throws on unknown id
  void rebuild_lookup();

  bool operator==(const RetrievalPool& other) const {
    return preqs == other.preqs && by_passage == other.by_passage;
  }

 private:
  std::unordered_map<std::string, std::size_t> position_;
};

// Removes exact-string duplicates keeping the first occurrence, then
// truncates to the first n; order otherwise preserved.
std::vector<std::string> dedupe_and_cap(const std::vector<std::string>& questions, int n);

// Generates the enabled preQ sets for one passage: M from the page image,
// V from each component image, T from the text surrogate. A gateway failure
// on one modality is recorded as a warning and the others still run.
std::vector<PreQ> generate_for_passage(const Passage& passage, const GenConfig& config,
                                       ModelGateway& gateway, PassageGenReport* report = nullptr);

// Builds the full pool over the corpus with a bounded worker pool, then
// embeds every preQ. Result order is canonical (corpus order) regardless of
// completion order, and ids are deterministic, so rebuilding under the mock
// backend reproduces the pool exactly.
RetrievalPool build_pool(const Corpus& corpus, const GenConfig& config, ModelGateway& gateway,
                         int workers = 1, BuildReport* report = nullptr);

// Keeps exactly the preQs whose modality is in the mask; order preserved.
RetrievalPool filter_pool(const RetrievalPool& pool, const ModalitySet& mask);

// PreQ store on disk: preqs.jsonl + vectors.bin/ids.txt sidecar.
void save_pool(const RetrievalPool& pool, const std::filesystem::path& dir);
RetrievalPool load_pool(const std::filesystem::path& dir);

void save_build_report(const BuildReport& report, const std::filesystem::path& path);

}  // namespace preq
