#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "preq/corpus.hpp"
#include "preq/eval.hpp"

namespace preq {

// Keyword corpora for mock-backend testing: every passage carries one unique
// keyword in its OCR text and the matching query is exactly that keyword, so
// the bag-of-hashed-tokens embedding puts the gold passage first.
struct SyntheticSpec {
  int passages = 12;
  int documents = 3;
  std::uint64_t seed = 7;
  bool with_components = true;
  bool with_captions = false;  // true: skip the caption stage in tests
};

struct SyntheticCorpus {
  Corpus corpus;
  std::vector<EvalQuery> queries;  // one per passage; query text = keyword
  std::vector<std::string> keywords;
};

SyntheticCorpus make_keyword_corpus(const SyntheticSpec& spec);

// Materializes manifest.jsonl, queries.jsonl and placeholder images under dir.
void write_synthetic_corpus(const SyntheticSpec& spec, const std::filesystem::path& dir);

}  // namespace preq
