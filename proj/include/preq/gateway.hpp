#pragma once

#include <memory>
#include <string>
#include <vector>

#include "preq/common.hpp"
#include "preq/corpus.hpp"
#include "preq/prompts.hpp"

namespace preq {

// A fixed-length embedding, unit L2 norm after normalization.
struct EmbeddingVector {
  std::vector<float> values;

  std::size_t dimension() const { return values.size(); }
  bool operator==(const EmbeddingVector&) const = default;
};

// Normalizes in place; throws ProviderError on a zero vector.
void l2_normalize(EmbeddingVector& v);
float dot(const EmbeddingVector& a, const EmbeddingVector& b);

enum class PromptKind { Textual, Visual, Multimodal };

// Input to question generation: text for the textual prompt, image refs for
// the visual and multimodal prompts.
struct GenPayload {
  std::string text;
  std::vector<std::string> image_refs;
};

struct ProviderConfig {
  enum class Backend { Live, Mock };

  Backend backend = Backend::Mock;
  std::string endpoint_url = "https://api.openai.com";
  std::string api_key_env_var = "OPENAI_API_KEY";
  // Per-task model selection: chat for multimodal/visual question generation,
  // a separate (typically cheaper) model for textual questions and captions,
  // and a dedicated slot for the group-ranking model so it can be swapped
  // independently of generation.
  std::string chat_model_name = "gpt-4o";
  std::string caption_model_name = "gpt-4o-mini";
  std::string text_model_name = "gpt-4o-mini";
  std::string rank_model_name = "gpt-4o";
  std::string embed_model_name = "text-embedding-3-large";
  int max_parallel_requests = 4;
  int retry_limit = 3;
  double request_timeout_s = 60.0;
  double temperature = 0.0;
  // Embedding width. Mock backend always uses this; live backend passes it
  // as the requested output dimension when nonzero, otherwise takes the
  // provider default and infers the width from the first response.
  int embed_dimension = 1024;
  std::string prompt_dir;  // empty -> compiled-in default

  void validate() const;
};

// Single abstraction over every generative-model and embedding call. All
// implementations are safe to call from multiple threads; the live backend
// additionally enforces max_parallel_requests internally.
class ModelGateway {
 public:
  virtual ~ModelGateway() = default;

  // Non-empty caption for one component image.
  virtual std::string caption_component(const std::string& image_ref, ComponentKind kind) = 0;

  // Up to max_questions question strings; the visual kind may legitimately
  // return an empty list when the source has no visual elements.
  virtual std::vector<std::string> generate_questions(PromptKind kind, const GenPayload& payload,
                                                      int max_questions) = 0;

  // At most five distinct 1-based group indices in model-given order.
  // Throws RankParseError when no usable index sequence comes back; callers
  // on the query path fall back to best-rank ordering.
  virtual std::vector<int> rank_groups_llm(const std::string& query,
                                           const std::string& groups_text, int group_count) = 0;

  // One unit-normalized vector per input text, all of equal dimension.
  virtual std::vector<EmbeddingVector> embed_texts(const std::vector<std::string>& texts) = 0;
};

std::unique_ptr<ModelGateway> make_gateway(const ProviderConfig& config);

// --- output parsing, shared by the live backend and by test doubles ---

// Parses a model reply expected to be a JSON array of {"question": ...}
// objects (markdown code fences tolerated). Truncates to max_questions.
// Throws GenParseError carrying the raw output.
std::vector<std::string> parse_question_array(const std::string& raw, int max_questions);

// Parses a comma-separated rank listing ("2,1,4,3,5"): tokens are trimmed,
// non-integer or out-of-range tokens and duplicates are dropped, the first
// `limit` survivors are kept. Throws RankParseError if nothing survives.
std::vector<int> parse_rank_output(const std::string& raw, int group_count, int limit = 5);

// --- deterministic mock backend ---

// Pure function of its inputs and config; never touches the filesystem or
// network. Its embedding is a bag of hashed tokens: lowercase whitespace
// tokens hashed into embed_dimension buckets, counts L2-normalized, so
// lexical overlap between a query and a preQ yields high cosine similarity.
class MockGateway : public ModelGateway {
 public:
  explicit MockGateway(const ProviderConfig& config);

  std::string caption_component(const std::string& image_ref, ComponentKind kind) override;
  std::vector<std::string> generate_questions(PromptKind kind, const GenPayload& payload,
                                              int max_questions) override;
  std::vector<int> rank_groups_llm(const std::string& query, const std::string& groups_text,
                                   int group_count) override;
  std::vector<EmbeddingVector> embed_texts(const std::vector<std::string>& texts) override;

  static EmbeddingVector hash_embed(const std::string& text, int dimension);

 private:
  int dimension_;
};

}  // namespace preq
