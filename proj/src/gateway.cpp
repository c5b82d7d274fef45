#include "preq/gateway.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <optional>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace preq {

using nlohmann::json;

void l2_normalize(EmbeddingVector& v) {
  double sq = 0.0;
  for (float x : v.values) sq += static_cast<double>(x) * static_cast<double>(x);
  if (sq <= 0.0) throw ProviderError("cannot normalize zero embedding vector");
  const float inv = static_cast<float>(1.0 / std::sqrt(sq));
  for (float& x : v.values) x *= inv;
}

float dot(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dimension() != b.dimension())
    throw ConfigError("embedding dimension mismatch: " + std::to_string(a.dimension()) + " vs " +
                      std::to_string(b.dimension()));
  float s = 0.0f;
  for (std::size_t i = 0; i < a.values.size(); ++i) s += a.values[i] * b.values[i];
  return s;
}

void ProviderConfig::validate() const {
  if (max_parallel_requests < 1) throw ConfigError("max_parallel_requests must be >= 1");
  if (retry_limit < 0 || retry_limit > 10) throw ConfigError("retry_limit must be in [0, 10]");
  if (request_timeout_s <= 0) throw ConfigError("request_timeout_s must be positive");
  if (embed_dimension < 0) throw ConfigError("embed_dimension must be >= 0");
  if (backend == Backend::Mock && embed_dimension == 0)
    throw ConfigError("mock backend requires a fixed embed_dimension");
}

namespace {

std::string trim(std::string_view s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Models often wrap JSON in markdown fences; strip them before parsing.
std::string strip_code_fence(std::string s) {
  s = trim(s);
  if (s.rfind("```", 0) == 0) {
    std::size_t nl = s.find('\n');
    if (nl != std::string::npos) s = s.substr(nl + 1);
    std::size_t end = s.rfind("```");
    if (end != std::string::npos) s = s.substr(0, end);
    s = trim(s);
  }
  return s;
}

}  // namespace

std::vector<std::string> parse_question_array(const std::string& raw, int max_questions) {
  const std::string body = strip_code_fence(raw);
  json parsed;
  try {
    parsed = json::parse(body);
  } catch (const json::parse_error&) {
    throw GenParseError("question generation output is not valid JSON: " + raw);
  }
  if (!parsed.is_array())
    throw GenParseError("question generation output is not a JSON array: " + raw);
  std::vector<std::string> questions;
  for (const auto& item : parsed) {
    std::string q;
    if (item.is_object() && item.contains("question") && item.at("question").is_string())
      q = item.at("question").get<std::string>();
    else if (item.is_string())
      q = item.get<std::string>();
    else
      throw GenParseError("question array element has no \"question\" string: " + raw);
    q = trim(q);
    if (!q.empty()) questions.push_back(std::move(q));
    if (static_cast<int>(questions.size()) >= max_questions) break;
  }
  return questions;
}

namespace {

// The whole token (after trimming) must be an integer; prose fragments drop.
std::optional<long> parse_integer_token(const std::string& token) {
  if (token.empty()) return std::nullopt;
  std::size_t i = (token[0] == '-' || token[0] == '+') ? 1 : 0;
  if (i == token.size()) return std::nullopt;
  for (std::size_t j = i; j < token.size(); ++j)
    if (!std::isdigit(static_cast<unsigned char>(token[j]))) return std::nullopt;
  try {
    return std::stol(token);
  } catch (...) {
    return std::nullopt;
  }
}

}  // namespace

std::vector<int> parse_rank_output(const std::string& raw, int group_count, int limit) {
  std::vector<int> indices;
  std::unordered_set<int> seen;
  std::size_t start = 0;
  while (start <= raw.size() && static_cast<int>(indices.size()) < limit) {
    const std::size_t comma = raw.find(',', start);
    const std::size_t len = comma == std::string::npos ? std::string::npos : comma - start;
    const std::string token = trim(std::string_view(raw).substr(start, len));
    start = comma == std::string::npos ? raw.size() + 1 : comma + 1;
    const auto value = parse_integer_token(token);
    if (!value || *value < 1 || *value > group_count) continue;
    const int idx = static_cast<int>(*value);
    if (seen.insert(idx).second) indices.push_back(idx);
  }
  if (indices.empty())
    throw RankParseError("no parsable group indices in rank output: " + raw);
  return indices;
}

// --- mock backend ---

MockGateway::MockGateway(const ProviderConfig& config) : dimension_(config.embed_dimension) {
  config.validate();
}

std::string MockGateway::caption_component(const std::string& image_ref, ComponentKind kind) {
  return "caption(" + std::string(to_string(kind)) + ":" + image_ref + ")";
}

std::vector<std::string> MockGateway::generate_questions(PromptKind kind, const GenPayload& payload,
                                                         int max_questions) {
  if (max_questions < 1) throw ConfigError("max_questions must be >= 1");
  std::vector<std::string> questions;
  auto push = [&](std::string q) {
    if (static_cast<int>(questions.size()) < max_questions) questions.push_back(std::move(q));
  };
  switch (kind) {
    case PromptKind::Textual: {
      std::unordered_set<std::string> seen;
      for (const auto& tok : whitespace_tokens(lowercase(payload.text)))
        if (seen.insert(tok).second) push("What is known about " + tok);
      break;
    }
    case PromptKind::Multimodal:
      for (const auto& ref : payload.image_refs) {
        push("What does the page " + ref + " show");
        push("Which topics does the page " + ref + " cover");
      }
      break;
    case PromptKind::Visual:
      // An empty component list mirrors the prompt's empty-list contract.
      for (const auto& ref : payload.image_refs) {
        push("What does " + ref + " depict");
        push("What values appear in " + ref);
      }
      break;
  }
  return questions;
}

std::vector<int> MockGateway::rank_groups_llm(const std::string&, const std::string&,
                                              int group_count) {
  // Identity ranking: keeps best-rank order, which ties the Q-Cluster path
  // to the fallback path for ablation tooling.
  std::vector<int> out;
  for (int i = 1; i <= std::min(group_count, 5); ++i) out.push_back(i);
  if (out.empty()) throw RankParseError("no groups to rank");
  return out;
}

EmbeddingVector MockGateway::hash_embed(const std::string& text, int dimension) {
  EmbeddingVector v;
  v.values.assign(static_cast<std::size_t>(dimension), 0.0f);
  for (const auto& tok : whitespace_tokens(lowercase(text)))
    v.values[fnv1a64(tok) % static_cast<std::uint64_t>(dimension)] += 1.0f;
  l2_normalize(v);
  return v;
}

std::vector<EmbeddingVector> MockGateway::embed_texts(const std::vector<std::string>& texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    if (t.empty()) throw ProviderError("cannot embed empty text");
    out.push_back(hash_embed(t, dimension_));
  }
  return out;
}

}  // namespace preq
