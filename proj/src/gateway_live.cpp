#include <chrono>
#include <type_traits>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "preq/gateway.hpp"

namespace preq {

using nlohmann::json;

namespace {

// Worth retrying: transport failures, rate limits, server errors, empty or
// malformed generation output.
class TransientError : public Error {
  using Error::Error;
};

class Semaphore {
 public:
  explicit Semaphore(int slots) : slots_(slots) {}
  void acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [this] { return slots_ > 0; });
    --slots_;
  }
  void release() {
    {
      std::lock_guard lock(mu_);
      ++slots_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int slots_;
};

struct SlotGuard {
  Semaphore& sem;
  explicit SlotGuard(Semaphore& s) : sem(s) { sem.acquire(); }
  ~SlotGuard() { sem.release(); }
};

std::string base64_encode(const std::string& bytes) {
  static const char* table = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  while (i + 2 < bytes.size()) {
    const unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                       (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                       static_cast<unsigned char>(bytes[i + 2]);
    out += table[(v >> 18) & 63];
    out += table[(v >> 12) & 63];
    out += table[(v >> 6) & 63];
    out += table[v & 63];
    i += 3;
  }
  if (i + 1 == bytes.size()) {
    const unsigned v = static_cast<unsigned char>(bytes[i]) << 16;
    out += table[(v >> 18) & 63];
    out += table[(v >> 12) & 63];
    out += "==";
  } else if (i + 2 == bytes.size()) {
    const unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                       (static_cast<unsigned char>(bytes[i + 1]) << 8);
    out += table[(v >> 18) & 63];
    out += table[(v >> 12) & 63];
    out += table[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

std::string mime_for_extension(const std::filesystem::path& p) {
  std::string ext = lowercase(p.extension().string());
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".webp") return "image/webp";
  if (ext == ".gif") return "image/gif";
  return "image/png";
}

json image_part(const std::string& image_ref) {
  std::string bytes;
  try {
    bytes = read_text_file(image_ref);
  } catch (const Error&) {
    throw ProviderError("cannot read image for request: " + image_ref);
  }
  const std::string uri =
      "data:" + mime_for_extension(image_ref) + ";base64," + base64_encode(bytes);
  return json{{"type", "image_url"}, {"image_url", {{"url", uri}}}};
}

}  // namespace

// OpenAI-compatible chat-completions and embeddings client. One HTTP
// connection per request; in-flight requests are bounded by
// max_parallel_requests, and failed requests back off exponentially up to
// retry_limit.
class LiveGateway : public ModelGateway {
 public:
  explicit LiveGateway(const ProviderConfig& config)
      : config_(config),
        prompts_(PromptStore::load(config.prompt_dir)),
        slots_(config.max_parallel_requests) {
    config.validate();
    split_endpoint(config.endpoint_url);
    const char* key = std::getenv(config_.api_key_env_var.c_str());
    if (!key || !*key)
      throw ConfigError("API key environment variable not set: " + config_.api_key_env_var);
    api_key_ = key;
  }

  std::string caption_component(const std::string& image_ref, ComponentKind) override {
    json content = json::array();
    content.push_back({{"type", "text"}, {"text", render_caption_prompt(prompts_)}});
    content.push_back(image_part(image_ref));
    return chat_with_retries(config_.caption_model_name, content,
                             [](const std::string& text) { return text; });
  }

  std::vector<std::string> generate_questions(PromptKind kind, const GenPayload& payload,
                                              int max_questions) override {
    if (max_questions < 1) throw ConfigError("max_questions must be >= 1");
    json content;
    std::string model;
    if (kind == PromptKind::Textual) {
      model = config_.text_model_name;
      content = render_preq_text_prompt(prompts_, payload.text, max_questions);
    } else {
      model = config_.chat_model_name;
      content = json::array();
      content.push_back(
          {{"type", "text"}, {"text", render_preq_image_prompt(prompts_, max_questions)}});
      for (const auto& ref : payload.image_refs) content.push_back(image_part(ref));
    }
    return chat_with_retries(model, content, [max_questions](const std::string& text) {
      try {
        return parse_question_array(text, max_questions);
      } catch (const GenParseError& e) {
        throw TransientError(e.what());
      }
    });
  }

  std::vector<int> rank_groups_llm(const std::string& query, const std::string& groups_text,
                                   int group_count) override {
    const std::string prompt = render_qcluster_prompt(prompts_, query, groups_text);
    // Transport failures are retried; an unparseable ranking is surfaced
    // immediately so the caller can fall back without burning retries.
    const std::string text = chat_with_retries(config_.rank_model_name, json(prompt),
                                               [](const std::string& t) { return t; });
    return parse_rank_output(text, group_count);
  }

  std::vector<EmbeddingVector> embed_texts(const std::vector<std::string>& texts) override {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    constexpr std::size_t kBatch = 128;
    for (std::size_t start = 0; start < texts.size(); start += kBatch) {
      const std::size_t end = std::min(texts.size(), start + kBatch);
      json input = json::array();
      for (std::size_t i = start; i < end; ++i) {
        if (texts[i].empty()) throw ConfigError("cannot embed empty text");
        input.push_back(texts[i]);
      }
      json body = {{"model", config_.embed_model_name}, {"input", input}};
      if (config_.embed_dimension > 0) body["dimensions"] = config_.embed_dimension;
      const json resp = post_with_retries(prefix_ + "/embeddings", body);
      if (!resp.contains("data") || !resp.at("data").is_array() ||
          resp.at("data").size() != end - start)
        throw ProviderError("embeddings response shape mismatch");
      std::vector<EmbeddingVector> batch(end - start);
      for (const auto& item : resp.at("data")) {
        const std::size_t idx = item.at("index").get<std::size_t>();
        if (idx >= batch.size()) throw ProviderError("embeddings response index out of range");
        batch[idx].values = item.at("embedding").get<std::vector<float>>();
      }
      for (auto& v : batch) {
        if (config_.embed_dimension > 0 &&
            v.dimension() != static_cast<std::size_t>(config_.embed_dimension))
          throw ProviderError("embedding dimension mismatch vs config: got " +
                              std::to_string(v.dimension()));
        l2_normalize(v);
        out.push_back(std::move(v));
      }
    }
    if (!out.empty()) {
      const std::size_t d = out.front().dimension();
      for (const auto& v : out)
        if (v.dimension() != d) throw ProviderError("inconsistent embedding dimensions");
    }
    return out;
  }

 private:
  void split_endpoint(const std::string& url) {
    const std::size_t scheme = url.find("://");
    if (scheme == std::string::npos) throw ConfigError("endpoint_url must include a scheme: " + url);
    const std::size_t path = url.find('/', scheme + 3);
    if (path == std::string::npos) {
      origin_ = url;
      prefix_ = "/v1";
    } else {
      origin_ = url.substr(0, path);
      prefix_ = url.substr(path);
      while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
    }
  }

  template <typename ParseFn>
  std::invoke_result_t<ParseFn, const std::string&> chat_with_retries(const std::string& model,
                                                                      const json& content,
                                                                      ParseFn parse) {
    json body = {{"model", model},
                 {"temperature", config_.temperature},
                 {"messages", json::array({{{"role", "user"}, {"content", content}}})}};
    std::string last_error;
    for (int attempt = 0; attempt <= config_.retry_limit; ++attempt) {
      if (attempt > 0) backoff(attempt);
      try {
        const json resp = post_once(prefix_ + "/chat/completions", body);
        const std::string text = extract_chat_content(resp);
        if (text.empty()) throw TransientError("empty model output");
        return parse(text);
      } catch (const TransientError& e) {
        last_error = e.what();
      }
    }
    throw ProviderError("chat request failed after " + std::to_string(config_.retry_limit + 1) +
                        " attempts: " + last_error);
  }

  json post_with_retries(const std::string& path, const json& body) {
    std::string last_error;
    for (int attempt = 0; attempt <= config_.retry_limit; ++attempt) {
      if (attempt > 0) backoff(attempt);
      try {
        return post_once(path, body);
      } catch (const TransientError& e) {
        last_error = e.what();
      }
    }
    throw ProviderError("request failed after " + std::to_string(config_.retry_limit + 1) +
                        " attempts: " + last_error);
  }

  json post_once(const std::string& path, const json& body) {
    SlotGuard guard(slots_);
    httplib::Client client(origin_);
    const auto timeout = std::chrono::milliseconds(
        static_cast<long>(config_.request_timeout_s * 1000.0));
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};
    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) throw TransientError("transport failure: " + httplib::to_string(res.error()));
    if (res->status == 429 || res->status >= 500)
      throw TransientError("HTTP " + std::to_string(res->status) + ": " + res->body);
    if (res->status != 200)
      throw ProviderError("HTTP " + std::to_string(res->status) + ": " + res->body);
    try {
      return json::parse(res->body);
    } catch (const json::parse_error&) {
      throw TransientError("response body is not JSON");
    }
  }

  static std::string extract_chat_content(const json& resp) {
    try {
      return resp.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
      throw TransientError("chat response shape mismatch: " + resp.dump());
    }
  }

  void backoff(int attempt) const {
    const long ms = std::min(8000L, 500L << std::min(attempt - 1, 10));
    std::this_thread::sleep_for(std::chrono::milliseconds(ms));
  }

  ProviderConfig config_;
  PromptStore prompts_;
  Semaphore slots_;
  std::string origin_;
  std::string prefix_;
  std::string api_key_;
};

std::unique_ptr<ModelGateway> make_gateway(const ProviderConfig& config) {
  config.validate();
  if (config.backend == ProviderConfig::Backend::Mock)
    return std::make_unique<MockGateway>(config);
  return std::make_unique<LiveGateway>(config);
}

}  // namespace preq
