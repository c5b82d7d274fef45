#include "preq/config.hpp"

#include <nlohmann/json.hpp>

namespace preq {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

ProviderConfig provider_from_json(const json& j) {
  ProviderConfig p;
  const std::string backend = j.value("backend", std::string("mock"));
  if (backend == "mock")
    p.backend = ProviderConfig::Backend::Mock;
  else if (backend == "live")
    p.backend = ProviderConfig::Backend::Live;
  else
    throw ConfigError("provider.backend must be \"live\" or \"mock\", got: " + backend);
  p.endpoint_url = j.value("endpoint_url", p.endpoint_url);
  p.api_key_env_var = j.value("api_key_env_var", p.api_key_env_var);
  p.chat_model_name = j.value("chat_model_name", p.chat_model_name);
  p.caption_model_name = j.value("caption_model_name", p.caption_model_name);
  p.text_model_name = j.value("text_model_name", p.text_model_name);
  p.rank_model_name = j.value("rank_model_name", p.rank_model_name);
  p.embed_model_name = j.value("embed_model_name", p.embed_model_name);
  p.max_parallel_requests = j.value("max_parallel_requests", p.max_parallel_requests);
  p.retry_limit = j.value("retry_limit", p.retry_limit);
  p.request_timeout_s = j.value("request_timeout_s", p.request_timeout_s);
  p.temperature = j.value("temperature", p.temperature);
  p.embed_dimension = j.value("embed_dimension", p.embed_dimension);
  p.prompt_dir = j.value("prompt_dir", p.prompt_dir);
  return p;
}

json provider_to_json(const ProviderConfig& p) {
  return {{"backend", p.backend == ProviderConfig::Backend::Mock ? "mock" : "live"},
          {"endpoint_url", p.endpoint_url},
          {"api_key_env_var", p.api_key_env_var},
          {"chat_model_name", p.chat_model_name},
          {"caption_model_name", p.caption_model_name},
          {"text_model_name", p.text_model_name},
          {"rank_model_name", p.rank_model_name},
          {"embed_model_name", p.embed_model_name},
          {"max_parallel_requests", p.max_parallel_requests},
          {"retry_limit", p.retry_limit},
          {"request_timeout_s", p.request_timeout_s},
          {"temperature", p.temperature},
          {"embed_dimension", p.embed_dimension},
          {"prompt_dir", p.prompt_dir}};
}

}  // namespace

RunConfig RunConfig::from_file(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error in " + path.string() + ": " + e.what());
  }
  return from_json(j, path.has_parent_path() ? path.parent_path() : fs::path("."));
}

RunConfig RunConfig::from_json(const json& j, const fs::path& base_dir) {
  RunConfig c;
  c.corpus_manifest = resolve(base_dir, j.value("corpus_manifest", std::string{}));
  c.workdir = resolve(base_dir, j.value("workdir", std::string("workdir")));
  c.eval_queries = resolve(base_dir, j.value("eval_queries", std::string{}));
  if (j.contains("provider")) c.provider = provider_from_json(j.at("provider"));
  if (j.contains("gen")) {
    const auto& g = j.at("gen");
    c.gen.max_questions_per_source =
        g.value("max_questions_per_source", c.gen.max_questions_per_source);
    if (g.contains("modalities"))
      c.gen.modalities_enabled = ModalitySet::parse(g.at("modalities").get<std::string>());
  }
  if (j.contains("retrieval")) {
    const auto& r = j.at("retrieval");
    c.retrieval.use_qcluster = r.value("use_qcluster", c.retrieval.use_qcluster);
    c.retrieval.top_passages = r.value("top_passages", c.retrieval.top_passages);
    c.retrieval.group_cap = r.value("group_cap", c.retrieval.group_cap);
  }
  if (j.contains("analysis")) {
    const auto& a = j.at("analysis");
    if (a.contains("thresholds")) c.analysis.thresholds = a.at("thresholds").get<std::vector<double>>();
    c.analysis.eps = a.value("eps", c.analysis.eps);
    c.analysis.min_pts = a.value("min_pts", c.analysis.min_pts);
    if (a.contains("n_values")) c.analysis.n_values = a.at("n_values").get<std::vector<int>>();
  }
  c.workers = j.value("workers", c.workers);
  c.seed = j.value("seed", c.seed);
  c.top_k_override = j.value("top_k_override", c.top_k_override);
  return c;
}

json RunConfig::to_json() const {
  return {{"corpus_manifest", corpus_manifest.string()},
          {"workdir", workdir.string()},
          {"eval_queries", eval_queries.string()},
          {"provider", provider_to_json(provider)},
          {"gen",
           {{"max_questions_per_source", gen.max_questions_per_source},
            {"modalities", gen.modalities_enabled.to_string()}}},
          {"retrieval",
           {{"use_qcluster", retrieval.use_qcluster},
            {"top_passages", retrieval.top_passages},
            {"group_cap", retrieval.group_cap}}},
          {"analysis",
           {{"thresholds", analysis.thresholds},
            {"eps", analysis.eps},
            {"min_pts", analysis.min_pts},
            {"n_values", analysis.n_values}}},
          {"workers", workers},
          {"seed", seed},
          {"top_k_override", top_k_override}};
}

std::string RunConfig::fingerprint() const {
  json j = to_json();
  j.erase("workdir");
  return to_hex(fnv1a64(j.dump()));
}

void RunConfig::validate() const {
  provider.validate();
  gen.validate();
  if (retrieval.top_passages < 1) throw ConfigError("retrieval.top_passages must be >= 1");
  if (retrieval.use_qcluster && retrieval.top_passages > 5)
    throw ConfigError("retrieval.top_passages must be <= 5 with use_qcluster");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (analysis.eps <= 0) throw ConfigError("analysis.eps must be positive");
  if (analysis.min_pts < 1) throw ConfigError("analysis.min_pts must be >= 1");
}

}  // namespace preq
