#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "preq/gateway.hpp"
#include "preq/pipeline.hpp"
#include "preq/qcluster.hpp"

namespace preq {

struct RetrievalConfig {
  bool use_qcluster = true;
  int top_passages = 5;
  int group_cap = 30;
};

struct AnalysisConfig {
  std::vector<double> thresholds = {0.5, 0.6, 0.7, 0.8, 0.9};
  double eps = 0.4;
  int min_pts = 3;
  std::vector<int> n_values = {10, 30, 50, 70};
};

// One hierarchical config drives every command; any field can be overridden
// by a command-line flag. API keys come only from the environment.
struct RunConfig {
  std::filesystem::path corpus_manifest;
  std::filesystem::path workdir = "workdir";
  std::filesystem::path eval_queries;
  ProviderConfig provider;
  GenConfig gen;
  RetrievalConfig retrieval;
  AnalysisConfig analysis;
  int workers = 4;
  std::uint64_t seed = 0;
  int top_k_override = 0;

  static RunConfig from_file(const std::filesystem::path& path);
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  nlohmann::json to_json() const;

  // Digest of everything that affects artifacts (the workdir path itself is
  // excluded so runs into different directories compare equal).
  std::string fingerprint() const;

  void validate() const;
};

}  // namespace preq
