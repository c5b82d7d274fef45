#pragma once

#include <optional>
#include <string>

#include "preq/config.hpp"
#include "preq/eval.hpp"

namespace preq::commands {

// Stage commands behind the CLI. Each one reads its upstream artifact from
// the workdir, writes its own outputs there along with a config fingerprint,
// and never mutates the input corpus manifest. All are restartable; under
// the mock backend a re-run reproduces identical artifacts.

struct CaptionOptions {
  bool skip_existing = false;
};
void cmd_caption(const RunConfig& config, const CaptionOptions& options = {});

void cmd_generate(const RunConfig& config);

void cmd_index(const RunConfig& config);

// Prints one JSON result record to stdout and also returns it.
RankedPassages cmd_query(const RunConfig& config, const std::string& query_text);

enum class EvalMode { Plain, ModalityAblation, QClusterAblation };
EvalReport cmd_eval(const RunConfig& config, EvalMode mode = EvalMode::Plain);

void cmd_analyze_redundancy(const RunConfig& config);
void cmd_analyze_coverage(const RunConfig& config);
void cmd_analyze_embeddings(const RunConfig& config);

// Paths of the artifacts each stage produces, all under config.workdir.
std::filesystem::path captioned_manifest_path(const RunConfig& config);
std::filesystem::path preq_store_dir(const RunConfig& config);
std::filesystem::path index_dir(const RunConfig& config);
std::filesystem::path eval_dir(const RunConfig& config);
std::filesystem::path analysis_dir(const RunConfig& config);

}  // namespace preq::commands
