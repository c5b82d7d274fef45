#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "preq/commands.hpp"
#include "preq/synthetic.hpp"

namespace {

using preq::RunConfig;

struct CommonFlags {
  std::string config_path;
  std::string workdir;
  std::string backend;
  std::string modalities;
  std::string corpus_manifest;
  std::string eval_queries;
  bool no_qcluster = false;
  int top_k_override = -1;
  std::optional<std::uint64_t> seed;
  int workers = -1;
  int max_questions = -1;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "Run configuration file (JSON)");
  cmd->add_option("--workdir", flags.workdir, "Artifact directory");
  cmd->add_option("--backend", flags.backend, "Provider backend: live|mock")
      ->check(CLI::IsMember({"live", "mock"}));
  cmd->add_option("--modalities", flags.modalities, "Enabled preQ modalities, e.g. m,v,t");
  cmd->add_option("--corpus", flags.corpus_manifest, "Corpus manifest path");
  cmd->add_option("--eval-queries", flags.eval_queries, "Eval query file (JSONL)");
  cmd->add_flag("--no-qcluster", flags.no_qcluster, "Disable LLM group ranking (fallback order)");
  cmd->add_option("--top-k-override", flags.top_k_override, "Override the retrieval k rule");
  cmd->add_option("--seed", flags.seed, "Seed for sampling-based tooling");
  cmd->add_option("--workers", flags.workers, "Worker threads for corpus-wide stages");
  cmd->add_option("-n,--max-questions", flags.max_questions, "Questions per source cap");
}

RunConfig build_config(const CommonFlags& flags) {
  RunConfig config = flags.config_path.empty() ? RunConfig{} : RunConfig::from_file(flags.config_path);
  if (!flags.workdir.empty()) config.workdir = flags.workdir;
  if (!flags.corpus_manifest.empty()) config.corpus_manifest = flags.corpus_manifest;
  if (!flags.eval_queries.empty()) config.eval_queries = flags.eval_queries;
  if (!flags.backend.empty())
    config.provider.backend = flags.backend == "live" ? preq::ProviderConfig::Backend::Live
                                                      : preq::ProviderConfig::Backend::Mock;
  if (!flags.modalities.empty())
    config.gen.modalities_enabled = preq::ModalitySet::parse(flags.modalities);
  if (flags.no_qcluster) config.retrieval.use_qcluster = false;
  if (flags.top_k_override >= 0) config.top_k_override = flags.top_k_override;
  if (flags.seed) config.seed = *flags.seed;
  if (flags.workers > 0) config.workers = flags.workers;
  if (flags.max_questions > 0) config.gen.max_questions_per_source = flags.max_questions;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-modal pre-question retrieval engine"};
  app.require_subcommand(1);

  CommonFlags flags;
  bool skip_existing = false;
  std::string query_text;
  std::string eval_ablation = "none";
  int sample_passages = 12;
  int sample_documents = 3;
  std::string sample_out;

  auto* caption = app.add_subcommand("caption", "Caption corpus components");
  add_common_flags(caption, flags);
  caption->add_flag("--skip-existing", skip_existing, "Keep captions already present");

  auto* generate = app.add_subcommand("generate", "Generate the cross-modal preQ pool");
  add_common_flags(generate, flags);

  auto* index = app.add_subcommand("index", "Build the vector index over the preQ store");
  add_common_flags(index, flags);

  auto* query = app.add_subcommand("query", "Answer one text query");
  add_common_flags(query, flags);
  query->add_option("query", query_text, "Query text")->required();

  auto* eval = app.add_subcommand("eval", "Run retrieval metrics over an eval set");
  add_common_flags(eval, flags);
  eval->add_option("--ablation", eval_ablation, "none|modalities|qcluster")
      ->check(CLI::IsMember({"none", "modalities", "qcluster"}));

  auto* analyze = app.add_subcommand("analyze", "Pool analyses");
  analyze->require_subcommand(1);
  auto* redundancy = analyze->add_subcommand("redundancy", "Pairwise cosine redundancy table");
  add_common_flags(redundancy, flags);
  auto* coverage = analyze->add_subcommand("coverage", "Cluster-count sweep over n");
  add_common_flags(coverage, flags);
  auto* embeddings = analyze->add_subcommand("embeddings", "Export the embedding matrix");
  add_common_flags(embeddings, flags);

  auto* sample = app.add_subcommand("make-sample", "Write a synthetic keyword corpus");
  add_common_flags(sample, flags);
  sample->add_option("--passages", sample_passages, "Passage count");
  sample->add_option("--documents", sample_documents, "Document count");
  sample->add_option("--out", sample_out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig config = build_config(flags);
    if (caption->parsed()) {
      preq::commands::cmd_caption(config, {skip_existing});
    } else if (generate->parsed()) {
      preq::commands::cmd_generate(config);
    } else if (index->parsed()) {
      preq::commands::cmd_index(config);
    } else if (query->parsed()) {
      preq::commands::cmd_query(config, query_text);
    } else if (eval->parsed()) {
      auto mode = preq::commands::EvalMode::Plain;
      if (eval_ablation == "modalities") mode = preq::commands::EvalMode::ModalityAblation;
      if (eval_ablation == "qcluster") mode = preq::commands::EvalMode::QClusterAblation;
      preq::commands::cmd_eval(config, mode);
    } else if (redundancy->parsed()) {
      preq::commands::cmd_analyze_redundancy(config);
    } else if (coverage->parsed()) {
      preq::commands::cmd_analyze_coverage(config);
    } else if (embeddings->parsed()) {
      preq::commands::cmd_analyze_embeddings(config);
    } else if (sample->parsed()) {
      preq::SyntheticSpec spec;
      spec.passages = sample_passages;
      spec.documents = sample_documents;
      spec.seed = config.seed;
      preq::write_synthetic_corpus(spec, sample_out);
      std::cerr << "wrote synthetic corpus (" << sample_passages << " passages) -> " << sample_out
                << "\n";
    }
  } catch (const preq::ArtifactError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const preq::ProviderError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const preq::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
