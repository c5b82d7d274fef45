#include "preq/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <iostream>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "preq/vector_index.hpp"

namespace preq::commands {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path captioned_manifest_path(const RunConfig& c) { return c.workdir / "corpus.captioned.jsonl"; }
fs::path preq_store_dir(const RunConfig& c) { return c.workdir / "preqs"; }
fs::path index_dir(const RunConfig& c) { return c.workdir / "index"; }
fs::path eval_dir(const RunConfig& c) { return c.workdir / "eval"; }
fs::path analysis_dir(const RunConfig& c) { return c.workdir / "analysis"; }

namespace {

void log_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

void write_fingerprint(const RunConfig& config, const std::string& stage) {
  write_text_file(config.workdir / ("fingerprint." + stage + ".txt"),
                  config.fingerprint() + "\n");
}

// The corpus every post-caption stage works from.
Corpus load_working_corpus(const RunConfig& config, bool require_captions) {
  std::vector<std::string> warnings;
  const fs::path captioned = captioned_manifest_path(config);
  Corpus corpus;
  if (fs::exists(captioned)) {
    LoadOptions options;
    if (!config.corpus_manifest.empty() && config.corpus_manifest.has_parent_path())
      options.image_base = config.corpus_manifest.parent_path();
    corpus = load_corpus(captioned, options, &warnings);
  } else {
    if (config.corpus_manifest.empty())
      throw ConfigError("corpus_manifest is not set");
    corpus = load_corpus(config.corpus_manifest, {}, &warnings);
    if (require_captions) {
      for (const Passage* p : std::as_const(corpus).passages())
        for (const auto& comp : p->components)
          if (!comp.caption)
            throw ArtifactError("component captions missing (component " + comp.id +
                                " of passage " + p->id + "); run caption");
    }
  }
  log_warnings(warnings);
  return corpus;
}

RetrievalPool load_pool_or_fail(const RunConfig& config) {
  return load_pool(preq_store_dir(config));
}

VectorIndex load_index_or_fail(const RunConfig& config) {
  const fs::path dir = index_dir(config);
  if (!fs::exists(dir / "vectors.bin"))
    throw ArtifactError("index not found; run index (" + dir.string() + ")");
  return VectorIndex::load(dir);
}

std::string format_metric(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

json report_to_json(const EvalReport& report) {
  json recall;
  for (const auto& [k, v] : report.recall_at) recall[std::to_string(k)] = v;
  return {{"recall_at", recall},
          {"mrr_at_5", report.mrr_at_5},
          {"config_fingerprint", report.config_fingerprint},
          {"queries", report.per_query.size()},
          {"warnings", report.warnings}};
}

std::string report_to_table(const EvalReport& report) {
  std::string out;
  out += "metric     value\n";
  for (const auto& [k, v] : report.recall_at)
    out += "Recall@" + std::to_string(k) + "   " + format_metric(v) + "\n";
  out += "MRR@5      " + format_metric(report.mrr_at_5) + "\n";
  return out;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::string out = "config          Recall@1  Recall@3  Recall@5  MRR@5\n";
  for (const auto& row : rows) {
    std::string label = row.label;
    label.resize(16, ' ');
    out += label;
    for (int k : {1, 3, 5}) {
      auto it = row.report.recall_at.find(k);
      out += format_metric(it == row.report.recall_at.end() ? 0.0 : it->second) + "    ";
    }
    out += format_metric(row.report.mrr_at_5) + "\n";
  }
  return out;
}

void write_ablation(const std::vector<AblationRow>& rows, const fs::path& json_path,
                    const fs::path& table_path) {
  std::vector<json> records;
  for (const auto& row : rows) {
    json j = report_to_json(row.report);
    j["label"] = row.label;
    records.push_back(std::move(j));
  }
  write_jsonl(json_path, records);
  write_text_file(table_path, ablation_table(rows));
}

struct LoadedEngine {
  Corpus corpus;
  RetrievalPool pool;
  std::unique_ptr<ModelGateway> gateway;
  std::unique_ptr<RetrievalEngine> engine;
};

LoadedEngine make_engine(const RunConfig& config) {
  LoadedEngine e;
  e.corpus = load_working_corpus(config, false);
  e.pool = load_pool_or_fail(config);
  VectorIndex index = load_index_or_fail(config);
  e.gateway = make_gateway(config.provider);
  RetrieverOptions options;
  options.group_cap = config.retrieval.group_cap;
  options.top_k_override = config.top_k_override;
  e.engine = std::make_unique<RetrievalEngine>(e.pool, *e.gateway, options);
  e.engine->seed_full_view(std::move(index));
  return e;
}

QueryRequest request_template(const RunConfig& config) {
  QueryRequest request;
  request.top_passages = config.retrieval.top_passages;
  request.use_qcluster = config.retrieval.use_qcluster;
  request.modality_mask = config.gen.modalities_enabled;
  return request;
}

}  // namespace

void cmd_caption(const RunConfig& config, const CaptionOptions& options) {
  config.validate();
  std::vector<std::string> warnings;
  if (config.corpus_manifest.empty()) throw ConfigError("corpus_manifest is not set");
  Corpus corpus = load_corpus(config.corpus_manifest, {}, &warnings);
  log_warnings(warnings);
  // The live backend reads image bytes, so relative refs must be resolved
  // against the manifest directory up front. Mock runs keep refs verbatim.
  if (config.provider.backend == ProviderConfig::Backend::Live) corpus.absolutize_image_refs();

  auto gateway = make_gateway(config.provider);
  auto passages = corpus.passages();

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> attempted{0}, failed{0};
  std::mutex warn_mu;
  std::vector<std::string> caption_warnings;
  auto run = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= passages.size()) return;
      for (auto& comp : passages[i]->components) {
        if (options.skip_existing && comp.caption) continue;
        attempted.fetch_add(1);
        try {
          comp.caption = gateway->caption_component(comp.image_ref, comp.kind);
        } catch (const Error& e) {
          failed.fetch_add(1);
          std::lock_guard lock(warn_mu);
          caption_warnings.push_back("captioning failed for component " + comp.id +
                                     " of passage " + passages[i]->id + ": " + e.what());
        }
      }
    }
  };
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(1, config.workers)),
                            std::max<std::size_t>(1, passages.size()));
  if (workers <= 1) {
    run();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(run);
    for (auto& th : threads) th.join();
  }
  log_warnings(caption_warnings);
  if (attempted > 0 && failed == attempted)
    throw ProviderError("captioning failed for every component");

  fs::create_directories(config.workdir);
  save_corpus(corpus, captioned_manifest_path(config));
  write_fingerprint(config, "caption");
  std::cerr << "captioned " << (attempted - failed) << "/" << attempted << " components -> "
            << captioned_manifest_path(config).string() << "\n";
}

void cmd_generate(const RunConfig& config) {
  config.validate();
  Corpus corpus = load_working_corpus(config, true);
  // Covers the shipped-captions path where the caption stage never ran.
  if (config.provider.backend == ProviderConfig::Backend::Live) corpus.absolutize_image_refs();
  std::vector<std::string> surrogate_warnings;
  assemble_all_surrogates(corpus, &surrogate_warnings);
  log_warnings(surrogate_warnings);

  auto gateway = make_gateway(config.provider);
  BuildReport report;
  const RetrievalPool pool = build_pool(corpus, config.gen, *gateway, config.workers, &report);

  const fs::path dir = preq_store_dir(config);
  save_pool(pool, dir);
  save_build_report(report, dir / "run_report.jsonl");
  write_fingerprint(config, "generate");
  std::cerr << "generated " << pool.size() << " preQs over " << corpus.passage_count()
            << " passages -> " << dir.string() << "\n";
}

void cmd_index(const RunConfig& config) {
  config.validate();
  const RetrievalPool pool = load_pool_or_fail(config);
  const VectorIndex index = VectorIndex::build(pool);
  index.save(index_dir(config));
  write_fingerprint(config, "index");
  std::cerr << "indexed " << index.size() << " vectors (dim " << index.dimension() << ") -> "
            << index_dir(config).string() << "\n";
}

RankedPassages cmd_query(const RunConfig& config, const std::string& query_text) {
  config.validate();
  if (query_text.empty()) throw ConfigError("query text must not be empty");
  LoadedEngine loaded = make_engine(config);

  QueryRequest request = request_template(config);
  request.query_text = query_text;
  const RankedPassages result = loaded.engine->answer(request);

  json ranked = json::array();
  for (const auto& entry : result.passages)
    ranked.push_back({{"passage_id", entry.passage_id},
                      {"supporting_preq_ids", entry.supporting_preq_ids}});
  const json record = {{"query_id", "q-" + to_hex(fnv1a64(query_text)).substr(0, 8)},
                       {"ranked", ranked},
                       {"ranking_source", std::string(to_string(result.ranking_source))},
                       {"k_used", result.k_used},
                       {"m_groups", result.m_groups}};
  std::cout << record.dump() << "\n";
  return result;
}

EvalReport cmd_eval(const RunConfig& config, EvalMode mode) {
  config.validate();
  if (config.eval_queries.empty()) throw ConfigError("eval_queries path is not set");
  const auto queries = load_eval_queries(config.eval_queries);
  LoadedEngine loaded = make_engine(config);
  const QueryRequest request = request_template(config);
  const std::string fingerprint = config.fingerprint();
  const fs::path dir = eval_dir(config);
  fs::create_directories(dir);

  EvalReport result;
  switch (mode) {
    case EvalMode::Plain: {
      result = run_eval(queries, request, *loaded.engine, loaded.corpus, fingerprint);
      log_warnings(result.warnings);
      write_text_file(dir / "report.json", report_to_json(result).dump(2) + "\n");
      write_text_file(dir / "report.txt", report_to_table(result));
      std::vector<json> per_query;
      for (const auto& [id, rank] : result.per_query) {
        json j = {{"query_id", id}};
        if (rank)
          j["first_gold_rank"] = *rank;
        else
          j["first_gold_rank"] = nullptr;
        per_query.push_back(std::move(j));
      }
      write_jsonl(dir / "per_query.jsonl", per_query);
      std::cout << report_to_table(result);
      break;
    }
    case EvalMode::ModalityAblation: {
      const auto rows =
          run_modality_ablation(queries, request, *loaded.engine, loaded.corpus, fingerprint);
      write_ablation(rows, dir / "ablation_modalities.jsonl", dir / "ablation_modalities.txt");
      std::cout << ablation_table(rows);
      result = rows.front().report;
      break;
    }
    case EvalMode::QClusterAblation: {
      const auto rows =
          run_qcluster_ablation(queries, request, *loaded.engine, loaded.corpus, fingerprint);
      write_ablation(rows, dir / "ablation_qcluster.jsonl", dir / "ablation_qcluster.txt");
      std::cout << ablation_table(rows);
      result = rows.front().report;
      break;
    }
  }
  write_fingerprint(config, "eval");
  return result;
}

void cmd_analyze_redundancy(const RunConfig& config) {
  config.validate();
  const Corpus corpus = load_working_corpus(config, false);
  const RetrievalPool pool = load_pool_or_fail(config);
  std::map<std::string, std::string> passage_to_document;
  for (const Passage* p : corpus.passages()) passage_to_document[p->id] = p->document_id;

  const RedundancyReport report =
      redundancy_analysis(pool, passage_to_document, config.analysis.thresholds, config.workers);
  log_warnings(report.warnings);

  const fs::path dir = analysis_dir(config);
  fs::create_directories(dir);
  std::vector<json> records;
  std::string table = "threshold  %within-passage  %within-document  %across-all\n";
  for (double t : report.thresholds) {
    records.push_back({{"threshold", t},
                       {"within_passage_fraction", report.within_passage_fraction.at(t)},
                       {"within_document_fraction", report.within_document_fraction.at(t)},
                       {"across_all_fraction", report.across_all_fraction.at(t)}});
    char row[128];
    std::snprintf(row, sizeof row, ">= %-7s %15.4f %17.4f %12.4f\n", format_metric(t).c_str(),
                  report.within_passage_fraction.at(t), report.within_document_fraction.at(t),
                  report.across_all_fraction.at(t));
    table += row;
  }
  write_jsonl(dir / "redundancy.jsonl", records);
  write_text_file(dir / "redundancy.txt", table);
  write_fingerprint(config, "analyze");
  std::cout << table;
}

void cmd_analyze_coverage(const RunConfig& config) {
  config.validate();
  Corpus corpus = load_working_corpus(config, true);
  std::vector<std::string> warnings;
  assemble_all_surrogates(corpus, &warnings);
  log_warnings(warnings);
  auto gateway = make_gateway(config.provider);

  const CoverageReport report =
      coverage_sweep(corpus, config.analysis.n_values, config.gen, *gateway, config.analysis.eps,
                     config.analysis.min_pts, config.workers);

  const fs::path dir = analysis_dir(config);
  fs::create_directories(dir);
  std::vector<json> records;
  std::string table = "n     avg clusters\n";
  for (int n : report.n_values) {
    records.push_back({{"n", n},
                       {"avg_cluster_count", report.avg_cluster_count.at(n)},
                       {"eps", report.eps},
                       {"min_pts", report.min_pts}});
    std::string row = std::to_string(n);
    row.resize(6, ' ');
    table += row + format_metric(report.avg_cluster_count.at(n)) + "\n";
  }
  write_jsonl(dir / "coverage.jsonl", records);
  write_text_file(dir / "coverage.txt", table);
  write_fingerprint(config, "analyze");
  std::cout << table;
}

void cmd_analyze_embeddings(const RunConfig& config) {
  config.validate();
  const RetrievalPool pool = load_pool_or_fail(config);
  const fs::path dir = analysis_dir(config);
  export_embeddings(pool, dir / "embeddings.tsv", dir / "embeddings_labels.tsv");
  write_fingerprint(config, "analyze");
  std::cerr << "exported " << pool.size() << " embedding rows -> "
            << (dir / "embeddings.tsv").string() << "\n";
}

}  // namespace preq::commands
