#include "preq/prompts.hpp"

#include <filesystem>
#include <utility>
#include <vector>

#include "preq/common.hpp"

#ifndef PREQ_DEFAULT_PROMPT_DIR
#define PREQ_DEFAULT_PROMPT_DIR ""
#endif

namespace preq {

namespace fs = std::filesystem;

PromptStore PromptStore::load(const std::string& dir) {
  fs::path base = dir.empty() ? fs::path(PREQ_DEFAULT_PROMPT_DIR) : fs::path(dir);
  if (base.empty() || !fs::is_directory(base))
    throw ConfigError("prompt asset directory not found: " + base.string());
  PromptStore store;
  store.caption = read_text_file(base / "caption.txt");
  store.preq_text = read_text_file(base / "preq_text.txt");
  store.preq_image = read_text_file(base / "preq_image.txt");
  store.qcluster_rank = read_text_file(base / "qcluster_rank.txt");
  return store;
}

// Single pass: {{ and }} unescape, {name} substitutes, anything else (like a
// lone brace inside a literal JSON example) is copied through. Substituted
// values are never rescanned.
std::string render_template(const std::string& tpl,
                            const std::vector<std::pair<std::string, std::string>>& slots) {
  std::string out;
  out.reserve(tpl.size());
  std::size_t i = 0;
  while (i < tpl.size()) {
    const char c = tpl[i];
    if (c == '{') {
      if (i + 1 < tpl.size() && tpl[i + 1] == '{') {
        out += '{';
        i += 2;
        continue;
      }
      const std::size_t close = tpl.find('}', i + 1);
      bool matched = false;
      if (close != std::string::npos) {
        const std::string name = tpl.substr(i + 1, close - i - 1);
        for (const auto& [slot, value] : slots) {
          if (slot == name) {
            out += value;
            i = close + 1;
            matched = true;
            break;
          }
        }
      }
      if (!matched) {
        out += '{';
        ++i;
      }
      continue;
    }
    if (c == '}' && i + 1 < tpl.size() && tpl[i + 1] == '}') {
      out += '}';
      i += 2;
      continue;
    }
    out += c;
    ++i;
  }
  return out;
}

std::string render_caption_prompt(const PromptStore& store) {
  return render_template(store.caption, {});
}

std::string render_preq_text_prompt(const PromptStore& store, const std::string& document_text,
                                    int max_questions) {
  return render_template(store.preq_text, {{"cfg.max_new_questions", std::to_string(max_questions)},
                                           {"document_text", document_text}});
}

std::string render_preq_image_prompt(const PromptStore& store, int max_questions) {
  return render_template(store.preq_image,
                         {{"cfg.max_new_questions", std::to_string(max_questions)}});
}

std::string render_qcluster_prompt(const PromptStore& store, const std::string& query,
                                   const std::string& questions_text) {
  return render_template(store.qcluster_rank,
                         {{"query", query}, {"questions_text", questions_text}});
}

}  // namespace preq
