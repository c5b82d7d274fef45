#pragma once

#include <string>
#include <utility>
#include <vector>

namespace preq {

// The four prompt templates, stored verbatim as external text assets with
// {placeholder} slots so their fidelity is testable by string comparison.
// Literal braces in a template are escaped as {{ and }}.
struct PromptStore {
  std::string caption;        // no slots; image attached alongside
  std::string preq_text;      // {cfg.max_new_questions}, {document_text}
  std::string preq_image;     // {cfg.max_new_questions}; image(s) attached
  std::string qcluster_rank;  // {query}, {questions_text}

  // dir empty -> compiled-in default asset directory.
  static PromptStore load(const std::string& dir = {});
};

// Replaces named {slots} and unescapes {{ and }} in one pass; substituted
// values are never rescanned, so braces inside them pass through untouched.
std::string render_template(const std::string& tpl,
                            const std::vector<std::pair<std::string, std::string>>& slots);

std::string render_caption_prompt(const PromptStore& store);
std::string render_preq_text_prompt(const PromptStore& store, const std::string& document_text,
                                    int max_questions);
std::string render_preq_image_prompt(const PromptStore& store, int max_questions);
std::string render_qcluster_prompt(const PromptStore& store, const std::string& query,
                                   const std::string& questions_text);

}  // namespace preq
