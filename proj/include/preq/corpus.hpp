#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "preq/common.hpp"

namespace preq {

enum class ComponentKind { Table, Figure, Chart, Diagram, Other };

std::string_view to_string(ComponentKind kind);
ComponentKind component_kind_from_string(std::string_view s);

// One OCR text region with its position in the page reading order.
struct OcrBlock {
  std::string text;
  int layout_order = 0;

  bool operator==(const OcrBlock&) const = default;
};

// A detected visual element (table, figure, chart, ...) on a page. Its
// layout_order interleaves with the owning passage's OCR block orders.
struct Component {
  std::string id;
  ComponentKind kind = ComponentKind::Other;
  std::string image_ref;
  int layout_order = 0;
  std::optional<std::string> caption;

  bool operator==(const Component&) const = default;
};

// One page of a document: the raw page image reference, its visual
// components, the OCR text regions, and (once assembled) the layout-aware
// textual surrogate. Image refs are opaque strings; they are only resolved
// against the manifest directory when something needs the bytes.
struct Passage {
  std::string id;
  std::string document_id;
  int page_index = 0;
  std::string page_image_ref;
  std::vector<OcrBlock> ocr_blocks;
  std::vector<Component> components;
  std::optional<std::string> text_surrogate;

  bool operator==(const Passage&) const = default;
};

struct Document {
  std::string id;
  std::vector<Passage> passages;  // ordered by page_index, contiguous from 0

  bool operator==(const Document&) const = default;
};

class Corpus {
 public:
  std::vector<Document> documents;
  std::string manifest_path;

  std::size_t passage_count() const;
  std::vector<const Passage*> passages() const;  // corpus order
  std::vector<Passage*> passages();
  const Passage* find_passage(std::string_view passage_id) const;
  // Maps a passage id to its owning document id; throws on unknown id.
  const std::string& document_of(std::string_view passage_id) const;

  // Directory image refs are resolved against (the manifest's directory).
  std::filesystem::path base_dir() const;
  // Rewrites relative image refs to absolute paths so the corpus can be
  // re-saved into a different directory without breaking them.
  void absolutize_image_refs();

  bool operator==(const Corpus& other) const {
    return documents == other.documents;
  }
};

struct LoadOptions {
  bool strict = false;  // strict: dangling image refs become errors
  // Directory relative image refs are checked against; defaults to the
  // manifest's own directory. Derived manifests (for instance the captioned
  // copy in a workdir) keep refs verbatim, so their checks need the original
  // corpus directory.
  std::optional<std::filesystem::path> image_base;
};

// Loads a line-delimited manifest (one JSON record per passage). Validates
// id uniqueness, page contiguity and layout-order uniqueness; dangling image
// references are collected as warnings unless strict.
Corpus load_corpus(const std::filesystem::path& manifest_path, const LoadOptions& options = {},
                   std::vector<std::string>* warnings = nullptr);

void save_corpus(const Corpus& corpus, const std::filesystem::path& manifest_path);

// Merges OCR blocks and component captions into one text, sorted by
// layout_order ascending, blocks separated by a blank line. Caption blocks
// are prefixed with a kind tag ("[figure] ..."). Components without a
// caption are skipped with a warning. Pure: identical passages produce
// byte-identical surrogates.
std::string assemble_text_surrogate(const Passage& passage,
                                    std::vector<std::string>* warnings = nullptr);

void assemble_all_surrogates(Corpus& corpus, std::vector<std::string>* warnings = nullptr);

}  // namespace preq
