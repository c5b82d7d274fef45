#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace preq {

// Base error. Subclasses map to CLI exit codes (see tools/main.cpp).
class Error : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad configuration, bad usage, or invalid input data. Exit code 1.
class ConfigError : public Error {
  using Error::Error;
};

// A required upstream artifact is missing. Exit code 2.
class ArtifactError : public Error {
  using Error::Error;
};

// Model provider failed after retries. Exit code 3.
class ProviderError : public Error {
  using Error::Error;
};

// Model replied but its rank listing could not be parsed. Callers of the
// query path fall back to best-rank ordering on this.
class RankParseError : public Error {
  using Error::Error;
};

// Model replied but its question array could not be parsed.
class GenParseError : public Error {
  using Error::Error;
};

// FNV-1a, 64 bit. Used for mock embeddings and config fingerprints so that
// results are stable across platforms and runs.
constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string to_hex(std::uint64_t v);

std::string lowercase(std::string_view s);

// Whitespace tokenizer (space, tab, newline, CR). No punctuation handling.
std::vector<std::string> whitespace_tokens(std::string_view s);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

// Line-delimited JSON. Blank lines are skipped; a parse failure reports the
// 1-based line number.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& records);

std::string replace_all(std::string s, std::string_view from, std::string_view to);

}  // namespace preq
