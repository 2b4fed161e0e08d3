// Benchmark corpus: (dataset, utterance, ground-truth spec) triplets and the
// prompt template used to query a model with them.
#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "evallm/spec_model.hpp"

namespace evallm {

inline constexpr int kCorpusFormatVersion = 1;

enum class ColumnType { number, string, date, boolean };

struct Column {
  std::string name;
  ColumnType dtype = ColumnType::string;
  friend bool operator==(const Column&, const Column&) = default;
};

struct TabularDataset {
  std::string name;
  std::vector<Column> columns;
  std::vector<std::vector<Json>> rows;

  std::vector<std::string> column_names() const;
  friend bool operator==(const TabularDataset&, const TabularDataset&) = default;
};

struct BenchmarkInstance {
  std::string id;
  TabularDataset dataset;
  std::string utterance;
  VisSpec ground_truth;
  std::vector<std::string> ground_truth_warnings;
  std::optional<std::string> difficulty;
  std::optional<std::string> ground_truth_image;

  friend bool operator==(const BenchmarkInstance&, const BenchmarkInstance&) = default;
};

struct Corpus {
  std::string name;
  std::vector<BenchmarkInstance> instances;
  /// Directory that relative image paths resolve against.
  std::filesystem::path root;

  const BenchmarkInstance* find(std::string_view id) const;
};

struct LoadError {
  std::size_t index = 0;
  std::string instance_id;
  std::string code;
  std::string message;
};

struct CorpusLoad {
  Corpus corpus;
  std::vector<LoadError> errors;
};

/// Fatal corpus problems: unreadable path or a bundle that is not JSON.
class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Loads a bundle file or a directory of per-instance JSON files.
/// Invalid instances are reported in `errors`; valid ones are still returned.
CorpusLoad load_corpus(const std::filesystem::path& path);

/// Same validation as load_corpus, over an already-parsed bundle document.
CorpusLoad corpus_from_json(const Json& bundle, const std::filesystem::path& root = {});

Json corpus_to_json(const Corpus& corpus);
Json instance_to_json(const BenchmarkInstance& instance);

struct PromptTemplate {
  std::string template_text;
  int sample_row_limit = 20;
};

/// Alpaca-style instruction / input / response template.
PromptTemplate default_prompt_template();

/// Throws std::invalid_argument on unknown placeholders or a negative limit.
void validate_template(const PromptTemplate& prompt_template);

std::string render_prompt(const BenchmarkInstance& instance, const PromptTemplate& prompt_template);

std::string_view to_string(ColumnType type);
std::optional<ColumnType> parse_column_type(std::string_view text);

}  // namespace evallm
