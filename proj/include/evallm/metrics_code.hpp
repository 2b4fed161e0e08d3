// Code layer: syntax correctness, code similarity, grammar similarity.
#pragma once

#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "evallm/level_score.hpp"
#include "evallm/spec_model.hpp"

namespace evallm {

/// External render command. `{spec}` in the template is replaced by the
/// path of a file holding the canonical spec; exit code 0 means rendered.
struct RendererHook {
  std::string command_template;
};

/// Misconfiguration that must not be confused with a zero score.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 100 when the spec extracted, passes the structural checklist and (when a
/// renderer is configured) renders; 0 otherwise. details.stage names the
/// failing step.
LevelScore syntax_correctness(const ExtractionOutcome& extraction,
                              const std::optional<RendererHook>& renderer = std::nullopt);

enum class TokenClass { punctuation, string_literal, number, keyword };

struct Token {
  TokenClass cls;
  std::string text;
  friend bool operator==(const Token&, const Token&) = default;
  friend auto operator<=>(const Token&, const Token&) = default;
};

std::vector<Token> tokenize_json_text(std::string_view text);

struct CodeSimilarityParts {
  double lcs_ratio = 0;  // 2*LCS / (|A| + |B|)
  double bleu = 0;       // BLEU-4 of gen against gt, add-one smoothed for n >= 2
  double score = 0;      // 100 * mean of the two
};

CodeSimilarityParts code_similarity_tokens(std::span<const Token> gt, std::span<const Token> gen);
LevelScore code_similarity(const VisSpec& gt, const VisSpec& gen);

/// Dot paths of every object key; array elements collapse to "[]".
std::set<std::string> key_paths(const Json& document);

LevelScore grammar_similarity(const VisSpec& gt, const VisSpec& gen);

}  // namespace evallm
