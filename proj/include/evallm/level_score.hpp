// Per-level scores shared by every metric module.
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "evallm/spec_model.hpp"

namespace evallm {

/// Stack levels in evaluation order. The first eight are automatic; the
/// last four are judged by human assessors only.
enum class LevelId {
  syntax_correctness,
  code_similarity,
  grammar_similarity,
  data_mapping,
  mark_correctness,
  axes_quality,
  image_similarity,
  effort,
  color_mapping,
  perceptual_quality,
  visualization_literacy,
  significance,
};

inline constexpr LevelId kAllLevels[] = {
    LevelId::syntax_correctness, LevelId::code_similarity,    LevelId::grammar_similarity,
    LevelId::data_mapping,       LevelId::mark_correctness,   LevelId::axes_quality,
    LevelId::image_similarity,   LevelId::effort,             LevelId::color_mapping,
    LevelId::perceptual_quality, LevelId::visualization_literacy, LevelId::significance,
};

bool is_human_level(LevelId level);

enum class ScoreStatus { computed, skipped, needs_human };

/// Score in [0, 100]. `value` is present exactly when status is computed;
/// skipped scores carry a `reason`.
struct LevelScore {
  LevelId level = LevelId::syntax_correctness;
  std::optional<double> value;
  ScoreStatus status = ScoreStatus::skipped;
  std::optional<std::string> reason;
  Json details = Json::object();

  static LevelScore computed(LevelId level, double value, Json details = Json::object());
  static LevelScore skipped(LevelId level, std::string reason, Json details = Json::object());
  static LevelScore needs_human(LevelId level, Json details = Json::object());

  friend bool operator==(const LevelScore&, const LevelScore&) = default;
};

Json to_json(const LevelScore& score);
LevelScore level_score_from_json(const Json& json);

std::string_view to_string(LevelId level);
std::string_view to_string(ScoreStatus status);
std::optional<LevelId> parse_level_id(std::string_view text);
std::optional<ScoreStatus> parse_score_status(std::string_view text);

}  // namespace evallm
