#include "evallm/level_score.hpp"

#include <stdexcept>

namespace evallm {

bool is_human_level(LevelId level) {
  switch (level) {
    case LevelId::color_mapping:
    case LevelId::perceptual_quality:
    case LevelId::visualization_literacy:
    case LevelId::significance:
      return true;
    default:
      return false;
  }
}

LevelScore LevelScore::computed(LevelId level, double value, Json details) {
  return LevelScore{level, value, ScoreStatus::computed, std::nullopt, std::move(details)};
}

LevelScore LevelScore::skipped(LevelId level, std::string reason, Json details) {
  return LevelScore{level, std::nullopt, ScoreStatus::skipped, std::move(reason), std::move(details)};
}

LevelScore LevelScore::needs_human(LevelId level, Json details) {
  return LevelScore{level, std::nullopt, ScoreStatus::needs_human, std::nullopt, std::move(details)};
}

Json to_json(const LevelScore& score) {
  Json json = {
      {"level_id", to_string(score.level)},
      {"status", to_string(score.status)},
      {"value", score.value ? Json(*score.value) : Json(nullptr)},
      {"details", score.details},
  };
  if (score.reason) json["reason"] = *score.reason;
  return json;
}

LevelScore level_score_from_json(const Json& json) {
  LevelScore score;
  const auto level = parse_level_id(json.at("level_id").get<std::string>());
  const auto status = parse_score_status(json.at("status").get<std::string>());
  if (!level || !status) throw std::invalid_argument("unknown level_id or status in level score");
  score.level = *level;
  score.status = *status;
  if (const auto& value = json.at("value"); !value.is_null()) score.value = value.get<double>();
  if (auto reason = json.find("reason"); reason != json.end()) score.reason = reason->get<std::string>();
  score.details = json.value("details", Json::object());
  return score;
}

std::string_view to_string(LevelId level) {
  switch (level) {
    case LevelId::syntax_correctness: return "syntax_correctness";
    case LevelId::code_similarity: return "code_similarity";
    case LevelId::grammar_similarity: return "grammar_similarity";
    case LevelId::data_mapping: return "data_mapping";
    case LevelId::mark_correctness: return "mark_correctness";
    case LevelId::axes_quality: return "axes_quality";
    case LevelId::image_similarity: return "image_similarity";
    case LevelId::effort: return "effort";
    case LevelId::color_mapping: return "color_mapping";
    case LevelId::perceptual_quality: return "perceptual_quality";
    case LevelId::visualization_literacy: return "visualization_literacy";
    case LevelId::significance: return "significance";
  }
  return "syntax_correctness";
}

std::string_view to_string(ScoreStatus status) {
  switch (status) {
    case ScoreStatus::computed: return "computed";
    case ScoreStatus::skipped: return "skipped";
    case ScoreStatus::needs_human: return "needs_human";
  }
  return "skipped";
}

std::optional<LevelId> parse_level_id(std::string_view text) {
  for (LevelId level : kAllLevels) {
    if (to_string(level) == text) return level;
  }
  return std::nullopt;
}

std::optional<ScoreStatus> parse_score_status(std::string_view text) {
  for (ScoreStatus status : {ScoreStatus::computed, ScoreStatus::skipped, ScoreStatus::needs_human}) {
    if (to_string(status) == text) return status;
  }
  return std::nullopt;
}

}  // namespace evallm
