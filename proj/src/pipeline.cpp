#include "evallm/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <map>
#include <sstream>

#include "evallm/image_similarity.hpp"
#include "evallm/metrics_representation.hpp"
#include "parallel.hpp"

namespace evallm {

namespace fs = std::filesystem;

namespace {

constexpr const char* kGatedReason = "syntax failed; downstream levels disabled";

constexpr LevelId kGatedLevels[] = {LevelId::code_similarity, LevelId::grammar_similarity, LevelId::data_mapping,
                                    LevelId::mark_correctness, LevelId::axes_quality, LevelId::image_similarity};

fs::path resolve(const fs::path& root, const std::string& relative) {
  const fs::path path(relative);
  return path.is_absolute() || root.empty() ? path : root / path;
}

LevelScore image_level(const BenchmarkInstance& instance, const GenerationRecord& record,
                       const EvaluationContext& context) {
  if (!instance.ground_truth_image || !record.image) {
    return LevelScore::skipped(LevelId::image_similarity, "images unavailable",
                               {{"gt_image", instance.ground_truth_image.has_value()},
                                {"gen_image", record.image.has_value()}});
  }
  const GrayImage gt = load_gray(resolve(context.corpus_root, *instance.ground_truth_image));
  const GrayImage gen = load_gray(resolve(context.bundle_root, *record.image));
  return ssim_score(gt, gen);
}

LevelScore effort_level(const GenerationRecord& record, const EffortConfig& config) {
  const std::optional<long> tokens =
      record.token_counts ? std::optional<long>(record.token_counts->total()) : std::nullopt;
  const double score = effort_score(record.strategy, record.latency_ms / 1000.0, tokens, config);
  Json details = {{"strategy", to_string(record.strategy)},
                  {"latency_ms", record.latency_ms},
                  {"tokens", tokens ? Json(*tokens) : Json(nullptr)},
                  {"effort_score", score}};
  return LevelScore::computed(LevelId::effort, 100.0 * score, std::move(details));
}

}  // namespace

Json to_json(const PipelineConfig& config) {
  Json levels = Json::object();
  for (LevelId level : kAllLevels) levels[std::string(to_string(level))] = config.levels.contains(level);
  Json renderer = nullptr;
  if (config.renderer) renderer = {{"command", config.renderer->command_template}};
  return {{"format_version", kPipelineConfigVersion}, {"levels", levels},
          {"renderer", renderer},                     {"allow_axis_swap", config.allow_axis_swap},
          {"effort", to_json(config.effort)},         {"quorum", config.quorum},
          {"record_timings", config.record_timings}};
}

PipelineConfig pipeline_config_from_json(const Json& json) {
  if (!json.is_object()) throw ConfigError("pipeline config must be a JSON object");
  PipelineConfig config;
  try {
    if (json.value("format_version", kPipelineConfigVersion) > kPipelineConfigVersion) {
      throw ConfigError("unsupported pipeline config format_version");
    }
    if (auto levels = json.find("levels"); levels != json.end()) {
      for (const auto& [name, enabled] : levels->items()) {
        const auto level = parse_level_id(name);
        if (!level) throw ConfigError("unknown level '" + name + "' in config");
        if (enabled.get<bool>()) {
          config.levels.insert(*level);
        } else {
          config.levels.erase(*level);
        }
      }
    }
    config.levels.insert(LevelId::syntax_correctness);
    if (auto renderer = json.find("renderer"); renderer != json.end() && !renderer->is_null()) {
      config.renderer = RendererHook{renderer->at("command").get<std::string>()};
    }
    config.allow_axis_swap = json.value("allow_axis_swap", false);
    if (auto effort = json.find("effort"); effort != json.end()) config.effort = effort_config_from_json(*effort);
    config.quorum = json.value("quorum", config.quorum);
    if (config.quorum < 1) throw ConfigError("quorum must be >= 1");
    config.record_timings = json.value("record_timings", false);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("malformed pipeline config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("malformed pipeline config: ") + e.what());
  }
  return config;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read pipeline config: " + path.string());
  Json json = Json::parse(in, nullptr, false);
  if (json.is_discarded()) throw ConfigError("pipeline config is not valid JSON: " + path.string());
  return pipeline_config_from_json(json);
}

const LevelScore* EvaluationResult::score(LevelId level) const {
  auto it = scores.find(level);
  return it == scores.end() ? nullptr : &it->second;
}

Json to_json(const EvaluationResult& result) {
  Json scores = Json::object();
  for (const auto& [level, score] : result.scores) scores[std::string(to_string(level))] = to_json(score);
  Json json = {{"instance_id", result.instance_id},
               {"experiment_id", result.experiment_id},
               {"scores", scores},
               {"generated_spec", result.generated_spec ? result.generated_spec->raw_json : Json(nullptr)}};
  if (!result.timings_ms.empty()) {
    Json timings = Json::object();
    for (const auto& [level, ms] : result.timings_ms) timings[std::string(to_string(level))] = ms;
    json["timings_ms"] = timings;
  }
  return json;
}

EvaluationResult evaluation_result_from_json(const Json& json) {
  EvaluationResult result;
  result.instance_id = json.at("instance_id").get<std::string>();
  result.experiment_id = json.at("experiment_id").get<std::string>();
  for (const auto& [name, score] : json.at("scores").items()) {
    LevelScore parsed = level_score_from_json(score);
    result.scores.emplace(parsed.level, std::move(parsed));
  }
  if (const auto& spec = json.value("generated_spec", Json(nullptr)); !spec.is_null()) {
    auto normalized = normalize_spec(spec);
    if (normalized.ok()) result.generated_spec = std::move(*normalized.spec);
  }
  if (auto timings = json.find("timings_ms"); timings != json.end()) {
    for (const auto& [name, ms] : timings->items()) {
      if (auto level = parse_level_id(name)) result.timings_ms[*level] = ms.get<double>();
    }
  }
  return result;
}

EvaluationResult evaluate_instance(const BenchmarkInstance& instance, const GenerationRecord& record,
                                   const std::string& experiment_id, const PipelineConfig& config,
                                   const EvaluationContext& context) {
  EvaluationResult result;
  result.instance_id = instance.id;
  result.experiment_id = experiment_id;
  if (record.extraction.ok()) result.generated_spec = record.extraction.spec;

  auto run = [&](LevelId level, auto&& compute) {
    if (!config.levels.contains(level)) return;
    const auto start = std::chrono::steady_clock::now();
    LevelScore score;
    try {
      score = compute();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      score = LevelScore::skipped(level, "metric error", {{"error", e.what()}});
    }
    if (config.record_timings) {
      result.timings_ms[level] =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    }
    result.scores.insert_or_assign(level, std::move(score));
  };

  run(LevelId::syntax_correctness, [&] { return syntax_correctness(record.extraction, config.renderer); });
  const bool passed = result.scores.at(LevelId::syntax_correctness).value == 100.0;

  if (passed) {
    const VisSpec& gt = instance.ground_truth;
    const VisSpec& gen = *record.extraction.spec;
    run(LevelId::code_similarity, [&] { return code_similarity(gt, gen); });
    run(LevelId::grammar_similarity, [&] { return grammar_similarity(gt, gen); });
    run(LevelId::data_mapping, [&] {
      DataMappingOptions options;
      options.allow_axis_swap = config.allow_axis_swap;
      options.dataset_columns = instance.dataset.column_names();
      return data_mapping_score(data_mapping(gt, gen, options));
    });
    run(LevelId::mark_correctness, [&] { return mark_correctness(gt, gen); });
    run(LevelId::axes_quality, [&] { return axes_quality(gt, gen); });
    run(LevelId::image_similarity, [&] { return image_level(instance, record, context); });
  } else {
    for (LevelId level : kGatedLevels) run(level, [&] { return LevelScore::skipped(level, kGatedReason); });
  }

  run(LevelId::effort, [&] { return effort_level(record, config.effort); });

  for (LevelId level : kAllLevels) {
    if (!is_human_level(level)) continue;
    run(level, [&] {
      Json details = {{"gated", !passed}};
      if (!passed) details["note"] = "syntax failed; nothing rendered to judge";
      return LevelScore::needs_human(level, std::move(details));
    });
  }
  return result;
}

ExperimentEvaluation evaluate_experiment(const Corpus& corpus, const std::vector<GenerationRecord>& records,
                                         const std::string& experiment_id, const PipelineConfig& config,
                                         int parallelism, const EvaluationContext& context) {
  ExperimentEvaluation evaluation;
  std::map<std::string, const GenerationRecord*> by_instance;
  for (const auto& record : records) {
    if (!corpus.find(record.instance_id)) {
      evaluation.issues.push_back({record.instance_id, "orphan_record", "record has no matching corpus instance"});
      continue;
    }
    if (!by_instance.emplace(record.instance_id, &record).second) {
      evaluation.issues.push_back({record.instance_id, "duplicate_record", "more than one record for instance"});
    }
  }

  std::vector<std::pair<const BenchmarkInstance*, const GenerationRecord*>> jobs;
  for (const auto& instance : corpus.instances) {
    if (auto it = by_instance.find(instance.id); it != by_instance.end()) jobs.emplace_back(&instance, it->second);
  }
  evaluation.results.resize(jobs.size());
  detail::parallel_for(jobs.size(), parallelism, [&](std::size_t i) {
    evaluation.results[i] = evaluate_instance(*jobs[i].first, *jobs[i].second, experiment_id, config, context);
  });
  return evaluation;
}

std::string results_to_jsonl(const std::vector<EvaluationResult>& results) {
  std::string out;
  for (const auto& result : results) {
    out += canonical_json(to_json(result));
    out += '\n';
  }
  return out;
}

std::vector<EvaluationResult> results_from_jsonl(std::string_view text) {
  std::vector<EvaluationResult> results;
  std::size_t start = 0;
  while (start < text.size()) {
    const std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) break;  // incomplete trailing line
    const std::string_view line = text.substr(start, end - start);
    if (!line.empty()) results.push_back(evaluation_result_from_json(Json::parse(line)));
    start = end + 1;
  }
  return results;
}

}  // namespace evallm
