#include "evallm/report.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>
#include <tuple>

namespace evallm {

namespace {

Json accuracy_json(const std::optional<Accuracy>& accuracy) {
  if (!accuracy) return nullptr;
  const auto rate = accuracy->rate();
  return {{"correct", accuracy->correct},
          {"denominator", accuracy->denominator},
          {"rate", rate ? Json(*rate) : Json(nullptr)}};
}

std::optional<Accuracy> accuracy_from_json(const Json& json) {
  if (json.is_null()) return std::nullopt;
  return Accuracy{json.at("correct").get<int>(), json.at("denominator").get<int>()};
}

Json optional_number(const std::optional<double>& value) { return value ? Json(*value) : Json(nullptr); }

std::optional<double> optional_number(const Json& json) {
  if (json.is_null()) return std::nullopt;
  return json.get<double>();
}

struct Mean {
  double sum = 0;
  int count = 0;
  void add(double value) {
    sum += value;
    ++count;
  }
  std::optional<double> value() const {
    if (count == 0) return std::nullopt;
    return sum / count;
  }
};

bool computed_equals(const EvaluationResult& result, LevelId level, double expected) {
  const LevelScore* score = result.score(level);
  return score && score->status == ScoreStatus::computed && score->value == expected;
}

std::string format(const char* pattern, auto... args) {
  char buffer[256];
  std::snprintf(buffer, sizeof buffer, pattern, args...);
  return buffer;
}

std::string fraction(const std::optional<Accuracy>& accuracy) {
  if (!accuracy) return "-";
  return std::to_string(accuracy->correct) + "/" + std::to_string(accuracy->denominator);
}

std::string number(const std::optional<double>& value) { return value ? format("%.2f", *value) : "-"; }

std::string pad(std::string text, std::size_t width) {
  if (text.size() < width) text.append(width - text.size(), ' ');
  return text;
}

std::string pad_left(std::string text, std::size_t width) {
  if (text.size() < width) text.insert(0, width - text.size(), ' ');
  return text;
}

}  // namespace

std::optional<double> Accuracy::rate() const {
  if (denominator == 0) return std::nullopt;
  return static_cast<double>(correct) / denominator;
}

bool axis_field_matched(const EvaluationResult& result, Channel channel) {
  const LevelScore* score = result.score(LevelId::data_mapping);
  if (!score || score->status != ScoreStatus::computed) return false;
  const auto per_channel = score->details.find("per_channel");
  if (per_channel == score->details.end()) return false;
  const std::string name(to_string(channel));
  for (const auto& match : *per_channel) {
    if (match.value("channel", "") == name && match.value("property", "") == "field") {
      return match.value("matched", false);
    }
  }
  return false;
}

ModelReport aggregate(const std::string& experiment_id, const std::string& model_name,
                      const std::vector<EvaluationResult>& results, const std::vector<ConsensusResult>& consensus) {
  ModelReport report;
  report.experiment_id = experiment_id;
  report.model_name = model_name;
  report.n_instances = static_cast<int>(results.size());

  int mark = 0;
  int x_field = 0;
  int y_field = 0;
  std::map<LevelId, Mean> valid_means;
  std::map<LevelId, Mean> all_means;
  for (const auto& result : results) {
    if (result.experiment_id != experiment_id) {
      throw std::invalid_argument("result for instance '" + result.instance_id + "' belongs to experiment '" +
                                  result.experiment_id + "', not '" + experiment_id + "'");
    }
    const bool valid = computed_equals(result, LevelId::syntax_correctness, 100.0);
    if (valid) {
      ++report.n_valid;
      mark += computed_equals(result, LevelId::mark_correctness, 100.0) ? 1 : 0;
      x_field += axis_field_matched(result, Channel::x) ? 1 : 0;
      y_field += axis_field_matched(result, Channel::y) ? 1 : 0;
    }
    for (const auto& [level, score] : result.scores) {
      LevelSummary& summary = report.levels[level];
      switch (score.status) {
        case ScoreStatus::computed:
          ++summary.computed;
          all_means[level].add(*score.value);
          if (valid) valid_means[level].add(*score.value);
          break;
        case ScoreStatus::skipped: ++summary.skipped; break;
        case ScoreStatus::needs_human: ++summary.needs_human; break;
      }
    }
  }
  for (auto& [level, summary] : report.levels) {
    summary.mean_valid = valid_means[level].value();
    summary.mean_all = all_means[level].value();
  }

  if (report.n_valid > 0) {
    report.mark_accuracy = Accuracy{mark, report.n_valid};
    report.x_axis_field_accuracy = Accuracy{x_field, report.n_valid};
    report.y_axis_field_accuracy = Accuracy{y_field, report.n_valid};
  }
  if (report.n_instances > 0) {
    report.mark_accuracy_all = Accuracy{mark, report.n_instances};
    report.x_axis_field_accuracy_all = Accuracy{x_field, report.n_instances};
    report.y_axis_field_accuracy_all = Accuracy{y_field, report.n_instances};
  }

  for (LevelId dimension : kRadarDimensions) {
    std::optional<double> value;
    if (dimension == LevelId::syntax_correctness) {
      // Failures count as 0 here instead of being excluded.
      Mean mean;
      for (const auto& result : results) {
        const LevelScore* score = result.score(dimension);
        mean.add(score && score->value ? *score->value : 0.0);
      }
      value = mean.value();
    } else {
      value = valid_means[dimension].value();
    }
    report.radar.push_back({dimension, value});
  }

  for (const auto& entry : consensus) {
    if (!entry.accepted) continue;
    auto& counts =
        entry.target == AnnotationTarget::generated ? report.error_label_counts : report.ground_truth_label_counts;
    ++counts[entry.label_id];
  }
  return report;
}

Json to_json(const ModelReport& report) {
  Json levels = Json::object();
  for (const auto& [level, summary] : report.levels) {
    levels[std::string(to_string(level))] = {{"mean_valid", optional_number(summary.mean_valid)},
                                             {"mean_all", optional_number(summary.mean_all)},
                                             {"computed", summary.computed},
                                             {"skipped", summary.skipped},
                                             {"needs_human", summary.needs_human}};
  }
  Json radar = Json::array();
  for (const auto& point : report.radar) {
    radar.push_back({{"dimension", to_string(point.dimension)}, {"value", optional_number(point.value)}});
  }
  return {{"format_version", kReportFormatVersion},
          {"experiment_id", report.experiment_id},
          {"model_name", report.model_name},
          {"n_instances", report.n_instances},
          {"n_valid", report.n_valid},
          {"mark_accuracy", accuracy_json(report.mark_accuracy)},
          {"x_axis_field_accuracy", accuracy_json(report.x_axis_field_accuracy)},
          {"y_axis_field_accuracy", accuracy_json(report.y_axis_field_accuracy)},
          {"all_instances",
           {{"mark_accuracy", accuracy_json(report.mark_accuracy_all)},
            {"x_axis_field_accuracy", accuracy_json(report.x_axis_field_accuracy_all)},
            {"y_axis_field_accuracy", accuracy_json(report.y_axis_field_accuracy_all)}}},
          {"levels", levels},
          {"error_label_counts", report.error_label_counts},
          {"ground_truth_label_counts", report.ground_truth_label_counts},
          {"radar", radar}};
}

ModelReport model_report_from_json(const Json& json) {
  ModelReport report;
  try {
    if (json.value("format_version", kReportFormatVersion) != kReportFormatVersion) {
      throw std::invalid_argument("unsupported report format_version");
    }
    report.experiment_id = json.at("experiment_id").get<std::string>();
    report.model_name = json.at("model_name").get<std::string>();
    report.n_instances = json.at("n_instances").get<int>();
    report.n_valid = json.at("n_valid").get<int>();
    report.mark_accuracy = accuracy_from_json(json.at("mark_accuracy"));
    report.x_axis_field_accuracy = accuracy_from_json(json.at("x_axis_field_accuracy"));
    report.y_axis_field_accuracy = accuracy_from_json(json.at("y_axis_field_accuracy"));
    const Json& all = json.at("all_instances");
    report.mark_accuracy_all = accuracy_from_json(all.at("mark_accuracy"));
    report.x_axis_field_accuracy_all = accuracy_from_json(all.at("x_axis_field_accuracy"));
    report.y_axis_field_accuracy_all = accuracy_from_json(all.at("y_axis_field_accuracy"));
    for (const auto& [name, summary] : json.at("levels").items()) {
      const auto level = parse_level_id(name);
      if (!level) throw std::invalid_argument("unknown level '" + name + "' in report");
      report.levels[*level] = {optional_number(summary.at("mean_valid")), optional_number(summary.at("mean_all")),
                               summary.at("computed").get<int>(), summary.at("skipped").get<int>(),
                               summary.at("needs_human").get<int>()};
    }
    report.error_label_counts = json.at("error_label_counts").get<std::map<std::string, int>>();
    report.ground_truth_label_counts = json.value("ground_truth_label_counts", std::map<std::string, int>{});
    for (const auto& point : json.at("radar")) {
      const auto level = parse_level_id(point.at("dimension").get<std::string>());
      if (!level) throw std::invalid_argument("unknown radar dimension in report");
      report.radar.push_back({*level, optional_number(point.at("value"))});
    }
  } catch (const Json::exception& e) {
    throw std::invalid_argument(std::string("malformed report: ") + e.what());
  }
  return report;
}

Comparison compare(std::vector<ModelReport> reports) {
  std::stable_sort(reports.begin(), reports.end(), [](const ModelReport& a, const ModelReport& b) {
    return std::tie(a.model_name, a.experiment_id) < std::tie(b.model_name, b.experiment_id);
  });
  return Comparison{std::move(reports)};
}

Json to_json(const Comparison& comparison) {
  Json dimensions = Json::array();
  for (LevelId dimension : kRadarDimensions) dimensions.push_back(to_string(dimension));
  Json rows = Json::array();
  Json series = Json::array();
  for (const auto& report : comparison.reports) {
    Json values = Json::array();
    for (const auto& point : report.radar) values.push_back(optional_number(point.value));
    rows.push_back({{"experiment_id", report.experiment_id},
                    {"model_name", report.model_name},
                    {"n_instances", report.n_instances},
                    {"n_valid", report.n_valid},
                    {"mark_accuracy", accuracy_json(report.mark_accuracy)},
                    {"x_axis_field_accuracy", accuracy_json(report.x_axis_field_accuracy)},
                    {"y_axis_field_accuracy", accuracy_json(report.y_axis_field_accuracy)},
                    {"radar", values}});
    series.push_back({{"experiment_id", report.experiment_id}, {"model_name", report.model_name}, {"values", values}});
  }
  return {{"format_version", kReportFormatVersion}, {"dimensions", dimensions}, {"rows", rows}, {"radar", series}};
}

std::string render_table(const ModelReport& report) {
  std::string out;
  auto line = [&](const std::string& label, const std::string& value) { out += pad(label, 16) + value + "\n"; };
  line("experiment", report.experiment_id);
  line("model", report.model_name);
  line("valid", std::to_string(report.n_valid) + "/" + std::to_string(report.n_instances));
  line("mark", fraction(report.mark_accuracy) + "  (all: " + fraction(report.mark_accuracy_all) + ")");
  line("x field", fraction(report.x_axis_field_accuracy) + "  (all: " + fraction(report.x_axis_field_accuracy_all) + ")");
  line("y field", fraction(report.y_axis_field_accuracy) + "  (all: " + fraction(report.y_axis_field_accuracy_all) + ")");

  out += "\n" + pad("level", 24) + pad_left("mean_valid", 11) + pad_left("mean_all", 10) + pad_left("computed", 10) +
         pad_left("skipped", 9) + pad_left("human", 7) + "\n";
  for (const auto& [level, summary] : report.levels) {
    out += pad(std::string(to_string(level)), 24) + pad_left(number(summary.mean_valid), 11) +
           pad_left(number(summary.mean_all), 10) + pad_left(std::to_string(summary.computed), 10) +
           pad_left(std::to_string(summary.skipped), 9) + pad_left(std::to_string(summary.needs_human), 7) + "\n";
  }

  out += "\nradar\n";
  for (const auto& point : report.radar) {
    out += "  " + pad(std::string(to_string(point.dimension)), 22) + pad_left(number(point.value), 8) + "\n";
  }
  if (!report.error_label_counts.empty()) {
    out += "\nerror labels (accepted)\n";
    for (const auto& [label, count] : report.error_label_counts) {
      out += "  " + pad(label, 30) + pad_left(std::to_string(count), 5) + "\n";
    }
  }
  if (!report.ground_truth_label_counts.empty()) {
    out += "\nground truth labels (accepted)\n";
    for (const auto& [label, count] : report.ground_truth_label_counts) {
      out += "  " + pad(label, 30) + pad_left(std::to_string(count), 5) + "\n";
    }
  }
  return out;
}

std::string render_table(const Comparison& comparison) {
  std::size_t width = 8;
  for (const auto& report : comparison.reports) width = std::max(width, report.model_name.size() + 2);
  std::string out = pad("model", width) + pad_left("valid", 8) + pad_left("mark", 8) + pad_left("x", 8) +
                    pad_left("y", 8);
  for (LevelId dimension : kRadarDimensions) out += pad_left(std::string(to_string(dimension)).substr(0, 10), 12);
  out += "\n";
  for (const auto& report : comparison.reports) {
    out += pad(report.model_name, width) +
           pad_left(std::to_string(report.n_valid) + "/" + std::to_string(report.n_instances), 8) +
           pad_left(fraction(report.mark_accuracy), 8) + pad_left(fraction(report.x_axis_field_accuracy), 8) +
           pad_left(fraction(report.y_axis_field_accuracy), 8);
    for (const auto& point : report.radar) out += pad_left(number(point.value), 12);
    out += "\n";
  }
  return out;
}

}  // namespace evallm
