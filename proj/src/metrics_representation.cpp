#include "evallm/metrics_representation.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include "text_util.hpp"

namespace evallm {

namespace {

using Encodings = std::map<Channel, EncodingDef>;

bool is_extra_candidate(Channel channel) {
  return channel == Channel::x || channel == Channel::y || channel == Channel::color || channel == Channel::theta;
}

std::optional<std::string> aggregate_text(const EncodingDef& encoding) {
  if (!encoding.aggregate) return std::nullopt;
  return std::string(to_string(*encoding.aggregate));
}

std::optional<std::string> field_text(const EncodingDef& encoding) {
  if (encoding.field.empty()) return std::nullopt;
  return encoding.field;
}

DataMappingReport score_mapping(const Encodings& gt, const Encodings& gen) {
  DataMappingReport report;
  double f1_sum = 0;
  for (const auto& [channel, expected] : gt) {
    const auto found = gen.find(channel);
    const EncodingDef* actual = found == gen.end() ? nullptr : &found->second;
    const bool both_count =
        actual && expected.aggregate == Aggregate::count && actual->aggregate == Aggregate::count;

    int channel_keys = 0;
    int channel_matched = 0;
    auto add = [&](DataProperty property, std::optional<std::string> gt_value, std::optional<std::string> gen_value,
                   bool matched) {
      report.per_channel.push_back({channel, property, std::move(gt_value), std::move(gen_value), matched});
      ++channel_keys;
      channel_matched += matched ? 1 : 0;
    };

    if (!expected.field.empty()) {
      const bool matched = actual && (actual->field == expected.field || both_count);
      add(DataProperty::field, expected.field, actual ? field_text(*actual) : std::nullopt, matched);
    }
    add(DataProperty::dtype, std::string(to_string(expected.dtype)),
        actual ? std::optional<std::string>(to_string(actual->dtype)) : std::nullopt,
        actual && actual->dtype == expected.dtype);
    if (expected.aggregate) {
      add(DataProperty::aggregate, aggregate_text(expected), actual ? aggregate_text(*actual) : std::nullopt,
          actual && actual->aggregate == expected.aggregate);
    }

    report.total_keys += channel_keys;
    report.matched_keys += channel_matched;

    if (actual && channel_matched > 0) {
      int gen_properties = 1 + (actual->field.empty() ? 0 : 1) + (actual->aggregate ? 1 : 0);
      if (both_count && !expected.field.empty() && actual->field.empty()) ++gen_properties;
      const double precision = static_cast<double>(channel_matched) / gen_properties;
      const double recall = static_cast<double>(channel_matched) / channel_keys;
      f1_sum += 2.0 * precision * recall / (precision + recall);
    }
  }

  for (const auto& [channel, actual] : gen) {
    if (is_extra_candidate(channel) && !actual.field.empty() && !gt.contains(channel)) {
      report.extra_channels.push_back(channel);
      ++report.total_keys;
    }
  }

  report.pcmf1 = f1_sum / static_cast<double>(gt.size());
  report.score = report.matched_keys == report.total_keys
                     ? 100.0
                     : 100.0 * static_cast<double>(report.matched_keys) / static_cast<double>(report.total_keys);
  return report;
}

std::string bool_text(bool value) { return value ? "true" : "false"; }

}  // namespace

DataMappingReport data_mapping(const VisSpec& gt, const VisSpec& gen, const DataMappingOptions& options) {
  if (gt.encodings.empty()) throw std::invalid_argument("ground truth has no encodings");

  DataMappingReport report = score_mapping(gt.encodings, gen.encodings);
  if (options.allow_axis_swap) {
    Encodings swapped = gen.encodings;
    auto x = swapped.extract(Channel::x);
    auto y = swapped.extract(Channel::y);
    if (x) {
      x.key() = Channel::y;
      swapped.insert(std::move(x));
    }
    if (y) {
      y.key() = Channel::x;
      swapped.insert(std::move(y));
    }
    DataMappingReport alternative = score_mapping(gt.encodings, swapped);
    if (alternative.score > report.score) {
      report = std::move(alternative);
      report.axis_swapped = true;
    }
  }

  if (options.dataset_columns) {
    const auto& columns = *options.dataset_columns;
    for (const auto& [channel, encoding] : gen.encodings) {
      if (encoding.field.empty()) continue;
      if (std::find(columns.begin(), columns.end(), encoding.field) == columns.end()) {
        report.hallucinated_fields.push_back(encoding.field);
      }
    }
  }
  return report;
}

Json to_json(const DataMappingReport& report) {
  Json per_channel = Json::array();
  for (const auto& match : report.per_channel) {
    per_channel.push_back({
        {"channel", to_string(match.channel)},
        {"property", to_string(match.property)},
        {"gt_value", match.gt_value ? Json(*match.gt_value) : Json(nullptr)},
        {"gen_value", match.gen_value ? Json(*match.gen_value) : Json(nullptr)},
        {"matched", match.matched},
    });
  }
  Json extras = Json::array();
  for (Channel channel : report.extra_channels) extras.push_back(to_string(channel));
  return {
      {"total_keys", report.total_keys},
      {"matched_keys", report.matched_keys},
      {"score", report.score},
      {"pcmf1", report.pcmf1},
      {"per_channel", per_channel},
      {"extra_channels", extras},
      {"axis_swapped", report.axis_swapped},
      {"hallucination_candidates", report.hallucinated_fields},
  };
}

LevelScore data_mapping_score(const DataMappingReport& report) {
  return LevelScore::computed(LevelId::data_mapping, report.score, to_json(report));
}

bool marks_equal(const MarkId& a, const MarkId& b) {
  if (a.kind != b.kind) return false;
  if (a.kind != MarkKind::other) return true;
  return detail::ascii_lower(a.raw) == detail::ascii_lower(b.raw);
}

LevelScore mark_correctness(const VisSpec& gt, const VisSpec& gen) {
  Json details = {{"gt_mark", gt.mark.name()}, {"gen_mark", gen.mark.name()}};
  return LevelScore::computed(LevelId::mark_correctness, marks_equal(gt.mark, gen.mark) ? 100.0 : 0.0,
                              std::move(details));
}

LevelScore axes_quality(const VisSpec& gt, const VisSpec& gen) {
  Json comparisons = Json::array();
  int compared = 0;
  int matched = 0;
  auto compare = [&](Channel channel, std::string_view property, const std::string& expected,
                     const std::optional<std::string>& actual) {
    const bool equal = actual && *actual == expected;
    comparisons.push_back({{"channel", to_string(channel)},
                           {"property", property},
                           {"gt_value", expected},
                           {"gen_value", actual ? Json(*actual) : Json(nullptr)},
                           {"matched", equal}});
    ++compared;
    matched += equal ? 1 : 0;
  };

  for (Channel channel : {Channel::x, Channel::y}) {
    const auto expected_it = gt.encodings.find(channel);
    if (expected_it == gt.encodings.end()) continue;
    const EncodingDef& expected = expected_it->second;
    const auto actual_it = gen.encodings.find(channel);
    const EncodingDef* actual = actual_it == gen.encodings.end() ? nullptr : &actual_it->second;

    if (expected.sort && expected.sort->direction) {
      std::optional<std::string> value;
      if (actual && actual->sort && actual->sort->direction) value = std::string(to_string(*actual->sort->direction));
      compare(channel, "sort.direction", std::string(to_string(*expected.sort->direction)), value);
    }
    if (expected.sort && expected.sort->by_channel) {
      std::optional<std::string> value;
      if (actual && actual->sort && actual->sort->by_channel) value = std::string(to_string(*actual->sort->by_channel));
      compare(channel, "sort.by_channel", std::string(to_string(*expected.sort->by_channel)), value);
    }
    if (expected.scale_type) compare(channel, "scale_type", *expected.scale_type, actual ? actual->scale_type : std::nullopt);
    if (expected.axis_title) compare(channel, "axis_title", *expected.axis_title, actual ? actual->axis_title : std::nullopt);
    if (expected.bin) {
      std::optional<std::string> value;
      if (actual && actual->bin) value = bool_text(*actual->bin);
      compare(channel, "bin", bool_text(*expected.bin), value);
    }
  }

  Json details = {{"compared", compared}, {"matched", matched}, {"comparisons", comparisons}};
  if (compared == 0) {
    details["note"] = "nothing strictly comparable";
    details["automatic_score"] = nullptr;
    return LevelScore::needs_human(LevelId::axes_quality, std::move(details));
  }
  const double score = 100.0 * matched / compared;
  details["automatic_score"] = score;
  if (matched < compared) return LevelScore::needs_human(LevelId::axes_quality, std::move(details));
  return LevelScore::computed(LevelId::axes_quality, score, std::move(details));
}

std::string_view to_string(DataProperty property) {
  switch (property) {
    case DataProperty::field: return "field";
    case DataProperty::dtype: return "dtype";
    case DataProperty::aggregate: return "aggregate";
  }
  return "field";
}

}  // namespace evallm
