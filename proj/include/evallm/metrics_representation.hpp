// Representation layer: data mapping, mark correctness, axes quality.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "evallm/level_score.hpp"
#include "evallm/spec_model.hpp"

namespace evallm {

enum class DataProperty { field, dtype, aggregate };

struct ChannelPropertyMatch {
  Channel channel;
  DataProperty property;
  std::optional<std::string> gt_value;
  std::optional<std::string> gen_value;
  bool matched = false;
};

/// Data keys are (channel, property) pairs enumerated from the ground truth,
/// plus one unmatched key for every extra field-carrying positional or color
/// channel the generation adds.
struct DataMappingReport {
  int total_keys = 0;
  int matched_keys = 0;
  std::vector<ChannelPropertyMatch> per_channel;
  std::vector<Channel> extra_channels;
  double score = 0;  // [0, 100]
  double pcmf1 = 0;  // [0, 1]
  bool axis_swapped = false;
  std::vector<std::string> hallucinated_fields;
};

struct DataMappingOptions {
  /// Score the better of gen as-is and gen with x/y exchanged.
  bool allow_axis_swap = false;
  /// Dataset columns; when set, gen fields outside it are flagged.
  std::optional<std::vector<std::string>> dataset_columns;
};

/// Throws std::invalid_argument when the ground truth has no encodings.
DataMappingReport data_mapping(const VisSpec& gt, const VisSpec& gen, const DataMappingOptions& options = {});

Json to_json(const DataMappingReport& report);
LevelScore data_mapping_score(const DataMappingReport& report);

bool marks_equal(const MarkId& a, const MarkId& b);
LevelScore mark_correctness(const VisSpec& gt, const VisSpec& gen);

LevelScore axes_quality(const VisSpec& gt, const VisSpec& gen);

std::string_view to_string(DataProperty property);

}  // namespace evallm
