#include <gtest/gtest.h>

#include "evallm/metrics_representation.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace evallm;
using testing_support::spec;

namespace {

const char* kRankCount =
    R"({"mark":"bar","encoding":{"x":{"field":"rank","type":"nominal"},"y":{"field":"count","type":"quantitative"}}})";

}  // namespace

TEST(DataMapping, FullMatch) {
  auto gt = spec(kRankCount);
  auto report = data_mapping(gt, gt);
  EXPECT_EQ(report.score, 100.0);
  EXPECT_EQ(report.pcmf1, 1.0);
  EXPECT_EQ(report.total_keys, 4);
}

TEST(DataMapping, WrongYField) {
  auto gen = spec(R"({"mark":"bar","encoding":{"x":{"field":"rank","type":"nominal"},"y":{"field":"salary","type":"quantitative"}}})");
  auto report = data_mapping(spec(kRankCount), gen);
  EXPECT_EQ(report.total_keys, 4);
  EXPECT_EQ(report.matched_keys, 3);
  EXPECT_DOUBLE_EQ(report.score, 75.0);
  int unmatched = 0;
  for (const auto& m : report.per_channel) {
    if (!m.matched) {
      ++unmatched;
      EXPECT_EQ(m.channel, Channel::y);
      EXPECT_EQ(m.property, DataProperty::field);
      EXPECT_EQ(m.gen_value, "salary");
    }
  }
  EXPECT_EQ(unmatched, 1);
  // x: F1 1; y: one of two properties on each side, F1 0.5.
  EXPECT_DOUBLE_EQ(report.pcmf1, 0.75);
}

TEST(DataMapping, EmptyGeneratedEncodings) {
  VisSpec gen = spec(R"({"mark":"bar","encoding":{}})");
  auto report = data_mapping(spec(kRankCount), gen);
  EXPECT_EQ(report.score, 0.0);
  EXPECT_EQ(report.matched_keys, 0);
  EXPECT_EQ(report.pcmf1, 0.0);
}

TEST(DataMapping, GroundTruthWithoutEncodingsThrows) {
  VisSpec gt = spec(R"({"mark":"bar","encoding":{}})");
  EXPECT_THROW(data_mapping(gt, spec(kRankCount)), std::invalid_argument);
}

TEST(DataMapping, CountMatchesRegardlessOfField) {
  auto gt = spec(R"({"mark":"bar","encoding":{"x":{"field":"rank","type":"nominal"},"y":{"aggregate":"count","type":"quantitative"}}})");
  auto gen = spec(R"({"mark":"bar","encoding":{"x":{"field":"rank","type":"nominal"},"y":{"aggregate":"count","field":"rank","type":"quantitative"}}})");
  EXPECT_EQ(data_mapping(gt, gen).score, 100.0);
  auto gt_field = spec(R"({"mark":"bar","encoding":{"x":{"field":"rank","type":"nominal"},"y":{"aggregate":"count","field":"id","type":"quantitative"}}})");
  EXPECT_EQ(data_mapping(gt_field, gt).score, 100.0);
}

TEST(DataMapping, ExtraChannelBreaksFullMatch) {
  auto gen = spec(R"({"mark":"bar","encoding":{"x":{"field":"rank","type":"nominal"},"y":{"field":"count","type":"quantitative"},"color":{"field":"dept","type":"nominal"}}})");
  auto report = data_mapping(spec(kRankCount), gen);
  EXPECT_EQ(report.total_keys, 5);
  EXPECT_EQ(report.matched_keys, 4);
  EXPECT_DOUBLE_EQ(report.score, 80.0);
  ASSERT_EQ(report.extra_channels.size(), 1u);
  EXPECT_EQ(report.extra_channels[0], Channel::color);
  // size is not a candidate for extra keys
  auto sized = spec(R"({"mark":"bar","encoding":{"x":{"field":"rank","type":"nominal"},"y":{"field":"count","type":"quantitative"},"size":{"field":"dept","type":"nominal"}}})");
  EXPECT_EQ(data_mapping(spec(kRankCount), sized).score, 100.0);
}

TEST(DataMapping, ChannelStrictUnlessSwapAllowed) {
  auto gen = spec(R"({"mark":"bar","encoding":{"y":{"field":"rank","type":"nominal"},"x":{"field":"count","type":"quantitative"}}})");
  auto strict = data_mapping(spec(kRankCount), gen);
  EXPECT_EQ(strict.matched_keys, 0);
  EXPECT_FALSE(strict.axis_swapped);
  DataMappingOptions options;
  options.allow_axis_swap = true;
  auto swapped = data_mapping(spec(kRankCount), gen, options);
  EXPECT_EQ(swapped.score, 100.0);
  EXPECT_TRUE(swapped.axis_swapped);
}

TEST(DataMapping, HallucinatedFieldsFlaggedOnly) {
  auto gen = spec(R"({"mark":"bar","encoding":{"x":{"field":"rank","type":"nominal"},"y":{"field":"salary","type":"quantitative"}}})");
  DataMappingOptions options;
  options.dataset_columns = std::vector<std::string>{"rank", "count"};
  auto report = data_mapping(spec(kRankCount), gen, options);
  ASSERT_EQ(report.hallucinated_fields.size(), 1u);
  EXPECT_EQ(report.hallucinated_fields[0], "salary");
  EXPECT_DOUBLE_EQ(report.score, 75.0);
  auto json = to_json(report);
  EXPECT_EQ(json["hallucination_candidates"][0], "salary");
}

TEST(DataMapping, MatchesRecountOnCraftedPairs) {
  for (const auto& [gt_text, gen_text] : testing_support::crafted_pairs()) {
    auto gt = spec(gt_text);
    auto gen = spec(gen_text);
    auto expected = oracle::mapping_count(Json::parse(gt_text), Json::parse(gen_text));
    auto report = data_mapping(gt, gen);
    EXPECT_EQ(report.total_keys, expected.total) << gt_text << "\n" << gen_text;
    EXPECT_EQ(report.matched_keys, expected.matched) << gt_text << "\n" << gen_text;
    EXPECT_NEAR(report.score, expected.score(), 1e-12);
    EXPECT_GE(report.pcmf1, 0.0);
    EXPECT_LE(report.pcmf1, 1.0);
  }
}

TEST(DataMapping, LevelScoreCarriesReport) {
  auto score = data_mapping_score(data_mapping(spec(kRankCount), spec(kRankCount)));
  EXPECT_EQ(score.level, LevelId::data_mapping);
  EXPECT_EQ(score.value, 100.0);
  EXPECT_EQ(score.details["total_keys"], 4);
}

TEST(Mark, Examples) {
  auto bar = spec(R"({"mark":"bar","encoding":{"x":{"field":"a","type":"nominal"}}})");
  auto line = spec(R"({"mark":"line","encoding":{"x":{"field":"a","type":"nominal"}}})");
  auto pie = spec(R"({"mark":"pie","encoding":{"x":{"field":"a","type":"nominal"}}})");
  auto arc = spec(R"({"mark":"arc","encoding":{"x":{"field":"a","type":"nominal"}}})");
  EXPECT_EQ(mark_correctness(bar, bar).value, 100.0);
  EXPECT_EQ(mark_correctness(bar, line).value, 0.0);
  EXPECT_EQ(mark_correctness(pie, arc).value, 100.0);
  EXPECT_EQ(mark_correctness(bar, line).details["gen_mark"], "line");
}

TEST(Mark, OtherComparesRawCaseInsensitively) {
  EXPECT_TRUE(marks_equal(normalize_mark("Sankey").mark, normalize_mark("sankey").mark));
  EXPECT_FALSE(marks_equal(normalize_mark("sankey").mark, normalize_mark("chord").mark));
}

TEST(Mark, SymmetricAndMatchesOracle) {
  for (const auto& [gt_text, gen_text] : testing_support::crafted_pairs()) {
    auto gt = spec(gt_text);
    auto gen = spec(gen_text);
    const bool same = oracle::mark_family(Json::parse(gt_text)["mark"]) == oracle::mark_family(Json::parse(gen_text)["mark"]);
    EXPECT_EQ(*mark_correctness(gt, gen).value, same ? 100.0 : 0.0) << gt_text << "\n" << gen_text;
    EXPECT_EQ(mark_correctness(gt, gen).value, mark_correctness(gen, gt).value);
  }
}

TEST(Axes, MissedOrdering) {
  auto gt = spec(R"({"mark":"bar","encoding":{"x":{"field":"a","type":"nominal"},"y":{"field":"b","type":"quantitative","sort":"ascending"}}})");
  auto gen = spec(R"({"mark":"bar","encoding":{"x":{"field":"a","type":"nominal"},"y":{"field":"b","type":"quantitative"}}})");
  auto score = axes_quality(gt, gen);
  EXPECT_EQ(score.status, ScoreStatus::needs_human);
  EXPECT_EQ(score.details["compared"], 1);
  EXPECT_EQ(score.details["matched"], 0);
  EXPECT_EQ(score.details["automatic_score"], 0.0);
}

TEST(Axes, IdenticalPropertiesComputed) {
  auto gt = spec(R"({"mark":"bar","encoding":{"x":{"field":"a","type":"nominal","sort":"-y","axis":{"title":"A"}},"y":{"field":"b","type":"quantitative","scale":{"type":"log"}}}})");
  auto score = axes_quality(gt, gt);
  EXPECT_EQ(score.status, ScoreStatus::computed);
  EXPECT_EQ(score.value, 100.0);
}

TEST(Axes, NothingComparable) {
  auto gt = spec(kRankCount);
  auto score = axes_quality(gt, gt);
  EXPECT_EQ(score.status, ScoreStatus::needs_human);
  EXPECT_EQ(score.details["note"], "nothing strictly comparable");
}
