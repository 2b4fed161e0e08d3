#pragma once

#include <atomic>
#include <fstream>
#include <sstream>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>
#include <utility>
#include <vector>

#include "evallm/spec_model.hpp"

namespace testing_support {

using evallm::Json;

inline std::filesystem::path fixtures() { return EVALLM_FIXTURES; }

inline Json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::stringstream text;
  text << in.rdbuf();
  return Json::parse(text.str());
}

inline evallm::VisSpec spec(const std::string& text) {
  auto outcome = evallm::normalize_spec(Json::parse(text));
  if (!outcome.spec) throw std::runtime_error("fixture spec did not normalize: " + text);
  return *outcome.spec;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("evallm-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter.fetch_add(1)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Ground truth / generation pairs covering matches, near misses, synonyms,
// aggregates, extra channels and structural differences.
inline std::vector<std::pair<std::string, std::string>> crafted_pairs() {
  return {
      {R"({"mark":"bar","encoding":{"x":{"field":"rank","type":"nominal"},"y":{"field":"count","type":"quantitative"}}})",
       R"({"mark":"bar","encoding":{"x":{"field":"rank","type":"nominal"},"y":{"field":"count","type":"quantitative"}}})"},
      {R"({"mark":"bar","encoding":{"x":{"field":"rank","type":"nominal"},"y":{"field":"count","type":"quantitative"}}})",
       R"({"mark":"bar","encoding":{"x":{"field":"rank","type":"nominal"},"y":{"field":"salary","type":"quantitative"}}})"},
      {R"({"mark":"bar","encoding":{"x":{"field":"rank","type":"nominal"},"y":{"field":"count","type":"quantitative"}}})",
       R"({"mark":"line","encoding":{"x":{"field":"rank","type":"nominal"},"y":{"field":"count","type":"quantitative"}}})"},
      {R"({"mark":"pie","encoding":{"theta":{"field":"n","type":"quantitative"},"color":{"field":"dept","type":"nominal"}}})",
       R"({"mark":"arc","encoding":{"theta":{"field":"n","type":"quantitative"},"color":{"field":"dept","type":"nominal"}}})"},
      {R"({"mark":"point","encoding":{"x":{"field":"a","type":"quantitative"},"y":{"field":"b","type":"quantitative"}}})",
       R"({"mark":"scatter","encoding":{"x":{"field":"b","type":"quantitative"},"y":{"field":"a","type":"quantitative"}}})"},
      {R"({"mark":"bar","encoding":{"x":{"field":"Origin","type":"nominal"},"y":{"field":"Horsepower","type":"quantitative","aggregate":"mean"}}})",
       R"({"mark":"bar","encoding":{"x":{"field":"Origin","type":"nominal"},"y":{"field":"Horsepower","type":"quantitative","aggregate":"sum"}}})"},
      {R"({"mark":"bar","encoding":{"x":{"field":"Origin","type":"nominal"},"y":{"aggregate":"count","type":"quantitative"}}})",
       R"({"mark":"bar","encoding":{"x":{"field":"Origin","type":"nominal"},"y":{"aggregate":"count","field":"Name","type":"quantitative"}}})"},
      {R"({"mark":"bar","encoding":{"x":{"field":"Origin","type":"nominal"},"y":{"field":"Name","aggregate":"count","type":"quantitative"}}})",
       R"({"mark":"bar","encoding":{"x":{"field":"Origin","type":"nominal"},"y":{"aggregate":"count","type":"quantitative"}}})"},
      {R"({"mark":"line","encoding":{"x":{"field":"date","type":"temporal"},"y":{"field":"temp","type":"quantitative"}}})",
       R"({"mark":"line","encoding":{"x":{"field":"date","type":"ordinal"},"y":{"field":"temp","type":"quantitative"}}})"},
      {R"({"mark":"line","encoding":{"x":{"field":"date","type":"temporal"},"y":{"field":"temp","type":"quantitative"}}})",
       R"({"mark":"line","encoding":{"x":{"field":"date","type":"temporal"},"y":{"field":"temp","type":"quantitative"},"color":{"field":"city","type":"nominal"}}})"},
      {R"({"mark":"line","encoding":{"x":{"field":"date","type":"temporal"},"y":{"field":"temp","type":"quantitative"},"color":{"field":"city","type":"nominal"}}})",
       R"({"mark":"line","encoding":{"x":{"field":"date","type":"temporal"},"y":{"field":"temp","type":"quantitative"}}})"},
      {R"({"mark":"area","encoding":{"x":{"field":"year","type":"temporal"},"y":{"field":"sales","type":"quantitative","aggregate":"sum"}}})",
       R"({"mark":"bar","encoding":{"x":{"field":"region","type":"nominal"},"y":{"field":"units","type":"ordinal"}}})"},
      {R"({"mark":"tick","encoding":{"x":{"field":"score","type":"quantitative"},"y":{"field":"class","type":"nominal"}}})",
       R"({"mark":"tick","encoding":{"y":{"field":"score","type":"quantitative"},"x":{"field":"class","type":"nominal"}}})"},
      {R"({"mark":"rect","encoding":{"x":{"field":"a","type":"ordinal"},"y":{"field":"b","type":"ordinal"},"color":{"field":"v","type":"quantitative","aggregate":"mean"}}})",
       R"({"mark":"rect","encoding":{"x":{"field":"a","type":"ordinal"},"y":{"field":"b","type":"ordinal"},"color":{"field":"v","type":"quantitative","aggregate":"mean"}}})"},
      {R"({"mark":"bar","encoding":{"x":{"field":"rank","type":"nominal","sort":"-y"},"y":{"field":"count","type":"quantitative"}}})",
       R"({"mark":"bar","encoding":{"x":{"field":"rank","type":"nominal"},"y":{"field":"count","type":"quantitative"}}})"},
      {R"({"mark":"bar","encoding":{"x":{"field":"rank","type":"nominal"},"y":{"field":"count","type":"quantitative"}},"title":"Counts"})",
       R"({"mark":"bar","encoding":{"x":{"field":"rank","type":"nominal"},"y":{"field":"count","type":"quantitative"}},"width":400,"height":300})"},
      {R"({"mark":"bar","data":{"values":[{"a":1},{"a":2}]},"encoding":{"x":{"field":"a","type":"ordinal"}}})",
       R"({"mark":"bar","data":{"values":[{"b":1}]},"encoding":{"x":{"field":"a","type":"ordinal"}}})"},
      {R"({"mark":"boxplot","encoding":{"x":{"field":"g","type":"nominal"},"y":{"field":"v","type":"quantitative"}}})",
       R"({"mark":"boxplot","encoding":{"x":{"field":"g","type":"nominal"},"y":{"field":"v","type":"quantitative"},"theta":{"field":"w","type":"quantitative"}}})"},
      {R"({"mark":"circle","encoding":{"x":{"field":"h","type":"quantitative"},"y":{"field":"w","type":"quantitative"},"size":{"field":"n","type":"quantitative"}}})",
       R"({"mark":"point","encoding":{"x":{"field":"h","type":"quantitative"},"y":{"field":"w","type":"quantitative"}}})"},
      {R"({"mark":"bar","encoding":{"y":{"field":"Origin","type":"nominal"},"x":{"field":"Horsepower","type":"quantitative","aggregate":"max"}}})",
       R"({"mark":"bar","encoding":{"y":{"field":"origin","type":"nominal"},"x":{"field":"Horsepower","type":"quantitative","aggregate":"max"}}})"},
      {R"({"mark":"line","encoding":{"x":{"field":"t","type":"temporal"},"y":{"field":"v","type":"quantitative","aggregate":"median"}}})",
       R"({"mark":"point","encoding":{"x":{"field":"t","type":"temporal"},"y":{"field":"v","type":"quantitative","aggregate":"min"},"color":{"field":"k","type":"nominal"}}})"},
      {R"({"mark":"bar","encoding":{"x":{"field":"c","type":"nominal"},"y":{"field":"v","type":"quantitative"}}})",
       R"({"mark":"heatmapish","encoding":{"x":{"field":"c","type":"nominal"},"y":{"field":"v","type":"quantitative"}}})"},
  };
}

/// Random text that should never yield a valid spec with encodings.
inline std::string malformed_output(std::mt19937& rng) {
  static const std::vector<std::string> pieces = {
      "Sorry, I cannot help with that.",
      "",
      "{\"mark\": \"bar\", \"encoding\": {\"x\": {\"field\": \"rank\"",
      "{'mark': 'bar', 'encoding': {}}",
      "{\"encoding\":{\"x\":{\"field\":\"a\",\"type\":\"nominal\"}}}",
      "{\"mark\":\"bar\"}",
      "{\"mark\":\"bar\",\"encoding\":{}}",
      "{\"mark\":\"bar\",\"encoding\":{\"x\":{\"field\":\"a\",\"type\":\"banana\"}}}",
      "```json\n{\"mark\": \n```",
      "[1, 2, 3]",
      "Here is a chart: mark=bar, x=rank",
      "}{",
      "```\nnot json\n```",
      "{\"mark\": 42, \"encoding\": {\"x\": {\"field\": \"a\"}}}",
  };
  std::uniform_int_distribution<std::size_t> pick(0, pieces.size() - 1);
  std::uniform_int_distribution<int> coin(0, 2);
  std::string text = pieces[pick(rng)];
  // Wrap in prose or fences some of the time; neither changes validity.
  switch (coin(rng)) {
    case 0:
      return "Answer:\n" + text + "\nHope this helps.";
    case 1:
      return text.empty() ? text : "```json\n" + text + "\n```";
    default:
      return text;
  }
}

}  // namespace testing_support
