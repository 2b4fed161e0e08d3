// Obtaining generated specs: HTTP endpoint calls or canned replay, plus the
// LLM effort score.
#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "evallm/corpus.hpp"
#include "evallm/spec_model.hpp"

namespace evallm {

enum class Strategy { zero_shot, few_shot, prompt_engineering, chain_of_thought, fine_tuned, from_scratch };

std::string_view to_string(Strategy strategy);
std::optional<Strategy> parse_strategy(std::string_view text);

struct TokenCounts {
  long prompt = 0;
  long completion = 0;
  long total() const { return prompt + completion; }
  friend bool operator==(const TokenCounts&, const TokenCounts&) = default;
};

struct EffortWeights {
  double strategy = 1.0;
  double latency = 0.0;
  double tokens = 0.0;
};

struct EffortConfig {
  EffortWeights weights;
  double latency_ceiling_seconds = 60.0;
  double token_ceiling = 8192.0;
  /// Base effort per strategy, non-decreasing in implementation cost.
  std::map<Strategy, double> strategy_values = {
      {Strategy::zero_shot, 0.1},        {Strategy::prompt_engineering, 0.2}, {Strategy::few_shot, 0.3},
      {Strategy::chain_of_thought, 0.5}, {Strategy::fine_tuned, 0.9},         {Strategy::from_scratch, 1.0},
  };
};

Json to_json(const EffortConfig& config);
EffortConfig effort_config_from_json(const Json& json);

/// Weighted mean of the strategy value, latency / ceiling and tokens /
/// ceiling (both clamped to 1). Missing components drop out and the
/// remaining weights are renormalized. Throws std::invalid_argument on
/// negative inputs or weights that do not sum to 1.
double effort_score(Strategy strategy, std::optional<double> latency_seconds, std::optional<long> total_tokens,
                    const EffortConfig& config = {});

struct GenerationRecord {
  std::string instance_id;
  std::string model_name;
  Strategy strategy = Strategy::zero_shot;
  std::string raw_output;
  ExtractionOutcome extraction;
  double latency_ms = 0;
  std::optional<TokenCounts> token_counts;
  double effort_score = 0;
  std::vector<std::string> notes;
  /// Rendered image of the generated chart, relative to the bundle root.
  std::optional<std::string> image;
};

Json to_json(const GenerationRecord& record);
/// Re-extracts from raw_output; throws std::invalid_argument when the
/// stored extraction status disagrees with a fresh extraction.
GenerationRecord generation_record_from_json(const Json& json);

inline constexpr int kExperimentFormatVersion = 1;

struct ExperimentBundle {
  std::string experiment_id;
  std::string model_name;
  Strategy strategy = Strategy::zero_shot;
  std::string corpus_name;
  std::vector<GenerationRecord> records;
};

Json to_json(const ExperimentBundle& bundle);

struct RecordIssue {
  std::size_t index = 0;
  std::string message;
};

struct BundleParse {
  std::optional<ExperimentBundle> bundle;
  std::vector<RecordIssue> issues;
};

/// Per-record problems are collected; a bundle is returned only when none occur.
BundleParse parse_experiment_bundle(const Json& json);

struct EndpointConfig {
  std::string base_url;  // scheme://host[:port]
  std::string path = "/v1/chat/completions";
  std::string api_key_env = "EVALLM_API_KEY";
  double timeout_seconds = 60.0;
  int max_retries = 2;
  /// Pause before retry k (1-based) is backoff * 2^(k-1), capped at 30 s.
  double retry_backoff_seconds = 0.5;
  /// Request body template; the prompt is written at `prompt_pointer`.
  Json request_template = Json::object();
  std::string prompt_pointer = "/messages/0/content";
  std::string response_pointer = "/choices/0/message/content";
  std::string prompt_tokens_pointer = "/usage/prompt_tokens";
  std::string completion_tokens_pointer = "/usage/completion_tokens";
};

/// Throws std::invalid_argument on timeout <= 0, retries < 0 or bad pointers.
EndpointConfig endpoint_config_from_json(const Json& json);

struct TransportResponse {
  int status = 0;       // HTTP status; 0 when the request never completed
  std::string body;
  std::string error;    // transport-level failure description
};

/// One HTTP POST. Implementations must be safe to call from several threads.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual TransportResponse post(const std::string& base_url, const std::string& path,
                                 const std::map<std::string, std::string>& headers, const std::string& body,
                                 double timeout_seconds) = 0;
};

/// cpp-httplib backed transport.
class HttpTransport final : public Transport {
 public:
  TransportResponse post(const std::string& base_url, const std::string& path,
                         const std::map<std::string, std::string>& headers, const std::string& body,
                         double timeout_seconds) override;
};

struct GenerationSettings {
  std::string model_name;
  Strategy strategy = Strategy::zero_shot;
  PromptTemplate prompt_template = default_prompt_template();
  EffortConfig effort;
};

/// Queries the endpoint with up to max_retries + 1 attempts. Transport
/// failures never throw: the record carries an empty output and a note.
GenerationRecord generate(const BenchmarkInstance& instance, const GenerationSettings& settings,
                          const EndpointConfig& endpoint, Transport& transport);

/// Builds a record from a canned response without any network access.
GenerationRecord replay(const BenchmarkInstance& instance, const GenerationSettings& settings,
                        const std::string& canned_output, double latency_ms = 0,
                        std::optional<TokenCounts> tokens = std::nullopt);

/// Replays `<dir>/<instance id>.txt` for each instance; a missing file is an
/// empty response noted on the record. A sibling `<instance id>.png` becomes
/// the record's image.
std::vector<GenerationRecord> replay_directory(const Corpus& corpus, const GenerationSettings& settings,
                                               const std::filesystem::path& canned_dir);

/// Runs `produce` for every instance on up to `parallelism` threads and
/// returns the records in corpus order.
std::vector<GenerationRecord> generate_batch(const Corpus& corpus, int parallelism,
                                             const std::function<GenerationRecord(const BenchmarkInstance&)>& produce);

}  // namespace evallm
