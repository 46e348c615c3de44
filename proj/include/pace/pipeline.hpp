#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "pace/backend.hpp"

namespace pace {

// The prompt half of an agent.
struct PromptConfig {
  std::string role = "You are a careful assistant. Solve the task and state your final answer clearly.";
  std::vector<std::string> requirements;
  double temperature = 0.2;
  OutputMode output_mode = OutputMode::free_text;

  bool operator==(const PromptConfig&) const = default;
};

nlohmann::ordered_json to_json(const PromptConfig& prompt);
// Throws ConfigError on a missing or mistyped field.
PromptConfig prompt_from_json(const nlohmann::json& j);

// Stage program for the control-logic half of an agent.

enum class StageKind { Sample, Extract, Normalize, Aggregate, EarlyExit, Verify, SelfCheckScore, Repair, Return };

std::string_view to_string(StageKind kind);
std::optional<StageKind> stage_kind_from_string(std::string_view name);

enum class ExtractorKind { task_default, letter, numeric, span, text };
enum class NormalizerKind { numeric, span, trim };
enum class AggregateRule { majority_vote, argmax_score };
enum class EarlyExitRule { consensus_at_least, score_equals };
enum class RepairAcceptRule { score_not_worse };

struct SampleParams {
  int n = 1;
  double temperature_floor = 0.0;
  bool operator==(const SampleParams&) const = default;
};
struct ExtractParams {
  ExtractorKind extractor = ExtractorKind::task_default;
  bool operator==(const ExtractParams&) const = default;
};
struct NormalizeParams {
  std::vector<NormalizerKind> chain;
  bool operator==(const NormalizeParams&) const = default;
};
struct AggregateParams {
  AggregateRule rule = AggregateRule::majority_vote;
  bool operator==(const AggregateParams&) const = default;
};
struct EarlyExitParams {
  EarlyExitRule rule = EarlyExitRule::consensus_at_least;
  // Vote count for consensus_at_least, score level for score_equals.
  double threshold = 2.0;
  bool operator==(const EarlyExitParams&) const = default;
};
struct VerifyParams {
  double temperature = 0.0;
  bool operator==(const VerifyParams&) const = default;
};
struct SelfCheckParams {
  bool operator==(const SelfCheckParams&) const = default;
};
struct RepairParams {
  double temperature = 0.0;
  RepairAcceptRule accept_rule = RepairAcceptRule::score_not_worse;
  bool operator==(const RepairParams&) const = default;
};
struct ReturnParams {
  bool operator==(const ReturnParams&) const = default;
};

// Alternative order matches StageKind.
using StageParams = std::variant<SampleParams, ExtractParams, NormalizeParams, AggregateParams, EarlyExitParams,
                                 VerifyParams, SelfCheckParams, RepairParams, ReturnParams>;

struct PipelineStage {
  StageParams params;
  // Wall-clock delay requested by the stage. Any positive value is a validation violation.
  double delay_ms = 0.0;

  StageKind kind() const { return static_cast<StageKind>(params.index()); }
  bool operator==(const PipelineStage&) const = default;
};

inline constexpr std::size_t kMaxStages = 12;

struct PipelineConfig {
  std::vector<PipelineStage> stages;
  // Overrides applied at run time: sample_n, temperature_floor, consensus_threshold,
  // score_threshold, verify_temperature, repair_temperature.
  std::map<std::string, double> hyperparameters;
  // Safety blacklist; stage kinds named here may not appear in `stages`.
  std::vector<std::string> disallowed_stage_kinds;

  bool operator==(const PipelineConfig&) const = default;
};

inline constexpr int kPipelineSchemaVersion = 1;

nlohmann::ordered_json to_json(const PipelineConfig& logic);
// Throws ConfigError for unknown stage kinds (the generation primitive is not a stage and
// cannot be named), unknown enum values, or mistyped fields.
PipelineConfig pipeline_from_json(const nlohmann::json& j);

// Every violated structural invariant; empty means the program is well formed.
std::vector<std::string> validate_pipeline(const PipelineConfig& logic);

// Reference programs: "vanilla", "self_consistency_verify", "score_and_repair".
std::map<std::string, PipelineConfig> canonical_pipelines();
PipelineConfig canonical_pipeline(const std::string& name);

// Stable digest of a serialized config, used for caching and provenance.
std::string config_digest(const PromptConfig& prompt);
std::string config_digest(const PipelineConfig& logic);

struct AgentConfig {
  PromptConfig prompt;
  PipelineConfig logic;

  bool operator==(const AgentConfig&) const = default;
};

nlohmann::ordered_json to_json(const AgentConfig& agent);
AgentConfig agent_from_json(const nlohmann::json& j);
std::string config_digest(const AgentConfig& agent);

}  // namespace pace
