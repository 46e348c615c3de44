#include "pace/pipeline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

#include "pace/digest.hpp"
#include "pace/errors.hpp"

namespace pace {
namespace {

constexpr std::array<std::string_view, 9> kStageNames = {
    "Sample", "Extract", "Normalize", "Aggregate", "EarlyExit", "Verify", "SelfCheckScore", "Repair", "Return"};

// Names of the generation primitive; a stage can never stand in for it.
constexpr std::array<std::string_view, 5> kImmutableTargets = {"Generate", "CallLLM", "call_llm",
                                                               "action_call_llm", "action_call_json_format_llm"};

std::string_view to_string(ExtractorKind k) {
  switch (k) {
    case ExtractorKind::task_default: return "task_default";
    case ExtractorKind::letter: return "letter";
    case ExtractorKind::numeric: return "numeric";
    case ExtractorKind::span: return "span";
    case ExtractorKind::text: return "text";
  }
  return "task_default";
}

ExtractorKind extractor_from_string(std::string_view s) {
  if (s == "task_default") return ExtractorKind::task_default;
  if (s == "letter") return ExtractorKind::letter;
  if (s == "numeric") return ExtractorKind::numeric;
  if (s == "span") return ExtractorKind::span;
  if (s == "text") return ExtractorKind::text;
  throw ConfigError("unknown extractor '" + std::string(s) + "'");
}

std::string_view to_string(NormalizerKind k) {
  switch (k) {
    case NormalizerKind::numeric: return "numeric";
    case NormalizerKind::span: return "span";
    case NormalizerKind::trim: return "trim";
  }
  return "trim";
}

NormalizerKind normalizer_from_string(std::string_view s) {
  if (s == "numeric") return NormalizerKind::numeric;
  if (s == "span") return NormalizerKind::span;
  if (s == "trim") return NormalizerKind::trim;
  throw ConfigError("unknown normalizer '" + std::string(s) + "'");
}

std::string_view to_string(AggregateRule r) { return r == AggregateRule::majority_vote ? "majority_vote" : "argmax_score"; }

AggregateRule aggregate_from_string(std::string_view s) {
  if (s == "majority_vote") return AggregateRule::majority_vote;
  if (s == "argmax_score") return AggregateRule::argmax_score;
  throw ConfigError("unknown aggregate rule '" + std::string(s) + "'");
}

std::string_view to_string(EarlyExitRule r) {
  return r == EarlyExitRule::consensus_at_least ? "consensus_at_least" : "score_equals";
}

EarlyExitRule early_exit_from_string(std::string_view s) {
  if (s == "consensus_at_least") return EarlyExitRule::consensus_at_least;
  if (s == "score_equals") return EarlyExitRule::score_equals;
  throw ConfigError("unknown early-exit rule '" + std::string(s) + "'");
}

RepairAcceptRule accept_rule_from_string(std::string_view s) {
  if (s == "score_not_worse") return RepairAcceptRule::score_not_worse;
  throw ConfigError("unknown repair accept rule '" + std::string(s) + "'");
}

template <typename T>
T field(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("field '") + key + "' has the wrong type");
  }
}

const std::set<std::string>& known_hyperparameters() {
  static const std::set<std::string> kKeys = {"sample_n",        "temperature_floor",  "consensus_threshold",
                                              "score_threshold", "verify_temperature", "repair_temperature"};
  return kKeys;
}

nlohmann::ordered_json stage_to_json(const PipelineStage& stage) {
  nlohmann::ordered_json j;
  j["kind"] = std::string(to_string(stage.kind()));
  std::visit(
      [&j](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, SampleParams>) {
          j["n"] = p.n;
          j["temperature_floor"] = p.temperature_floor;
        } else if constexpr (std::is_same_v<P, ExtractParams>) {
          j["extractor"] = std::string(to_string(p.extractor));
        } else if constexpr (std::is_same_v<P, NormalizeParams>) {
          j["chain"] = nlohmann::ordered_json::array();
          for (auto k : p.chain) j["chain"].push_back(std::string(to_string(k)));
        } else if constexpr (std::is_same_v<P, AggregateParams>) {
          j["rule"] = std::string(to_string(p.rule));
        } else if constexpr (std::is_same_v<P, EarlyExitParams>) {
          j["rule"] = std::string(to_string(p.rule));
          j["threshold"] = p.threshold;
        } else if constexpr (std::is_same_v<P, VerifyParams>) {
          j["temperature"] = p.temperature;
        } else if constexpr (std::is_same_v<P, RepairParams>) {
          j["temperature"] = p.temperature;
          j["accept_rule"] = "score_not_worse";
        }
      },
      stage.params);
  if (stage.delay_ms != 0.0) j["delay_ms"] = stage.delay_ms;
  return j;
}

PipelineStage stage_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string())
    throw ConfigError("pipeline stage needs a string 'kind'");
  const auto name = j.at("kind").get<std::string>();
  if (std::find(kImmutableTargets.begin(), kImmutableTargets.end(), name) != kImmutableTargets.end())
    throw ConfigError("'" + name + "' is the generation primitive and is not an editable stage");
  const auto kind = stage_kind_from_string(name);
  if (!kind) throw ConfigError("unknown stage kind '" + name + "'");

  PipelineStage stage;
  stage.delay_ms = field<double>(j, "delay_ms", 0.0);
  switch (*kind) {
    case StageKind::Sample:
      stage.params = SampleParams{field<int>(j, "n", 1), field<double>(j, "temperature_floor", 0.0)};
      break;
    case StageKind::Extract:
      stage.params = ExtractParams{extractor_from_string(field<std::string>(j, "extractor", "task_default"))};
      break;
    case StageKind::Normalize: {
      NormalizeParams p;
      for (const auto& n : field<std::vector<std::string>>(j, "chain", {})) p.chain.push_back(normalizer_from_string(n));
      stage.params = p;
      break;
    }
    case StageKind::Aggregate:
      stage.params = AggregateParams{aggregate_from_string(field<std::string>(j, "rule", "majority_vote"))};
      break;
    case StageKind::EarlyExit:
      stage.params = EarlyExitParams{early_exit_from_string(field<std::string>(j, "rule", "consensus_at_least")),
                                     field<double>(j, "threshold", 2.0)};
      break;
    case StageKind::Verify:
      stage.params = VerifyParams{field<double>(j, "temperature", 0.0)};
      break;
    case StageKind::SelfCheckScore:
      stage.params = SelfCheckParams{};
      break;
    case StageKind::Repair:
      stage.params = RepairParams{field<double>(j, "temperature", 0.0),
                                  accept_rule_from_string(field<std::string>(j, "accept_rule", "score_not_worse"))};
      break;
    case StageKind::Return:
      stage.params = ReturnParams{};
      break;
  }
  return stage;
}

bool in_range(double v, double lo, double hi) { return v >= lo && v <= hi; }

}  // namespace

std::string_view to_string(StageKind kind) { return kStageNames[static_cast<std::size_t>(kind)]; }

std::optional<StageKind> stage_kind_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kStageNames.size(); ++i)
    if (kStageNames[i] == name) return static_cast<StageKind>(i);
  return std::nullopt;
}

nlohmann::ordered_json to_json(const PromptConfig& prompt) {
  nlohmann::ordered_json j;
  j["role"] = prompt.role;
  j["requirements"] = prompt.requirements;
  j["temperature"] = prompt.temperature;
  j["output_mode"] = std::string(to_string(prompt.output_mode));
  return j;
}

PromptConfig prompt_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("prompt config must be an object");
  PromptConfig p;
  p.role = field<std::string>(j, "role", p.role);
  p.requirements = field<std::vector<std::string>>(j, "requirements", {});
  p.temperature = field<double>(j, "temperature", p.temperature);
  p.output_mode = output_mode_from_string(field<std::string>(j, "output_mode", "free_text"));
  if (p.temperature < 0.0) throw ConfigError("prompt temperature must be >= 0");
  return p;
}

nlohmann::ordered_json to_json(const PipelineConfig& logic) {
  nlohmann::ordered_json j;
  j["version"] = kPipelineSchemaVersion;
  j["stages"] = nlohmann::ordered_json::array();
  for (const auto& s : logic.stages) j["stages"].push_back(stage_to_json(s));
  j["hyperparameters"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : logic.hyperparameters) j["hyperparameters"][k] = v;
  j["disallowed_stage_kinds"] = logic.disallowed_stage_kinds;
  return j;
}

PipelineConfig pipeline_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("pipeline config must be an object");
  const int version = field<int>(j, "version", kPipelineSchemaVersion);
  if (version != kPipelineSchemaVersion)
    throw ConfigError("unsupported pipeline schema version " + std::to_string(version));
  if (!j.contains("stages") || !j.at("stages").is_array()) throw ConfigError("pipeline config needs a 'stages' array");
  PipelineConfig logic;
  for (const auto& s : j.at("stages")) logic.stages.push_back(stage_from_json(s));
  if (j.contains("hyperparameters")) {
    if (!j.at("hyperparameters").is_object()) throw ConfigError("'hyperparameters' must be an object");
    for (const auto& [k, v] : j.at("hyperparameters").items()) {
      if (!v.is_number()) throw ConfigError("hyperparameter '" + k + "' must be numeric");
      logic.hyperparameters[k] = v.get<double>();
    }
  }
  logic.disallowed_stage_kinds = field<std::vector<std::string>>(j, "disallowed_stage_kinds", {});
  return logic;
}

std::vector<std::string> validate_pipeline(const PipelineConfig& logic) {
  std::vector<std::string> v;
  const auto& stages = logic.stages;
  if (stages.empty()) {
    v.emplace_back("pipeline has no stages");
    v.emplace_back("must end in Return");
    return v;
  }
  if (stages.size() > kMaxStages)
    v.push_back("stage count " + std::to_string(stages.size()) + " exceeds maximum " + std::to_string(kMaxStages));
  if (stages.back().kind() != StageKind::Return) v.emplace_back("must end in Return");

  const auto count = [&](StageKind k) {
    return std::count_if(stages.begin(), stages.end(), [k](const auto& s) { return s.kind() == k; });
  };
  if (count(StageKind::Return) > 1) v.emplace_back("Return may appear only as the last stage");
  const auto samples = count(StageKind::Sample);
  if (samples == 0) v.emplace_back("requires a Sample stage");
  if (samples > 1) v.emplace_back("at most one Sample stage is allowed");
  if (samples >= 1 && stages.front().kind() != StageKind::Sample) v.emplace_back("Sample must be the first stage");

  for (const auto& banned : logic.disallowed_stage_kinds) {
    const auto kind = stage_kind_from_string(banned);
    if (kind && count(*kind) > 0) v.push_back("blacklisted stage kind " + banned);
  }

  int sample_n = 1;
  bool seen_extract = false;
  bool seen_selfcheck = false;
  std::optional<AggregateRule> seen_aggregate;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const auto& s = stages[i];
    const std::string where = "stage " + std::to_string(i) + " (" + std::string(to_string(s.kind())) + ")";
    if (s.delay_ms != 0.0) v.push_back(where + " declares a wall-clock delay");
    std::visit(
        [&](const auto& p) {
          using P = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<P, SampleParams>) {
            sample_n = p.n;
            if (p.n < 1 || p.n > 16) v.push_back(where + ": n must be in [1, 16]");
            if (!in_range(p.temperature_floor, 0.0, 2.0)) v.push_back(where + ": temperature_floor must be in [0, 2]");
          } else if constexpr (std::is_same_v<P, ExtractParams>) {
            seen_extract = true;
          } else if constexpr (std::is_same_v<P, NormalizeParams>) {
            if (p.chain.empty()) v.push_back(where + ": empty normalizer chain");
            if (!seen_extract) v.push_back(where + ": requires a preceding Extract");
          } else if constexpr (std::is_same_v<P, AggregateParams>) {
            if (seen_aggregate) v.push_back(where + ": only one Aggregate stage is allowed");
            if (p.rule == AggregateRule::majority_vote && !seen_extract)
              v.push_back(where + ": majority_vote requires a preceding Extract");
            if (p.rule == AggregateRule::argmax_score && !seen_selfcheck)
              v.push_back(where + ": argmax_score requires a preceding SelfCheckScore");
            seen_aggregate = p.rule;
          } else if constexpr (std::is_same_v<P, EarlyExitParams>) {
            if (p.rule == EarlyExitRule::consensus_at_least) {
              if (seen_aggregate != AggregateRule::majority_vote)
                v.push_back(where + ": consensus_at_least requires a preceding majority_vote Aggregate");
              if (p.threshold < 1.0 || p.threshold != std::floor(p.threshold) || p.threshold > sample_n)
                v.push_back(where + ": consensus threshold must be an integer in [1, n]");
            } else {
              if (seen_aggregate != AggregateRule::argmax_score)
                v.push_back(where + ": score_equals requires a preceding argmax_score Aggregate");
              if (!in_range(p.threshold, 0.0, 1.0)) v.push_back(where + ": score threshold must be in [0, 1]");
            }
          } else if constexpr (std::is_same_v<P, VerifyParams>) {
            if (!in_range(p.temperature, 0.0, 2.0)) v.push_back(where + ": temperature must be in [0, 2]");
            if (!seen_extract) v.push_back(where + ": requires a preceding Extract");
          } else if constexpr (std::is_same_v<P, SelfCheckParams>) {
            seen_selfcheck = true;
          } else if constexpr (std::is_same_v<P, RepairParams>) {
            if (!in_range(p.temperature, 0.0, 2.0)) v.push_back(where + ": temperature must be in [0, 2]");
            if (!seen_selfcheck) v.push_back(where + ": requires a preceding SelfCheckScore");
          }
        },
        s.params);
  }

  for (const auto& [key, value] : logic.hyperparameters) {
    if (!known_hyperparameters().contains(key)) {
      v.push_back("unknown hyperparameter " + key);
      continue;
    }
    const bool ok = key == "sample_n"              ? (value >= 1 && value <= 16 && value == std::floor(value))
                    : key == "consensus_threshold" ? (value >= 1 && value <= 16 && value == std::floor(value))
                    : key == "score_threshold"     ? in_range(value, 0.0, 1.0)
                                                   : in_range(value, 0.0, 2.0);
    if (!ok) v.push_back("hyperparameter " + key + " out of range");
  }
  if (logic.hyperparameters.contains("sample_n") && logic.hyperparameters.contains("consensus_threshold") &&
      logic.hyperparameters.at("consensus_threshold") > logic.hyperparameters.at("sample_n"))
    v.emplace_back("hyperparameter consensus_threshold exceeds sample_n");
  return v;
}

std::map<std::string, PipelineConfig> canonical_pipelines() {
  std::map<std::string, PipelineConfig> out;
  out["vanilla"] = PipelineConfig{{{SampleParams{1, 0.0}}, {ExtractParams{}}, {ReturnParams{}}}, {}, {}};
  out["self_consistency_verify"] = PipelineConfig{{{SampleParams{3, 0.5}},
                                                   {ExtractParams{}},
                                                   {AggregateParams{AggregateRule::majority_vote}},
                                                   {EarlyExitParams{EarlyExitRule::consensus_at_least, 2.0}},
                                                   {VerifyParams{0.0}},
                                                   {ReturnParams{}}},
                                                  {},
                                                  {}};
  out["score_and_repair"] = PipelineConfig{{{SampleParams{3, 0.3}},
                                            {SelfCheckParams{}},
                                            {AggregateParams{AggregateRule::argmax_score}},
                                            {EarlyExitParams{EarlyExitRule::score_equals, 1.0}},
                                            {RepairParams{0.0, RepairAcceptRule::score_not_worse}},
                                            {ReturnParams{}}},
                                           {},
                                           {}};
  return out;
}

PipelineConfig canonical_pipeline(const std::string& name) {
  auto all = canonical_pipelines();
  auto it = all.find(name);
  if (it == all.end()) throw ConfigError("unknown canonical pipeline '" + name + "'");
  return it->second;
}

std::string config_digest(const PromptConfig& prompt) { return digest_hex(to_json(prompt).dump()); }
std::string config_digest(const PipelineConfig& logic) { return digest_hex(to_json(logic).dump()); }
std::string config_digest(const AgentConfig& agent) { return digest_hex(to_json(agent).dump()); }

nlohmann::ordered_json to_json(const AgentConfig& agent) {
  nlohmann::ordered_json j;
  j["prompt"] = to_json(agent.prompt);
  j["logic"] = to_json(agent.logic);
  return j;
}

AgentConfig agent_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("prompt") || !j.contains("logic"))
    throw ConfigError("agent config needs 'prompt' and 'logic'");
  return AgentConfig{prompt_from_json(j.at("prompt")), pipeline_from_json(j.at("logic"))};
}

}  // namespace pace
