#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pace/backend.hpp"
#include "pace/task.hpp"

namespace pace {

// Per-sample behaviour of the surrogate model.
struct SampleProfile {
  TaskKind kind = TaskKind::letter_choice;
  std::string gold;
  std::vector<std::string> distractors;
  double base = 0.5;       // gold probability before prompt-feature bonuses
  double malformed = 0.0;  // probability of an unparseable reply before reductions
};

// Effect of a requirement directive found in the system message.
struct DirectiveEffect {
  std::string directive;
  double accuracy_bonus = 0.0;
  double malformed_reduction = 0.0;
};

struct ProposerEntry {
  double weight = 1.0;
  std::string reply;
};

// A seeded stand-in for a frozen model. Reply quality is a programmed function of the
// sample and of the prompt features present in the request:
//   p_gold      = clamp(base + sum(accuracy_bonus), 0, cap)
//   p_malformed = clamp(malformed - sum(malformed_reduction), 0, 1)
// Each candidate draws from a counter-based stream keyed by (seed, sample id, candidate index),
// so two prompts are compared under common random numbers.
struct Landscape {
  std::map<std::string, SampleProfile> samples;
  std::vector<DirectiveEffect> effects;
  double cap = 1.0;
  // Probability that a self-check judgement is truthful.
  double judge_accuracy = 1.0;
  // Directives offered by reflection replies.
  std::vector<std::string> directive_vocabulary;
  // Weighted canned replies for structural edit proposals.
  std::vector<ProposerEntry> proposer;

  double gold_probability(const SampleProfile& profile, std::string_view system_text) const;
  double malformed_probability(const SampleProfile& profile, std::string_view system_text) const;
};

// Builds a landscape over `samples` from a JSON spec:
// {"base", "cap", "malformed", "judge_accuracy", "distractors": "single" | "all",
//  "effects": [{"directive", "accuracy_bonus", "malformed_reduction"}],
//  "vocabulary": [text], "proposer": [{"weight", "reply" | "category"+"pipeline"}]}
// Per-sample overrides come from metadata keys synthetic_base / synthetic_malformed;
// constrained samples need synthetic_compliant / synthetic_violating texts.
Landscape landscape_from_json(const nlohmann::json& spec, std::span<const TaskSample> samples);

// Text the surrogate emits for an answer in the given output mode.
std::string render_synthetic_answer(const std::string& answer, OutputMode mode);

GenerationResponse generate_synthetic(const Landscape& landscape, const GenerationRequest& request,
                                      std::uint64_t seed, const CostModel& cost = {});

class SyntheticBackend final : public Backend {
 public:
  SyntheticBackend(Landscape landscape, std::uint64_t seed, CostModel cost = {})
      : landscape_(std::move(landscape)), seed_(seed), cost_(cost) {}

  GenerationResponse generate(const GenerationRequest& request) override {
    return generate_synthetic(landscape_, request, seed_, cost_);
  }
  // One-sentence diagnoses from the surrogate carry no signal, so they are skipped.
  bool supports_diagnosis() const override { return false; }

  const Landscape& landscape() const { return landscape_; }

 private:
  Landscape landscape_;
  std::uint64_t seed_;
  CostModel cost_;
};

}  // namespace pace
