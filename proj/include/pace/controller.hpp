#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pace/backend.hpp"
#include "pace/control_evolution.hpp"
#include "pace/evaluation.hpp"
#include "pace/pipeline.hpp"
#include "pace/prompt_evolution.hpp"
#include "pace/task.hpp"
#include "pace/trajectory.hpp"

namespace pace {

// How the saturation threshold is interpreted.
//   prompt_only: structural evolution never triggers.
//   threshold:   saturated iff ΔU_P <= value.
//   bypass:      saturated after the first completed prompt round.
enum class EpsilonMode { prompt_only, threshold, bypass };

struct Epsilon {
  EpsilonMode mode = EpsilonMode::threshold;
  double value = 0.01;

  bool operator==(const Epsilon&) const = default;
};

std::string_view to_string(EpsilonMode mode);
nlohmann::ordered_json to_json(const Epsilon& epsilon);
// Accepts a number (0 = prompt_only, 1.0 = bypass), a mode name, or {"mode", "value"}.
Epsilon epsilon_from_json(const nlohmann::json& j);

// Difference of the last two history entries; nullopt below two entries.
std::optional<double> compute_delta_up(std::span<const double> history);

inline constexpr double kSaturationTolerance = 1e-9;

bool is_saturated(std::optional<double> delta_up, const Epsilon& epsilon, int completed_rounds);

enum class BudgetVerdict { ok, violation };

// Violation iff ledger total + projected exceeds budget; a negative budget means unlimited.
BudgetVerdict enforce_budget(const UsageLedger& ledger, double budget, double projected_cost);

struct CreditSnapshot {
  std::optional<double> delta_up;
  std::optional<double> delta_uc;
  bool saturated = false;
  Epsilon epsilon;
  double delta = 0.02;
};

CreditSnapshot credit_snapshot(const EvolutionState& state, const Epsilon& epsilon, double delta);
nlohmann::ordered_json to_json(const CreditSnapshot& snapshot);

enum class ValidationMode { fresh, fixed };

struct PaceSettings {
  AgentConfig initial;
  Epsilon epsilon;
  double delta = 0.02;
  int K = 20;
  int L = 5;
  // Per-query cost cap applied to prompt candidates and structural commits.
  double budget = kUnlimited;
  // Cumulative units the whole run may spend.
  double evolution_budget = kUnlimited;
  std::size_t minibatch_size = 20;
  CandidateOptions candidates;
  EvalOptions eval;
  double chars_per_unit = 1.0;
  ValidationMode validation_mode = ValidationMode::fresh;
  std::pair<std::size_t, std::size_t> size_range{10, 30};
  std::size_t val_size = 100;
  int proposal_retries = 3;
  std::uint64_t seed = 0;
};

struct PaceResult {
  AgentConfig final_agent;
  EvolutionState state;
  double initial_utility = 0.0;
  double final_utility = 0.0;
  bool stopped_on_budget = false;
  std::vector<std::string> validation_ids;
};

// Fixed validation split drawn from the train pool, and the remainder used for minibatches.
// When the pool cannot hold both, both halves are the whole pool.
struct ValidationSplit {
  std::vector<TaskSample> validation;
  std::vector<TaskSample> search;
};
ValidationSplit split_validation(std::span<const TaskSample> train_pool, std::size_t val_size, std::mt19937_64& rng);

// The two-timescale loop. Every action is appended to `log`.
PaceResult run_pace(const PaceSettings& settings, std::span<const TaskSample> train_pool, Backend& backend,
                    TrajectoryLog& log);

}  // namespace pace
