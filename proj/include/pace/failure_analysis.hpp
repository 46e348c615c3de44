#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pace/backend.hpp"
#include "pace/evaluation.hpp"
#include "pace/solver.hpp"
#include "pace/task.hpp"

namespace pace {

enum class FailureCategory { extraction_runtime, format_constraint, reasoning_content };

inline constexpr std::array<FailureCategory, 3> kAllFailureCategories = {
    FailureCategory::extraction_runtime, FailureCategory::format_constraint, FailureCategory::reasoning_content};

std::string_view to_string(FailureCategory category);

// Admissible structural edit categories.
enum class EditCategory {
  sampling_policy,
  aggregation,
  early_exit,
  verification,
  repair,
  self_check_scoring,
  normalization,
  extraction_hardening,
  hyperparameter,
  deletion,
};

inline constexpr std::array<EditCategory, 10> kAllEditCategories = {
    EditCategory::sampling_policy, EditCategory::aggregation,        EditCategory::early_exit,
    EditCategory::verification,    EditCategory::repair,             EditCategory::self_check_scoring,
    EditCategory::normalization,   EditCategory::extraction_hardening, EditCategory::hyperparameter,
    EditCategory::deletion};

std::string_view to_string(EditCategory category);
std::optional<EditCategory> edit_category_from_string(std::string_view name);

struct FailureRecord {
  std::string sample_id;
  std::string predicted;
  std::string gold;
  FailureCategory category = FailureCategory::reasoning_content;
  std::optional<std::string> diagnosis;
};

struct GuidanceSummary {
  std::array<int, 3> counts{};
  // Categories with at least one failure, most frequent first.
  std::vector<FailureCategory> ranked;
  std::vector<EditCategory> recommended;

  int total() const { return counts[0] + counts[1] + counts[2]; }
  int count(FailureCategory c) const { return counts[static_cast<std::size_t>(c)]; }
};

nlohmann::ordered_json to_json(const GuidanceSummary& summary);

// Throws ContractViolation when the sample passed.
FailureCategory classify_failure(const SolverOutcome& outcome, const ScoreResult& score);

// Failure records for every non-passing sample of an evaluation pass.
std::vector<FailureRecord> collect_failures(const EvalResult& eval, std::span<const TaskSample> samples);

// Edit categories suggested for one failure category.
std::vector<EditCategory> recommended_edits(FailureCategory category);

GuidanceSummary summarize_failures(std::span<const FailureRecord> records);

inline constexpr int kDiagnosisOutputUnits = 200;

// One root-cause call per failure. No-op on backends that do not support diagnoses.
// Backend errors leave the diagnosis unset.
Usage diagnose_failures(std::vector<FailureRecord>& records, std::span<const TaskSample> samples, Backend& backend);

}  // namespace pace
