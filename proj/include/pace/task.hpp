#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace pace {

class ConstraintChecker;

// Benchmark family a sample belongs to; selects the scorer and the default extractor.
enum class TaskKind { letter_choice, numeric, span, constrained };

std::string_view to_string(TaskKind kind);
TaskKind task_kind_from_string(std::string_view name);

struct TaskSample {
  std::string id;
  TaskKind kind = TaskKind::letter_choice;
  // Named text fields in file order (question, context, prompt, ...).
  std::vector<std::pair<std::string, std::string>> input_fields;
  std::string gold;
  // Constraint specs for constrained tasks; see constraints.hpp for the schema.
  std::vector<nlohmann::json> constraints;
  std::map<std::string, std::string> metadata;
};

struct DatasetSplits {
  std::vector<TaskSample> train_pool;
  std::vector<TaskSample> test_set;
  std::uint64_t seed = 0;
};

struct ScoreResult {
  double utility = 0.0;
  // Fraction of satisfied constraints; only set for constrained tasks.
  std::optional<double> loose;
  // Token-level F1; only set for span tasks.
  std::optional<double> f1;
  bool extraction_failed = false;
  std::vector<std::string> violated_constraints;
};

// The text shown to the model for a sample: a lone field verbatim, otherwise labelled blocks.
std::string render_task(const TaskSample& sample);

ScoreResult score_letter_match(std::string_view prediction, char gold);

// First A-D token (case-insensitive) as an upper-case letter, or nullopt.
std::optional<char> extract_choice_letter(std::string_view text);

std::string normalize_numeric(std::string_view text);
ScoreResult score_numeric_exact(std::string_view prediction, std::string_view gold);

std::string normalize_span(std::string_view text);

struct SpanScore {
  int em = 0;
  double f1 = 0.0;
};
SpanScore score_span_em_f1(std::string_view prediction, std::string_view gold);

ScoreResult score_strict_constraints(std::string_view response,
                                     std::span<const ConstraintChecker* const> checkers);

// pass^k = C(c, k) / C(n, k). Throws std::invalid_argument on a precondition violation.
double pass_k(int successes, int trials, int k);

// Dispatches to the scorer for sample.kind. An empty answer is a scored extraction failure.
ScoreResult score_answer(const TaskSample& sample, std::string_view answer);

// Line-delimited records: {"id", "input_fields": {...}, "gold": text | [constraint...],
// "metadata": {...}, "task"?}. `default_kind` applies when a record has no "task" field.
std::vector<TaskSample> load_dataset(const std::string& path, TaskKind default_kind);
TaskSample sample_from_json(const nlohmann::ordered_json& record, TaskKind default_kind);
nlohmann::ordered_json sample_to_json(const TaskSample& sample);

// Seed-shuffled disjoint split. Throws ConfigError if the pool is too small or ids repeat.
DatasetSplits make_splits(std::vector<TaskSample> samples, std::size_t train_size,
                          std::size_t test_size, std::uint64_t seed);

}  // namespace pace
