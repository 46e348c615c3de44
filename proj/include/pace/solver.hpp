#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pace/backend.hpp"
#include "pace/pipeline.hpp"
#include "pace/task.hpp"

namespace pace {

inline constexpr std::size_t kVerifyReasoningChars = 600;
inline constexpr std::string_view kRepairInstruction =
    "The response above violates some constraints. Rewrite so EVERY constraint is satisfied. "
    "Output ONLY the corrected response, then one final line of the form "
    "'SELF-CHECK: k/m constraints satisfied'.";

struct StageRecord {
  StageKind kind = StageKind::Return;
  std::string input_digest;
  std::vector<std::string> outputs;
  std::vector<double> scores;
  std::string note;
};

struct SolverOutcome {
  std::string answer;
  std::vector<StageRecord> trace;
  Usage usage;
  bool extraction_failed = false;
};

// System prompt text: role, requirement list, and the output-format instruction.
std::string build_system_prompt(const PromptConfig& prompt);
std::vector<ChatMessage> build_task_messages(const PromptConfig& prompt, const TaskSample& sample);

// Answer text extracted from a raw reply. Structured replies are read from their "answer"
// field first; on parse failure extraction falls back to the raw text. Empty = failure.
std::string extract_answer(std::string_view raw, ExtractorKind extractor, OutputMode mode, TaskKind task);

// The "reasoning" field of a structured reply, or the raw text.
std::string extract_reasoning(std::string_view raw);

std::string verification_prompt(std::string_view top_answer, std::string_view reasoning);

struct SelfCheckResult {
  double score = 0.0;
  bool parsed = true;
  Usage usage;
};

// Parses "k/m ..." (last occurrence), "all ... satisfied", or "none ... satisfied".
std::optional<double> parse_compliance_fraction(std::string_view reply);

// One judge call that enumerates the task's constraints and scores the candidate.
SelfCheckResult self_check_constraints(const TaskSample& sample, std::string_view candidate, Backend& backend);

enum class RepairDecision { keep_best, take_repair };

// Repairs are accepted when they do not lower the self-check score.
RepairDecision apply_repair_acceptance(double best_score, double repair_score);

// Executes the stage program on one sample. Backend errors propagate.
SolverOutcome run_pipeline(const PromptConfig& prompt, const PipelineConfig& logic, const TaskSample& sample,
                           Backend& backend, int max_output_units = 2048);

}  // namespace pace
