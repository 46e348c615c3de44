#pragma once

#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pace/backend.hpp"
#include "pace/evaluation.hpp"
#include "pace/failure_analysis.hpp"
#include "pace/pipeline.hpp"
#include "pace/task.hpp"

namespace pace {

struct EditProposal {
  std::optional<EditCategory> category;
  PipelineConfig candidate_logic;
  std::string guidance_digest;
  std::string transcript_digest;
  bool executable = false;
  // Schema violations, parse errors, or the backend failure that voided the proposal.
  std::vector<std::string> violations;
};

nlohmann::ordered_json to_json(const EditProposal& proposal);

// Context carried between proposer calls of one run.
struct ProposerHints {
  int attempt = 1;
  // Why the previous reply in this round was unusable.
  std::vector<std::string> previous_violations;
  // One line per earlier verdict, oldest first.
  std::vector<std::string> past_verdicts;
};

// Versioned proposer prompt: current pipeline, guidance, and the edit-category menu.
inline constexpr int kProposerTemplateVersion = 1;
std::vector<ChatMessage> proposer_messages(const AgentConfig& agent, const GuidanceSummary& guidance,
                                           const ProposerHints& hints = {});

// Parses {"category": <edit category>, "pipeline": {...}}, optionally wrapped in other text.
EditProposal parse_edit_reply(std::string_view reply);

// One proposer call. Backend failures yield a non-executable proposal instead of throwing.
EditProposal propose_edit(const AgentConfig& agent, const GuidanceSummary& guidance, Backend& backend,
                          Usage& usage, const ProposerHints& hints = {});

// Fresh subset with size drawn uniformly from [lo, hi], returned in ascending id order.
// Throws ContractViolation when the range does not fit the pool.
std::vector<std::string> sample_validation_subset(std::span<const TaskSample> train_pool, std::mt19937_64& rng,
                                                  std::pair<std::size_t, std::size_t> size_range);

// Gate threshold sentinel: accept every executable proposal.
inline constexpr double kGateDisabled = -1.0;
inline constexpr double kGateTolerance = 1e-9;

// utility_new > utility_old + delta, strictly; always true for the disabled sentinel.
bool gate_accepts(double utility_old, double utility_new, double delta);

struct SampleDiff {
  std::string id;
  bool old_pass = false;
  bool new_pass = false;
};

struct AbReport {
  std::vector<std::string> subset_ids;
  std::vector<std::string> old_ids;
  std::vector<std::string> new_ids;
  double utility_old = 0.0;
  double utility_new = 0.0;
  double cost_old = 0.0;
  double cost_new = 0.0;
  std::vector<SampleDiff> per_sample_diffs;
  bool accept = false;
  // Set when a backend error zeroed at least one sample.
  bool flagged = false;
  Usage usage;

  double delta() const { return utility_new - utility_old; }
};

nlohmann::ordered_json to_json(const AbReport& report);

// Both variants run on the same samples in the same order.
AbReport ab_compare(const AgentConfig& old_agent, const AgentConfig& new_agent, std::span<const TaskSample> subset,
                    Backend& backend, double delta, const EvalOptions& options = {});

struct ProposalStats {
  int proposed = 0;
  int executable = 0;
  int non_executable = 0;
  int accepted = 0;
  int rejected = 0;
  int rejected_regression = 0;
  int rolled_back = 0;
  int failed_rounds = 0;

  bool operator==(const ProposalStats&) const = default;
};

nlohmann::ordered_json to_json(const ProposalStats& stats);

struct EvolutionState {
  AgentConfig current;
  std::vector<double> utility_history;
  std::optional<double> delta_up;
  std::optional<double> delta_uc;
  bool saturated = false;
  int outer_step = 0;
  int inner_step = 0;
  UsageLedger ledger;
  ProposalStats stats;
  double best_utility = 0.0;
  bool pending_full_eval = false;
  std::optional<double> structure_eval_baseline;
  // Logic to restore if the post-commit evaluation regresses.
  std::optional<PipelineConfig> rollback_logic;
};

// Serialized search state without the statistics and usage counters.
nlohmann::ordered_json state_to_json(const EvolutionState& state);

struct CommitRecord {
  bool accepted = false;
  double delta_on_subset = 0.0;
  bool cost_ok = true;
  std::optional<double> structure_eval_baseline;
  std::string rollback_token;
};

nlohmann::ordered_json to_json(const CommitRecord& record);

// Accepts iff the report recommends it and the candidate's measured per-query cost fits the
// budget. On accept the logic is swapped and a post-commit evaluation becomes pending; on
// reject only the statistics change. Throws ContractViolation for a non-executable proposal.
CommitRecord commit_or_rollback(EvolutionState& state, const EditProposal& proposal, const AbReport& report,
                                double delta, double budget);

// Records ΔU_C = full_eval_utility - baseline and restores the previous logic when it is negative.
// Throws ContractViolation when no commit is pending.
double post_commit_eval(EvolutionState& state, double full_eval_utility);

}  // namespace pace
