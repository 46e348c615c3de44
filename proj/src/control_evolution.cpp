#include "pace/control_evolution.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "pace/digest.hpp"
#include "pace/errors.hpp"

namespace pace {

nlohmann::ordered_json to_json(const EditProposal& proposal) {
  nlohmann::ordered_json j;
  j["category"] = proposal.category ? nlohmann::ordered_json(std::string(to_string(*proposal.category)))
                                    : nlohmann::ordered_json(nullptr);
  j["executable"] = proposal.executable;
  j["violations"] = proposal.violations;
  j["guidance_digest"] = proposal.guidance_digest;
  j["transcript_digest"] = proposal.transcript_digest;
  j["candidate_logic"] = proposal.executable ? to_json(proposal.candidate_logic) : nlohmann::ordered_json(nullptr);
  return j;
}

std::vector<ChatMessage> proposer_messages(const AgentConfig& agent, const GuidanceSummary& guidance,
                                           const ProposerHints& hints) {
  std::string menu;
  for (auto c : kAllEditCategories) menu += "- " + std::string(to_string(c)) + "\n";
  std::string stages;
  for (std::size_t i = 0; i < 9; ++i) stages += std::string(i ? ", " : "") + std::string(to_string(StageKind(i)));

  std::string user = "Template version " + std::to_string(kProposerTemplateVersion) + ".\n\nCurrent pipeline:\n" +
                     to_json(agent.logic).dump(2) + "\n\nFailure summary:\n" + to_json(guidance).dump(2) +
                     "\n\nAllowed edit categories:\n" + menu + "\nAvailable stage kinds: " + stages +
                     ".\nPropose exactly one bounded edit. Reply with one JSON object "
                     "{\"category\": <edit category>, \"pipeline\": <complete edited pipeline>}.";
  if (!hints.past_verdicts.empty()) {
    user += "\n\nEarlier edits in this run:";
    for (const auto& v : hints.past_verdicts) user += "\n- " + v;
  }
  if (hints.attempt > 1) {
    user += "\n\nAttempt " + std::to_string(hints.attempt) + ". The previous reply was unusable:";
    for (const auto& v : hints.previous_violations) user += "\n- " + v;
  }
  return {{Role::system,
           "You improve the inference pipeline of a frozen language model. The generation call itself cannot be "
           "edited; stages may not sleep or wait."},
          {Role::user, std::move(user)}};
}

EditProposal parse_edit_reply(std::string_view reply) {
  EditProposal p;
  const auto open = reply.find('{');
  const auto close = reply.rfind('}');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
    p.violations.push_back("reply contains no JSON object");
    return p;
  }
  const auto j = nlohmann::json::parse(reply.substr(open, close - open + 1), nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    p.violations.push_back("reply is not a JSON object");
    return p;
  }
  if (j.contains("category") && j["category"].is_string()) {
    p.category = edit_category_from_string(j["category"].get<std::string>());
    if (!p.category) p.violations.push_back("unknown edit category '" + j["category"].get<std::string>() + "'");
  } else {
    p.violations.push_back("missing edit category");
  }
  if (!j.contains("pipeline")) {
    p.violations.push_back("missing pipeline");
    return p;
  }
  try {
    p.candidate_logic = pipeline_from_json(j["pipeline"]);
  } catch (const ConfigError& e) {
    p.violations.push_back(e.what());
    return p;
  }
  for (auto& v : validate_pipeline(p.candidate_logic)) p.violations.push_back(std::move(v));
  p.executable = p.violations.empty();
  return p;
}

EditProposal propose_edit(const AgentConfig& agent, const GuidanceSummary& guidance, Backend& backend,
                          Usage& usage, const ProposerHints& hints) {
  GenerationRequest request;
  request.messages = proposer_messages(agent, guidance, hints);
  request.temperature = 1.0;
  request.purpose = Purpose::propose_edit;
  const auto guidance_digest = digest_hex(to_json(guidance).dump());
  EditProposal p;
  try {
    const auto response = backend.generate(request);
    usage += usage_of(response);
    p = parse_edit_reply(response.candidates.at(0));
    p.transcript_digest = digest_hex(request_digest(request.messages) + response.candidates.at(0));
  } catch (const BackendError& e) {
    if (const auto* retry = dynamic_cast<const RetryableError*>(&e)) {
      usage.input_units += retry->billed_input_units();
      usage.calls += retry->attempts();
    }
    p = EditProposal{};
    p.violations.push_back(std::string("proposer call failed: ") + e.what());
    p.transcript_digest = request_digest(request.messages);
  }
  p.guidance_digest = guidance_digest;
  return p;
}

std::vector<std::string> sample_validation_subset(std::span<const TaskSample> train_pool, std::mt19937_64& rng,
                                                  std::pair<std::size_t, std::size_t> size_range) {
  const auto [lo, hi] = size_range;
  if (lo == 0 || lo > hi || hi > train_pool.size())
    throw ContractViolation("validation size range [" + std::to_string(lo) + ", " + std::to_string(hi) +
                            "] does not fit a pool of " + std::to_string(train_pool.size()));
  std::uniform_int_distribution<std::size_t> size_dist(lo, hi);
  const auto size = size_dist(rng);
  std::vector<std::size_t> idx(train_pool.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < size; ++i) ids.push_back(train_pool[idx[i]].id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

bool gate_accepts(double utility_old, double utility_new, double delta) {
  if (delta == kGateDisabled) return true;
  return utility_new - utility_old - delta > kGateTolerance;
}

nlohmann::ordered_json to_json(const AbReport& report) {
  nlohmann::ordered_json j;
  j["subset_ids"] = report.subset_ids;
  j["old_ids"] = report.old_ids;
  j["new_ids"] = report.new_ids;
  j["utility_old"] = report.utility_old;
  j["utility_new"] = report.utility_new;
  j["cost_old"] = report.cost_old;
  j["cost_new"] = report.cost_new;
  j["delta"] = report.delta();
  auto diffs = nlohmann::ordered_json::array();
  for (const auto& d : report.per_sample_diffs) diffs.push_back({d.id, d.old_pass, d.new_pass});
  j["per_sample_diffs"] = diffs;
  j["recommendation"] = report.accept ? "accept" : "reject";
  j["flagged"] = report.flagged;
  return j;
}

AbReport ab_compare(const AgentConfig& old_agent, const AgentConfig& new_agent, std::span<const TaskSample> subset,
                    Backend& backend, double delta, const EvalOptions& options) {
  if (subset.empty()) throw ContractViolation("ab_compare needs a non-empty subset");
  if (!validate_pipeline(old_agent.logic).empty() || !validate_pipeline(new_agent.logic).empty())
    throw ContractViolation("ab_compare needs two valid pipelines");
  AbReport report;
  for (const auto& s : subset) report.subset_ids.push_back(s.id);
  const auto old_eval = evaluate_agent(old_agent, subset, backend, options);
  const auto new_eval = evaluate_agent(new_agent, subset, backend, options);
  for (const auto& r : old_eval.records) report.old_ids.push_back(r.sample_id);
  for (const auto& r : new_eval.records) report.new_ids.push_back(r.sample_id);
  report.utility_old = old_eval.utility;
  report.utility_new = new_eval.utility;
  report.cost_old = old_eval.cost_per_query;
  report.cost_new = new_eval.cost_per_query;
  for (std::size_t i = 0; i < subset.size(); ++i)
    report.per_sample_diffs.push_back(
        SampleDiff{subset[i].id, old_eval.records[i].passed(), new_eval.records[i].passed()});
  report.flagged = old_eval.backend_errors > 0 || new_eval.backend_errors > 0;
  report.accept = gate_accepts(report.utility_old, report.utility_new, delta);
  report.usage = old_eval.usage;
  report.usage += new_eval.usage;
  return report;
}

nlohmann::ordered_json to_json(const ProposalStats& s) {
  nlohmann::ordered_json j;
  j["proposed"] = s.proposed;
  j["executable"] = s.executable;
  j["non_executable"] = s.non_executable;
  j["accepted"] = s.accepted;
  j["rejected"] = s.rejected;
  j["rejected_regression"] = s.rejected_regression;
  j["rolled_back"] = s.rolled_back;
  j["failed_rounds"] = s.failed_rounds;
  return j;
}

nlohmann::ordered_json state_to_json(const EvolutionState& state) {
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  nlohmann::ordered_json j;
  j["current"] = to_json(state.current);
  j["utility_history"] = state.utility_history;
  j["delta_up"] = opt(state.delta_up);
  j["delta_uc"] = opt(state.delta_uc);
  j["saturated"] = state.saturated;
  j["outer_step"] = state.outer_step;
  j["inner_step"] = state.inner_step;
  j["best_utility"] = state.best_utility;
  j["pending_full_eval"] = state.pending_full_eval;
  j["structure_eval_baseline"] = opt(state.structure_eval_baseline);
  j["rollback_logic"] = state.rollback_logic ? to_json(*state.rollback_logic) : nlohmann::ordered_json(nullptr);
  return j;
}

nlohmann::ordered_json to_json(const CommitRecord& r) {
  nlohmann::ordered_json j;
  j["accepted"] = r.accepted;
  j["delta_on_subset"] = r.delta_on_subset;
  j["cost_ok"] = r.cost_ok;
  j["structure_eval_baseline"] =
      r.structure_eval_baseline ? nlohmann::ordered_json(*r.structure_eval_baseline) : nlohmann::ordered_json(nullptr);
  j["rollback_token"] = r.rollback_token;
  return j;
}

CommitRecord commit_or_rollback(EvolutionState& state, const EditProposal& proposal, const AbReport& report,
                                double delta, double budget) {
  if (!proposal.executable) throw ContractViolation("commit_or_rollback needs an executable proposal");
  CommitRecord record;
  record.delta_on_subset = report.delta();
  record.cost_ok = budget < 0.0 || report.cost_new <= budget;
  record.accepted = gate_accepts(report.utility_old, report.utility_new, delta) && record.cost_ok;
  if (!record.accepted) {
    ++state.stats.rejected;
    if (record.delta_on_subset <= 0.0) ++state.stats.rejected_regression;
    return record;
  }
  ++state.stats.accepted;
  record.rollback_token = config_digest(state.current.logic);
  record.structure_eval_baseline =
      state.utility_history.empty() ? report.utility_old : state.utility_history.back();
  state.rollback_logic = state.current.logic;
  state.current.logic = proposal.candidate_logic;
  state.structure_eval_baseline = record.structure_eval_baseline;
  state.pending_full_eval = true;
  return record;
}

double post_commit_eval(EvolutionState& state, double full_eval_utility) {
  if (!state.pending_full_eval || !state.structure_eval_baseline)
    throw ContractViolation("post_commit_eval without a pending commit");
  const double delta_uc = full_eval_utility - *state.structure_eval_baseline;
  state.delta_uc = delta_uc;
  if (delta_uc < 0.0 && state.rollback_logic) {
    state.current.logic = *state.rollback_logic;
    ++state.stats.rolled_back;
  }
  state.rollback_logic.reset();
  state.pending_full_eval = false;
  return delta_uc;
}

}  // namespace pace
