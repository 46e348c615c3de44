#include "pace/controller.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>

#include "pace/digest.hpp"
#include "pace/errors.hpp"
#include "pace/failure_analysis.hpp"

namespace pace {

std::string_view to_string(EpsilonMode mode) {
  switch (mode) {
    case EpsilonMode::prompt_only: return "prompt_only";
    case EpsilonMode::threshold: return "threshold";
    case EpsilonMode::bypass: return "bypass";
  }
  return "threshold";
}

nlohmann::ordered_json to_json(const Epsilon& epsilon) {
  return {{"mode", to_string(epsilon.mode)}, {"value", epsilon.value}};
}

Epsilon epsilon_from_json(const nlohmann::json& j) {
  auto from_mode = [](const std::string& name, double value) {
    if (name == "prompt_only") return Epsilon{EpsilonMode::prompt_only, 0.0};
    if (name == "bypass") return Epsilon{EpsilonMode::bypass, 1.0};
    if (name == "threshold") return Epsilon{EpsilonMode::threshold, value};
    throw ConfigError("epsilon: unknown mode '" + name + "'");
  };
  Epsilon e;
  if (j.is_number()) {
    const double v = j.get<double>();
    if (v == 0.0) return {EpsilonMode::prompt_only, 0.0};
    if (v == 1.0) return {EpsilonMode::bypass, 1.0};
    e = {EpsilonMode::threshold, v};
  } else if (j.is_string()) {
    e = from_mode(j.get<std::string>(), 0.01);
  } else if (j.is_object()) {
    e = from_mode(j.value("mode", std::string("threshold")), j.value("value", 0.01));
  } else {
    throw ConfigError("epsilon must be a number, a mode name, or an object");
  }
  if (e.mode == EpsilonMode::threshold && !(e.value > 0.0 && e.value < 1.0))
    throw ConfigError("epsilon threshold must lie in (0, 1); use the prompt_only or bypass modes for 0 and 1");
  return e;
}

std::optional<double> compute_delta_up(std::span<const double> history) {
  if (history.size() < 2) return std::nullopt;
  return history[history.size() - 1] - history[history.size() - 2];
}

bool is_saturated(std::optional<double> delta_up, const Epsilon& epsilon, int completed_rounds) {
  switch (epsilon.mode) {
    case EpsilonMode::prompt_only: return false;
    case EpsilonMode::bypass: return completed_rounds >= 1;
    case EpsilonMode::threshold: return delta_up && *delta_up <= epsilon.value + kSaturationTolerance;
  }
  return false;
}

BudgetVerdict enforce_budget(const UsageLedger& ledger, double budget, double projected_cost) {
  if (budget < 0.0) return BudgetVerdict::ok;
  return static_cast<double>(ledger.total_units()) + projected_cost > budget ? BudgetVerdict::violation
                                                                             : BudgetVerdict::ok;
}

CreditSnapshot credit_snapshot(const EvolutionState& state, const Epsilon& epsilon, double delta) {
  return CreditSnapshot{state.delta_up, state.delta_uc, state.saturated, epsilon, delta};
}

nlohmann::ordered_json to_json(const CreditSnapshot& s) {
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  nlohmann::ordered_json j;
  j["delta_up"] = opt(s.delta_up);
  j["delta_uc"] = opt(s.delta_uc);
  j["saturated"] = s.saturated;
  j["epsilon"] = to_json(s.epsilon);
  j["delta"] = s.delta;
  return j;
}

ValidationSplit split_validation(std::span<const TaskSample> train_pool, std::size_t val_size, std::mt19937_64& rng) {
  ValidationSplit split;
  if (val_size >= train_pool.size()) {
    split.validation.assign(train_pool.begin(), train_pool.end());
    split.search = split.validation;
    return split;
  }
  std::vector<std::size_t> idx(train_pool.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<std::size_t> val(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(val_size));
  std::vector<std::size_t> rest(idx.begin() + static_cast<std::ptrdiff_t>(val_size), idx.end());
  std::sort(val.begin(), val.end());
  std::sort(rest.begin(), rest.end());
  for (auto i : val) split.validation.push_back(train_pool[i]);
  for (auto i : rest) split.search.push_back(train_pool[i]);
  return split;
}

namespace {

nlohmann::ordered_json taxonomy_json(const EvalResult& eval, std::span<const TaskSample> samples) {
  const auto failures = collect_failures(eval, samples);
  const auto summary = summarize_failures(failures);
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (auto c : kAllFailureCategories) j[std::string(to_string(c))] = summary.count(c);
  return j;
}

nlohmann::ordered_json eval_payload(std::string_view phase, const EvalResult& eval,
                                    std::span<const TaskSample> samples) {
  nlohmann::ordered_json j;
  j["phase"] = phase;
  j["split"] = "validation";
  j["samples"] = samples.size();
  j["utility"] = eval.utility;
  j["cost_per_query"] = eval.cost_per_query;
  j["taxonomy"] = taxonomy_json(eval, samples);
  return j;
}

std::vector<TaskSample> select_by_ids(std::span<const TaskSample> pool, const std::vector<std::string>& ids) {
  std::map<std::string, const TaskSample*> by_id;
  for (const auto& s : pool) by_id[s.id] = &s;
  std::vector<TaskSample> out;
  for (const auto& id : ids) out.push_back(*by_id.at(id));
  return out;
}

class Controller {
 public:
  Controller(const PaceSettings& settings, std::span<const TaskSample> train_pool, Backend& backend,
             TrajectoryLog& log)
      : s_(settings), pool_(train_pool), backend_(backend), log_(log), rng_(settings.seed) {}

  PaceResult run() {
    PaceResult result;
    state_.current = s_.initial;
    result.final_agent = s_.initial;
    if (s_.K <= 0) return result;
    if (pool_.empty()) throw ConfigError("run needs a non-empty train pool");
    if (s_.L < 1) throw ConfigError("L must be at least 1");

    auto split = split_validation(pool_, s_.val_size, rng_);
    val_ = std::move(split.validation);
    search_ = std::move(split.search);
    for (const auto& v : val_) result.validation_ids.push_back(v.id);
    if (s_.validation_mode == ValidationMode::fixed)
      fixed_subset_ = sample_validation_subset(pool_, rng_, {s_.size_range.first, s_.size_range.first});

    const auto& initial = validate(state_.current);
    result.initial_utility = initial.utility;
    state_.utility_history.push_back(initial.utility);
    state_.best_utility = initial.utility;
    emit(Action::evaluate_on_task, eval_payload("initial", initial, val_), "evaluated");

    long long last_step_cost = 0;
    int completed_rounds = 0;
    for (int k = 1; k <= s_.K; ++k) {
      state_.outer_step = k;
      if (enforce_budget(state_.ledger, s_.evolution_budget, static_cast<double>(last_step_cost)) ==
          BudgetVerdict::violation) {
        result.stopped_on_budget = true;
        break;
      }
      const auto units_before = state_.ledger.total_units();
      prompt_round(k);
      ++completed_rounds;
      state_.delta_up = compute_delta_up(state_.utility_history);
      state_.saturated = is_saturated(state_.delta_up, s_.epsilon, completed_rounds);
      emit(Action::get_evolution_credit, to_json(credit_snapshot(state_, s_.epsilon, s_.delta)),
           state_.saturated ? "saturated" : "not_saturated");
      if (state_.saturated) structural_step();
      last_step_cost = state_.ledger.total_units() - units_before;
    }

    const auto& final_eval = validate(state_.current);
    auto payload = eval_payload("final", final_eval, val_);
    payload["stopped_on_budget"] = result.stopped_on_budget;
    payload["proposal_stats"] = to_json(state_.stats);
    payload["ledger"] = state_.ledger.to_json();
    payload["agent"] = to_json(state_.current);
    emit(Action::evaluate_on_task, std::move(payload), "evaluated");

    result.final_agent = state_.current;
    result.final_utility = final_eval.utility;
    result.state = state_;
    return result;
  }

 private:
  const EvalResult& validate(const AgentConfig& agent) {
    return validate_cached(agent, val_, backend_, s_.eval, cache_, state_.ledger);
  }

  void emit(Action action, nlohmann::ordered_json payload, std::string outcome,
            std::optional<std::string> label = std::nullopt) {
    TrajectoryEvent e;
    e.step = log_.next_step();
    e.outer_step = state_.outer_step;
    e.action = action;
    e.payload = std::move(payload);
    e.outcome = std::move(outcome);
    e.label = std::move(label);
    const auto total = state_.ledger.total();
    e.usage = Usage{total.input_units - logged_.input_units, total.output_units - logged_.output_units,
                    total.calls - logged_.calls};
    logged_ = total;
    log_.append(std::move(e));
  }

  void prompt_round(int k) {
    PromptSearchOptions options;
    options.iterations = s_.L;
    options.budget = s_.budget;
    options.minibatch_size = s_.minibatch_size;
    options.candidates = s_.candidates;
    options.eval = s_.eval;
    options.chars_per_unit = s_.chars_per_unit;
    const auto search = optimize_prompt(state_.current, search_, val_, backend_, options, rng_, cache_,
                                        state_.ledger);
    state_.inner_step = s_.L;
    state_.current.prompt = search.best;
    state_.utility_history.push_back(search.best_utility);
    state_.best_utility = std::max(state_.best_utility, search.best_utility);

    const auto& best_eval = validate(state_.current);
    nlohmann::ordered_json j;
    j["round"] = k;
    j["utility"] = search.best_utility;
    j["cost_per_query"] = search.best_cost;
    j["inner_history"] = search.utility_history;
    j["front_size"] = search.front.size();
    j["candidates_evaluated"] = search.candidates_evaluated;
    j["rejected_over_budget"] = search.rejected_over_budget;
    j["channel_notes"] = search.notes.size();
    j["prompt"] = to_json(search.best);
    j["taxonomy"] = taxonomy_json(best_eval, val_);
    emit(Action::optimize_prompt_on_task, std::move(j), "round_complete");
  }

  void structural_step() {
    const auto& current_eval = validate(state_.current);
    const auto failures = collect_failures(current_eval, val_);
    const auto guidance = summarize_failures(failures);
    emit(Action::display_analysis, to_json(guidance), "summarized");

    nlohmann::ordered_json logic_payload;
    logic_payload["logic"] = to_json(state_.current.logic);
    logic_payload["digest"] = config_digest(state_.current.logic);
    emit(Action::read_logic, std::move(logic_payload), "read");

    std::optional<EditProposal> chosen;
    ProposerHints hints;
    hints.past_verdicts = past_verdicts_;
    for (int attempt = 1; attempt <= s_.proposal_retries; ++attempt) {
      Usage usage;
      hints.attempt = attempt;
      auto proposal = propose_edit(state_.current, guidance, backend_, usage, hints);
      hints.previous_violations = proposal.violations;
      state_.ledger.add(Phase::outer_loop_reasoning, usage);
      ++state_.stats.proposed;
      if (proposal.executable) {
        ++state_.stats.executable;
      } else {
        ++state_.stats.non_executable;
      }
      nlohmann::ordered_json j;
      j["stage"] = "proposal";
      j["attempt"] = attempt;
      j["proposal"] = to_json(proposal);
      emit(Action::adjust_logic, std::move(j), proposal.executable ? "executable" : "non_executable");
      if (proposal.executable) {
        chosen = std::move(proposal);
        break;
      }
    }
    if (!chosen) {
      ++state_.stats.failed_rounds;
      return;
    }

    const auto ids = s_.validation_mode == ValidationMode::fixed
                         ? fixed_subset_
                         : sample_validation_subset(pool_, rng_, s_.size_range);
    emit(Action::select_examples,
         nlohmann::ordered_json{{"mode", s_.validation_mode == ValidationMode::fixed ? "fixed" : "fresh"},
                                {"ids", ids}},
         "selected");

    const auto subset = select_by_ids(pool_, ids);
    const AgentConfig candidate{state_.current.prompt, chosen->candidate_logic};
    const auto report = ab_compare(state_.current, candidate, subset, backend_, s_.delta, s_.eval);
    state_.ledger.add(Phase::structural_exploration, report.usage);
    emit(Action::compare_variants, to_json(report), report.accept ? "recommend_accept" : "recommend_reject");

    const auto before = digest_hex(state_to_json(state_).dump());
    const auto record = commit_or_rollback(state_, *chosen, report, s_.delta, s_.budget);
    nlohmann::ordered_json verdict;
    verdict["stage"] = "verdict";
    verdict["category"] = chosen->category ? std::string(to_string(*chosen->category)) : std::string();
    verdict["utility_old"] = report.utility_old;
    verdict["utility_new"] = report.utility_new;
    verdict["delta"] = s_.delta;
    verdict["commit"] = to_json(record);
    verdict["state_before"] = before;
    verdict["state_after"] = digest_hex(state_to_json(state_).dump());
    char line[160];
    std::snprintf(line, sizeof line, "%s: %s (subset utility %.3f -> %.3f)",
                  verdict["category"].get<std::string>().c_str(), record.accepted ? "accepted" : "rejected",
                  report.utility_old, report.utility_new);
    past_verdicts_.emplace_back(line);
    emit(Action::adjust_logic, std::move(verdict), record.accepted ? "committed" : "unchanged",
         record.accepted ? "accepted" : "rejected");
    if (!record.accepted) return;

    const auto& full = validate(state_.current);
    const double full_utility = full.utility;
    const double delta_uc = post_commit_eval(state_, full_utility);
    const bool rolled_back = delta_uc < 0.0;
    if (!rolled_back) {
      state_.utility_history.push_back(full_utility);
      state_.best_utility = std::max(state_.best_utility, full_utility);
    }
    state_.saturated = false;
    auto payload = eval_payload("post_commit", validate(state_.current), val_);
    payload["candidate_utility"] = full_utility;
    payload["delta_uc"] = delta_uc;
    payload["rolled_back"] = rolled_back;
    payload["logic"] = to_json(state_.current.logic);
    emit(Action::evaluate_on_task, std::move(payload), rolled_back ? "rolled_back" : "commit_stands");
  }

  const PaceSettings& s_;
  std::span<const TaskSample> pool_;
  Backend& backend_;
  TrajectoryLog& log_;
  std::mt19937_64 rng_;
  EvolutionState state_;
  EvalCache cache_;
  std::vector<TaskSample> val_;
  std::vector<TaskSample> search_;
  std::vector<std::string> fixed_subset_;
  Usage logged_;
  std::vector<std::string> past_verdicts_;
};

}  // namespace

PaceResult run_pace(const PaceSettings& settings, std::span<const TaskSample> train_pool, Backend& backend,
                    TrajectoryLog& log) {
  return Controller(settings, train_pool, backend, log).run();
}

}  // namespace pace
