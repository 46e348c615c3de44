#include "pace/failure_analysis.hpp"

#include <algorithm>
#include <map>

#include "pace/errors.hpp"

namespace pace {

std::string_view to_string(FailureCategory category) {
  switch (category) {
    case FailureCategory::extraction_runtime: return "extraction_runtime";
    case FailureCategory::format_constraint: return "format_constraint";
    case FailureCategory::reasoning_content: return "reasoning_content";
  }
  return "reasoning_content";
}

std::string_view to_string(EditCategory category) {
  switch (category) {
    case EditCategory::sampling_policy: return "sampling_policy";
    case EditCategory::aggregation: return "aggregation";
    case EditCategory::early_exit: return "early_exit";
    case EditCategory::verification: return "verification";
    case EditCategory::repair: return "repair";
    case EditCategory::self_check_scoring: return "self_check_scoring";
    case EditCategory::normalization: return "normalization";
    case EditCategory::extraction_hardening: return "extraction_hardening";
    case EditCategory::hyperparameter: return "hyperparameter";
    case EditCategory::deletion: return "deletion";
  }
  return "deletion";
}

std::optional<EditCategory> edit_category_from_string(std::string_view name) {
  for (auto c : kAllEditCategories)
    if (to_string(c) == name) return c;
  return std::nullopt;
}

nlohmann::ordered_json to_json(const GuidanceSummary& summary) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json counts = nlohmann::ordered_json::object();
  for (auto c : kAllFailureCategories) counts[std::string(to_string(c))] = summary.count(c);
  j["counts"] = counts;
  j["ranked"] = nlohmann::ordered_json::array();
  for (auto c : summary.ranked) j["ranked"].push_back(std::string(to_string(c)));
  j["recommended"] = nlohmann::ordered_json::array();
  for (auto e : summary.recommended) j["recommended"].push_back(std::string(to_string(e)));
  return j;
}

FailureCategory classify_failure(const SolverOutcome& outcome, const ScoreResult& score) {
  if (score.utility >= 1.0) throw ContractViolation("classify_failure called on a passing sample");
  bool runtime_fault = outcome.extraction_failed || score.extraction_failed;
  for (const auto& r : outcome.trace)
    if (r.note.starts_with("backend error")) runtime_fault = true;
  if (runtime_fault) return FailureCategory::extraction_runtime;
  if (!score.violated_constraints.empty() || (score.loose && *score.loose < 1.0))
    return FailureCategory::format_constraint;
  return FailureCategory::reasoning_content;
}

std::vector<FailureRecord> collect_failures(const EvalResult& eval, std::span<const TaskSample> samples) {
  std::map<std::string, const TaskSample*> by_id;
  for (const auto& s : samples) by_id[s.id] = &s;
  std::vector<FailureRecord> out;
  for (const auto& r : eval.records) {
    if (r.passed()) continue;
    FailureRecord f;
    f.sample_id = r.sample_id;
    f.predicted = r.outcome.answer;
    if (auto it = by_id.find(r.sample_id); it != by_id.end()) f.gold = it->second->gold;
    f.category = classify_failure(r.outcome, r.score);
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<EditCategory> recommended_edits(FailureCategory category) {
  switch (category) {
    case FailureCategory::extraction_runtime:
      return {EditCategory::normalization, EditCategory::extraction_hardening};
    case FailureCategory::format_constraint:
      return {EditCategory::self_check_scoring, EditCategory::repair, EditCategory::early_exit};
    case FailureCategory::reasoning_content:
      return {EditCategory::aggregation, EditCategory::verification, EditCategory::sampling_policy};
  }
  return {};
}

GuidanceSummary summarize_failures(std::span<const FailureRecord> records) {
  GuidanceSummary summary;
  for (const auto& r : records) ++summary.counts[static_cast<std::size_t>(r.category)];
  for (auto c : kAllFailureCategories)
    if (summary.count(c) > 0) summary.ranked.push_back(c);
  // Stable sort keeps enum order among equal counts.
  std::stable_sort(summary.ranked.begin(), summary.ranked.end(),
                   [&](FailureCategory a, FailureCategory b) { return summary.count(a) > summary.count(b); });
  for (auto c : summary.ranked)
    for (auto e : recommended_edits(c))
      if (std::find(summary.recommended.begin(), summary.recommended.end(), e) == summary.recommended.end())
        summary.recommended.push_back(e);
  return summary;
}

Usage diagnose_failures(std::vector<FailureRecord>& records, std::span<const TaskSample> samples, Backend& backend) {
  Usage usage;
  if (!backend.supports_diagnosis()) return usage;
  std::map<std::string, const TaskSample*> by_id;
  for (const auto& s : samples) by_id[s.id] = &s;
  for (auto& r : records) {
    auto it = by_id.find(r.sample_id);
    if (it == by_id.end()) continue;
    GenerationRequest request;
    request.messages = {
        {Role::system, "You analyse mistakes made by an assistant. Reply with one sentence naming the root cause."},
        {Role::user, "Task:\n" + render_task(*it->second) + "\n\nAssistant answer: " +
                         (r.predicted.empty() ? std::string("(no answer extracted)") : r.predicted) +
                         "\nExpected: " + r.gold + "\nFailure class: " + std::string(to_string(r.category)) +
                         "\nWhat is the root cause?"}};
    request.temperature = 0.0;
    request.max_output_units = kDiagnosisOutputUnits;
    request.purpose = Purpose::diagnosis;
    request.sample_id = r.sample_id;
    try {
      const auto response = backend.generate(request);
      usage += usage_of(response);
      if (!response.candidates.empty()) r.diagnosis = response.candidates.front();
    } catch (const BackendError&) {
      // A missing diagnosis only weakens the reflection prompt.
    }
  }
  return usage;
}

}  // namespace pace
