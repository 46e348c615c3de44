#include "pace/solver.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <regex>

#include <json.hpp>

#include "pace/errors.hpp"

namespace pace {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// The keyed object of a structured reply, if the text contains one.
std::optional<nlohmann::json> parse_keyed(std::string_view raw) {
  const auto open = raw.find('{');
  const auto close = raw.rfind('}');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) return std::nullopt;
  auto j = nlohmann::json::parse(raw.substr(open, close - open + 1), nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  return j;
}

std::optional<std::string> keyed_text(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) return std::nullopt;
  const auto& v = j.at(key);
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) return v.dump();
  return std::nullopt;
}

std::string span_from_free_text(std::string_view raw) {
  const auto low = lower(raw);
  const auto marker = low.rfind("answer:");
  if (marker != std::string::npos) {
    auto rest = raw.substr(marker + 7);
    return trim(rest.substr(0, rest.find('\n')));
  }
  std::string last;
  std::size_t start = 0;
  while (start <= raw.size()) {
    auto end = raw.find('\n', start);
    if (end == std::string_view::npos) end = raw.size();
    auto line = trim(raw.substr(start, end - start));
    if (!line.empty()) last = line;
    start = end + 1;
  }
  return last;
}

ExtractorKind resolve(ExtractorKind extractor, TaskKind task) {
  if (extractor != ExtractorKind::task_default) return extractor;
  switch (task) {
    case TaskKind::letter_choice: return ExtractorKind::letter;
    case TaskKind::numeric: return ExtractorKind::numeric;
    case TaskKind::span: return ExtractorKind::span;
    case TaskKind::constrained: return ExtractorKind::text;
  }
  return ExtractorKind::text;
}

std::string apply_normalizer(NormalizerKind kind, const std::string& text) {
  switch (kind) {
    case NormalizerKind::numeric: return normalize_numeric(text);
    case NormalizerKind::span: return normalize_span(text);
    case NormalizerKind::trim: return trim(text);
  }
  return text;
}

struct Candidate {
  std::string raw;
  std::string answer;
  bool extracted = false;
  std::optional<double> score;
};

double hyper(const PipelineConfig& logic, const char* key, double fallback) {
  auto it = logic.hyperparameters.find(key);
  return it == logic.hyperparameters.end() ? fallback : it->second;
}

// Splits a repair reply into (response, self-reported score).
std::pair<std::string, std::optional<double>> split_repair_reply(std::string_view reply) {
  const auto low = lower(reply);
  const auto pos = low.rfind("self-check:");
  if (pos == std::string::npos) return {trim(reply), std::nullopt};
  return {trim(reply.substr(0, pos)), parse_compliance_fraction(reply.substr(pos))};
}

}  // namespace

std::string build_system_prompt(const PromptConfig& prompt) {
  std::string out = prompt.role;
  if (!prompt.requirements.empty()) {
    out += "\n\nRequirements:";
    for (const auto& r : prompt.requirements) out += "\n- " + r;
  }
  if (prompt.output_mode == OutputMode::structured_keyed)
    out += "\n\nRespond with a JSON object with keys \"reasoning\" and \"answer\".";
  return out;
}

std::vector<ChatMessage> build_task_messages(const PromptConfig& prompt, const TaskSample& sample) {
  return {{Role::system, build_system_prompt(prompt)}, {Role::user, render_task(sample)}};
}

std::string extract_answer(std::string_view raw, ExtractorKind extractor, OutputMode mode, TaskKind task) {
  std::string source(raw);
  bool from_keyed = false;
  if (mode == OutputMode::structured_keyed) {
    if (auto keyed = parse_keyed(raw)) {
      auto field = keyed_text(*keyed, "answer");
      if (!field) field = keyed_text(*keyed, "response");
      if (field) {
        source = *field;
        from_keyed = true;
      }
    }
  }
  switch (resolve(extractor, task)) {
    case ExtractorKind::letter: {
      const auto letter = extract_choice_letter(source);
      return letter ? std::string(1, *letter) : std::string{};
    }
    case ExtractorKind::numeric:
      return normalize_numeric(source);
    case ExtractorKind::span:
      return from_keyed ? trim(source) : span_from_free_text(source);
    case ExtractorKind::text:
    case ExtractorKind::task_default:
      return trim(source);
  }
  return {};
}

std::string extract_reasoning(std::string_view raw) {
  if (auto keyed = parse_keyed(raw))
    if (auto r = keyed_text(*keyed, "reasoning")) return *r;
  return std::string(raw);
}

std::string verification_prompt(std::string_view top_answer, std::string_view reasoning) {
  return "Previous answer: " + std::string(top_answer) +
         "\nReasoning: " + std::string(reasoning.substr(0, std::min(reasoning.size(), kVerifyReasoningChars))) +
         "\nConfirm or correct.";
}

std::optional<double> parse_compliance_fraction(std::string_view reply) {
  static const std::regex kFraction(R"((\d+)\s*/\s*(\d+))");
  const std::string text(reply);
  std::optional<double> found;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), kFraction); it != std::sregex_iterator(); ++it) {
    const double k = std::stod((*it)[1].str());
    const double m = std::stod((*it)[2].str());
    if (m > 0 && k <= m) found = k / m;
  }
  if (found) return found;
  const auto low = lower(reply);
  if (low.find("satisf") != std::string::npos && low.find("not all") == std::string::npos) {
    if (low.find("none") != std::string::npos || low.find("no constraint") != std::string::npos) return 0.0;
    if (low.find("all") != std::string::npos || low.find("every") != std::string::npos) return 1.0;
  }
  return std::nullopt;
}

SelfCheckResult self_check_constraints(const TaskSample& sample, std::string_view candidate, Backend& backend) {
  GenerationRequest request;
  request.messages = {
      {Role::system, "You are a meticulous grader of instruction compliance."},
      {Role::user, "Task:\n" + render_task(sample) + "\n\n<response>\n" + std::string(candidate) +
                       "\n</response>\n\nList every constraint the task imposes, check the response against "
                       "each one, and end with a line of the form 'k/m constraints satisfied'."}};
  request.temperature = 0.0;
  request.n = 1;
  request.max_output_units = 512;
  request.purpose = Purpose::judge;
  request.sample_id = sample.id;
  const auto response = backend.generate(request);

  SelfCheckResult result;
  result.usage = usage_of(response);
  const auto fraction = parse_compliance_fraction(response.candidates.at(0));
  result.parsed = fraction.has_value();
  result.score = fraction.value_or(0.0);
  return result;
}

RepairDecision apply_repair_acceptance(double best_score, double repair_score) {
  return repair_score >= best_score ? RepairDecision::take_repair : RepairDecision::keep_best;
}

SolverOutcome run_pipeline(const PromptConfig& prompt, const PipelineConfig& logic, const TaskSample& sample,
                           Backend& backend, int max_output_units) {
  SolverOutcome outcome;
  const auto base_messages = build_task_messages(prompt, sample);
  const auto base_digest = request_digest(base_messages);
  const auto task_extractor = resolve(ExtractorKind::task_default, sample.kind);

  std::vector<Candidate> candidates;
  std::size_t selected = 0;
  int modal_count = 0;
  std::optional<std::string> verified_answer;

  auto call = [&](GenerationRequest request) {
    request.sample_id = sample.id;
    request.max_output_units = max_output_units;
    auto response = backend.generate(request);
    if (response.candidates.size() != static_cast<std::size_t>(request.n))
      throw ProtocolError("backend returned " + std::to_string(response.candidates.size()) + " candidates for n=" +
                          std::to_string(request.n));
    outcome.usage += usage_of(response);
    return response;
  };
  auto response_text = [&](const Candidate& c) {
    return extract_answer(c.raw, ExtractorKind::text, prompt.output_mode, sample.kind);
  };

  bool finished = false;
  for (const auto& stage : logic.stages) {
    if (finished) break;
    StageRecord record;
    record.kind = stage.kind();
    record.input_digest = base_digest;

    std::visit(
        [&](const auto& p) {
          using P = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<P, SampleParams>) {
            GenerationRequest request;
            request.messages = base_messages;
            request.n = static_cast<int>(hyper(logic, "sample_n", p.n));
            request.temperature = std::max(prompt.temperature, hyper(logic, "temperature_floor", p.temperature_floor));
            request.output_mode = prompt.output_mode;
            request.purpose = Purpose::task;
            const auto response = call(request);
            candidates.clear();
            for (const auto& text : response.candidates) candidates.push_back(Candidate{text, {}, false, {}});
            selected = 0;
            record.outputs = response.candidates;
          } else if constexpr (std::is_same_v<P, ExtractParams>) {
            for (auto& c : candidates) {
              c.answer = extract_answer(c.raw, p.extractor, prompt.output_mode, sample.kind);
              c.extracted = true;
              record.outputs.push_back(c.answer);
            }
          } else if constexpr (std::is_same_v<P, NormalizeParams>) {
            for (auto& c : candidates) {
              for (auto kind : p.chain)
                if (!c.answer.empty()) c.answer = apply_normalizer(kind, c.answer);
              record.outputs.push_back(c.answer);
            }
          } else if constexpr (std::is_same_v<P, SelfCheckParams>) {
            for (auto& c : candidates) {
              const auto check = self_check_constraints(sample, response_text(c), backend);
              outcome.usage += check.usage;
              c.score = check.score;
              record.scores.push_back(check.score);
              if (!check.parsed) record.note += "unparseable self-check reply; ";
            }
          } else if constexpr (std::is_same_v<P, AggregateParams>) {
            if (p.rule == AggregateRule::majority_vote) {
              std::map<std::string, int> votes;
              for (const auto& c : candidates)
                if (!c.answer.empty()) ++votes[c.answer];
              modal_count = 0;
              for (const auto& [a, v] : votes) modal_count = std::max(modal_count, v);
              // Tied modal counts resolve to the earliest candidate in generation order.
              for (std::size_t i = 0; i < candidates.size(); ++i) {
                if (!candidates[i].answer.empty() && votes[candidates[i].answer] == modal_count) {
                  selected = i;
                  break;
                }
              }
              record.outputs.push_back(candidates.empty() ? "" : candidates[selected].answer);
              record.scores.push_back(modal_count);
            } else {
              double best = -1.0;
              for (std::size_t i = 0; i < candidates.size(); ++i) {
                const double s = candidates[i].score.value_or(0.0);
                if (s > best) {
                  best = s;
                  selected = i;
                }
              }
              record.scores.push_back(best);
            }
          } else if constexpr (std::is_same_v<P, EarlyExitParams>) {
            if (p.rule == EarlyExitRule::consensus_at_least) {
              const double m = hyper(logic, "consensus_threshold", p.threshold);
              finished = modal_count >= m;
            } else {
              const double s = hyper(logic, "score_threshold", p.threshold);
              finished = !candidates.empty() && candidates[selected].score.value_or(0.0) >= s;
            }
            record.note = finished ? "exit" : "continue";
          } else if constexpr (std::is_same_v<P, VerifyParams>) {
            if (candidates.empty()) return;
            const auto& top = candidates[selected];
            GenerationRequest request;
            request.messages = {base_messages.front(),
                                {Role::user, verification_prompt(top.answer, extract_reasoning(top.raw))}};
            request.temperature = hyper(logic, "verify_temperature", p.temperature);
            request.n = 1;
            request.output_mode = prompt.output_mode;
            request.purpose = Purpose::verify;
            const auto response = call(request);
            const auto checked = extract_answer(response.candidates.front(), task_extractor, prompt.output_mode,
                                                sample.kind);
            if (!checked.empty()) verified_answer = checked;
            record.outputs.push_back(response.candidates.front());
            record.note = checked.empty() ? "verification unparseable; keeping top answer" : "verified";
          } else if constexpr (std::is_same_v<P, RepairParams>) {
            if (candidates.empty()) return;
            auto& best = candidates[selected];
            GenerationRequest request;
            request.messages = base_messages;
            request.messages.push_back({Role::assistant, response_text(best)});
            request.messages.push_back({Role::user, std::string(kRepairInstruction)});
            request.temperature = hyper(logic, "repair_temperature", p.temperature);
            request.n = 1;
            request.output_mode = OutputMode::free_text;
            request.purpose = Purpose::repair;
            const auto response = call(request);
            auto [fixed, fixed_score] = split_repair_reply(response.candidates.front());
            const double best_score = best.score.value_or(0.0);
            const double repair_score = fixed_score.value_or(0.0);
            record.outputs.push_back(fixed);
            record.scores = {best_score, repair_score};
            if (!fixed_score) record.note = "repair carried no self-check line; ";
            if (!fixed.empty() && apply_repair_acceptance(best_score, repair_score) == RepairDecision::take_repair) {
              best.raw = fixed;
              best.answer = extract_answer(fixed, task_extractor, OutputMode::free_text, sample.kind);
              best.extracted = true;
              best.score = repair_score;
              record.note += "take_repair";
            } else {
              record.note += "keep_best";
            }
          } else if constexpr (std::is_same_v<P, ReturnParams>) {
            finished = true;
          }
        },
        stage.params);
    outcome.trace.push_back(std::move(record));
  }

  if (verified_answer) {
    outcome.answer = *verified_answer;
  } else if (!candidates.empty()) {
    const auto& c = candidates[selected];
    outcome.answer = c.extracted ? c.answer : extract_answer(c.raw, task_extractor, prompt.output_mode, sample.kind);
  }
  outcome.extraction_failed = outcome.answer.empty();
  if (outcome.trace.empty() || outcome.trace.back().kind != StageKind::Return) {
    StageRecord ret;
    ret.kind = StageKind::Return;
    ret.input_digest = base_digest;
    ret.outputs.push_back(outcome.answer);
    outcome.trace.push_back(std::move(ret));
  } else {
    outcome.trace.back().outputs.push_back(outcome.answer);
  }
  return outcome;
}

}  // namespace pace
