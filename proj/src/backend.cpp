#include "pace/backend.hpp"

#include <cmath>

#include "pace/digest.hpp"
#include "pace/errors.hpp"

namespace pace {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

std::string_view to_string(OutputMode mode) {
  return mode == OutputMode::structured_keyed ? "structured_keyed" : "free_text";
}

OutputMode output_mode_from_string(std::string_view name) {
  if (name == "free_text" || name == "text") return OutputMode::free_text;
  if (name == "structured_keyed" || name == "json") return OutputMode::structured_keyed;
  throw ConfigError("unknown output mode '" + std::string(name) + "'");
}

std::string_view to_string(Purpose purpose) {
  switch (purpose) {
    case Purpose::task: return "task";
    case Purpose::verify: return "verify";
    case Purpose::judge: return "judge";
    case Purpose::repair: return "repair";
    case Purpose::diagnosis: return "diagnosis";
    case Purpose::reflection: return "reflection";
    case Purpose::crossover: return "crossover";
    case Purpose::propose_edit: return "propose_edit";
  }
  return "task";
}

void validate_request(const GenerationRequest& request) {
  if (request.n < 1) throw ContractViolation("generation request needs n >= 1");
  if (request.max_output_units <= 0) throw ContractViolation("generation request needs max_output_units > 0");
  if (!(request.temperature >= 0.0)) throw ContractViolation("generation request needs temperature >= 0");
  if (request.messages.empty()) throw ContractViolation("generation request has no messages");
  for (const auto& m : request.messages)
    if (m.role != Role::assistant && m.content.empty())
      throw ContractViolation("empty " + std::string(to_string(m.role)) + " message");
}

long long CostModel::units(std::size_t chars) const {
  if (chars_per_unit <= 1.0) return static_cast<long long>(chars);
  return static_cast<long long>(std::ceil(static_cast<double>(chars) / chars_per_unit));
}

long long CostModel::input_units(const GenerationRequest& request) const {
  std::size_t chars = 0;
  for (const auto& m : request.messages) chars += m.content.size();
  return units(chars);
}

long long CostModel::output_units(const std::vector<std::string>& candidates) const {
  long long total = 0;
  for (const auto& c : candidates) total += units(c.size());
  return total;
}

std::string request_digest(const std::vector<ChatMessage>& messages) {
  std::uint64_t h = fnv1a64("pace-messages");
  for (const auto& m : messages) {
    h = fnv1a64(to_string(m.role), h);
    h = fnv1a64(std::string_view("\x1f", 1), h);
    h = fnv1a64(m.content, h);
    h = fnv1a64(std::string_view("\x1e", 1), h);
  }
  return to_hex(h);
}

int temperature_bucket(double temperature) {
  return static_cast<int>(std::lround(temperature * 10.0));
}

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::prompt_optimization: return "prompt_optimization";
    case Phase::evaluation: return "evaluation";
    case Phase::outer_loop_reasoning: return "outer_loop_reasoning";
    case Phase::structural_exploration: return "structural_exploration";
  }
  return "evaluation";
}

Usage& Usage::operator+=(const Usage& other) {
  input_units += other.input_units;
  output_units += other.output_units;
  calls += other.calls;
  return *this;
}

Usage usage_of(const GenerationResponse& response) {
  return Usage{response.input_units, response.output_units, response.calls};
}

void UsageLedger::add(Phase phase, const Usage& usage) { by_phase_[static_cast<std::size_t>(phase)] += usage; }

void UsageLedger::merge(const UsageLedger& other) {
  for (std::size_t i = 0; i < by_phase_.size(); ++i) by_phase_[i] += other.by_phase_[i];
}

Usage UsageLedger::total() const {
  Usage t;
  for (const auto& u : by_phase_) t += u;
  return t;
}

nlohmann::json UsageLedger::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (auto phase : kAllPhases) {
    const auto& u = this->phase(phase);
    j[std::string(to_string(phase))] = {
        {"input_units", u.input_units}, {"output_units", u.output_units}, {"calls", u.calls}};
  }
  return j;
}

void record_usage(UsageLedger& ledger, const GenerationResponse& response, Phase phase) {
  ledger.add(phase, usage_of(response));
}

}  // namespace pace
