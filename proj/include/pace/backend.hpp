#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace pace {

enum class Role { system, user, assistant };

std::string_view to_string(Role role);

struct ChatMessage {
  Role role = Role::user;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

enum class OutputMode { free_text, structured_keyed };

std::string_view to_string(OutputMode mode);
OutputMode output_mode_from_string(std::string_view name);

// Why a request is issued. In-process backends route on it; it never goes on the wire.
enum class Purpose { task, verify, judge, repair, diagnosis, reflection, crossover, propose_edit };

std::string_view to_string(Purpose purpose);

struct GenerationRequest {
  std::vector<ChatMessage> messages;
  double temperature = 0.2;
  int n = 1;
  int max_output_units = 2048;
  OutputMode output_mode = OutputMode::free_text;

  // Routing hints for surrogate backends. Not part of the request digest.
  Purpose purpose = Purpose::task;
  std::string sample_id;
};

// Throws ContractViolation when n < 1, max_output_units <= 0, temperature < 0,
// or a system/user message is empty.
void validate_request(const GenerationRequest& request);

struct GenerationResponse {
  std::vector<std::string> candidates;
  long long input_units = 0;
  long long output_units = 0;
  // Network attempts billed for this response (retries included).
  int calls = 1;
  // Server-reported token counters, when the endpoint returns them.
  std::optional<long long> reported_prompt_tokens;
  std::optional<long long> reported_completion_tokens;
};

// Characters per cost unit. The default of 1 bills raw character counts.
struct CostModel {
  double chars_per_unit = 1.0;

  long long units(std::size_t chars) const;
  long long input_units(const GenerationRequest& request) const;
  long long output_units(const std::vector<std::string>& candidates) const;
};

// Digest over roles and contents of the message list, in order.
std::string request_digest(const std::vector<ChatMessage>& messages);

// Temperature bucket of width 0.1 used in script keys.
int temperature_bucket(double temperature);

class Backend {
 public:
  virtual ~Backend() = default;

  // Must be safe to call concurrently.
  virtual GenerationResponse generate(const GenerationRequest& request) = 0;

  // Whether one-sentence failure diagnoses are worth a call on this backend.
  virtual bool supports_diagnosis() const { return true; }
};

// ---------------------------------------------------------------------------
// Usage accounting

enum class Phase { prompt_optimization, evaluation, outer_loop_reasoning, structural_exploration };

inline constexpr std::array<Phase, 4> kAllPhases = {Phase::prompt_optimization, Phase::evaluation,
                                                    Phase::outer_loop_reasoning,
                                                    Phase::structural_exploration};

std::string_view to_string(Phase phase);

struct Usage {
  long long input_units = 0;
  long long output_units = 0;
  long long calls = 0;

  long long total_units() const { return input_units + output_units; }
  Usage& operator+=(const Usage& other);
  bool operator==(const Usage&) const = default;
};

Usage usage_of(const GenerationResponse& response);

class UsageLedger {
 public:
  void add(Phase phase, const Usage& usage);
  void merge(const UsageLedger& other);

  const Usage& phase(Phase phase) const { return by_phase_[static_cast<std::size_t>(phase)]; }
  Usage total() const;
  long long total_units() const { return total().total_units(); }

  nlohmann::json to_json() const;
  bool operator==(const UsageLedger&) const = default;

 private:
  std::array<Usage, 4> by_phase_{};
};

void record_usage(UsageLedger& ledger, const GenerationResponse& response, Phase phase = Phase::evaluation);

}  // namespace pace
