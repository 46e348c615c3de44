#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pace/backend.hpp"

namespace pace {

inline constexpr std::string_view kTrajectorySchema = "pace.trajectory/1";

// Controller actions recorded in a trajectory.
enum class Action {
  display_analysis,
  read_logic,
  adjust_logic,
  compare_variants,
  optimize_prompt_on_task,
  get_evolution_credit,
  select_examples,
  evaluate_on_task,
};

std::string_view to_string(Action action);
Action action_from_string(std::string_view name);

struct TrajectoryEvent {
  long long step = 0;
  int outer_step = 0;
  Action action = Action::evaluate_on_task;
  nlohmann::ordered_json payload = nlohmann::ordered_json::object();
  std::string payload_digest;
  std::string outcome;
  Usage usage;
  // "accepted" / "rejected" on structural verdicts.
  std::optional<std::string> label;
};

nlohmann::ordered_json to_json(const TrajectoryEvent& event);
TrajectoryEvent event_from_json(const nlohmann::ordered_json& j);

// Append-only event log with a single writer. When a path is given every append is written
// and flushed as one line; the first line is a header record.
class TrajectoryLog {
 public:
  TrajectoryLog() = default;
  TrajectoryLog(const std::string& path, nlohmann::ordered_json header);

  // Fills payload_digest when empty. Throws ContractViolation unless the step index increases.
  void append(TrajectoryEvent event);

  const std::vector<TrajectoryEvent>& events() const { return events_; }
  const nlohmann::ordered_json& header() const { return header_; }
  long long next_step() const { return events_.empty() ? 1 : events_.back().step + 1; }

 private:
  nlohmann::ordered_json header_ = nlohmann::ordered_json::object();
  std::vector<TrajectoryEvent> events_;
  std::ofstream out_;
};

// Header record for a new run.
nlohmann::ordered_json trajectory_header(nlohmann::ordered_json fields);

struct LoadedTrajectory {
  nlohmann::ordered_json header;
  std::vector<TrajectoryEvent> events;
};

// Reads a trajectory file; throws ConfigError on a schema mismatch or a malformed line.
LoadedTrajectory load_trajectory(const std::string& path);

}  // namespace pace
