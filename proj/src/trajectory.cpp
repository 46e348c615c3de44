#include "pace/trajectory.hpp"

#include <array>

#include "pace/digest.hpp"
#include "pace/errors.hpp"

namespace pace {
namespace {

constexpr std::array<std::string_view, 8> kActionNames = {
    "display_analysis",        "read_logic",           "adjust_logic",    "compare_variants",
    "optimize_prompt_on_task", "get_evolution_credit", "select_examples", "evaluate_on_task"};

}  // namespace

std::string_view to_string(Action action) { return kActionNames[static_cast<std::size_t>(action)]; }

Action action_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kActionNames.size(); ++i)
    if (kActionNames[i] == name) return static_cast<Action>(i);
  throw ConfigError("unknown trajectory action '" + std::string(name) + "'");
}

nlohmann::ordered_json to_json(const TrajectoryEvent& e) {
  nlohmann::ordered_json j;
  j["schema"] = kTrajectorySchema;
  j["step"] = e.step;
  j["outer_step"] = e.outer_step;
  j["action"] = to_string(e.action);
  j["outcome"] = e.outcome;
  j["label"] = e.label ? nlohmann::ordered_json(*e.label) : nlohmann::ordered_json(nullptr);
  j["usage"] = {{"input_units", e.usage.input_units}, {"output_units", e.usage.output_units}, {"calls", e.usage.calls}};
  j["payload_digest"] = e.payload_digest;
  j["payload"] = e.payload;
  return j;
}

TrajectoryEvent event_from_json(const nlohmann::ordered_json& j) {
  if (!j.is_object() || j.value("schema", std::string()) != kTrajectorySchema)
    throw ConfigError("trajectory record has an unknown schema");
  try {
    TrajectoryEvent e;
    e.step = j.at("step").get<long long>();
    e.outer_step = j.at("outer_step").get<int>();
    e.action = action_from_string(j.at("action").get<std::string>());
    e.outcome = j.at("outcome").get<std::string>();
    if (!j.at("label").is_null()) e.label = j.at("label").get<std::string>();
    const auto& u = j.at("usage");
    e.usage = Usage{u.at("input_units").get<long long>(), u.at("output_units").get<long long>(),
                    u.at("calls").get<long long>()};
    e.payload_digest = j.at("payload_digest").get<std::string>();
    e.payload = j.at("payload");
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("malformed trajectory record: ") + ex.what());
  }
}

TrajectoryLog::TrajectoryLog(const std::string& path, nlohmann::ordered_json header)
    : header_(std::move(header)), out_(path, std::ios::trunc) {
  if (!out_) throw ConfigError("cannot write trajectory file " + path);
  out_ << header_.dump() << '\n';
  out_.flush();
}

void TrajectoryLog::append(TrajectoryEvent event) {
  if (!events_.empty() && event.step <= events_.back().step)
    throw ContractViolation("trajectory step " + std::to_string(event.step) + " does not follow " +
                            std::to_string(events_.back().step));
  if (event.payload_digest.empty()) event.payload_digest = digest_hex(event.payload.dump());
  if (out_.is_open()) {
    out_ << to_json(event).dump() << '\n';
    out_.flush();
  }
  events_.push_back(std::move(event));
}

nlohmann::ordered_json trajectory_header(nlohmann::ordered_json fields) {
  nlohmann::ordered_json h;
  h["schema"] = kTrajectorySchema;
  h["kind"] = "header";
  for (auto& [k, v] : fields.items()) h[k] = v;
  return h;
}

LoadedTrajectory load_trajectory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("trajectory file not found: " + path);
  LoadedTrajectory out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto j = nlohmann::ordered_json::parse(line, nullptr, false);
    if (j.is_discarded()) throw ConfigError(path + ":" + std::to_string(line_no) + ": not JSON");
    if (j.is_object() && j.value("kind", std::string()) == "header") {
      if (j.value("schema", std::string()) != kTrajectorySchema)
        throw ConfigError(path + ": unsupported trajectory schema");
      out.header = j;
      continue;
    }
    auto e = event_from_json(j);
    if (!out.events.empty() && e.step <= out.events.back().step)
      throw ConfigError(path + ":" + std::to_string(line_no) + ": step index out of order");
    out.events.push_back(std::move(e));
  }
  return out;
}

}  // namespace pace
