#pragma once

#include <ostream>
#include <string>

#include <json.hpp>

#include "pace/pipeline.hpp"

namespace pace {

inline constexpr const char* kAgentSchema = "pace.agent/1";

// Agent file: {"schema", "prompt", "logic", "run_config_digest"}.
void save_agent_file(const std::string& path, const AgentConfig& agent, const std::string& run_config_digest);
AgentConfig load_agent_file(const std::string& path);

// Entry point of the `pace` executable. Returns the process exit status.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pace
