#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pace/backend.hpp"
#include "pace/controller.hpp"
#include "pace/pipeline.hpp"
#include "pace/task.hpp"

namespace pace {

struct DataSpec {
  std::string path;
  // Train pool size; absent means every sample not reserved for the test split.
  std::optional<std::size_t> train_size;
  std::size_t test_size = 0;
};

enum class BackendKind { http, synthetic, scripted };

std::string_view to_string(BackendKind kind);

struct BackendSpec {
  BackendKind kind = BackendKind::synthetic;
  std::vector<std::string> endpoints;
  std::string model;
  std::string api_key_env = "PACE_API_KEY";
  std::string script;
  nlohmann::json landscape = nlohmann::json::object();
  std::optional<std::uint64_t> seed;
  bool supports_diagnosis = true;
  int max_attempts = 3;
  int backoff_ms = 200;
};

struct RunConfig {
  std::string task;
  TaskKind kind = TaskKind::letter_choice;
  DataSpec data;
  BackendSpec backend;
  std::uint64_t seed = 0;
  Epsilon epsilon;
  double delta = 0.02;
  int K = 20;
  int L = 5;
  double budget = kUnlimited;
  double evolution_budget = kUnlimited;
  double task_temperature = 0.2;
  double reflection_temperature = 1.0;
  int workers = 4;
  bool deterministic = false;
  ValidationMode validation_mode = ValidationMode::fresh;
  std::pair<std::size_t, std::size_t> size_range{10, 30};
  std::size_t val_size = 100;
  int max_output_units = 2048;
  double chars_per_unit = 1.0;
  std::size_t minibatch_size = 20;
  std::size_t max_candidates = 8;
  int proposal_retries = 3;
  std::optional<AgentConfig> initial_agent;
};

// Validates and applies defaults. Relative paths resolve against `base_dir`.
// Missing required fields and out-of-range values raise ConfigError naming the field;
// referenced files that do not exist raise ConfigError naming the path.
RunConfig run_config_from_json(const nlohmann::json& j, const std::string& base_dir = ".");
RunConfig load_run_config(const std::string& path);

// Fully resolved form; loading it back yields an equal configuration.
nlohmann::ordered_json to_json(const RunConfig& config);
std::string run_config_digest(const RunConfig& config);

// Agent evolution starts from: the configured initial agent, or the default prompt at the
// task temperature with the vanilla pipeline.
AgentConfig initial_agent(const RunConfig& config);

PaceSettings pace_settings(const RunConfig& config);

std::vector<TaskSample> load_samples(const RunConfig& config);
DatasetSplits load_splits(const RunConfig& config);

// Builds the configured backend over the given samples (needed by the synthetic landscape).
std::unique_ptr<Backend> make_backend(const RunConfig& config, std::span<const TaskSample> samples);

CostModel cost_model(const RunConfig& config);

}  // namespace pace
