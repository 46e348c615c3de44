#include "pace/run_config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "pace/digest.hpp"
#include "pace/errors.hpp"
#include "pace/http_backend.hpp"
#include "pace/scripted_backend.hpp"
#include "pace/synthetic_backend.hpp"

namespace fs = std::filesystem;

namespace pace {
namespace {

template <typename T>
T get(const nlohmann::json& j, const char* key, const std::string& path, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(path + key + ": wrong type");
  }
}

void require(bool ok, const std::string& field, const std::string& rule) {
  if (!ok) throw ConfigError(field + " out of range: " + rule);
}

std::string resolve(const std::string& base_dir, const std::string& p) {
  if (p.empty()) return p;
  const fs::path path(p);
  return path.is_absolute() ? p : (fs::path(base_dir) / path).lexically_normal().string();
}

}  // namespace

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::http: return "http";
    case BackendKind::synthetic: return "synthetic";
    case BackendKind::scripted: return "scripted";
  }
  return "synthetic";
}

RunConfig run_config_from_json(const nlohmann::json& j, const std::string& base_dir) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  RunConfig c;
  if (!j.contains("task")) throw ConfigError("missing field: task");
  c.task = get<std::string>(j, "task", "", "");
  c.kind = task_kind_from_string(c.task);

  if (!j.contains("data") || !j["data"].is_object()) throw ConfigError("missing field: data");
  const auto& data = j["data"];
  if (!data.contains("path")) throw ConfigError("missing field: data.path");
  c.data.path = resolve(base_dir, get<std::string>(data, "path", "data.", ""));
  if (!fs::exists(c.data.path)) throw ConfigError("dataset file not found: " + c.data.path);
  if (data.contains("train_size")) {
    const auto v = get<long long>(data, "train_size", "data.", 0);
    require(v >= 1, "data.train_size", ">= 1");
    c.data.train_size = static_cast<std::size_t>(v);
  }
  const auto test_size = get<long long>(data, "test_size", "data.", 0);
  require(test_size >= 0, "data.test_size", ">= 0");
  c.data.test_size = static_cast<std::size_t>(test_size);

  // Task-specific defaults; explicit fields below override them.
  if (c.kind == TaskKind::numeric) {
    c.task_temperature = 0.6;
    c.max_output_units = 8000;
  }

  if (j.contains("backend")) {
    const auto& b = j["backend"];
    if (!b.is_object()) throw ConfigError("backend must be an object");
    const auto kind = get<std::string>(b, "kind", "backend.", "synthetic");
    if (kind == "http") {
      c.backend.kind = BackendKind::http;
    } else if (kind == "synthetic") {
      c.backend.kind = BackendKind::synthetic;
    } else if (kind == "scripted") {
      c.backend.kind = BackendKind::scripted;
    } else {
      throw ConfigError("backend.kind: unknown backend '" + kind + "'");
    }
    c.backend.endpoints = get<std::vector<std::string>>(b, "endpoints", "backend.", {});
    c.backend.model = get<std::string>(b, "model", "backend.", "");
    c.backend.api_key_env = get<std::string>(b, "api_key_env", "backend.", c.backend.api_key_env);
    c.backend.script = resolve(base_dir, get<std::string>(b, "script", "backend.", ""));
    if (b.contains("landscape")) c.backend.landscape = b["landscape"];
    if (b.contains("seed")) c.backend.seed = get<std::uint64_t>(b, "seed", "backend.", 0);
    c.backend.supports_diagnosis = get<bool>(b, "supports_diagnosis", "backend.", true);
    c.backend.max_attempts = get<int>(b, "max_attempts", "backend.", 3);
    c.backend.backoff_ms = get<int>(b, "backoff_ms", "backend.", 200);
    require(c.backend.max_attempts >= 1, "backend.max_attempts", ">= 1");
    require(c.backend.backoff_ms >= 0, "backend.backoff_ms", ">= 0");
  }
  if (c.backend.kind == BackendKind::http && c.backend.endpoints.empty())
    throw ConfigError("missing field: backend.endpoints");
  if (c.backend.kind == BackendKind::scripted) {
    if (c.backend.script.empty()) throw ConfigError("missing field: backend.script");
    if (!fs::exists(c.backend.script)) throw ConfigError("script file not found: " + c.backend.script);
  }

  c.seed = get<std::uint64_t>(j, "seed", "", 0);
  if (j.contains("epsilon")) c.epsilon = epsilon_from_json(j["epsilon"]);
  c.delta = get<double>(j, "delta", "", 0.02);
  require(c.delta == -1.0 || (c.delta >= 0.0 && c.delta < 1.0), "delta", "-1 (disabled) or in [0, 1)");
  c.K = get<int>(j, "K", "", 20);
  require(c.K >= 0 && c.K <= 1000, "K", "0 <= K <= 1000");
  c.L = get<int>(j, "L", "", 5);
  require(c.L >= 1 && c.L <= 1000, "L", "1 <= L <= 1000");
  c.budget = get<double>(j, "budget", "", kUnlimited);
  require(c.budget == kUnlimited || c.budget > 0.0, "budget", "> 0, or -1 for unlimited");
  c.evolution_budget = get<double>(j, "evolution_budget", "", kUnlimited);
  require(c.evolution_budget == kUnlimited || c.evolution_budget > 0.0, "evolution_budget",
          "> 0, or -1 for unlimited");

  if (j.contains("temperatures")) {
    const auto& t = j["temperatures"];
    c.task_temperature = get<double>(t, "task", "temperatures.", c.task_temperature);
    c.reflection_temperature = get<double>(t, "reflection", "temperatures.", c.reflection_temperature);
  }
  require(c.task_temperature >= 0.0 && c.task_temperature <= 2.0, "temperatures.task", "[0, 2]");
  require(c.reflection_temperature >= 0.0 && c.reflection_temperature <= 2.0, "temperatures.reflection", "[0, 2]");

  c.workers = get<int>(j, "workers", "", 4);
  require(c.workers >= 1 && c.workers <= 256, "workers", "[1, 256]");
  c.deterministic = get<bool>(j, "deterministic", "", false);

  if (j.contains("validation")) {
    const auto& v = j["validation"];
    const auto mode = get<std::string>(v, "mode", "validation.", "fresh");
    if (mode == "fresh") {
      c.validation_mode = ValidationMode::fresh;
    } else if (mode == "fixed") {
      c.validation_mode = ValidationMode::fixed;
      c.size_range = {12, 12};
    } else {
      throw ConfigError("validation.mode: expected fresh or fixed");
    }
    if (v.contains("size_range")) {
      const auto r = get<std::vector<long long>>(v, "size_range", "validation.", {});
      if (r.size() != 2) throw ConfigError("validation.size_range: expected [lo, hi]");
      require(r[0] >= 1 && r[0] <= r[1], "validation.size_range", "1 <= lo <= hi");
      c.size_range = {static_cast<std::size_t>(r[0]), static_cast<std::size_t>(r[1])};
    }
    const auto val_size = get<long long>(v, "val_size", "validation.", 100);
    require(val_size >= 1, "validation.val_size", ">= 1");
    c.val_size = static_cast<std::size_t>(val_size);
  }

  c.max_output_units = get<int>(j, "max_output_units", "", c.max_output_units);
  require(c.max_output_units > 0, "max_output_units", "> 0");
  c.chars_per_unit = get<double>(j, "chars_per_unit", "", 1.0);
  require(c.chars_per_unit > 0.0, "chars_per_unit", "> 0");
  const auto minibatch = get<long long>(j, "minibatch_size", "", 20);
  require(minibatch >= 1, "minibatch_size", ">= 1");
  c.minibatch_size = static_cast<std::size_t>(minibatch);
  const auto max_candidates = get<long long>(j, "max_candidates", "", 8);
  require(max_candidates >= 1 && max_candidates <= 64, "max_candidates", "[1, 64]");
  c.max_candidates = static_cast<std::size_t>(max_candidates);
  c.proposal_retries = get<int>(j, "proposal_retries", "", 3);
  require(c.proposal_retries >= 1 && c.proposal_retries <= 10, "proposal_retries", "[1, 10]");

  if (j.contains("initial_agent")) {
    const auto& a = j["initial_agent"];
    AgentConfig agent;
    if (a.contains("prompt")) agent.prompt = prompt_from_json(a["prompt"]);
    if (a.contains("logic"))
      agent.logic = a["logic"].is_string() ? canonical_pipeline(a["logic"].get<std::string>())
                                           : pipeline_from_json(a["logic"]);
    else
      agent.logic = canonical_pipeline("vanilla");
    const auto violations = validate_pipeline(agent.logic);
    if (!violations.empty()) throw ConfigError("initial_agent.logic: " + violations.front());
    c.initial_agent = agent;
  }
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("run config not found: " + path);
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("run config is not valid JSON: " + path);
  return run_config_from_json(j, fs::path(path).parent_path().string().empty()
                                     ? std::string(".")
                                     : fs::path(path).parent_path().string());
}

nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["task"] = c.task;
  j["data"]["path"] = fs::absolute(c.data.path).lexically_normal().string();
  if (c.data.train_size) j["data"]["train_size"] = *c.data.train_size;
  j["data"]["test_size"] = c.data.test_size;
  auto& b = j["backend"];
  b["kind"] = to_string(c.backend.kind);
  b["endpoints"] = c.backend.endpoints;
  b["model"] = c.backend.model;
  b["api_key_env"] = c.backend.api_key_env;
  b["script"] = c.backend.script.empty() ? std::string() : fs::absolute(c.backend.script).lexically_normal().string();
  b["landscape"] = nlohmann::ordered_json::parse(c.backend.landscape.dump());
  if (c.backend.seed) b["seed"] = *c.backend.seed;
  b["supports_diagnosis"] = c.backend.supports_diagnosis;
  b["max_attempts"] = c.backend.max_attempts;
  b["backoff_ms"] = c.backend.backoff_ms;
  j["seed"] = c.seed;
  j["epsilon"] = to_json(c.epsilon);
  j["delta"] = c.delta;
  j["K"] = c.K;
  j["L"] = c.L;
  j["budget"] = c.budget;
  j["evolution_budget"] = c.evolution_budget;
  j["temperatures"] = {{"task", c.task_temperature}, {"reflection", c.reflection_temperature}};
  j["workers"] = c.workers;
  j["deterministic"] = c.deterministic;
  j["validation"] = {{"mode", c.validation_mode == ValidationMode::fixed ? "fixed" : "fresh"},
                     {"size_range", {c.size_range.first, c.size_range.second}},
                     {"val_size", c.val_size}};
  j["max_output_units"] = c.max_output_units;
  j["chars_per_unit"] = c.chars_per_unit;
  j["minibatch_size"] = c.minibatch_size;
  j["max_candidates"] = c.max_candidates;
  j["proposal_retries"] = c.proposal_retries;
  if (c.initial_agent) j["initial_agent"] = to_json(*c.initial_agent);
  return j;
}

std::string run_config_digest(const RunConfig& config) { return digest_hex(to_json(config).dump()); }

AgentConfig initial_agent(const RunConfig& config) {
  if (config.initial_agent) return *config.initial_agent;
  AgentConfig agent;
  agent.prompt.temperature = config.task_temperature;
  agent.logic = canonical_pipeline("vanilla");
  return agent;
}

PaceSettings pace_settings(const RunConfig& c) {
  PaceSettings s;
  s.initial = initial_agent(c);
  s.epsilon = c.epsilon;
  s.delta = c.delta;
  s.K = c.K;
  s.L = c.L;
  s.budget = c.budget;
  s.evolution_budget = c.evolution_budget;
  s.minibatch_size = c.minibatch_size;
  s.candidates.max_candidates = c.max_candidates;
  s.candidates.reflection_temperature = c.reflection_temperature;
  s.eval.workers = c.workers;
  s.eval.deterministic = c.deterministic;
  s.eval.max_output_units = c.max_output_units;
  s.chars_per_unit = c.chars_per_unit;
  s.validation_mode = c.validation_mode;
  s.size_range = c.size_range;
  s.val_size = c.val_size;
  s.proposal_retries = c.proposal_retries;
  s.seed = c.seed;
  return s;
}

std::vector<TaskSample> load_samples(const RunConfig& config) { return load_dataset(config.data.path, config.kind); }

DatasetSplits load_splits(const RunConfig& config) {
  auto samples = load_samples(config);
  if (config.data.test_size > samples.size())
    throw ConfigError("data.test_size exceeds the dataset size " + std::to_string(samples.size()));
  const auto train = config.data.train_size.value_or(samples.size() - config.data.test_size);
  return make_splits(std::move(samples), train, config.data.test_size, config.seed);
}

CostModel cost_model(const RunConfig& config) { return CostModel{config.chars_per_unit}; }

std::unique_ptr<Backend> make_backend(const RunConfig& config, std::span<const TaskSample> samples) {
  const auto cost = cost_model(config);
  switch (config.backend.kind) {
    case BackendKind::synthetic:
      return std::make_unique<SyntheticBackend>(landscape_from_json(config.backend.landscape, samples),
                                                config.backend.seed.value_or(config.seed), cost);
    case BackendKind::scripted:
      return std::make_unique<ScriptedBackend>(Script::load(config.backend.script), cost,
                                               config.backend.supports_diagnosis);
    case BackendKind::http: {
      HttpOptions options;
      options.model = config.backend.model;
      if (const char* key = std::getenv(config.backend.api_key_env.c_str())) options.api_key = key;
      options.max_attempts = config.backend.max_attempts;
      options.backoff = std::chrono::milliseconds(config.backend.backoff_ms);
      options.cost = cost;
      return std::make_unique<HttpBackend>(config.backend.endpoints, options);
    }
  }
  throw ConfigError("unknown backend kind");
}

}  // namespace pace
