#include "pace/cli.hpp"

#include <filesystem>
#include <fstream>
#include <memory>
#include <random>

#include <CLI11.hpp>

#include "pace/control_evolution.hpp"
#include "pace/controller.hpp"
#include "pace/errors.hpp"
#include "pace/evaluation.hpp"
#include "pace/report.hpp"
#include "pace/run_config.hpp"
#include "pace/scripted_backend.hpp"
#include "pace/trajectory.hpp"

namespace fs = std::filesystem;

namespace pace {

void save_agent_file(const std::string& path, const AgentConfig& agent, const std::string& run_config_digest) {
  nlohmann::ordered_json j;
  j["schema"] = kAgentSchema;
  j["prompt"] = to_json(agent.prompt);
  j["logic"] = to_json(agent.logic);
  j["run_config_digest"] = run_config_digest;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write agent file " + path);
  out << j.dump(2) << '\n';
}

AgentConfig load_agent_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("agent file not found: " + path);
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ConfigError("agent file is not a JSON object: " + path);
  if (j.value("schema", std::string()) != kAgentSchema) throw ConfigError("agent file has an unknown schema: " + path);
  return agent_from_json(j);
}

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string backend_url;
  bool deterministic = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool needs_config) {
  auto* opt = cmd->add_option("--config", flags.config, "Run configuration file (JSON)");
  if (needs_config) opt->required();
  cmd->add_option("--seed", flags.seed, "Override the run seed");
  cmd->add_option("--backend-url", flags.backend_url, "Use this chat-completion endpoint");
  cmd->add_flag("--deterministic", flags.deterministic, "Evaluate sequentially for replayable order");
}

RunConfig configure(const CommonFlags& flags) {
  auto config = load_run_config(flags.config);
  if (flags.seed) config.seed = *flags.seed;
  if (!flags.backend_url.empty()) {
    config.backend.kind = BackendKind::http;
    config.backend.endpoints = {flags.backend_url};
  }
  if (flags.deterministic) config.deterministic = true;
  return config;
}

void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<TaskSample> all_samples(const DatasetSplits& splits) {
  auto all = splits.train_pool;
  all.insert(all.end(), splits.test_set.begin(), splits.test_set.end());
  return all;
}

nlohmann::ordered_json header_for(const RunConfig& config, const Backend& backend) {
  return trajectory_header({{"run_config_digest", run_config_digest(config)},
                            {"task", config.task},
                            {"seed", config.seed},
                            {"backend", to_string(config.backend.kind)},
                            {"supports_diagnosis", backend.supports_diagnosis()}});
}

int cmd_evolve(const CommonFlags& flags, std::ostream& out) {
  const auto config = configure(flags);
  const fs::path dir = flags.out.empty() ? fs::path("runs") / "latest" : fs::path(flags.out);
  fs::create_directories(dir);
  write_json(dir / "run_config.json", to_json(config));

  const auto splits = load_splits(config);
  const auto samples = all_samples(splits);
  auto inner = make_backend(config, samples);
  RecordingBackend backend(*inner);
  TrajectoryLog log((dir / "trajectory.jsonl").string(), header_for(config, *inner));
  const auto result = run_pace(pace_settings(config), splits.train_pool, backend, log);

  save_agent_file((dir / "agent.json").string(), result.final_agent, run_config_digest(config));
  backend.script().save((dir / "script.jsonl").string());

  const auto& s = result.state.stats;
  out << "initial utility " << result.initial_utility << "\n"
      << "final utility " << result.final_utility << "\n"
      << "outer steps " << result.state.outer_step << ", proposals " << s.proposed << " (executable "
      << s.executable << ", accepted " << s.accepted << ", rejected " << s.rejected << ")\n"
      << "total cost units " << result.state.ledger.total_units() << "\n"
      << (result.stopped_on_budget ? "stopped: evolution budget exhausted\n" : "")
      << "wrote " << dir.string() << "\n";
  return 0;
}

int cmd_evaluate(const CommonFlags& flags, const std::string& agent_path, const std::string& split,
                 std::ostream& out, std::ostream& err) {
  const auto config = configure(flags);
  const auto agent = load_agent_file(agent_path);
  const auto splits = load_splits(config);
  std::vector<TaskSample> chosen;
  if (split == "test") {
    chosen = splits.test_set;
  } else if (split == "train") {
    chosen = splits.train_pool;
  } else if (split == "validation") {
    std::mt19937_64 rng(config.seed);
    if (!splits.train_pool.empty()) chosen = split_validation(splits.train_pool, config.val_size, rng).validation;
  } else {
    err << "unknown split '" << split << "' (expected train, validation or test)\n";
    return 2;
  }
  if (chosen.empty()) {
    err << "split '" << split << "' is empty; nothing to evaluate\n";
    return 1;
  }
  auto backend = make_backend(config, all_samples(splits));
  EvalOptions options{config.workers, config.deterministic, config.max_output_units};
  const auto result = evaluate_agent(agent, chosen, *backend, options);
  nlohmann::ordered_json j;
  j["split"] = split;
  j["samples"] = chosen.size();
  j["utility"] = result.utility;
  j["cost_per_query"] = result.cost_per_query;
  j["calls"] = result.usage.calls;
  j["backend_errors"] = result.backend_errors;
  out << j.dump(2) << "\n";
  return 0;
}

int cmd_compare(const CommonFlags& flags, const std::string& a_path, const std::string& b_path, std::ostream& out) {
  const auto config = configure(flags);
  const auto a = load_agent_file(a_path);
  const auto b = load_agent_file(b_path);
  const auto splits = load_splits(config);
  std::mt19937_64 rng(config.seed);
  const auto range = config.validation_mode == ValidationMode::fixed
                         ? std::pair{config.size_range.first, config.size_range.first}
                         : config.size_range;
  const auto ids = sample_validation_subset(splits.train_pool, rng, range);
  std::vector<TaskSample> subset;
  for (const auto& s : splits.train_pool)
    if (std::binary_search(ids.begin(), ids.end(), s.id)) subset.push_back(s);
  std::sort(subset.begin(), subset.end(), [](const auto& x, const auto& y) { return x.id < y.id; });
  auto backend = make_backend(config, all_samples(splits));
  EvalOptions options{config.workers, config.deterministic, config.max_output_units};
  const auto report = ab_compare(a, b, subset, *backend, config.delta, options);
  out << to_json(report).dump(2) << "\n";
  return 0;
}

int cmd_report(const std::string& trajectory, const std::string& out_dir, bool plot, std::ostream& out) {
  const auto loaded = load_trajectory(trajectory);
  const auto b = emit_report(loaded.events, out_dir, plot);
  auto opt = [](const std::optional<double>& v) { return v ? std::to_string(*v) : std::string("-"); };
  out << "vanilla " << opt(b.accuracy.vanilla) << ", +PE " << opt(b.accuracy.prompt_evolved) << ", +PACE "
      << opt(b.accuracy.pace) << "\n"
      << "proposals " << b.filtering.proposed << ", executable " << b.filtering.executable << ", accepted "
      << b.filtering.accepted << ", rejected " << b.filtering.rejected << " (regression "
      << b.filtering.rejected_regression << ")\n";
  if (b.usage.size() == 2)
    out << "cost multiplier " << format_multiplier(b.usage[0].cost_per_query, b.usage[1].cost_per_query) << "x\n";
  out << "wrote " << out_dir << "\n";
  return 0;
}

int cmd_replay(const std::string& run_dir, std::ostream& out, std::ostream& err) {
  const fs::path dir(run_dir);
  const auto config = load_run_config((dir / "run_config.json").string());
  const auto recorded = load_trajectory((dir / "trajectory.jsonl").string());
  const auto script = Script::load((dir / "script.jsonl").string());
  const auto splits = load_splits(config);
  ScriptedBackend backend(script, cost_model(config), recorded.header.value("supports_diagnosis", true));

  TrajectoryLog log;
  try {
    run_pace(pace_settings(config), splits.train_pool, backend, log);
  } catch (const ScriptMissError& e) {
    err << "divergence: replay issued an unrecorded request (" << e.what() << ")\n";
    return 1;
  }
  const auto& replayed = log.events();
  const auto n = std::min(replayed.size(), recorded.events.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = to_json(recorded.events[i]);
    const auto b = to_json(replayed[i]);
    if (a.dump() != b.dump()) {
      err << "divergence at step " << recorded.events[i].step << " (" << to_string(recorded.events[i].action)
          << ")\n";
      for (const auto& [key, value] : a.items())
        if (!b.contains(key) || b[key] != value)
          err << "  " << key << ": recorded " << value.dump() << ", replayed " << (b.contains(key) ? b[key].dump() : "-")
              << "\n";
      return 1;
    }
  }
  if (replayed.size() != recorded.events.size()) {
    err << "divergence: recorded " << recorded.events.size() << " events, replay produced " << replayed.size()
        << "\n";
    return 1;
  }
  out << "replayed " << n << " events: no divergence\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-timescale evolution of prompt and control logic for a frozen language model", "pace"};
  app.require_subcommand(1);

  CommonFlags evolve_flags;
  auto* evolve = app.add_subcommand("evolve", "Run prompt and control-logic evolution end to end");
  add_common(evolve, evolve_flags, true);
  evolve->add_option("--out", evolve_flags.out, "Output directory (default runs/latest)");

  CommonFlags eval_flags;
  std::string eval_agent, eval_split = "test";
  auto* evaluate = app.add_subcommand("evaluate", "Score an agent file on a split");
  add_common(evaluate, eval_flags, true);
  evaluate->add_option("--agent", eval_agent, "Agent file")->required();
  evaluate->add_option("--split", eval_split, "train, validation or test (default test)");

  CommonFlags compare_flags;
  std::string agent_a, agent_b;
  auto* compare = app.add_subcommand("compare", "A/B compare two agent files on a sampled subset");
  add_common(compare, compare_flags, true);
  compare->add_option("--agent-a", agent_a, "Incumbent agent file")->required();
  compare->add_option("--agent-b", agent_b, "Challenger agent file")->required();

  std::string trajectory, report_out;
  bool plot = false;
  auto* report = app.add_subcommand("report", "Turn a trajectory into report tables");
  report->add_option("--trajectory", trajectory, "trajectory.jsonl")->required();
  report->add_option("--out", report_out, "Output directory")->required();
  report->add_flag("--plot", plot, "Also write curve.svg");

  std::string run_dir;
  auto* replay = app.add_subcommand("replay", "Re-run an evolve output directory against its recorded replies");
  replay->add_option("--out", run_dir, "Directory written by evolve")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*evolve) return cmd_evolve(evolve_flags, out);
    if (*evaluate) return cmd_evaluate(eval_flags, eval_agent, eval_split, out, err);
    if (*compare) return cmd_compare(compare_flags, agent_a, agent_b, out);
    if (*report) return cmd_report(trajectory, report_out, plot, out);
    if (*replay) return cmd_replay(run_dir, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  err << app.help();
  return 2;
}

}  // namespace pace
