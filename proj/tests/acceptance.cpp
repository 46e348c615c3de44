// Acceptance checks. Prints one PASS/FAIL line per criterion and exits non-zero on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "pace/cli.hpp"
#include "pace/controller.hpp"
#include "pace/evaluation.hpp"
#include "pace/report.hpp"
#include "pace/run_config.hpp"
#include "pace/scripted_backend.hpp"
#include "pace/synthetic_backend.hpp"
#include "pace/trajectory.hpp"

using namespace pace;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

// Sums every response that passes through, for ledger identity checks.
class SummingBackend final : public Backend {
 public:
  explicit SummingBackend(Backend& inner) : inner_(inner) {}
  GenerationResponse generate(const GenerationRequest& request) override {
    auto r = inner_.generate(request);
    std::lock_guard lock(mu_);
    sum_.input_units += r.input_units;
    sum_.output_units += r.output_units;
    sum_.calls += 1;
    return r;
  }
  bool supports_diagnosis() const override { return inner_.supports_diagnosis(); }
  Usage sum() const { return sum_; }

 private:
  Backend& inner_;
  std::mutex mu_;
  Usage sum_;
};

bool same_usage(const Usage& a, const Usage& b) {
  return a.input_units == b.input_units && a.output_units == b.output_units && a.calls == b.calls;
}

PaceSettings base_settings(std::uint64_t seed) {
  PaceSettings s;
  s.initial = AgentConfig{PromptConfig{}, canonical_pipeline("vanilla")};
  s.seed = seed;
  s.eval.workers = 4;
  return s;
}

struct ScriptedRun {
  PaceResult result;
  std::vector<TrajectoryEvent> events;
  bool replay_identical = false;
};

// Records a run against the surrogate, then runs it again from the recorded script alone.
ScriptedRun scripted_run(const PaceSettings& settings, const std::vector<TaskSample>& samples,
                         const nlohmann::json& landscape, std::uint64_t backend_seed) {
  SyntheticBackend synthetic(landscape_from_json(landscape, samples), backend_seed);
  RecordingBackend recorder(synthetic);
  TrajectoryLog recorded;
  run_pace(settings, samples, recorder, recorded);

  ScriptedBackend scripted(recorder.script(), CostModel{}, synthetic.supports_diagnosis());
  TrajectoryLog replayed;
  ScriptedRun out;
  out.result = run_pace(settings, samples, scripted, replayed);
  out.events = replayed.events();
  out.replay_identical = recorded.events().size() == replayed.events().size();
  for (std::size_t i = 0; out.replay_identical && i < out.events.size(); ++i)
    out.replay_identical = to_json(recorded.events()[i]).dump() == to_json(out.events[i]).dump();
  return out;
}

// Accounting identities computed from the event stream only.
bool proposal_identity(std::span<const TrajectoryEvent> events) {
  const auto f = build_report(events).filtering;
  return f.proposed == f.executable + f.non_executable && f.executable == f.accepted + f.rejected;
}

int identity_runs = 0;
int identity_failures = 0;

void track_identity(std::span<const TrajectoryEvent> events) {
  ++identity_runs;
  if (!proposal_identity(events)) ++identity_failures;
}

nlohmann::json pipeline_menu_entry(double weight, const std::string& category, const nlohmann::json& pipeline) {
  return {{"weight", weight}, {"category", category}, {"pipeline", pipeline}};
}

const nlohmann::json kNumericExtract = nlohmann::json::parse(
    R"({"stages": [{"kind": "Sample", "n": 1}, {"kind": "Extract", "extractor": "numeric"}, {"kind": "Return"}]})");

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double stddev(const std::vector<double>& v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// ---------------------------------------------------------------------------

Verdict gate_soundness() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  const std::vector<double> deltas = {0.0, 0.02, 0.05, -1.0};
  int runs = 0, verdicts = 0, bad_commits = 0, dirty_rejections = 0, divergent = 0;

  for (int run = 0; run < 200; ++run) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto samples = fixtures::letter_samples(60, "g" + std::to_string(run) + "-");
    auto landscape = fixtures::plateau_landscape(0.3 + 0.4 * u(rng), 0.6 + 0.4 * u(rng), 0.3 * u(rng));
    nlohmann::json menu = nlohmann::json::array();
    menu.push_back(pipeline_menu_entry(1.0 + 2.0 * u(rng), "aggregation", "self_consistency_verify"));
    menu.push_back(pipeline_menu_entry(1.0 + 2.0 * u(rng), "extraction_hardening", kNumericExtract));
    menu.push_back(pipeline_menu_entry(u(rng) + 0.1, "repair", "score_and_repair"));
    menu.push_back({{"weight", u(rng) + 0.1}, {"reply", "I would rather not change anything."}});
    landscape["proposer"] = menu;

    auto s = base_settings(rng());
    s.K = 4;
    s.L = 1;
    s.minibatch_size = 10;
    s.val_size = 30;
    s.size_range = {5, 15};
    s.delta = deltas[static_cast<std::size_t>(run) % deltas.size()];
    s.epsilon = run % 3 == 0 ? Epsilon{EpsilonMode::threshold, 0.01} : Epsilon{EpsilonMode::bypass, 1.0};
    if (run % 5 == 0) s.validation_mode = ValidationMode::fixed;

    const auto r = scripted_run(s, samples, landscape, rng());
    ++runs;
    if (!r.replay_identical) ++divergent;
    track_identity(r.events);
    for (const auto& e : r.events) {
      if (e.action != Action::adjust_logic || e.payload.value("stage", std::string()) != "verdict") continue;
      ++verdicts;
      const double d = e.payload["utility_new"].get<double>() - e.payload["utility_old"].get<double>();
      if (e.label == std::optional<std::string>("accepted") && s.delta != -1.0 && d <= s.delta) ++bad_commits;
      if (e.label == std::optional<std::string>("rejected") &&
          e.payload["state_before"].get<std::string>() != e.payload["state_after"].get<std::string>())
        ++dirty_rejections;
    }
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ostringstream d;
  d << runs << " runs, " << verdicts << " verdicts, " << bad_commits << " commits at or below delta, "
    << dirty_rejections << " state changes after rejection, " << divergent << " replay divergences, "
    << fmt("%.1f s", seconds);
  return {bad_commits == 0 && dirty_rejections == 0 && divergent == 0 && verdicts > 0 && seconds < 60.0, d.str()};
}

Verdict majority_vote_oracle() {
  std::ostringstream d;
  bool pass = true;
  const auto samples = fixtures::letter_samples(10000, "m");
  const AgentConfig agent{PromptConfig{}, canonical_pipeline("self_consistency_verify")};
  for (double p : {0.5, 0.7, 0.9}) {
    nlohmann::json spec = {{"base", p}, {"cap", 1.0}, {"malformed", 0.0}, {"distractors", "single"}};
    SyntheticBackend backend(landscape_from_json(spec, samples), 17);
    const auto r = evaluate_agent(agent, samples, backend, EvalOptions{8, false, 2048});
    const double oracle = p * p * p + 3 * p * p * (1 - p);
    const bool ok = std::abs(r.utility - oracle) <= 0.01;
    pass = pass && ok;
    d << fmt("p=%.1f %.4f vs %.4f; ", p, r.utility, oracle);
  }
  return {pass, d.str()};
}

Verdict pass_k_enumeration() {
  int cases = 0, mismatches = 0;
  for (int n = 1; n <= 8; ++n) {
    for (int c = 0; c <= n; ++c) {
      for (int k = 1; k <= n; ++k) {
        // Trials 0..c-1 succeed; count k-subsets made only of successes.
        long long all = 0, good = 0;
        for (unsigned mask = 0; mask < (1u << n); ++mask) {
          if (std::popcount(mask) != k) continue;
          ++all;
          if ((mask >> c) == 0) ++good;
        }
        const double brute = static_cast<double>(good) / static_cast<double>(all);
        ++cases;
        if (pass_k(c, n, k) != brute) ++mismatches;
      }
    }
  }
  return {mismatches == 0, std::to_string(cases) + " (c, n, k) cases, " + std::to_string(mismatches) + " mismatches"};
}

Verdict pareto_front() {
  std::mt19937_64 rng(99);
  int mismatches = 0, order_dependent = 0;
  auto key = [](const PromptCandidate& c) { return c.config.role; };
  for (int trial = 0; trial < 1000; ++trial) {
    const auto size = std::uniform_int_distribution<int>(1, 20)(rng);
    std::vector<PromptCandidate> pool;
    for (int i = 0; i < size; ++i) {
      // Coarse grids make ties and duplicates common.
      const double acc = std::uniform_int_distribution<int>(0, 5)(rng) / 5.0;
      const long long cost = std::uniform_int_distribution<int>(1, 6)(rng) * 10;
      pool.push_back(fixtures::candidate(acc, cost, "c" + std::to_string(i)));
    }
    std::vector<std::string> brute;
    for (const auto& a : pool) {
      bool dominated = false;
      for (const auto& b : pool) dominated = dominated || dominates(b, a);
      if (!dominated) brute.push_back(key(a));
    }
    std::sort(brute.begin(), brute.end());

    // Equal (accuracy, cost) points are interchangeable; compare as objective multisets.
    auto objectives = [](std::vector<std::pair<double, long long>> v) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
      return v;
    };
    std::vector<std::pair<double, long long>> brute_points;
    for (const auto& a : pool)
      if (std::binary_search(brute.begin(), brute.end(), key(a))) brute_points.emplace_back(a.minibatch_accuracy, a.cost_units);
    const auto expected = objectives(brute_points);

    std::vector<std::pair<double, long long>> first;
    for (int shuffle = 0; shuffle < 10; ++shuffle) {
      auto order = pool;
      if (shuffle > 0) std::shuffle(order.begin(), order.end(), rng);
      ParetoFront front;
      for (const auto& c : order) front.update(c);
      std::vector<std::pair<double, long long>> got;
      bool members_nondominated = true;
      for (const auto& m : front.members()) {
        got.emplace_back(m.minibatch_accuracy, m.cost_units);
        if (!std::binary_search(brute.begin(), brute.end(), key(m))) members_nondominated = false;
      }
      const auto points = objectives(got);
      if (points != expected || !members_nondominated) ++mismatches;
      if (shuffle == 0) first = points;
      else if (points != first) ++order_dependent;
    }
  }
  return {mismatches == 0 && order_dependent == 0,
          "1000 multisets x 10 orders, " + std::to_string(mismatches) + " mismatches, " +
              std::to_string(order_dependent) + " order-dependent fronts"};
}

// Validated utility held by the run after each outer step.
std::vector<double> per_step_utility(std::span<const TrajectoryEvent> events, int K) {
  const auto curve = build_report(events).curve;
  std::vector<double> out;
  double current = curve.empty() ? 0.0 : curve.front().utility;
  std::size_t i = 0;
  for (int k = 1; k <= K; ++k) {
    while (i < curve.size() && curve[i].outer_step <= k) current = curve[i++].utility;
    out.push_back(current);
  }
  return out;
}

Verdict two_timescale_dynamics() {
  const auto start = std::chrono::steady_clock::now();
  const auto samples = fixtures::letter_samples(700, "f");
  // Majority vote hurts below p = 0.5 and adds about 0.09 at the 0.75 plateau.
  auto landscape = fixtures::plateau_landscape(0.3, 0.75);
  landscape["effects"][0]["accuracy_bonus"] = 0.225;
  landscape["effects"][1]["accuracy_bonus"] = 0.225;
  landscape["proposer"] = nlohmann::json::array(
      {pipeline_menu_entry(2.0, "aggregation", "self_consistency_verify"),
       pipeline_menu_entry(1.0, "extraction_hardening", kNumericExtract),
       {{"weight", 1.0}, {"reply", "Keep the current pipeline."}}});

  constexpr int K = 10;
  auto settings_for = [&](Epsilon eps, std::uint64_t seed) {
    auto s = base_settings(seed);
    s.K = K;
    s.L = 1;
    s.minibatch_size = 20;
    s.val_size = 400;
    s.size_range = {10, 20};
    s.delta = 0.02;
    s.epsilon = eps;
    return s;
  };

  std::vector<double> pe_final, pace_final;
  std::vector<std::vector<double>> bypass_curves, pace_curves;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    for (auto [eps, finals, curves] :
         {std::tuple{Epsilon{EpsilonMode::prompt_only, 0.0}, &pe_final, (std::vector<std::vector<double>>*)nullptr},
          std::tuple{Epsilon{EpsilonMode::threshold, 0.01}, &pace_final, &pace_curves},
          std::tuple{Epsilon{EpsilonMode::bypass, 1.0}, (std::vector<double>*)nullptr, &bypass_curves}}) {
      SyntheticBackend backend(landscape_from_json(landscape, samples), seed);
      TrajectoryLog log;
      const auto r = run_pace(settings_for(eps, seed), samples, backend, log);
      track_identity(log.events());
      if (finals) finals->push_back(r.final_utility);
      if (curves) curves->push_back(per_step_utility(log.events(), K));
    }
  }
  auto spread = [&](const std::vector<std::vector<double>>& curves) {
    std::vector<double> per_step;
    for (int k = 0; k < K; ++k) {
      std::vector<double> column;
      for (const auto& c : curves) column.push_back(c[static_cast<std::size_t>(k)]);
      per_step.push_back(stddev(column));
    }
    return mean(per_step);
  };
  const double u1 = 0.75;
  const double pe = mean(pe_final), pace = mean(pace_final);
  const double sd_bypass = spread(bypass_curves), sd_pace = spread(pace_curves);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool pass = std::abs(pe - u1) <= 0.02 && pace >= u1 + 0.05 && sd_bypass > sd_pace && seconds < 300.0;
  return {pass, fmt("prompt-only final %.3f, full final %.3f, trajectory std bypass %.4f vs full %.4f", pe, pace,
                    sd_bypass, sd_pace) +
                    fmt(", %.1f s", seconds)};
}

Verdict epsilon_delta_sentinels() {
  const auto samples = fixtures::letter_samples(80, "e");
  auto landscape = fixtures::plateau_landscape(0.45, 0.75);
  landscape["proposer"] = nlohmann::json::array({pipeline_menu_entry(1.0, "extraction_hardening", kNumericExtract)});

  auto count_proposals = [](const std::vector<TrajectoryEvent>& events, int outer_step) {
    int n = 0;
    for (const auto& e : events)
      if (e.action == Action::adjust_logic && e.payload.value("stage", std::string()) == "proposal" &&
          (outer_step == 0 || e.outer_step == outer_step))
        ++n;
    return n;
  };
  auto verdict_of = [](const std::vector<TrajectoryEvent>& events) -> std::pair<std::string, double> {
    for (const auto& e : events)
      if (e.action == Action::adjust_logic && e.label)
        return {*e.label, e.payload["utility_new"].get<double>() - e.payload["utility_old"].get<double>()};
    return {"none", 0.0};
  };

  auto s = base_settings(5);
  s.K = 5;
  s.L = 1;
  s.minibatch_size = 10;
  s.val_size = 40;
  s.epsilon = Epsilon{EpsilonMode::prompt_only, 0.0};
  const auto prompt_only = scripted_run(s, samples, landscape, 5);
  track_identity(prompt_only.events);

  s.K = 1;
  s.epsilon = Epsilon{EpsilonMode::bypass, 1.0};
  const auto bypass = scripted_run(s, samples, landscape, 5);
  track_identity(bypass.events);

  s.delta = 0.02;
  const auto gated = scripted_run(s, samples, landscape, 5);
  s.delta = -1.0;
  const auto open = scripted_run(s, samples, landscape, 5);
  track_identity(gated.events);
  track_identity(open.events);
  const auto [gated_label, gated_delta] = verdict_of(gated.events);
  const auto [open_label, open_delta] = verdict_of(open.events);

  const int po = count_proposals(prompt_only.events, 0);
  const int by = count_proposals(bypass.events, 1);
  const bool pass = po == 0 && by >= 1 && gated_label == "rejected" && open_label == "accepted" && open_delta < 0.0 &&
                    gated_delta == open_delta;
  std::ostringstream d;
  d << "prompt-only proposals " << po << ", bypass proposals in step 1: " << by << ", regressing edit ("
    << fmt("%+.3f", open_delta) << ") " << gated_label << " at delta 0.02, " << open_label << " at delta -1";
  return {pass, d.str()};
}

Verdict call_counts_and_cost() {
  std::ostringstream d;
  bool pass = true;

  const auto letters = fixtures::letter_samples(2000, "c");
  nlohmann::json spec = {{"base", 0.6}, {"cap", 1.0}, {"malformed", 0.1}, {"distractors", "all"}};
  SyntheticBackend letter_backend(landscape_from_json(spec, letters), 3);
  SummingBackend letter_sum(letter_backend);
  const auto scv = evaluate_agent(AgentConfig{PromptConfig{}, canonical_pipeline("self_consistency_verify")}, letters,
                                  letter_sum, EvalOptions{8, false, 2048});
  long long scv_max = 0;
  Usage scv_records;
  for (const auto& r : scv.records) {
    scv_max = std::max(scv_max, r.outcome.usage.calls);
    scv_records += r.outcome.usage;
  }
  pass = pass && scv_max <= 2 && same_usage(scv.usage, letter_sum.sum()) && same_usage(scv_records, scv.usage);

  std::vector<TaskSample> constrained;
  for (int i = 0; i < 1000; ++i) {
    auto s = fixtures::constrained_sample(fixtures::sample_id("k", static_cast<std::size_t>(i)),
                                          {{{"kind", "case"}, {"mode", "lower"}}});
    s.metadata["synthetic_compliant"] = "rivers run to the sea";
    s.metadata["synthetic_violating"] = "Rivers Run To The Sea";
    constrained.push_back(std::move(s));
  }
  nlohmann::json cspec = {{"base", 0.3}, {"cap", 1.0}, {"malformed", 0.0}, {"judge_accuracy", 0.7}};
  SyntheticBackend constrained_backend(landscape_from_json(cspec, constrained), 4);
  SummingBackend constrained_sum(constrained_backend);
  const auto sar = evaluate_agent(AgentConfig{PromptConfig{}, canonical_pipeline("score_and_repair")}, constrained,
                                  constrained_sum, EvalOptions{8, false, 2048});
  long long sar_max = 0;
  int sar_at_max = 0;
  for (const auto& r : sar.records) sar_max = std::max(sar_max, r.outcome.usage.calls);
  for (const auto& r : sar.records) sar_at_max += r.outcome.usage.calls == sar_max;
  pass = pass && sar_max <= 5 && same_usage(sar.usage, constrained_sum.sum());

  // A whole run: the ledger must equal the sum over every backend response.
  const auto samples = fixtures::letter_samples(120, "l");
  auto landscape = fixtures::plateau_landscape(0.45, 0.75, 0.1);
  landscape["proposer"] = nlohmann::json::array({pipeline_menu_entry(1.0, "aggregation", "self_consistency_verify")});
  SyntheticBackend run_backend(landscape_from_json(landscape, samples), 8);
  SummingBackend run_sum(run_backend);
  auto s = base_settings(8);
  s.K = 4;
  s.L = 2;
  s.minibatch_size = 10;
  s.val_size = 50;
  s.epsilon = Epsilon{EpsilonMode::bypass, 1.0};
  TrajectoryLog log;
  const auto run = run_pace(s, samples, run_sum, log);
  track_identity(log.events());
  Usage from_events;
  for (const auto& e : log.events()) from_events += e.usage;
  const bool ledger_ok = same_usage(run.state.ledger.total(), run_sum.sum());
  const bool events_ok = same_usage(from_events, run_sum.sum()) || log.events().empty();
  pass = pass && ledger_ok;

  const auto multiplier = format_multiplier(470, 1710);
  pass = pass && multiplier == "3.6";

  d << "max calls per query: self_consistency_verify " << scv_max << ", score_and_repair " << sar_max << " ("
    << sar_at_max << " queries); ledger " << (ledger_ok ? "equals" : "differs from") << " per-call sums ("
    << run_sum.sum().calls << " calls, " << run_sum.sum().total_units() << " units"
    << (events_ok ? "" : ", event deltas differ") << "); multiplier 470 -> 1710 = " << multiplier << "x";
  return {pass, d.str()};
}

Verdict failure_shift() {
  const auto samples = fixtures::letter_samples(300, "s");
  nlohmann::json landscape = {{"base", 0.55},
                              {"cap", 1.0},
                              {"malformed", 0.3},
                              {"distractors", "single"},
                              {"effects", {{{"directive", "Answer with one letter only."}, {"malformed_reduction", 0.3}}}}};
  int ok = 0;
  std::ostringstream d;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SyntheticBackend backend(landscape_from_json(landscape, samples), seed);
    auto s = base_settings(seed);
    s.K = 4;
    s.L = 3;
    s.minibatch_size = 20;
    s.val_size = 150;
    s.epsilon = Epsilon{EpsilonMode::threshold, 0.01};
    TrajectoryLog log;
    run_pace(s, samples, backend, log);
    track_identity(log.events());
    const auto tax = build_report(log.events()).taxonomy;
    if (tax.size() < 2) continue;
    const auto ext = static_cast<std::size_t>(FailureCategory::extraction_runtime);
    const auto rea = static_cast<std::size_t>(FailureCategory::reasoning_content);
    const bool shifted = tax[1].share(ext) < tax[0].share(ext) && tax[1].share(rea) >= tax[0].share(rea);
    ok += shifted;
    if (seed == 1)
      d << fmt("seed 1: extraction share %.2f -> %.2f, reasoning share %.2f -> %.2f; ", tax[0].share(ext),
               tax[1].share(ext), tax[0].share(rea), tax[1].share(rea));
  }
  d << ok << "/10 seeds shift";
  return {ok == 10, d.str()};
}

Verdict determinism_and_replay() {
  fixtures::TempDir dir("pace-accept");
  fixtures::write_samples(dir.file("data.jsonl"), fixtures::letter_samples(160, "d"));
  auto landscape = fixtures::plateau_landscape(0.45, 0.75, 0.1);
  landscape["proposer"] = nlohmann::json::array({pipeline_menu_entry(2.0, "aggregation", "self_consistency_verify"),
                                                 {{"weight", 1.0}, {"reply", "no change"}}});
  nlohmann::json config = {{"task", "mmlu"},
                           {"data", {{"path", "data.jsonl"}, {"test_size", 20}}},
                           {"seed", 21},
                           {"K", 5},
                           {"L", 2},
                           {"epsilon", 1.0},
                           {"workers", 4},
                           {"validation", {{"size_range", {10, 20}}, {"val_size", 60}}},
                           {"backend", {{"kind", "synthetic"}, {"landscape", landscape}}}};
  fixtures::write_text(dir.file("run.json"), config.dump(2));

  auto cli = [](std::vector<std::string> args, std::string* out_text = nullptr) {
    args.insert(args.begin(), "pace");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int status = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    if (out_text) *out_text = out.str() + err.str();
    return status;
  };

  bool pass = true;
  std::string replay_text, scripted_replay_text;
  pass = pass && cli({"evolve", "--config", dir.file("run.json"), "--out", dir.file("a")}) == 0;
  pass = pass && cli({"evolve", "--config", dir.file("run.json"), "--out", dir.file("b")}) == 0;
  const auto ta = fixtures::read_text(dir.file("a/trajectory.jsonl"));
  const auto tb = fixtures::read_text(dir.file("b/trajectory.jsonl"));
  const bool identical = !ta.empty() && ta == tb;
  pass = pass && identical && cli({"replay", "--out", dir.file("a")}, &replay_text) == 0;
  pass = pass && replay_text.find("no divergence") != std::string::npos;

  // Evolve again with the recorded script as the backend, then replay that run.
  config["backend"] = {{"kind", "scripted"}, {"script", dir.file("a/script.jsonl")}, {"supports_diagnosis", false}};
  fixtures::write_text(dir.file("scripted.json"), config.dump(2));
  pass = pass && cli({"evolve", "--config", dir.file("scripted.json"), "--out", dir.file("c")}) == 0;
  pass = pass && cli({"replay", "--out", dir.file("c")}, &scripted_replay_text) == 0;
  pass = pass && scripted_replay_text.find("no divergence") != std::string::npos;
  const auto events = load_trajectory(dir.file("c/trajectory.jsonl")).events;
  track_identity(events);

  std::ostringstream d;
  d << "same-seed trajectories " << (identical ? "byte-identical" : "differ") << " (" << std::count(ta.begin(), ta.end(), '\n')
    << " lines); " << replay_text.substr(0, replay_text.find('\n')) << "; scripted backend: "
    << scripted_replay_text.substr(0, scripted_replay_text.find('\n'));
  return {pass, d.str()};
}

Verdict proposal_identity_check() {
  return {identity_runs > 0 && identity_failures == 0,
          std::to_string(identity_runs) + " trajectories checked, " + std::to_string(identity_failures) + " violations"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"gate soundness", gate_soundness},
      {"majority-vote oracle", majority_vote_oracle},
      {"pass^k enumeration", pass_k_enumeration},
      {"pareto front", pareto_front},
      {"two-timescale dynamics", two_timescale_dynamics},
      {"epsilon and delta sentinels", epsilon_delta_sentinels},
      {"call counts and cost accounting", call_counts_and_cost},
      {"failure shift", failure_shift},
      {"determinism and replay", determinism_and_replay},
      {"proposal accounting identity", proposal_identity_check},
  };
  int failed = 0;
  int index = 0;
  for (const auto& [name, check] : criteria) {
    ++index;
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << "  " << index << ". " << name << ": " << v.detail << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
