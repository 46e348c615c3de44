#include "pace/prompt_evolution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pace/errors.hpp"
#include "pace/solver.hpp"

namespace pace {

const std::vector<std::string> kDirectiveLibrary = {
    "Think step by step.",
    "Answer with one letter only.",
    "Double-check your final answer.",
    "Eliminate clearly wrong options first.",
    "Keep the reasoning brief.",
};

const std::vector<std::string> kRoleVariants = {
    "You are a careful assistant. Solve the task and state your final answer clearly.",
    "You are an expert problem solver. Work through the task and give a clear final answer.",
    "You are a precise assistant. Read the task closely and answer exactly what is asked.",
};

std::string_view to_string(CandidateOrigin origin) {
  switch (origin) {
    case CandidateOrigin::seed: return "seed";
    case CandidateOrigin::mutation: return "mutation";
    case CandidateOrigin::reflection: return "reflection";
    case CandidateOrigin::crossover: return "crossover";
  }
  return "seed";
}

bool dominates(const PromptCandidate& a, const PromptCandidate& b) {
  const bool no_worse = a.minibatch_accuracy >= b.minibatch_accuracy && a.cost_units <= b.cost_units;
  const bool better = a.minibatch_accuracy > b.minibatch_accuracy || a.cost_units < b.cost_units;
  return no_worse && better;
}

bool ParetoFront::update(const PromptCandidate& candidate) {
  for (const auto& m : members_)
    if (dominates(m, candidate)) return false;
  std::erase_if(members_, [&](const PromptCandidate& m) { return dominates(candidate, m); });
  members_.push_back(candidate);
  return true;
}

std::size_t sample_parent(const ParetoFront& front, std::mt19937_64& rng) {
  if (front.empty()) throw ContractViolation("sample_parent on an empty front");
  std::vector<double> weights;
  double total = 0.0;
  for (const auto& m : front.members()) {
    weights.push_back(static_cast<double>(m.failure_coverage.size()));
    total += weights.back();
  }
  if (total <= 0.0) std::fill(weights.begin(), weights.end(), 1.0);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  return pick(rng);
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t common = 0;
  for (const auto& x : a) common += b.count(x);
  return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

std::optional<std::pair<std::size_t, std::size_t>> most_complementary_pair(const ParetoFront& front) {
  const auto& m = front.members();
  if (m.size() < 2) return std::nullopt;
  std::pair<std::size_t, std::size_t> best{0, 1};
  double best_sim = 2.0;
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = i + 1; j < m.size(); ++j) {
      const double sim = jaccard(m[i].failure_coverage, m[j].failure_coverage);
      if (sim < best_sim) {
        best_sim = sim;
        best = {i, j};
      }
    }
  return best;
}

std::vector<double> perturbed_temperatures(double temperature) {
  std::vector<double> out;
  for (double step : {-0.3, -0.1, 0.1, 0.3}) {
    const double t = std::round((temperature + step) * 100.0) / 100.0;
    if (t < 0.0 || t > kMaxPromptTemperature) continue;
    if (std::abs(t - temperature) < 1e-9) continue;
    if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<PromptConfig> mutate_prompt(const PromptConfig& parent) {
  std::vector<PromptConfig> out;
  for (double t : perturbed_temperatures(parent.temperature)) {
    auto c = parent;
    c.temperature = t;
    out.push_back(std::move(c));
  }
  for (const auto& d : kDirectiveLibrary) {
    if (std::find(parent.requirements.begin(), parent.requirements.end(), d) != parent.requirements.end()) continue;
    auto c = parent;
    c.requirements.push_back(d);
    out.push_back(std::move(c));
  }
  for (std::size_t i = 0; i < parent.requirements.size(); ++i) {
    auto c = parent;
    c.requirements.erase(c.requirements.begin() + static_cast<std::ptrdiff_t>(i));
    out.push_back(std::move(c));
  }
  for (const auto& role : kRoleVariants) {
    if (role == parent.role) continue;
    auto c = parent;
    c.role = role;
    out.push_back(std::move(c));
  }
  return out;
}

std::optional<PromptConfig> apply_prompt_reply(const PromptConfig& base, std::string_view reply) {
  const auto open = reply.find('{');
  const auto close = reply.rfind('}');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) return std::nullopt;
  nlohmann::json j = nlohmann::json::parse(reply.substr(open, close - open + 1), nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;

  auto strings = [&](const char* key) {
    std::vector<std::string> out;
    if (j.contains(key) && j[key].is_array())
      for (const auto& v : j[key])
        if (v.is_string() && !v.get<std::string>().empty()) out.push_back(v.get<std::string>());
    return out;
  };

  PromptConfig c = base;
  if (j.contains("role") && j["role"].is_string() && !j["role"].get<std::string>().empty())
    c.role = j["role"].get<std::string>();
  if (j.contains("requirements") && j["requirements"].is_array()) c.requirements = strings("requirements");
  for (const auto& r : strings("remove_requirements")) std::erase(c.requirements, r);
  for (const auto& r : strings("add_requirements"))
    if (std::find(c.requirements.begin(), c.requirements.end(), r) == c.requirements.end())
      c.requirements.push_back(r);
  if (j.contains("temperature") && j["temperature"].is_number())
    c.temperature = std::round(std::clamp(j["temperature"].get<double>(), 0.0, kMaxPromptTemperature) * 100.0) / 100.0;
  return c;
}

namespace {

std::string prompt_text(const PromptConfig& c) { return to_json(c).dump(2); }

constexpr std::string_view kEditFormat =
    "Reply with one JSON object using any of the keys: \"role\" (text), \"add_requirements\" (list), "
    "\"remove_requirements\" (list), \"requirements\" (full list), \"temperature\" (number).";

std::optional<ProposedPrompt> reflect(const PromptCandidate& parent, const std::vector<FailureRecord>& failures,
                                      std::span<const TaskSample> samples, Backend& backend,
                                      const CandidateOptions& options, CandidateBatch& batch) {
  std::vector<FailureRecord> shown(failures.begin(),
                                   failures.begin() + static_cast<std::ptrdiff_t>(
                                                          std::min(failures.size(), options.max_reflection_failures)));
  batch.usage += diagnose_failures(shown, samples, backend);

  std::string report;
  for (const auto& f : shown) {
    report += "- sample " + f.sample_id + ": predicted '" + f.predicted + "', expected '" + f.gold + "' (" +
              std::string(to_string(f.category)) + ")";
    if (f.diagnosis) report += " diagnosis: " + *f.diagnosis;
    report += "\n";
  }
  GenerationRequest request;
  request.messages = {{Role::system, "You refine system prompts for a frozen language model."},
                      {Role::user, "Current prompt configuration:\n" + prompt_text(parent.config) +
                                       "\n\nRecent failures:\n" + report + "\nPropose one improved configuration. " +
                                       std::string(kEditFormat)}};
  request.temperature = options.reflection_temperature;
  request.purpose = Purpose::reflection;
  const auto response = backend.generate(request);
  batch.usage += usage_of(response);
  auto config = apply_prompt_reply(parent.config, response.candidates.at(0));
  if (!config) {
    batch.notes.push_back("reflection reply did not parse");
    return std::nullopt;
  }
  return ProposedPrompt{*config, CandidateOrigin::reflection};
}

std::optional<ProposedPrompt> crossover(const ParetoFront& front, Backend& backend, const CandidateOptions& options,
                                        CandidateBatch& batch) {
  const auto pair = most_complementary_pair(front);
  if (!pair) return std::nullopt;
  const auto& a = front.members()[pair->first].config;
  const auto& b = front.members()[pair->second].config;
  PromptConfig base = a;
  for (const auto& r : b.requirements)
    if (std::find(base.requirements.begin(), base.requirements.end(), r) == base.requirements.end())
      base.requirements.push_back(r);

  GenerationRequest request;
  request.messages = {{Role::system, "You merge complementary system prompts for a frozen language model."},
                      {Role::user, "Configuration A:\n" + prompt_text(a) + "\n\nConfiguration B:\n" + prompt_text(b) +
                                       "\n\nDraft merge:\n" + prompt_text(base) +
                                       "\n\nImprove the draft so it keeps the strengths of both. " +
                                       std::string(kEditFormat)}};
  request.temperature = options.reflection_temperature;
  request.purpose = Purpose::crossover;
  const auto response = backend.generate(request);
  batch.usage += usage_of(response);
  auto merged = apply_prompt_reply(base, response.candidates.at(0));
  return ProposedPrompt{merged.value_or(base), CandidateOrigin::crossover};
}

}  // namespace

CandidateBatch generate_candidates(const PromptCandidate& parent, std::vector<FailureRecord> failures,
                                   const ParetoFront& front, std::span<const TaskSample> samples, Backend& backend,
                                   std::mt19937_64& rng, const CandidateOptions& options) {
  CandidateBatch batch;
  std::vector<ProposedPrompt> guided;
  if (!failures.empty()) {
    try {
      if (auto r = reflect(parent, failures, samples, backend, options, batch)) guided.push_back(std::move(*r));
    } catch (const BackendError& e) {
      batch.notes.push_back(std::string("reflection channel skipped: ") + e.what());
    }
  }
  try {
    if (auto c = crossover(front, backend, options, batch)) guided.push_back(std::move(*c));
  } catch (const BackendError& e) {
    batch.notes.push_back(std::string("crossover channel skipped: ") + e.what());
  }

  auto mutations = mutate_prompt(parent.config);
  std::shuffle(mutations.begin(), mutations.end(), rng);

  std::set<std::string> seen{config_digest(parent.config)};
  auto push = [&](ProposedPrompt p) {
    if (batch.candidates.size() >= options.max_candidates) return;
    if (!seen.insert(config_digest(p.config)).second) return;
    batch.candidates.push_back(std::move(p));
  };
  for (auto& g : guided) push(std::move(g));
  for (auto& m : mutations) push(ProposedPrompt{std::move(m), CandidateOrigin::mutation});
  return batch;
}

const EvalResult& validate_cached(const AgentConfig& agent, std::span<const TaskSample> val_subset, Backend& backend,
                                  const EvalOptions& options, EvalCache& cache, UsageLedger& ledger) {
  const auto key = config_digest(agent);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  auto result = evaluate_agent(agent, val_subset, backend, options);
  ledger.add(Phase::evaluation, result.usage);
  return cache.emplace(key, std::move(result)).first->second;
}

PromptSearchResult optimize_prompt(const AgentConfig& agent, std::span<const TaskSample> train_pool,
                                   std::span<const TaskSample> val_subset, Backend& backend,
                                   const PromptSearchOptions& options, std::mt19937_64& rng, EvalCache& cache,
                                   UsageLedger& ledger) {
  if (options.iterations < 1) throw ContractViolation("optimize_prompt needs at least one iteration");
  if (train_pool.empty()) throw ConfigError("prompt evolution needs a non-empty train pool");

  const bool capped = options.budget >= 0.0;
  auto within_budget = [&](double cost) { return !capped || cost <= options.budget; };

  auto draw_minibatch = [&] {
    std::vector<std::size_t> idx(train_pool.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min(idx.size(), options.minibatch_size));
    std::sort(idx.begin(), idx.end());
    std::vector<TaskSample> batch;
    for (auto i : idx) batch.push_back(train_pool[i]);
    return batch;
  };

  auto run_minibatch = [&](const PromptConfig& prompt, const std::vector<TaskSample>& batch) {
    auto r = evaluate_agent(AgentConfig{prompt, agent.logic}, batch, backend, options.eval);
    ledger.add(Phase::prompt_optimization, r.usage);
    return r;
  };

  PromptSearchResult result;
  result.best = agent.prompt;
  {
    const auto& seed_val = validate_cached(agent, val_subset, backend, options.eval, cache, ledger);
    result.best_utility = seed_val.utility;
    result.best_cost = seed_val.cost_per_query;
  }

  // The seed enters the front on its first minibatch.
  PromptCandidate seed;
  seed.config = agent.prompt;
  seed.origin = CandidateOrigin::seed;
  {
    const auto batch = draw_minibatch();
    const auto r = run_minibatch(seed.config, batch);
    seed.minibatch_accuracy = r.utility;
    seed.cost_units = std::llround(r.cost_per_query);
  }
  result.front.update(seed);
  std::set<std::string> evaluated{config_digest(agent.prompt)};

  for (int iteration = 0; iteration < options.iterations; ++iteration) {
    const auto parent = result.front.members()[sample_parent(result.front, rng)];
    const auto batch = draw_minibatch();
    const auto parent_eval = run_minibatch(parent.config, batch);
    auto failures = collect_failures(parent_eval, batch);
    std::set<std::string> parent_failed;
    for (const auto& f : failures) parent_failed.insert(f.sample_id);
    const double calls_per_query =
        batch.empty() ? 1.0 : static_cast<double>(parent_eval.usage.calls) / static_cast<double>(batch.size());
    const auto parent_prompt_chars = static_cast<double>(build_system_prompt(parent.config).size());

    auto proposed = generate_candidates(parent, std::move(failures), result.front, batch, backend, rng,
                                        options.candidates);
    ledger.add(Phase::prompt_optimization, proposed.usage);
    for (auto& n : proposed.notes) result.notes.push_back(std::move(n));

    for (const auto& p : proposed.candidates) {
      if (!evaluated.insert(config_digest(p.config)).second) continue;
      const double extra_chars = static_cast<double>(build_system_prompt(p.config).size()) - parent_prompt_chars;
      const double projected =
          parent_eval.cost_per_query + extra_chars * calls_per_query / std::max(1.0, options.chars_per_unit);
      if (!within_budget(projected)) {
        ++result.rejected_over_budget;
        continue;
      }
      const auto r = run_minibatch(p.config, batch);
      ++result.candidates_evaluated;
      PromptCandidate c;
      c.config = p.config;
      c.origin = p.origin;
      // Paired estimate: the parent and the candidate share this minibatch, so the difference
      // is carried onto the parent's recorded values instead of comparing raw batch scores.
      c.minibatch_accuracy = std::clamp(parent.minibatch_accuracy + r.utility - parent_eval.utility, 0.0, 1.0);
      c.cost_units = std::max<long long>(
          0, parent.cost_units + std::llround(r.cost_per_query) - std::llround(parent_eval.cost_per_query));
      for (const auto& rec : r.records)
        if (rec.passed() && parent_failed.count(rec.sample_id)) c.failure_coverage.insert(rec.sample_id);
      result.front.update(c);
    }

    // Validate every front member; the running best only moves on strict improvement.
    for (const auto& m : result.front.members()) {
      const auto& v = validate_cached(AgentConfig{m.config, agent.logic}, val_subset, backend, options.eval, cache,
                                      ledger);
      if (!within_budget(v.cost_per_query)) continue;
      if (v.utility > result.best_utility + 1e-12) {
        result.best = m.config;
        result.best_utility = v.utility;
        result.best_cost = v.cost_per_query;
      }
    }
    result.utility_history.push_back(result.best_utility);
  }
  return result;
}

}  // namespace pace
