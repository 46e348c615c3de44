#pragma once

#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pace/backend.hpp"
#include "pace/evaluation.hpp"
#include "pace/failure_analysis.hpp"
#include "pace/pipeline.hpp"
#include "pace/task.hpp"

namespace pace {

enum class CandidateOrigin { seed, mutation, reflection, crossover };

std::string_view to_string(CandidateOrigin origin);

struct PromptCandidate {
  PromptConfig config;
  double minibatch_accuracy = 0.0;
  long long cost_units = 0;
  // Ids of samples the parent failed that this candidate answers correctly.
  std::set<std::string> failure_coverage;
  CandidateOrigin origin = CandidateOrigin::seed;
};

// True when a is no worse on both axes and strictly better on one.
bool dominates(const PromptCandidate& a, const PromptCandidate& b);

class ParetoFront {
 public:
  // Inserts the candidate unless a member dominates it, then drops members it dominates.
  // Returns whether the candidate was inserted.
  bool update(const PromptCandidate& candidate);

  const std::vector<PromptCandidate>& members() const { return members_; }
  std::size_t size() const { return members_.size(); }
  bool empty() const { return members_.empty(); }

 private:
  std::vector<PromptCandidate> members_;
};

// Index of a member drawn with probability proportional to |failure_coverage|,
// uniform when every coverage is empty. Throws ContractViolation on an empty front.
std::size_t sample_parent(const ParetoFront& front, std::mt19937_64& rng);

// Jaccard similarity of two id sets; two empty sets count as identical.
double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

// Indices of the two members with the smallest coverage similarity; nullopt below two members.
std::optional<std::pair<std::size_t, std::size_t>> most_complementary_pair(const ParetoFront& front);

// Handcrafted mutation library.
extern const std::vector<std::string> kDirectiveLibrary;
extern const std::vector<std::string> kRoleVariants;
inline constexpr double kMaxPromptTemperature = 1.2;

// Temperature perturbations {-0.3, -0.1, +0.1, +0.3} rounded to 0.01, ascending. Values
// outside [0, kMaxPromptTemperature] are dropped.
std::vector<double> perturbed_temperatures(double temperature);

// Every single-step mutation of a config: temperature, add/remove one directive, role rewording.
std::vector<PromptConfig> mutate_prompt(const PromptConfig& parent);

// Applies a JSON edit reply {role, requirements, add_requirements, remove_requirements, temperature}
// on top of `base`. The object may be embedded in surrounding text. nullopt when no object parses.
std::optional<PromptConfig> apply_prompt_reply(const PromptConfig& base, std::string_view reply);

struct ProposedPrompt {
  PromptConfig config;
  CandidateOrigin origin = CandidateOrigin::mutation;
};

struct CandidateBatch {
  std::vector<ProposedPrompt> candidates;
  Usage usage;
  std::vector<std::string> notes;
};

struct CandidateOptions {
  std::size_t max_candidates = 8;
  double reflection_temperature = 1.0;
  std::size_t max_reflection_failures = 10;
};

// Union of the mutation, reflection and crossover channels, capped at max_candidates.
// Reflection and crossover failures degrade to mutation-only output with a note.
CandidateBatch generate_candidates(const PromptCandidate& parent, std::vector<FailureRecord> failures,
                                   const ParetoFront& front, std::span<const TaskSample> samples, Backend& backend,
                                   std::mt19937_64& rng, const CandidateOptions& options = {});

inline constexpr double kUnlimited = -1.0;

struct PromptSearchOptions {
  int iterations = 5;
  // Per-query cost cap in units; kUnlimited disables it.
  double budget = kUnlimited;
  std::size_t minibatch_size = 20;
  CandidateOptions candidates;
  EvalOptions eval;
  double chars_per_unit = 1.0;
};

// Validation results keyed by agent digest, shared across rounds on a fixed validation set.
using EvalCache = std::map<std::string, EvalResult>;

struct PromptSearchResult {
  PromptConfig best;
  double best_utility = 0.0;
  double best_cost = 0.0;
  // Best validated utility after each inner iteration; non-decreasing.
  std::vector<double> utility_history;
  ParetoFront front;
  int candidates_evaluated = 0;
  int rejected_over_budget = 0;
  std::vector<std::string> notes;
};

// Inner loop under fixed control logic. Usage is billed to `ledger`.
// Throws ConfigError on an empty train pool and ContractViolation when iterations < 1.
PromptSearchResult optimize_prompt(const AgentConfig& agent, std::span<const TaskSample> train_pool,
                                   std::span<const TaskSample> val_subset, Backend& backend,
                                   const PromptSearchOptions& options, std::mt19937_64& rng, EvalCache& cache,
                                   UsageLedger& ledger);

// Validated result for an agent, served from the cache when present.
const EvalResult& validate_cached(const AgentConfig& agent, std::span<const TaskSample> val_subset, Backend& backend,
                                  const EvalOptions& options, EvalCache& cache, UsageLedger& ledger);

}  // namespace pace
