#pragma once

#include <span>
#include <string>
#include <vector>

#include "pace/backend.hpp"
#include "pace/pipeline.hpp"
#include "pace/solver.hpp"
#include "pace/task.hpp"

namespace pace {

struct EvalOptions {
  int workers = 1;
  // Forces one worker so backend calls happen in sample order.
  bool deterministic = false;
  int max_output_units = 2048;
};

struct SampleRecord {
  std::string sample_id;
  SolverOutcome outcome;
  ScoreResult score;
  // Set when the backend failed on this sample; the sample then scores 0.
  std::string backend_error;

  bool passed() const { return score.utility >= 1.0; }
};

struct EvalResult {
  // Mean utility over the evaluated samples.
  double utility = 0.0;
  // Mean cost units per query.
  double cost_per_query = 0.0;
  Usage usage;
  // One record per input sample, in input order.
  std::vector<SampleRecord> records;
  int backend_errors = 0;
};

// Runs the agent on every sample and scores it. Backend failures do not abort the pass.
EvalResult evaluate_agent(const AgentConfig& agent, std::span<const TaskSample> samples, Backend& backend,
                          const EvalOptions& options = {});

}  // namespace pace
