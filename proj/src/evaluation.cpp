#include "pace/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <thread>

#include "pace/errors.hpp"

namespace pace {
namespace {

SampleRecord evaluate_one(const AgentConfig& agent, const TaskSample& sample, Backend& backend, int max_units) {
  SampleRecord record;
  record.sample_id = sample.id;
  try {
    record.outcome = run_pipeline(agent.prompt, agent.logic, sample, backend, max_units);
    record.score = score_answer(sample, record.outcome.answer);
  } catch (const BackendError& e) {
    record.backend_error = e.what();
    record.outcome.extraction_failed = true;
    StageRecord note;
    note.note = std::string("backend error: ") + e.what();
    record.outcome.trace.push_back(std::move(note));
    record.score.extraction_failed = true;
    if (const auto* retry = dynamic_cast<const RetryableError*>(&e)) {
      record.outcome.usage.input_units += retry->billed_input_units();
      record.outcome.usage.calls += retry->attempts();
    }
  }
  return record;
}

}  // namespace

EvalResult evaluate_agent(const AgentConfig& agent, std::span<const TaskSample> samples, Backend& backend,
                          const EvalOptions& options) {
  EvalResult result;
  result.records.resize(samples.size());
  const std::size_t workers =
      options.deterministic ? 1 : std::clamp<std::size_t>(static_cast<std::size_t>(std::max(1, options.workers)), 1,
                                                          std::max<std::size_t>(1, samples.size()));

  if (workers <= 1) {
    for (std::size_t i = 0; i < samples.size(); ++i)
      result.records[i] = evaluate_one(agent, samples[i], backend, options.max_output_units);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < samples.size(); i = next.fetch_add(1)) {
          try {
            result.records[i] = evaluate_one(agent, samples[i], backend, options.max_output_units);
          } catch (...) {
            std::lock_guard lock(failure_mu);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    pool.clear();
    if (failure) std::rethrow_exception(failure);
  }

  // Merge per-sample usage after the fan-out.
  double utility = 0.0;
  for (const auto& r : result.records) {
    utility += r.score.utility;
    result.usage += r.outcome.usage;
    if (!r.backend_error.empty()) ++result.backend_errors;
  }
  if (!samples.empty()) {
    result.utility = utility / static_cast<double>(samples.size());
    result.cost_per_query = static_cast<double>(result.usage.total_units()) / static_cast<double>(samples.size());
  }
  return result;
}

}  // namespace pace
