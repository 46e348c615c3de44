#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "pace/pipeline.hpp"
#include "pace/prompt_evolution.hpp"
#include "pace/scripted_backend.hpp"
#include "pace/solver.hpp"
#include "pace/task.hpp"

namespace fixtures {

inline std::string sample_id(const std::string& prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%04zu", prefix.c_str(), i);
  return buf;
}

// Four-option questions with golds cycling A, B, C, D.
inline std::vector<pace::TaskSample> letter_samples(std::size_t n, const std::string& prefix = "q") {
  std::vector<pace::TaskSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    pace::TaskSample s;
    s.id = sample_id(prefix, i);
    s.kind = pace::TaskKind::letter_choice;
    s.input_fields = {{"question", "Question " + std::to_string(i) + ": pick one."},
                      {"choices", "A. a\nB. b\nC. c\nD. d"}};
    s.gold = std::string(1, static_cast<char>('A' + i % 4));
    out.push_back(std::move(s));
  }
  return out;
}

inline pace::TaskSample constrained_sample(const std::string& id, std::vector<nlohmann::json> constraints) {
  pace::TaskSample s;
  s.id = id;
  s.kind = pace::TaskKind::constrained;
  s.input_fields = {{"prompt", "Write a short note about rivers."}};
  s.constraints = std::move(constraints);
  return s;
}

// Surrogate landscape with a reachable prompt plateau.
inline nlohmann::json plateau_landscape(double base, double cap, double malformed = 0.0) {
  return {{"base", base},
          {"cap", cap},
          {"malformed", malformed},
          {"distractors", "single"},
          {"effects",
           {{{"directive", "Think step by step."}, {"accuracy_bonus", 0.15}},
            {{"directive", "Double-check your final answer."}, {"accuracy_bonus", 0.15}},
            {{"directive", "Answer with one letter only."}, {"malformed_reduction", 1.0}}}}};
}

inline pace::PromptCandidate candidate(double accuracy, long long cost, std::string tag = "") {
  pace::PromptCandidate c;
  c.minibatch_accuracy = accuracy;
  c.cost_units = cost;
  c.config.role = tag.empty() ? "r" + std::to_string(accuracy) + "/" + std::to_string(cost) : tag;
  return c;
}

// Scripts the i-th candidate of a task request for `sample` under `prompt`.
inline void script_task(pace::Script& script, const pace::PromptConfig& prompt, const pace::TaskSample& sample,
                        double temperature, int index, std::string text) {
  script.set(pace::build_task_messages(prompt, sample), temperature, index, std::move(text));
}

using pace::Backend;
using pace::CostModel;
using pace::GenerationRequest;
using pace::GenerationResponse;
using pace::Purpose;

// Replies chosen per purpose by a callback; counts calls by purpose.
class FakeBackend final : public Backend {
 public:
  using Reply = std::function<std::string(const GenerationRequest&, int index)>;

  explicit FakeBackend(Reply reply) : reply_(std::move(reply)) {}

  GenerationResponse generate(const GenerationRequest& request) override {
    GenerationResponse r;
    for (int i = 0; i < request.n; ++i) r.candidates.push_back(reply_(request, i));
    r.input_units = fixed_input_units >= 0 ? fixed_input_units : CostModel{}.input_units(request);
    r.output_units = CostModel{}.output_units(r.candidates);
    std::lock_guard lock(mu_);
    ++calls_[request.purpose];
    requests_.push_back(request);
    return r;
  }

  int calls(Purpose p) const {
    auto it = calls_.find(p);
    return it == calls_.end() ? 0 : it->second;
  }
  bool supports_diagnosis() const override { return diagnosis; }
  int total_calls() const { return static_cast<int>(requests_.size()); }
  const std::vector<GenerationRequest>& requests() const { return requests_; }

  bool diagnosis = true;
  // Bills every request this many input units when non-negative.
  long long fixed_input_units = -1;

 private:
  Reply reply_;
  std::mutex mu_;
  std::map<Purpose, int> calls_;
  std::vector<GenerationRequest> requests_;
};

struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string& name) {
    path = std::filesystem::temp_directory_path() /
           (name + "-" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void write_samples(const std::string& path, const std::vector<pace::TaskSample>& samples) {
  std::ofstream out(path, std::ios::trunc);
  for (const auto& s : samples) out << pace::sample_to_json(s).dump() << "\n";
}

}  // namespace fixtures
