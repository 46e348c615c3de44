#pragma once

#include <map>
#include <mutex>
#include <string>
#include <tuple>

#include "pace/backend.hpp"

namespace pace {

struct ScriptKey {
  std::string digest;
  int temperature_bucket = 0;
  int index = 0;

  auto operator<=>(const ScriptKey&) const = default;
};

// Canned replies keyed by (message digest, temperature bucket, candidate index).
class Script {
 public:
  void set(ScriptKey key, std::string text);
  // Convenience: computes the key from messages and temperature.
  void set(const std::vector<ChatMessage>& messages, double temperature, int index, std::string text);

  const std::string* find(const ScriptKey& key) const;
  std::size_t size() const { return entries_.size(); }
  const std::map<ScriptKey, std::string>& entries() const { return entries_; }

  // One JSON object per line: {"digest", "temperature_bucket", "index", "text"}.
  void save(const std::string& path) const;
  static Script load(const std::string& path);

 private:
  std::map<ScriptKey, std::string> entries_;
};

// Deterministic lookup; throws ScriptMissError naming the digest of an unscripted request.
GenerationResponse generate_scripted(const Script& script, const GenerationRequest& request,
                                     const CostModel& cost = {});

class ScriptedBackend final : public Backend {
 public:
  explicit ScriptedBackend(Script script, CostModel cost = {}, bool supports_diagnosis = true)
      : script_(std::move(script)), cost_(cost), diagnosis_(supports_diagnosis) {}

  GenerationResponse generate(const GenerationRequest& request) override {
    return generate_scripted(script_, request, cost_);
  }
  bool supports_diagnosis() const override { return diagnosis_; }

  const Script& script() const { return script_; }

 private:
  Script script_;
  CostModel cost_;
  bool diagnosis_;
};

// Forwards to another backend and records every reply as a script entry, so a run can be
// replayed later through ScriptedBackend.
class RecordingBackend final : public Backend {
 public:
  explicit RecordingBackend(Backend& inner) : inner_(inner) {}

  GenerationResponse generate(const GenerationRequest& request) override;
  bool supports_diagnosis() const override { return inner_.supports_diagnosis(); }

  Script script() const;

 private:
  Backend& inner_;
  mutable std::mutex mu_;
  Script recorded_;
};

}  // namespace pace
