#include "pace/scripted_backend.hpp"

#include <fstream>

#include <json.hpp>

#include "pace/errors.hpp"

namespace pace {

void Script::set(ScriptKey key, std::string text) { entries_[std::move(key)] = std::move(text); }

void Script::set(const std::vector<ChatMessage>& messages, double temperature, int index, std::string text) {
  set(ScriptKey{request_digest(messages), temperature_bucket(temperature), index}, std::move(text));
}

const std::string* Script::find(const ScriptKey& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

void Script::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write script file " + path);
  for (const auto& [key, text] : entries_) {
    nlohmann::ordered_json j;
    j["digest"] = key.digest;
    j["temperature_bucket"] = key.temperature_bucket;
    j["index"] = key.index;
    j["text"] = text;
    out << j.dump() << '\n';
  }
}

Script Script::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("script file not found: " + path);
  Script script;
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    script.set(ScriptKey{j.at("digest").get<std::string>(), j.at("temperature_bucket").get<int>(),
                         j.at("index").get<int>()},
               j.at("text").get<std::string>());
  }
  return script;
}

GenerationResponse generate_scripted(const Script& script, const GenerationRequest& request,
                                     const CostModel& cost) {
  validate_request(request);
  const auto digest = request_digest(request.messages);
  const int bucket = temperature_bucket(request.temperature);
  GenerationResponse response;
  response.candidates.reserve(static_cast<std::size_t>(request.n));
  for (int i = 0; i < request.n; ++i) {
    const auto* text = script.find(ScriptKey{digest, bucket, i});
    if (text == nullptr) throw ScriptMissError(digest);
    response.candidates.push_back(*text);
  }
  response.input_units = cost.input_units(request);
  response.output_units = cost.output_units(response.candidates);
  return response;
}

GenerationResponse RecordingBackend::generate(const GenerationRequest& request) {
  auto response = inner_.generate(request);
  const auto digest = request_digest(request.messages);
  const int bucket = temperature_bucket(request.temperature);
  std::lock_guard lock(mu_);
  for (std::size_t i = 0; i < response.candidates.size(); ++i)
    recorded_.set(ScriptKey{digest, bucket, static_cast<int>(i)}, response.candidates[i]);
  return response;
}

Script RecordingBackend::script() const {
  std::lock_guard lock(mu_);
  return recorded_;
}

}  // namespace pace
