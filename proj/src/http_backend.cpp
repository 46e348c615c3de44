#include "pace/http_backend.hpp"

#include <thread>

#include <httplib.h>

#include "pace/errors.hpp"

namespace pace {

BackendPool::BackendPool(std::vector<std::string> endpoints) : endpoints_(std::move(endpoints)) {
  if (endpoints_.empty()) throw ConfigError("backend pool needs at least one endpoint");
}

const std::string& BackendPool::next() {
  return endpoints_[next_.fetch_add(1) % endpoints_.size()];
}

nlohmann::json chat_completion_body(const GenerationRequest& request, const std::string& model) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : request.messages)
    messages.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
  nlohmann::json body;
  body["model"] = model;
  body["messages"] = std::move(messages);
  body["temperature"] = request.temperature;
  body["n"] = request.n;
  body["max_tokens"] = request.max_output_units;
  if (request.output_mode == OutputMode::structured_keyed) body["response_format"] = {{"type", "json_object"}};
  return body;
}

GenerationResponse parse_chat_completion(const std::string& body, const GenerationRequest& request,
                                         const CostModel& cost) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("endpoint reply is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("choices") || !j["choices"].is_array())
    throw ProtocolError("endpoint reply has no choices array");

  GenerationResponse response;
  for (const auto& choice : j["choices"]) {
    if (!choice.is_object() || !choice.contains("message") || !choice["message"].is_object())
      throw ProtocolError("choice without a message object");
    const auto& content = choice["message"]["content"];
    if (content.is_null()) {
      response.candidates.emplace_back();
    } else if (content.is_string()) {
      response.candidates.push_back(content.get<std::string>());
    } else {
      throw ProtocolError("message content is not text");
    }
  }
  if (static_cast<int>(response.candidates.size()) != request.n)
    throw ProtocolError("expected " + std::to_string(request.n) + " choices, got " +
                        std::to_string(response.candidates.size()));

  if (j.contains("usage") && j["usage"].is_object()) {
    const auto& u = j["usage"];
    if (u.contains("prompt_tokens") && u["prompt_tokens"].is_number_integer())
      response.reported_prompt_tokens = u["prompt_tokens"].get<long long>();
    if (u.contains("completion_tokens") && u["completion_tokens"].is_number_integer())
      response.reported_completion_tokens = u["completion_tokens"].get<long long>();
  }
  response.input_units = cost.input_units(request);
  response.output_units = cost.output_units(response.candidates);
  return response;
}

GenerationResponse generate(BackendPool& pool, const GenerationRequest& request, const HttpOptions& options) {
  validate_request(request);
  const auto payload = chat_completion_body(request, options.model).dump();
  httplib::Headers headers;
  if (!options.api_key.empty()) headers.emplace("Authorization", "Bearer " + options.api_key);

  std::string last_error;
  auto delay = options.backoff;
  const int attempts = std::max(1, options.max_attempts);
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    const auto& endpoint = pool.next();
    httplib::Client client(endpoint);
    client.set_connection_timeout(options.timeout);
    client.set_read_timeout(options.timeout);
    auto result = client.Post("/v1/chat/completions", headers, payload, "application/json");
    if (result && result->status == 200) {
      auto response = parse_chat_completion(result->body, request, options.cost);
      response.calls = attempt;
      // Failed attempts still sent the prompt; bill it.
      response.input_units += static_cast<long long>(attempt - 1) * options.cost.input_units(request);
      return response;
    }
    if (result && result->status >= 400 && result->status < 500 && result->status != 429)
      throw ProtocolError(endpoint + " answered HTTP " + std::to_string(result->status));
    last_error = result ? endpoint + " answered HTTP " + std::to_string(result->status)
                        : endpoint + ": " + httplib::to_string(result.error());
    if (attempt < attempts) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
  }
  throw RetryableError("generation failed after " + std::to_string(attempts) + " attempts: " + last_error,
                       static_cast<long long>(attempts) * options.cost.input_units(request), attempts);
}

}  // namespace pace
