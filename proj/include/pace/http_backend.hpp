#pragma once

#include <atomic>
#include <chrono>
#include <string>
#include <vector>

#include "pace/backend.hpp"

namespace pace {

// Endpoint list with an atomically advanced round-robin cursor.
class BackendPool {
 public:
  explicit BackendPool(std::vector<std::string> endpoints);

  // Returns the endpoint for the next call and advances the cursor.
  const std::string& next();
  std::size_t next_index() const { return next_.load() % endpoints_.size(); }
  const std::vector<std::string>& endpoints() const { return endpoints_; }

 private:
  std::vector<std::string> endpoints_;
  std::atomic<std::size_t> next_{0};
};

struct HttpOptions {
  std::string model;
  std::string api_key;
  int max_attempts = 3;
  std::chrono::milliseconds backoff{200};
  std::chrono::seconds timeout{120};
  CostModel cost;
};

// Sends one batched chat-completion call. Each retry moves to the next endpoint.
// Throws RetryableError once attempts are exhausted and ProtocolError on a malformed reply.
GenerationResponse generate(BackendPool& pool, const GenerationRequest& request, const HttpOptions& options);

// Request body for POST <endpoint>/v1/chat/completions.
nlohmann::json chat_completion_body(const GenerationRequest& request, const std::string& model);

// Parses choices[*].message.content and the usage block. Throws ProtocolError.
GenerationResponse parse_chat_completion(const std::string& body, const GenerationRequest& request,
                                         const CostModel& cost);

class HttpBackend final : public Backend {
 public:
  HttpBackend(std::vector<std::string> endpoints, HttpOptions options)
      : pool_(std::move(endpoints)), options_(std::move(options)) {}

  GenerationResponse generate(const GenerationRequest& request) override {
    return pace::generate(pool_, request, options_);
  }

  const BackendPool& pool() const { return pool_; }

 private:
  BackendPool pool_;
  HttpOptions options_;
};

}  // namespace pace
