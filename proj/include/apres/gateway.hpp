// Copyright 2026 The apres Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "apres/error.hpp"

namespace apres {

enum class GatewayErrc {
  InvalidRequest,
  AuthMissing,
  Timeout,
  ProviderError,
  RetriesExhausted,
  NoBlockFound,
  UnknownProvider,
};
constexpr std::string_view module_name(GatewayErrc) { return "llm-gateway"; }
using GatewayError = ModuleError<GatewayErrc>;

enum class Role { System, User, Assistant };
std::string_view to_string(Role role);

struct Message {
  Role role = Role::User;
  std::string content;
  bool operator==(const Message&) const = default;
};

struct ChatRequest {
  std::string model;
  std::vector<Message> messages;
  double temperature = 0.0;
  int max_tokens = 1024;

  // At least one user message and a positive token limit.
  void validate() const;
};

struct Completion {
  std::string text;  // provider message content, unmodified
  std::string provider;
  bool cached = false;
  std::int64_t latency_ms = 0;
};

struct ProviderConfig {
  std::string name = "stub";  // "stub" or "openai" (any chat-completions endpoint)
  std::string base_url = "https://api.openai.com/v1/chat/completions";
  std::string model = "stub-model";
  std::string api_key_env = "OPENAI_API_KEY";
  int timeout_s = 120;
  int max_retries = 3;
  std::uint64_t stub_seed = 0;
  double creative_temperature = 0.7;  // proposer / rewriter calls
  double backoff_base_s = 1.0;        // first retry delay; doubles each attempt

  void validate() const;
};

// Canonical serialization of everything that determines a completion.
std::string canonical_request(std::string_view provider_id, const ChatRequest& request);
// SHA-256 of canonical_request; the cache key.
std::string request_hash(std::string_view provider_id, const ChatRequest& request);

// Retryable failure raised by providers: connection errors, timeouts,
// HTTP 408/429/5xx.
class TransientFailure : public std::runtime_error {
 public:
  TransientFailure(const std::string& what, bool timeout, int status = 0)
      : std::runtime_error(what), timeout_(timeout), status_(status) {}
  bool timeout() const noexcept { return timeout_; }
  int status() const noexcept { return status_; }

 private:
  bool timeout_;
  int status_;
};

class Provider {
 public:
  virtual ~Provider() = default;
  // Identity folded into cache keys, e.g. "stub:7" or "openai:<url>".
  virtual std::string id() const = 0;
  virtual bool needs_api_key() const { return false; }
  // Returns the message content. Throws TransientFailure for retryable
  // problems and GatewayError for permanent ones.
  virtual std::string send(const ChatRequest& request, const std::string& api_key) = 0;
};

// Immutable on-disk entries under <dir>/<hash[0:2]>/<hash>, fronted by an
// in-memory map. Unreadable or mismatching entries count as misses.
class ResponseCache {
 public:
  explicit ResponseCache(std::optional<std::filesystem::path> dir = std::nullopt);

  std::optional<std::string> get(const std::string& key);
  void put(const std::string& key, const std::string& text);
  std::filesystem::path entry_path(const std::string& key) const;

 private:
  std::optional<std::filesystem::path> dir_;
  std::mutex mutex_;
  std::unordered_map<std::string, std::string> memory_;
};

class Gateway {
 public:
  Gateway(ProviderConfig config, std::shared_ptr<Provider> provider,
          std::optional<std::filesystem::path> run_dir = std::nullopt);

  Completion complete(const ChatRequest& request);

  const ProviderConfig& config() const noexcept { return config_; }
  Provider& provider() noexcept { return *provider_; }
  // Number of provider calls actually attempted (cache hits excluded).
  std::uint64_t attempts() const noexcept { return attempts_.load(); }

  // Request with the configured model and a system/user message pair.
  ChatRequest make_request(std::string system, std::string user, double temperature, int max_tokens) const;

 private:
  ProviderConfig config_;
  std::shared_ptr<Provider> provider_;
  ResponseCache cache_;
  std::atomic<std::uint64_t> attempts_{0};
};

// Provider selected by config.name; the stub gets the default templates.
std::shared_ptr<Provider> make_provider(const ProviderConfig& config);

// Interior of the first fenced block whose opening fence carries `label`,
// with leading and trailing newlines trimmed.
std::string extract_fenced_block(std::string_view text, std::string_view label);
std::string fence(std::string_view body, std::string_view label);

}  // namespace apres
