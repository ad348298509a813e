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

#include "apres/gateway.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>

#include <fmt/format.h>

#include "apres/fs_util.hpp"
#include "json.hpp"

namespace apres {

using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

void ChatRequest::validate() const {
  bool has_user = false;
  for (const auto& m : messages) has_user = has_user || m.role == Role::User;
  if (!has_user) throw GatewayError(GatewayErrc::InvalidRequest, "request needs at least one user message");
  if (max_tokens <= 0) throw GatewayError(GatewayErrc::InvalidRequest, "max_tokens must be positive");
  if (!std::isfinite(temperature) || temperature < 0.0) {
    throw GatewayError(GatewayErrc::InvalidRequest, "temperature must be a finite non-negative number");
  }
}

void ProviderConfig::validate() const {
  if (max_retries < 0) throw GatewayError(GatewayErrc::InvalidRequest, "max_retries must be >= 0");
  if (timeout_s <= 0) throw GatewayError(GatewayErrc::InvalidRequest, "timeout_s must be > 0");
  if (name != "stub" && name != "openai") {
    throw GatewayError(GatewayErrc::UnknownProvider, fmt::format("unknown provider '{}'", name));
  }
}

std::string canonical_request(std::string_view provider_id, const ChatRequest& request) {
  ordered_json messages = ordered_json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  return ordered_json{{"provider", provider_id},
                      {"model", request.model},
                      {"messages", std::move(messages)},
                      {"temperature", request.temperature},
                      {"max_tokens", request.max_tokens}}
      .dump();
}

std::string request_hash(std::string_view provider_id, const ChatRequest& request) {
  return sha256_hex(canonical_request(provider_id, request));
}

ResponseCache::ResponseCache(std::optional<fs::path> dir) : dir_(std::move(dir)) {}

fs::path ResponseCache::entry_path(const std::string& key) const {
  return dir_.value_or(fs::path{}) / key.substr(0, 2) / key;
}

std::optional<std::string> ResponseCache::get(const std::string& key) {
  {
    std::lock_guard lock(mutex_);
    if (auto it = memory_.find(key); it != memory_.end()) return it->second;
  }
  if (!dir_) return std::nullopt;
  auto raw = read_file(entry_path(key));
  if (!raw) return std::nullopt;
  try {
    auto entry = ordered_json::parse(*raw);
    if (entry.at("key").get<std::string>() != key) return std::nullopt;
    std::string text = entry.at("text").get<std::string>();
    std::lock_guard lock(mutex_);
    memory_.emplace(key, text);
    return text;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

void ResponseCache::put(const std::string& key, const std::string& text) {
  {
    std::lock_guard lock(mutex_);
    memory_.emplace(key, text);
  }
  if (!dir_) return;
  atomic_write(entry_path(key), ordered_json{{"key", key}, {"text", text}}.dump());
}

Gateway::Gateway(ProviderConfig config, std::shared_ptr<Provider> provider, std::optional<fs::path> run_dir)
    : config_(std::move(config)),
      provider_(std::move(provider)),
      cache_(run_dir ? std::optional<fs::path>(*run_dir / "cache") : std::nullopt) {
  config_.validate();
}

std::string_view to_string(Role role) {
  switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "user";
}

ChatRequest Gateway::make_request(std::string system, std::string user, double temperature,
                                  int max_tokens) const {
  ChatRequest req;
  req.model = config_.model;
  if (!system.empty()) req.messages.push_back({Role::System, std::move(system)});
  req.messages.push_back({Role::User, std::move(user)});
  req.temperature = temperature;
  req.max_tokens = max_tokens;
  return req;
}

Completion Gateway::complete(const ChatRequest& request) {
  request.validate();
  const auto started = std::chrono::steady_clock::now();
  const std::string provider_id = provider_->id();
  const std::string key = request_hash(provider_id, request);
  if (auto hit = cache_.get(key)) {
    return Completion{std::move(*hit), provider_id, true, 0};
  }

  std::string api_key;
  if (provider_->needs_api_key()) {
    const char* env = std::getenv(config_.api_key_env.c_str());
    if (env == nullptr || *env == '\0') {
      throw GatewayError(GatewayErrc::AuthMissing,
                         fmt::format("environment variable {} is not set", config_.api_key_env));
    }
    api_key = env;
  }

  const int total_attempts = config_.max_retries + 1;
  std::optional<TransientFailure> last;
  for (int attempt = 0; attempt < total_attempts; ++attempt) {
    if (attempt > 0 && config_.backoff_base_s > 0.0) {
      std::this_thread::sleep_for(std::chrono::duration<double>(config_.backoff_base_s * std::ldexp(1.0, attempt - 1)));
    }
    ++attempts_;
    try {
      std::string text = provider_->send(request, api_key);
      cache_.put(key, text);
      const auto elapsed = std::chrono::steady_clock::now() - started;
      return Completion{std::move(text), provider_id, false,
                        std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count()};
    } catch (const TransientFailure& failure) {
      last.emplace(failure);
    }
  }

  if (config_.max_retries == 0) {
    if (last->timeout()) throw GatewayError(GatewayErrc::Timeout, last->what());
    throw GatewayError(GatewayErrc::ProviderError, last->what());
  }
  throw GatewayError(GatewayErrc::RetriesExhausted,
                     fmt::format("{} attempts failed; last error: {}", total_attempts, last->what()));
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string extract_fenced_block(std::string_view text, std::string_view label) {
  std::size_t pos = 0;
  bool inside = false;
  std::size_t body_start = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::size_t line_end = nl == std::string_view::npos ? text.size() : nl;
    const std::string_view line = trim(text.substr(pos, line_end - pos));
    if (!inside) {
      if (line.starts_with("```") && trim(line.substr(3)) == label) {
        inside = true;
        body_start = nl == std::string_view::npos ? text.size() : nl + 1;
      }
    } else if (line == "```") {
      std::string_view body = text.substr(body_start, pos - body_start);
      while (!body.empty() && (body.front() == '\n' || body.front() == '\r')) body.remove_prefix(1);
      while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.remove_suffix(1);
      return std::string(body);
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  throw GatewayError(GatewayErrc::NoBlockFound, fmt::format("no complete ```{} block in response", label));
}

std::string fence(std::string_view body, std::string_view label) {
  return fmt::format("```{}\n{}\n```", label, body);
}

}  // namespace apres
