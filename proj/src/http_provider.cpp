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

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "apres/http_provider.hpp"

#include <fmt/format.h>

#include "apres/stub_provider.hpp"
#include "httplib.h"
#include "json.hpp"

namespace apres {

using ordered_json = nlohmann::ordered_json;

HttpProvider::HttpProvider(ProviderConfig config) : config_(std::move(config)) {
  const auto scheme_end = config_.base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw GatewayError(GatewayErrc::InvalidRequest, fmt::format("base_url '{}' has no scheme", config_.base_url));
  }
  const auto path_start = config_.base_url.find('/', scheme_end + 3);
  origin_ = config_.base_url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : config_.base_url.substr(path_start);
}

std::string HttpProvider::id() const { return "openai:" + config_.base_url; }

std::string HttpProvider::send(const ChatRequest& request, const std::string& api_key) {
  ordered_json messages = ordered_json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  const ordered_json body{{"model", request.model},
                          {"messages", std::move(messages)},
                          {"temperature", request.temperature},
                          {"max_tokens", request.max_tokens}};

  httplib::Client client(origin_);
  client.set_connection_timeout(config_.timeout_s, 0);
  client.set_read_timeout(config_.timeout_s, 0);
  client.set_write_timeout(config_.timeout_s, 0);
  httplib::Headers headers{{"Authorization", "Bearer " + api_key}};

  auto res = client.Post(path_, headers, body.dump(), "application/json");
  if (!res) {
    const auto err = res.error();
    const bool timeout = err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read;
    throw TransientFailure(fmt::format("request to {} failed: {}", config_.base_url, httplib::to_string(err)), timeout);
  }
  if (res->status == 408 || res->status == 429 || res->status >= 500) {
    throw TransientFailure(fmt::format("HTTP {}: {}", res->status, res->body), res->status == 408, res->status);
  }
  if (res->status != 200) {
    throw GatewayError(GatewayErrc::ProviderError, fmt::format("HTTP {}: {}", res->status, res->body));
  }
  try {
    const auto parsed = ordered_json::parse(res->body);
    return parsed.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const std::exception& e) {
    throw GatewayError(GatewayErrc::ProviderError, fmt::format("malformed response body: {}", e.what()));
  }
}

std::shared_ptr<Provider> make_provider(const ProviderConfig& config) {
  config.validate();
  if (config.name == "stub") return make_default_stub(config.stub_seed);
  return std::make_shared<HttpProvider>(config);
}

}  // namespace apres
