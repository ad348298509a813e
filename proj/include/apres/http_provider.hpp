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

#include <string>

#include "apres/gateway.hpp"

namespace apres {

// POSTs {model, messages, temperature, max_tokens} to base_url with a bearer
// token and returns choices[0].message.content.
class HttpProvider : public Provider {
 public:
  explicit HttpProvider(ProviderConfig config);

  std::string id() const override;
  bool needs_api_key() const override { return true; }
  std::string send(const ChatRequest& request, const std::string& api_key) override;

 private:
  ProviderConfig config_;
  std::string origin_;  // scheme://host[:port]
  std::string path_;
};

}  // namespace apres
