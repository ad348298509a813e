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

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>

#include "apres/gateway.hpp"
#include "apres/prompts.hpp"
#include "apres/rng.hpp"

namespace apres {

// Offline provider. Each reply is a pure function of (seed, request hash,
// handler): the handler gets an Rng seeded from both.
class StubProvider : public Provider {
 public:
  using Handler = std::function<std::string(const ChatRequest&, Rng&)>;

  explicit StubProvider(std::uint64_t seed) : seed_(seed) {}

  void register_handler(PromptKind kind, Handler handler);

  std::string id() const override;
  std::string send(const ChatRequest& request, const std::string& api_key) override;

  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::uint64_t seed_;
  std::map<PromptKind, Handler> handlers_;
};

// Handlers for the synthetic world: reviewer scores follow marker counts,
// proposals mutate the parent rubric, rewrites add marker sentences, and the
// judge prefers the paper with the higher mean review score.
struct StubBehaviour {
  double reviewer_noise = 0.6;     // sd of the reviewer score around its mean
  double reviewer_garble = 0.02;   // chance of an unparseable reviewer reply
  double proposal_garble = 0.15;   // chance of a malformed first proposal
  double edit_garble = 0.15;       // chance of a non-applying edit script
  double judge_sharpness = 1.5;    // logistic slope on the mean-score gap
};

std::shared_ptr<StubProvider> make_default_stub(std::uint64_t seed, const StubBehaviour& behaviour = {});

void install_reviewer_handler(StubProvider& stub, const StubBehaviour& behaviour);
void install_proposer_handler(StubProvider& stub, const StubBehaviour& behaviour);
void install_revision_handler(StubProvider& stub, const StubBehaviour& behaviour);
void install_judge_handler(StubProvider& stub, const StubBehaviour& behaviour);

}  // namespace apres
