// Copyright 2026 The qta Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <memory>
#include <string>
#include <string_view>

#include "qta/service_clients.hpp"
#include "qta/textcore.hpp"

namespace qta {

inline std::unique_ptr<Scorer> make_scorer(const ScorerSpec& spec, RetryPolicy retry = {}) {
  spec.validate();
  if (spec.kind == ScorerKind::remote_embedding) {
    return std::make_unique<EmbeddingScorer>(*spec.endpoint, retry);
  }
  return std::make_unique<LexicalScorer>(spec);
}

// Similarity in [0, 1] under any scorer kind. Remote failures surface as
// ScorerUnavailable.
inline double similarity(const ScorerSpec& spec, std::string_view a, std::string_view b) {
  if (spec.kind != ScorerKind::remote_embedding) {
    spec.validate();
    return lexical_similarity(spec, a, b);
  }
  return make_scorer(spec)->score(a, b);
}

}  // namespace qta
