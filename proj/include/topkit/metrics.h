// Copyright 2026 The topkit Authors
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

// Exact-match accuracy over parses and word error rate over transcripts.

#ifndef TOPKIT_METRICS_H_
#define TOPKIT_METRICS_H_

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "topkit/top_parse.h"

namespace topkit {

struct EmReport {
  std::size_t n_total = 0;
  std::size_t n_exact = 0;
  double accuracy = 0.0;
};

struct WerReport {
  std::size_t n_ref_words = 0;
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  double wer = 0.0;

  std::size_t edits() const { return substitutions + deletions + insertions; }
};

// Canonical form used for EM: the re-serialized tree when `text` parses,
// otherwise canonicalize(text).
std::string em_key(std::string_view text);

bool exact_match(std::string_view hyp, std::string_view ref);

// Throws kEmptyCorpus on an empty list. `jobs` > 1 splits the work; the
// result is identical for every job count.
EmReport corpus_em(const std::vector<std::pair<std::string, std::string>>& pairs,
                   std::size_t jobs = 1);

// Word-level Levenshtein alignment with unit costs. Among minimal
// alignments, the backtrace prefers substitution (or match), then deletion,
// then insertion. Throws kEmptyReference if `ref` is empty.
WerReport wer(const Utterance& hyp, const Utterance& ref);

// Sums per-utterance counts; wer = total edits / total reference words.
WerReport corpus_wer(const std::vector<std::pair<Utterance, Utterance>>& pairs);

nlohmann::ordered_json to_json(const EmReport& report);
nlohmann::ordered_json to_json(const WerReport& report);

}  // namespace topkit

#endif  // TOPKIT_METRICS_H_
