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

#include "topkit/metrics.h"

#include <algorithm>

#include "topkit/error.h"
#include "topkit/parallel.h"

namespace topkit {

std::string em_key(std::string_view text) {
  try {
    return serialize(parse_top(text));
  } catch (const Error&) {
    return canonicalize(text);
  }
}

bool exact_match(std::string_view hyp, std::string_view ref) {
  return em_key(hyp) == em_key(ref);
}

EmReport corpus_em(const std::vector<std::pair<std::string, std::string>>& pairs,
                   std::size_t jobs) {
  if (pairs.empty()) throw Error(ErrorCode::kEmptyCorpus, "no pairs to score");
  std::vector<char> hit(pairs.size(), 0);
  parallel_for(pairs.size(), jobs, [&](std::size_t i) {
    hit[i] = exact_match(pairs[i].first, pairs[i].second) ? 1 : 0;
  });
  EmReport report;
  report.n_total = pairs.size();
  report.n_exact = static_cast<std::size_t>(std::count(hit.begin(), hit.end(), 1));
  report.accuracy =
      static_cast<double>(report.n_exact) / static_cast<double>(report.n_total);
  return report;
}

WerReport wer(const Utterance& hyp, const Utterance& ref) {
  if (ref.empty()) throw Error(ErrorCode::kEmptyReference, "empty reference");
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  // dist[i][j]: edits turning ref[0, i) into hyp[0, j).
  std::vector<std::vector<std::size_t>> dist(n + 1,
                                             std::vector<std::size_t>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) dist[i][0] = i;
  for (std::size_t j = 0; j <= m; ++j) dist[0][j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub = dist[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      dist[i][j] = std::min({sub, dist[i - 1][j] + 1, dist[i][j - 1] + 1});
    }
  }

  WerReport report;
  report.n_ref_words = n;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool same = ref[i - 1] == hyp[j - 1];
      if (dist[i][j] == dist[i - 1][j - 1] + (same ? 0 : 1)) {
        if (!same) ++report.substitutions;
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && dist[i][j] == dist[i - 1][j] + 1) {
      ++report.deletions;
      --i;
    } else {
      ++report.insertions;
      --j;
    }
  }
  report.wer = static_cast<double>(report.edits()) / static_cast<double>(n);
  return report;
}

WerReport corpus_wer(const std::vector<std::pair<Utterance, Utterance>>& pairs) {
  if (pairs.empty()) throw Error(ErrorCode::kEmptyCorpus, "no pairs to score");
  WerReport total;
  for (const auto& [hyp, ref] : pairs) {
    WerReport one = wer(hyp, ref);
    total.n_ref_words += one.n_ref_words;
    total.substitutions += one.substitutions;
    total.deletions += one.deletions;
    total.insertions += one.insertions;
  }
  total.wer = static_cast<double>(total.edits()) /
              static_cast<double>(total.n_ref_words);
  return total;
}

nlohmann::ordered_json to_json(const EmReport& report) {
  nlohmann::ordered_json j;
  j["n_total"] = report.n_total;
  j["n_exact"] = report.n_exact;
  j["accuracy"] = report.accuracy;
  return j;
}

nlohmann::ordered_json to_json(const WerReport& report) {
  nlohmann::ordered_json j;
  j["n_ref_words"] = report.n_ref_words;
  j["sub"] = report.substitutions;
  j["del"] = report.deletions;
  j["ins"] = report.insertions;
  j["wer"] = report.wer;
  return j;
}

}  // namespace topkit
