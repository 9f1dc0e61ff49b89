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

// Retrieval augmentation: a TF-IDF index over training utterances, ranked
// retrieval, exemplar selection and rendering of the augmented input
//
//   x ; x_1 ; y_1 ; ... ; x_k ; y_k
//
// Weights are raw term count times idf(t) = ln((1 + N) / (1 + df(t))) + 1,
// L2-normalized per document, so cosine similarity is a dot product.

#ifndef TOPKIT_RETRIEVAL_H_
#define TOPKIT_RETRIEVAL_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "json.hpp"
#include "topkit/dataset.h"
#include "topkit/random.h"
#include "topkit/top_parse.h"

namespace topkit {

inline constexpr int kIndexFormatVersion = 1;
inline constexpr std::size_t kDefaultExemplars = 4;
inline constexpr double kDefaultGeometricP = 0.1;
inline constexpr std::size_t kSamplingPool = 100;
inline constexpr std::string_view kDefaultSeparator = " ; ";

// Sorted by term id.
using SparseVector = std::vector<std::pair<std::uint32_t, double>>;

struct RetrievalHit {
  std::string sample_id;
  std::size_t rank = 0;  // 1-based
  double score = 0.0;

  friend bool operator==(const RetrievalHit&, const RetrievalHit&) = default;
};

// Ordering key shared by every ranking in this module: score quantized to
// 1e-12 (descending), then id (ascending). Quantizing keeps mathematically
// tied scores tied under floating-point noise.
std::int64_t score_bucket(double score);
bool ranks_before(double score_a, std::string_view id_a, double score_b,
                  std::string_view id_b);

class TfidfIndex {
 public:
  // One document per sample, the utterance only. Throws kEmptyManifest.
  static TfidfIndex build(const Manifest& manifest, std::size_t jobs = 1);

  std::size_t num_docs() const { return doc_ids_.size(); }
  std::size_t vocabulary_size() const { return terms_.size(); }
  const std::vector<std::string>& doc_ids() const { return doc_ids_; }
  const SparseVector& doc_vector(std::size_t doc) const { return docs_[doc]; }
  bool doc_is_empty(std::size_t doc) const { return docs_[doc].empty(); }
  std::optional<std::uint32_t> term_id(std::string_view term) const;
  double idf(std::uint32_t term) const { return idf_[term]; }
  std::size_t df(std::uint32_t term) const { return df_[term]; }

  // Unit-length tf-idf vector of `tokens` under this index's idf; terms
  // outside the vocabulary are dropped.
  SparseVector vectorize(const Utterance& tokens) const;

  // Top `m` hits by cosine similarity over all documents not in `exclude`,
  // including zero-score documents. Ranks start at 1.
  std::vector<RetrievalHit> query(const Utterance& x, std::size_t m,
                                  const std::unordered_set<std::string>& exclude = {}) const;

  nlohmann::ordered_json to_json() const;
  static TfidfIndex from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static TfidfIndex load(const std::string& path);

 private:
  std::vector<std::string> terms_;
  std::unordered_map<std::string, std::uint32_t> term_ids_;
  std::vector<std::size_t> df_;
  std::vector<double> idf_;
  std::vector<std::string> doc_ids_;
  std::vector<SparseVector> docs_;
  // term -> (doc, weight), doc ascending
  std::vector<std::vector<std::pair<std::uint32_t, double>>> postings_;

  void rebuild_postings();
};

// Draws `k` distinct ranks from a pool of `pool` ranked candidates without
// replacement. Each draw picks rank r (1-based) with probability
// proportional to p(1-p)^(r-1) over the ranks still available. Returned in
// draw order. Requires 0 < p < 1.
std::vector<std::size_t> draw_geometric_ranks(std::size_t pool, std::size_t k,
                                              double p, Engine& engine);

// Training-time selection: pool = top min(100, |hits|), k geometric draws,
// result in rank order. Returns all hits when |hits| <= k.
std::vector<RetrievalHit> sample_exemplars(const std::vector<RetrievalHit>& hits,
                                           std::size_t k, double p_geom,
                                           std::uint64_t seed);

// Evaluation-time selection: the first k hits.
std::vector<RetrievalHit> top_k_exemplars(const std::vector<RetrievalHit>& hits,
                                          std::size_t k);

struct Exemplar {
  Utterance utterance;
  ParseTree parse;
  RetrievalHit hit;
};

struct ExemplarPrompt {
  std::string id;
  Utterance base;
  std::vector<Exemplar> exemplars;
  std::string rendered;
  std::size_t epoch = 0;
};

// rendered = join(separator, [x, x_1, y_1, ..., x_k, y_k]). The rendering
// can only be split back unambiguously if no utterance contains the
// separator.
ExemplarPrompt render_prompt(const Utterance& x, std::vector<Exemplar> exemplars,
                             std::string_view separator = kDefaultSeparator);

enum class PromptMode { kSample, kTopK };

struct PromptOptions {
  PromptMode mode = PromptMode::kTopK;
  std::size_t k = kDefaultExemplars;
  double p_geom = kDefaultGeometricP;
  std::uint64_t seed = 0;
  std::string separator = std::string(kDefaultSeparator);
  // Leave each query's own id out of its exemplars.
  bool exclude_self = true;
  std::size_t epochs = 1;
  std::size_t jobs = 1;
};

// One prompt per (epoch, query), epoch-major. Exemplars come from `pool`,
// which must be the manifest `index` was built from. Selection for query q
// in epoch e is seeded with derive_seed(seed, q.id, e).
std::vector<ExemplarPrompt> build_prompts(const TfidfIndex& index, const Manifest& pool,
                                          const Manifest& queries,
                                          const PromptOptions& options);

nlohmann::ordered_json prompt_to_json(const ExemplarPrompt& prompt);

}  // namespace topkit

#endif  // TOPKIT_RETRIEVAL_H_
