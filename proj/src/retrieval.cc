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

#include "topkit/retrieval.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "topkit/error.h"
#include "topkit/parallel.h"

namespace topkit {

namespace {

constexpr std::string_view kFormatName = "topkit-tfidf";
constexpr std::string_view kIdfVariant = "ln((1+N)/(1+df))+1";

double smooth_idf(std::size_t n_docs, std::size_t df) {
  return std::log((1.0 + static_cast<double>(n_docs)) / (1.0 + static_cast<double>(df))) +
         1.0;
}

void normalize(SparseVector& v) {
  double sq = 0.0;
  for (const auto& [term, w] : v) sq += w * w;
  if (sq <= 0.0) {
    v.clear();
    return;
  }
  const double norm = std::sqrt(sq);
  for (auto& [term, w] : v) w /= norm;
}

}  // namespace

std::int64_t score_bucket(double score) { return std::llround(score * 1e12); }

bool ranks_before(double score_a, std::string_view id_a, double score_b,
                  std::string_view id_b) {
  const std::int64_t a = score_bucket(score_a);
  const std::int64_t b = score_bucket(score_b);
  if (a != b) return a > b;
  return id_a < id_b;
}

TfidfIndex TfidfIndex::build(const Manifest& manifest, std::size_t jobs) {
  if (manifest.empty()) throw Error(ErrorCode::kEmptyManifest, "cannot index an empty manifest");
  TfidfIndex index;
  const std::size_t n = manifest.size();
  index.doc_ids_.reserve(n);
  for (const Sample& s : manifest.samples) {
    index.doc_ids_.push_back(s.id);
    for (const Token& t : s.utterance) {
      if (index.term_ids_.emplace(t, static_cast<std::uint32_t>(index.terms_.size())).second)
        index.terms_.push_back(t);
    }
  }
  index.df_.assign(index.terms_.size(), 0);

  // Raw term counts per document.
  std::vector<std::map<std::uint32_t, std::size_t>> counts(n);
  parallel_for(n, jobs, [&](std::size_t d) {
    for (const Token& t : manifest.samples[d].utterance) ++counts[d][index.term_ids_.at(t)];
  });
  for (const auto& c : counts)
    for (const auto& [term, tf] : c) ++index.df_[term];

  index.idf_.resize(index.terms_.size());
  for (std::size_t t = 0; t < index.terms_.size(); ++t)
    index.idf_[t] = smooth_idf(n, index.df_[t]);

  index.docs_.resize(n);
  parallel_for(n, jobs, [&](std::size_t d) {
    SparseVector v;
    v.reserve(counts[d].size());
    for (const auto& [term, tf] : counts[d])
      v.emplace_back(term, static_cast<double>(tf) * index.idf_[term]);
    normalize(v);
    index.docs_[d] = std::move(v);
  });
  index.rebuild_postings();
  return index;
}

void TfidfIndex::rebuild_postings() {
  postings_.assign(terms_.size(), {});
  for (std::size_t d = 0; d < docs_.size(); ++d)
    for (const auto& [term, w] : docs_[d])
      postings_[term].emplace_back(static_cast<std::uint32_t>(d), w);
}

std::optional<std::uint32_t> TfidfIndex::term_id(std::string_view term) const {
  if (auto it = term_ids_.find(std::string(term)); it != term_ids_.end()) return it->second;
  return std::nullopt;
}

SparseVector TfidfIndex::vectorize(const Utterance& tokens) const {
  std::map<std::uint32_t, std::size_t> counts;
  for (const Token& t : tokens)
    if (auto id = term_id(t)) ++counts[*id];
  SparseVector v;
  v.reserve(counts.size());
  for (const auto& [term, tf] : counts)
    v.emplace_back(term, static_cast<double>(tf) * idf_[term]);
  normalize(v);
  return v;
}

std::vector<RetrievalHit> TfidfIndex::query(
    const Utterance& x, std::size_t m,
    const std::unordered_set<std::string>& exclude) const {
  if (m == 0) throw Error(ErrorCode::kInvalidArgument, "query size must be >= 1");
  std::vector<double> scores(docs_.size(), 0.0);
  for (const auto& [term, qw] : vectorize(x))
    for (const auto& [doc, dw] : postings_[term]) scores[doc] += qw * dw;

  std::vector<std::uint32_t> candidates;
  candidates.reserve(docs_.size());
  for (std::size_t d = 0; d < docs_.size(); ++d) {
    scores[d] = std::clamp(scores[d], 0.0, 1.0);
    if (!exclude.count(doc_ids_[d])) candidates.push_back(static_cast<std::uint32_t>(d));
  }
  const std::size_t take = std::min(m, candidates.size());
  auto before = [&](std::uint32_t a, std::uint32_t b) {
    return ranks_before(scores[a], doc_ids_[a], scores[b], doc_ids_[b]);
  };
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take),
                    candidates.end(), before);
  std::vector<RetrievalHit> hits;
  hits.reserve(take);
  for (std::size_t i = 0; i < take; ++i)
    hits.push_back({doc_ids_[candidates[i]], i + 1, scores[candidates[i]]});
  return hits;
}

nlohmann::ordered_json TfidfIndex::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = kFormatName;
  j["format_version"] = kIndexFormatVersion;
  j["idf_variant"] = kIdfVariant;
  j["tf"] = "raw";
  j["norm"] = "l2";
  j["n_docs"] = docs_.size();
  j["terms"] = terms_;
  j["df"] = df_;
  j["idf"] = idf_;
  nlohmann::ordered_json docs = nlohmann::ordered_json::array();
  for (std::size_t d = 0; d < docs_.size(); ++d) {
    nlohmann::ordered_json doc;
    doc["id"] = doc_ids_[d];
    std::vector<std::uint32_t> terms;
    std::vector<double> weights;
    for (const auto& [t, w] : docs_[d]) {
      terms.push_back(t);
      weights.push_back(w);
    }
    doc["terms"] = std::move(terms);
    doc["weights"] = std::move(weights);
    doc["empty"] = docs_[d].empty();
    docs.push_back(std::move(doc));
  }
  j["docs"] = std::move(docs);
  return j;
}

TfidfIndex TfidfIndex::from_json(const nlohmann::json& j) {
  auto bad = [](const std::string& msg) { return Error(ErrorCode::kBadIndexFile, msg); };
  try {
    if (j.at("format").get<std::string>() != kFormatName) throw bad("not a topkit index");
    const int version = j.at("format_version").get<int>();
    if (version != kIndexFormatVersion)
      throw bad("unsupported index format version " + std::to_string(version));
    if (j.at("idf_variant").get<std::string>() != kIdfVariant)
      throw bad("unsupported idf variant");
    TfidfIndex index;
    index.terms_ = j.at("terms").get<std::vector<std::string>>();
    index.df_ = j.at("df").get<std::vector<std::size_t>>();
    index.idf_ = j.at("idf").get<std::vector<double>>();
    if (index.df_.size() != index.terms_.size() || index.idf_.size() != index.terms_.size())
      throw bad("vocabulary tables disagree in size");
    for (std::size_t t = 0; t < index.terms_.size(); ++t)
      if (!index.term_ids_.emplace(index.terms_[t], static_cast<std::uint32_t>(t)).second)
        throw bad("duplicate term '" + index.terms_[t] + "'");
    for (const auto& doc : j.at("docs")) {
      index.doc_ids_.push_back(doc.at("id").get<std::string>());
      const auto terms = doc.at("terms").get<std::vector<std::uint32_t>>();
      const auto weights = doc.at("weights").get<std::vector<double>>();
      if (terms.size() != weights.size()) throw bad("document term/weight mismatch");
      SparseVector v;
      for (std::size_t i = 0; i < terms.size(); ++i) {
        if (terms[i] >= index.terms_.size()) throw bad("term id out of range");
        if (i > 0 && terms[i] <= terms[i - 1]) throw bad("document terms not sorted");
        v.emplace_back(terms[i], weights[i]);
      }
      index.docs_.push_back(std::move(v));
    }
    if (index.docs_.size() != j.at("n_docs").get<std::size_t>())
      throw bad("document count mismatch");
    if (index.docs_.empty()) throw bad("index has no documents");
    index.rebuild_postings();
    return index;
  } catch (const nlohmann::json::exception& e) {
    throw bad(e.what());
  }
}

void TfidfIndex::save(const std::string& path) const {
  write_file_atomic(path, to_json().dump() + "\n");
}

TfidfIndex TfidfIndex::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open index '" + path + "'");
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kBadIndexFile, "'" + path + "': " + e.what());
  }
}

std::vector<std::size_t> draw_geometric_ranks(std::size_t pool, std::size_t k,
                                              double p, Engine& engine) {
  if (!(p > 0.0 && p < 1.0))
    throw Error(ErrorCode::kInvalidArgument, "geometric p must lie in (0, 1)");
  k = std::min(k, pool);
  std::vector<double> weight(pool);
  double w = p;
  for (std::size_t r = 0; r < pool; ++r) {
    weight[r] = w;
    w *= 1.0 - p;
  }
  std::vector<bool> taken(pool, false);
  std::vector<std::size_t> ranks;
  ranks.reserve(k);
  for (std::size_t draw = 0; draw < k; ++draw) {
    double total = 0.0;
    for (std::size_t r = 0; r < pool; ++r)
      if (!taken[r]) total += weight[r];
    const double u = uniform01(engine) * total;
    double acc = 0.0;
    std::size_t pick = pool;
    std::size_t last_free = pool;
    for (std::size_t r = 0; r < pool; ++r) {
      if (taken[r]) continue;
      last_free = r;
      acc += weight[r];
      if (u < acc) {
        pick = r;
        break;
      }
    }
    if (pick == pool) pick = last_free;  // rounding at the tail
    taken[pick] = true;
    ranks.push_back(pick + 1);
  }
  return ranks;
}

std::vector<RetrievalHit> sample_exemplars(const std::vector<RetrievalHit>& hits,
                                           std::size_t k, double p_geom,
                                           std::uint64_t seed) {
  if (!(p_geom > 0.0 && p_geom < 1.0))
    throw Error(ErrorCode::kInvalidArgument, "geometric p must lie in (0, 1)");
  if (hits.size() <= k) return hits;
  const std::size_t pool = std::min(kSamplingPool, hits.size());
  Engine engine(seed);
  std::vector<std::size_t> ranks = draw_geometric_ranks(pool, k, p_geom, engine);
  std::sort(ranks.begin(), ranks.end());
  std::vector<RetrievalHit> out;
  out.reserve(ranks.size());
  for (std::size_t r : ranks) out.push_back(hits[r - 1]);
  return out;
}

std::vector<RetrievalHit> top_k_exemplars(const std::vector<RetrievalHit>& hits,
                                          std::size_t k) {
  return {hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(std::min(k, hits.size()))};
}

ExemplarPrompt render_prompt(const Utterance& x, std::vector<Exemplar> exemplars,
                             std::string_view separator) {
  ExemplarPrompt prompt;
  prompt.base = x;
  prompt.rendered = join(x);
  for (const Exemplar& e : exemplars) {
    prompt.rendered += separator;
    prompt.rendered += join(e.utterance);
    prompt.rendered += separator;
    prompt.rendered += serialize(e.parse);
  }
  prompt.exemplars = std::move(exemplars);
  return prompt;
}

std::vector<ExemplarPrompt> build_prompts(const TfidfIndex& index, const Manifest& pool,
                                          const Manifest& queries,
                                          const PromptOptions& options) {
  if (options.k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  if (options.epochs == 0) throw Error(ErrorCode::kInvalidArgument, "epochs must be >= 1");
  if (options.mode == PromptMode::kSample && !(options.p_geom > 0.0 && options.p_geom < 1.0))
    throw Error(ErrorCode::kInvalidArgument, "geometric p must lie in (0, 1)");
  std::unordered_map<std::string, const Sample*> by_id;
  for (const Sample& s : pool.samples) by_id.emplace(s.id, &s);
  if (by_id.size() != index.num_docs())
    throw Error(ErrorCode::kInvalidArgument, "exemplar pool does not match the index");
  for (const std::string& id : index.doc_ids())
    if (!by_id.count(id))
      throw Error(ErrorCode::kInvalidArgument, "index document '" + id + "' not in pool");

  const std::size_t nq = queries.size();
  std::vector<ExemplarPrompt> prompts(nq * options.epochs);
  parallel_for(prompts.size(), options.jobs, [&](std::size_t slot) {
    const std::size_t epoch = slot / nq;
    const Sample& q = queries.samples[slot % nq];
    std::unordered_set<std::string> exclude;
    if (options.exclude_self) exclude.insert(q.id);
    std::vector<RetrievalHit> selected;
    if (options.mode == PromptMode::kSample) {
      const auto hits = index.query(q.utterance, kSamplingPool, exclude);
      selected = sample_exemplars(hits, options.k, options.p_geom,
                                  derive_seed(options.seed, q.id, epoch));
    } else {
      selected = top_k_exemplars(index.query(q.utterance, options.k, exclude), options.k);
    }
    std::vector<Exemplar> exemplars;
    exemplars.reserve(selected.size());
    for (RetrievalHit& hit : selected) {
      const Sample& s = *by_id.at(hit.sample_id);
      exemplars.push_back(Exemplar{s.utterance, s.parse, std::move(hit)});
    }
    ExemplarPrompt prompt = render_prompt(q.utterance, std::move(exemplars), options.separator);
    prompt.id = q.id;
    prompt.epoch = epoch;
    prompts[slot] = std::move(prompt);
  });
  return prompts;
}

nlohmann::ordered_json prompt_to_json(const ExemplarPrompt& prompt) {
  nlohmann::ordered_json j;
  j["id"] = prompt.id;
  j["epoch"] = prompt.epoch;
  j["rendered"] = prompt.rendered;
  std::vector<std::string> ids;
  std::vector<std::size_t> ranks;
  std::vector<double> scores;
  for (const Exemplar& e : prompt.exemplars) {
    ids.push_back(e.hit.sample_id);
    ranks.push_back(e.hit.rank);
    scores.push_back(e.hit.score);
  }
  j["exemplar_ids"] = std::move(ids);
  j["ranks"] = std::move(ranks);
  j["scores"] = std::move(scores);
  return j;
}

}  // namespace topkit
