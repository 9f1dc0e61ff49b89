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


#include <cmath>
#include <random>
#include <set>
#include <string>

#include "doctest.h"
#include "oracles/oracles.h"
#include "test_util.h"
#include "topkit/error.h"
#include "topkit/random.h"
#include "topkit/retrieval.h"

using namespace topkit;
using namespace topkit::testing;

namespace {

Manifest docs(const std::vector<std::string>& texts) {
  Manifest m;
  for (std::size_t i = 0; i < texts.size(); ++i)
    m.samples.push_back(make_sample("d" + std::to_string(i), Domain::kWeather, texts[i],
                                    "[in:i " + tokenize(texts[i])[0] + " ]"));
  return m;
}

void check_against_oracle(const Manifest& m, const Utterance& query) {
  const TfidfIndex idx = TfidfIndex::build(m);
  std::vector<std::string> ids;
  std::vector<std::vector<std::string>> texts;
  for (const Sample& s : m.samples) {
    ids.push_back(s.id);
    texts.push_back(s.utterance);
  }
  const oracle::DenseTfidf dense(ids, texts);
  const auto expected = dense.rank(query);
  const auto got = idx.query(query, m.size());
  REQUIRE(got.size() == expected.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(got[i].sample_id == expected[i].first);
    CHECK(std::fabs(got[i].score - expected[i].second) < 1e-9);
    CHECK(got[i].rank == i + 1);
  }
}

}  // namespace

TEST_SUITE("retrieval") {

TEST_CASE("three document example") {
  const Manifest m = docs({"a b", "a c", "d"});
  const TfidfIndex idx = TfidfIndex::build(m);
  CHECK(idx.num_docs() == 3);
  CHECK(idx.vocabulary_size() == 4);
  const auto a = *idx.term_id("a");
  CHECK(idx.df(a) == 2);
  CHECK(idx.idf(a) == doctest::Approx(std::log(4.0 / 3.0) + 1.0));
  CHECK(idx.idf(*idx.term_id("d")) == doctest::Approx(std::log(2.0) + 1.0));
  CHECK_FALSE(idx.term_id("zz").has_value());

  const auto hits = idx.query(tokenize("a b"), 3);
  REQUIRE(hits.size() == 3);
  CHECK(hits[0].sample_id == "d0");
  CHECK(hits[0].score == doctest::Approx(1.0));
  CHECK(hits[1].sample_id == "d1");
  CHECK(hits[2].sample_id == "d2");
  CHECK(hits[2].score == 0.0);
  check_against_oracle(m, tokenize("a b"));
  check_against_oracle(m, tokenize("c c d zz"));
  check_against_oracle(m, tokenize("zz"));
}

TEST_CASE("top m with exclusions") {
  const Manifest m = docs({"rain today", "rain tomorrow", "snow today", "sun", "rain rain"});
  const TfidfIndex idx = TfidfIndex::build(m);
  const auto hits = idx.query(tokenize("rain today"), 3);
  REQUIRE(hits.size() == 3);
  CHECK(hits[0].sample_id == "d0");
  const auto excl = idx.query(tokenize("rain today"), 3, {"d0"});
  REQUIRE(excl.size() == 3);
  for (const auto& h : excl) CHECK(h.sample_id != "d0");
  CHECK(excl[0].rank == 1);
  CHECK(idx.query(tokenize("rain"), 100).size() == 5);
  CHECK_THROWS_AS(idx.query(tokenize("rain"), 0), Error);
}

TEST_CASE("empty manifest is rejected") {
  try {
    TfidfIndex::build(Manifest{});
    FAIL("expected EmptyManifest");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEmptyManifest);
  }
}

TEST_CASE("fuzzed corpora agree with the dense oracle") {
  std::mt19937_64 rng(2024);
  for (int corpus = 0; corpus < 30; ++corpus) {
    const std::size_t n_docs = 1 + rng() % 50, vocab = 1 + rng() % 30;
    std::vector<std::string> texts;
    for (std::size_t d = 0; d < n_docs; ++d) {
      std::string t;
      for (std::size_t n = 1 + rng() % 10; n > 0; --n)
        t += (t.empty() ? "w" : " w") + std::to_string(rng() % vocab);
      texts.push_back(t);
    }
    const Manifest m = docs(texts);
    for (int q = 0; q < 5; ++q) {
      Utterance query;
      for (std::size_t n = rng() % 6; n > 0; --n) query.push_back("w" + std::to_string(rng() % (vocab + 3)));
      check_against_oracle(m, query);
    }
  }
}

TEST_CASE("document vectors are unit length") {
  const TfidfIndex idx = TfidfIndex::build(random_manifest(40, 8));
  for (std::size_t d = 0; d < idx.num_docs(); ++d) {
    double norm = 0;
    for (const auto& [t, w] : idx.doc_vector(d)) norm += w * w;
    CHECK(norm == doctest::Approx(1.0));
  }
}

TEST_CASE("index persistence round trip") {
  TempDir dir;
  const Manifest m = random_manifest(30, 4);
  const TfidfIndex idx = TfidfIndex::build(m, 3);
  idx.save(dir.file("idx.json"));
  const TfidfIndex back = TfidfIndex::load(dir.file("idx.json"));
  CHECK(back.to_json().dump() == idx.to_json().dump());
  const Utterance q = tokenize("rain in london tomorrow");
  CHECK(back.query(q, 30) == idx.query(q, 30));
  CHECK(TfidfIndex::build(m, 1).to_json().dump() == idx.to_json().dump());

  auto j = idx.to_json();
  j["format_version"] = 99;
  try {
    TfidfIndex::from_json(j);
    FAIL("expected BadIndexFile");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kBadIndexFile);
  }
  try {
    TfidfIndex::load(dir.write("junk.json", "{"));
    FAIL("expected BadIndexFile");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kBadIndexFile);
  }
}

TEST_CASE("geometric first draw follows the closed form") {
  CHECK(oracle::geometric_first_draw(5, 0.1, 1) == doctest::Approx(0.244194).epsilon(1e-5));
  Engine engine(123);
  std::vector<int> counts(6, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[draw_geometric_ranks(5, 1, 0.1, engine)[0]];
  for (std::size_t r = 1; r <= 5; ++r)
    CHECK(std::fabs(counts[r] / double(n) - oracle::geometric_first_draw(5, 0.1, r)) < 0.01);
  for (std::size_t r = 1; r < 5; ++r) CHECK(counts[r] > counts[r + 1]);
}

TEST_CASE("draws are distinct and concentrate on the top as p grows") {
  Engine engine(5);
  int top_first = 0;
  for (int i = 0; i < 2000; ++i) {
    const auto ranks = draw_geometric_ranks(5, 4, 0.999, engine);
    CHECK(std::set<std::size_t>(ranks.begin(), ranks.end()).size() == 4);
    if (ranks == std::vector<std::size_t>{1, 2, 3, 4}) ++top_first;
  }
  CHECK(top_first > 1970);  // expected about 1992
  CHECK(draw_geometric_ranks(3, 10, 0.5, engine).size() == 3);
  CHECK_THROWS_AS(draw_geometric_ranks(3, 1, 0.0, engine), Error);
  CHECK_THROWS_AS(draw_geometric_ranks(3, 1, 1.0, engine), Error);
}

TEST_CASE("exemplar sampling") {
  std::vector<RetrievalHit> hits;
  for (std::size_t r = 1; r <= 150; ++r) hits.push_back({"h" + std::to_string(r), r, 1.0 / r});
  const auto picked = sample_exemplars(hits, 4, 0.1, 77);
  REQUIRE(picked.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(picked[i].rank <= kSamplingPool);
    if (i) CHECK(picked[i - 1].rank < picked[i].rank);
  }
  CHECK(sample_exemplars(hits, 4, 0.1, 77) == picked);
  CHECK(sample_exemplars({hits.begin(), hits.begin() + 3}, 4, 0.1, 1).size() == 3);
  CHECK(top_k_exemplars(hits, 4).back().rank == 4);
}

TEST_CASE("prompt structure") {
  const Manifest m = random_manifest(10, 12);
  const TfidfIndex idx = TfidfIndex::build(m);
  for (PromptMode mode : {PromptMode::kTopK, PromptMode::kSample}) {
    PromptOptions opts;
    opts.mode = mode;
    opts.k = 4;
    opts.epochs = 2;
    const auto prompts = build_prompts(idx, m, m, opts);
    REQUIRE(prompts.size() == 20);
    for (const ExemplarPrompt& p : prompts) {
      std::vector<std::string> segments;
      std::size_t start = 0, at;
      while ((at = p.rendered.find(" ; ", start)) != std::string::npos) {
        segments.push_back(p.rendered.substr(start, at - start));
        start = at + 3;
      }
      segments.push_back(p.rendered.substr(start));
      CHECK(segments.size() == 9);
      CHECK(segments[0] == join(p.base));
      for (const Exemplar& e : p.exemplars) CHECK(e.hit.sample_id != p.id);
    }
    CHECK(prompts[0].epoch == 0);
    CHECK(prompts[10].epoch == 1);
  }
}

TEST_CASE("rendering and self inclusion") {
  const Sample s = weather_sample();
  const ExemplarPrompt p =
      render_prompt(tokenize("weather in paris"), {Exemplar{s.utterance, s.parse, {s.id, 1, 0.5}}});
  CHECK(p.rendered ==
        "weather in paris ; how ' s the weather in sydney ; [in:get_weather [sl:location sydney ] ]");
  CHECK(prompt_to_json(p).dump().find("\"exemplar_ids\":[\"weather-0\"]") != std::string::npos);

  const Manifest m = random_manifest(5, 1);
  PromptOptions opts;
  opts.exclude_self = false;
  opts.k = 1;
  const auto prompts = build_prompts(TfidfIndex::build(m), m, m, opts);
  // Every utterance is its own best match when allowed.
  for (const auto& pr : prompts) CHECK(pr.exemplars[0].hit.score == doctest::Approx(1.0));
}

TEST_CASE("prompts are independent of the job count") {
  const Manifest m = random_manifest(60, 21);
  const TfidfIndex idx = TfidfIndex::build(m);
  PromptOptions opts;
  opts.mode = PromptMode::kSample;
  opts.seed = 9;
  opts.epochs = 3;
  std::string ref;
  for (std::size_t jobs : {1u, 8u}) {
    opts.jobs = jobs;
    std::string dump;
    for (const auto& p : build_prompts(idx, m, m, opts)) dump += prompt_to_json(p).dump() + "\n";
    if (ref.empty())
      ref = dump;
    else
      CHECK(dump == ref);
  }
}

}  // TEST_SUITE
