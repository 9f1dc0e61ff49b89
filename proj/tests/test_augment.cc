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
#include <set>
#include <string>

#include "doctest.h"
#include "test_util.h"
#include "topkit/augment.h"
#include "topkit/error.h"
#include "topkit/random.h"

using namespace topkit;
using namespace topkit::testing;

namespace {

MaskPlan fixed_plan(const Sample& s, std::vector<std::size_t> positions) {
  MaskPlan plan;
  plan.sample_id = s.id;
  plan.positions = std::move(positions);
  return plan;
}

// Proposer that hands every mask the same fixed token.
class ConstantProposer : public TokenProposer {
 public:
  explicit ConstantProposer(Token t) : token_(std::move(t)) {}
  std::vector<std::vector<Proposal>> fill_candidates(const MaskQuery& q,
                                                     std::size_t) const override {
    std::vector<std::vector<Proposal>> out;
    for (std::size_t pos : q.mask_positions) out.push_back({{pos, token_, 1.0}});
    return out;
  }
  std::string describe() const override { return "constant"; }

 private:
  Token token_;
};

}  // namespace

TEST_SUITE("augment") {

TEST_CASE("slot value replacement propagates into the parse") {
  const Sample s = weather_sample();
  const MaskPlan plan = fixed_plan(s, {6});
  const MaskQuery q = apply_mask(s, plan);
  CHECK(join(q.tokens) == "how ' s the weather in [MASK]");
  CHECK(q.hidden == std::vector<Token>{"sydney"});

  const LexiconProposer lex(LexiconProposer::Table{{"in _ </s>", {"london"}}});
  const AugmentedSample c = propagate(s, plan, lex.fill(q));
  CHECK(join(c.x_aug) == "how ' s the weather in london");
  CHECK(serialize(c.y_aug) == "[in:get_weather [sl:location london ] ]");
  REQUIRE(c.replacements.size() == 1);
  CHECK(c.replacements[0] == AugmentProvenance::Replacement{6, "sydney", "london"});
}

TEST_CASE("replacing a non-leaf token leaves the parse alone") {
  const Sample s = weather_sample();
  const AugmentedSample c = propagate(s, fixed_plan(s, {4}), {{4, "forecast", 1.0}});
  CHECK(join(c.x_aug) == "how ' s the forecast in sydney");
  CHECK(c.y_aug == s.parse);
}

TEST_CASE("propagation rejects inconsistent proposals") {
  const Sample s = weather_sample();
  try {
    propagate(s, fixed_plan(s, {6}), {});
    FAIL("expected InvalidArgument");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidArgument);
  }
  try {
    propagate(s, fixed_plan(s, {6}), {{5, "x", 1.0}});
    FAIL("expected InvalidArgument");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidArgument);
  }
  try {
    propagate(s, fixed_plan(s, {6}), {{6, "new york", 1.0}});
    FAIL("expected NoProposal");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNoProposal);
  }
}

TEST_CASE("mask counts") {
  CHECK(mask_count(0.19, 7) == 1);
  CHECK(mask_count(0.0, 7) == 1);
  CHECK(mask_count(0.0, 1) == 1);
  CHECK(mask_count(0.2, 10) == 2);
  CHECK(mask_count(0.15, 10) == 2);  // 1.5 rounds away from zero
  CHECK(mask_count(1.0, 3) == 3);
}

TEST_CASE("mask plans respect the ratio bound") {
  const Sample s = make_sample("x", Domain::kWeather, "a b c d e f g h i j k l m n o p q r s t",
                               "[in:i a ]");
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    const MaskPlan plan = draw_mask_plan(s, seed);
    CHECK(plan.p >= 0.0);
    CHECK(plan.p < kMaxMaskRatio);
    CHECK(plan.positions.size() == mask_count(plan.p, 20));
    CHECK(std::is_sorted(plan.positions.begin(), plan.positions.end()));
    CHECK(std::set<std::size_t>(plan.positions.begin(), plan.positions.end()).size() ==
          plan.positions.size());
    CHECK(plan.positions.back() < 20);
    CHECK(plan.floor_applied == (std::llround(plan.p * 20) == 0));
  }
  const MaskPlan zero = draw_mask_plan(s, 1, 0.0);
  CHECK(zero.p == 0.0);
  CHECK(zero.positions.size() == 1);
  CHECK(zero.floor_applied);

  const MaskPlan a = draw_mask_plan(s, 99), b = draw_mask_plan(s, 99);
  CHECK(a.positions == b.positions);
  CHECK(a.p == b.p);
}

TEST_CASE("augmented pairs keep length and shape") {
  const Manifest toy = toy_manifest();
  const ConstantProposer proposer("zzz");
  MemorizingOracle oracle(toy);
  AugmentOptions opts;
  opts.factor = 5;
  const AugmentResult r = augment_manifest(toy, proposer, oracle, opts);
  CHECK(r.report.plans == 100);
  CHECK(r.candidates.size() == 100);
  for (const AugmentedSample& c : r.candidates) {
    CHECK(c.x_aug.size() == c.source_utterance.size());
    CHECK(c.y_aug.same_shape(c.source_parse));
    CHECK(c.y_aug.leaf_count() == c.source_parse.leaf_count());
    std::size_t changed = 0;
    for (std::size_t i = 0; i < c.x_aug.size(); ++i) changed += c.x_aug[i] != c.source_utterance[i];
    CHECK(changed <= c.plan.positions.size());
  }
}

TEST_CASE("filter verdicts") {
  const Sample s = weather_sample();
  std::vector<AugmentedSample> cands = {
      propagate(s, fixed_plan(s, {6}), {{6, "london", 1}}),
      propagate(s, fixed_plan(s, {6}), {{6, "paris", 1}}),
      propagate(s, fixed_plan(s, {6}), {{6, "tokyo", 1}}),
      propagate(s, fixed_plan(s, {6}), {{6, "sydney", 1}}),
      propagate(s, fixed_plan(s, {6}), {{6, "london", 1}}),
  };
  MemorizingOracle oracle;
  oracle.add("how ' s the weather in london", "[in:get_weather [sl:location london ] ]");
  oracle.add("how ' s the weather in paris", "[in:get_weather [sl:location sydney ] ]");
  filter(cands, oracle, 2);
  CHECK(cands[0].verdict == Verdict::kKept);
  CHECK(cands[1].verdict == Verdict::kDroppedMismatch);
  CHECK(cands[2].verdict == Verdict::kDroppedNoParse);
  CHECK(cands[3].verdict == Verdict::kDroppedDuplicate);
  CHECK(cands[4].verdict == Verdict::kDroppedDuplicate);
  CHECK(cands[1].oracle_answer == std::optional<std::string>("[in:get_weather [sl:location sydney ] ]"));
  CHECK(verdict_name(Verdict::kDroppedMismatch) == "dropped_mismatch");
}

TEST_CASE("filter keeps exactly the designated pairs") {
  const Manifest toy = toy_manifest();
  AugmentOptions opts;
  opts.seed = 17;
  opts.factor = 2;
  const auto designated = designated_pairs(toy, opts);
  REQUIRE(designated.size() == 5);
  MemorizingOracle oracle(toy);
  for (const auto& [x, y] : designated) oracle.add(x, y);
  const AugmentResult r = augment_manifest(toy, toy_proposer(), oracle, opts);
  CHECK(r.report.kept == 5);
  CHECK(r.kept.size() == 5);
  CHECK(r.report.kept + r.report.dropped_no_parse + r.report.dropped_mismatch +
            r.report.dropped_duplicate ==
        r.report.candidates);
  CHECK(r.report.dropped_duplicate > 0);
  std::set<std::pair<std::string, std::string>> kept;
  for (const Sample& s : r.kept.samples) {
    kept.emplace(join(s.utterance), serialize(s.parse));
    REQUIRE(s.provenance.has_value());
    CHECK(s.id == s.provenance->source_id + s.id.substr(s.id.find("@aug")));
    CHECK(oracle.parse(join(s.utterance)) == serialize(s.parse));
  }
  CHECK(kept == std::set<std::pair<std::string, std::string>>(designated.begin(), designated.end()));
  for (const AugmentedSample& c : r.candidates) CHECK(c.verdict != Verdict::kPending);
}

TEST_CASE("proposals per mask and missing proposals") {
  const Manifest toy = toy_manifest();
  const LexiconProposer two(LexiconProposer::Table{{"_", {"zzz", "yyy"}}});
  AugmentOptions opts;
  opts.proposals_per_mask = 3;
  const AugmentResult r = augment_manifest(toy, two, MemorizingOracle(toy), opts);
  CHECK(r.candidates.size() == 40);
  CHECK(r.candidates[0].k == 0);
  CHECK(r.candidates[1].k == 1);

  const LexiconProposer none(LexiconProposer::Table{{"nothing matches", {"x"}}});
  const AugmentResult empty = augment_manifest(toy, none, MemorizingOracle(toy), {});
  CHECK(empty.candidates.empty());
  CHECK(empty.report.no_proposal == 20);
  CHECK(empty.report.to_json().dump().find("\"no_proposal\":20") != std::string::npos);
}

TEST_CASE("output is independent of the job count") {
  const Manifest toy = toy_manifest();
  AugmentOptions opts;
  opts.seed = 3;
  opts.factor = 4;
  std::string reference;
  for (std::size_t jobs : {1u, 2u, 8u}) {
    opts.jobs = jobs;
    const AugmentResult r = augment_manifest(toy, toy_proposer(), MemorizingOracle(toy), opts);
    std::string dump = to_jsonl(r.kept) + r.report.to_json().dump();
    for (const auto& c : r.candidates) dump += candidate_to_json(c).dump();
    if (reference.empty())
      reference = dump;
    else
      CHECK(dump == reference);
  }
  opts.seed = 4;
  opts.jobs = 1;
  const AugmentResult other = augment_manifest(toy, toy_proposer(), MemorizingOracle(toy), opts);
  std::string dump = to_jsonl(other.kept) + other.report.to_json().dump();
  for (const auto& c : other.candidates) dump += candidate_to_json(c).dump();
  CHECK(dump != reference);
}

}  // TEST_SUITE
