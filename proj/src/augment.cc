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

#include "topkit/augment.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>
#include <unordered_set>
#include <utility>

#include "topkit/error.h"
#include "topkit/metrics.h"
#include "topkit/parallel.h"
#include "topkit/random.h"

namespace topkit {

namespace {

std::string pair_key(const Utterance& x, const ParseTree& y) {
  return join(x) + '\t' + serialize(y);
}

}  // namespace

std::size_t mask_count(double p, std::size_t length) {
  const auto rounded = static_cast<std::size_t>(std::llround(p * static_cast<double>(length)));
  return std::min(length, std::max<std::size_t>(1, rounded));
}

MaskPlan draw_mask_plan(const Sample& sample, std::uint64_t seed, double max_ratio) {
  const std::size_t len = sample.utterance.size();
  if (len == 0)
    throw Error(ErrorCode::kInvalidArgument, "cannot mask empty utterance of " + sample.id);
  Engine engine(seed);
  MaskPlan plan;
  plan.sample_id = sample.id;
  plan.seed = seed;
  plan.p = max_ratio * uniform01(engine);
  plan.floor_applied = std::llround(plan.p * static_cast<double>(len)) == 0;
  const std::size_t n = mask_count(plan.p, len);

  std::vector<std::size_t> order(len);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i < n; ++i)
    std::swap(order[i], order[i + uniform_index(engine, len - i)]);
  plan.positions.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n));
  std::sort(plan.positions.begin(), plan.positions.end());
  return plan;
}

MaskQuery apply_mask(const Sample& sample, const MaskPlan& plan) {
  MaskQuery query;
  query.tokens = sample.utterance;
  query.mask_positions = plan.positions;
  for (std::size_t pos : plan.positions) {
    if (pos >= query.tokens.size())
      throw Error(ErrorCode::kInvalidArgument,
                  "mask position " + std::to_string(pos) + " out of range for " + sample.id);
    query.hidden.push_back(query.tokens[pos]);
    query.tokens[pos] = std::string(kMaskToken);
  }
  query.validate();
  return query;
}

std::string_view verdict_name(Verdict v) {
  switch (v) {
    case Verdict::kPending: return "pending";
    case Verdict::kKept: return "kept";
    case Verdict::kDroppedNoParse: return "dropped_no_parse";
    case Verdict::kDroppedMismatch: return "dropped_mismatch";
    case Verdict::kDroppedDuplicate: return "dropped_duplicate";
  }
  return "pending";
}

AugmentedSample propagate(const Sample& sample, const MaskPlan& plan,
                          const std::vector<Proposal>& proposals) {
  if (proposals.size() != plan.positions.size())
    throw Error(ErrorCode::kInvalidArgument,
                std::to_string(proposals.size()) + " proposals for " +
                    std::to_string(plan.positions.size()) + " masks");
  const std::vector<LeafAlignment> alignment =
      align_leaves(sample.parse, sample.utterance);
  std::unordered_map<std::size_t, std::size_t> leaf_at;  // position -> leaf
  for (const LeafAlignment& a : alignment) leaf_at[a.position] = a.leaf_index;

  Utterance x_aug = sample.utterance;
  std::map<std::size_t, Token> leaf_repl;
  std::vector<AugmentProvenance::Replacement> replacements;
  for (std::size_t m = 0; m < proposals.size(); ++m) {
    const std::size_t pos = plan.positions[m];
    const Proposal& prop = proposals[m];
    if (prop.position != pos)
      throw Error(ErrorCode::kInvalidArgument,
                  "proposal for position " + std::to_string(prop.position) +
                      " where " + std::to_string(pos) + " was masked");
    if (!is_leaf_token(prop.token))
      throw Error(ErrorCode::kNoProposal,
                  "unusable token '" + prop.token + "' at position " + std::to_string(pos));
    replacements.push_back({pos, x_aug[pos], prop.token});
    x_aug[pos] = prop.token;
    if (auto it = leaf_at.find(pos); it != leaf_at.end())
      leaf_repl[it->second] = prop.token;
  }
  return AugmentedSample{
      .source_id = sample.id,
      .k = 0,
      .source_utterance = sample.utterance,
      .source_parse = sample.parse,
      .x_aug = std::move(x_aug),
      .y_aug = sample.parse.with_leaves(leaf_repl),
      .replacements = std::move(replacements),
      .plan = plan,
      .verdict = Verdict::kPending,
      .oracle_answer = std::nullopt,
  };
}

void filter(std::vector<AugmentedSample>& candidates, const ParserOracle& oracle,
            std::size_t jobs) {
  std::unordered_set<std::string> seen;
  std::vector<std::size_t> to_check;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    AugmentedSample& c = candidates[i];
    if (c.verdict != Verdict::kPending) continue;
    const std::string key = pair_key(c.x_aug, c.y_aug);
    if (key == pair_key(c.source_utterance, c.source_parse) || !seen.insert(key).second) {
      c.verdict = Verdict::kDroppedDuplicate;
      continue;
    }
    to_check.push_back(i);
  }

  std::vector<std::optional<std::string>> answers(to_check.size());
  parallel_for(to_check.size(), jobs, [&](std::size_t i) {
    answers[i] = oracle.parse(join(candidates[to_check[i]].x_aug));
  });

  for (std::size_t i = 0; i < to_check.size(); ++i) {
    AugmentedSample& c = candidates[to_check[i]];
    c.oracle_answer = answers[i];
    if (!answers[i])
      c.verdict = Verdict::kDroppedNoParse;
    else if (exact_match(*answers[i], serialize(c.y_aug)))
      c.verdict = Verdict::kKept;
    else
      c.verdict = Verdict::kDroppedMismatch;
  }
}

nlohmann::ordered_json AugReport::to_json() const {
  nlohmann::ordered_json j;
  j["candidates"] = candidates;
  j["kept"] = kept;
  j["dropped_no_parse"] = dropped_no_parse;
  j["dropped_mismatch"] = dropped_mismatch;
  j["dropped_duplicate"] = dropped_duplicate;
  j["no_proposal"] = no_proposal;
  j["mask_floor_applied"] = mask_floor_applied;
  j["plans"] = plans;
  return j;
}

AugmentResult augment_manifest(const Manifest& manifest, const TokenProposer& proposer,
                               const ParserOracle& oracle,
                               const AugmentOptions& options) {
  if (options.factor == 0)
    throw Error(ErrorCode::kInvalidArgument, "augmentation factor must be >= 1");
  if (options.proposals_per_mask == 0)
    throw Error(ErrorCode::kInvalidArgument, "proposals per mask must be >= 1");
  if (!(options.max_ratio >= 0.0 && options.max_ratio <= 1.0))
    throw Error(ErrorCode::kInvalidArgument, "mask ratio bound must lie in [0, 1]");
  check_unique_ids(manifest);

  // Sources in id order so candidate order is (source_id, k).
  std::vector<const Sample*> sources;
  sources.reserve(manifest.size());
  for (const Sample& s : manifest.samples) sources.push_back(&s);
  std::sort(sources.begin(), sources.end(),
            [](const Sample* a, const Sample* b) { return a->id < b->id; });

  struct PerSource {
    std::vector<AugmentedSample> candidates;
    std::size_t no_proposal = 0;
    std::size_t floor_applied = 0;
  };
  std::vector<PerSource> generated(sources.size());
  const std::size_t ppm = options.proposals_per_mask;

  parallel_for(sources.size(), options.jobs, [&](std::size_t i) {
    const Sample& source = *sources[i];
    PerSource& out = generated[i];
    for (std::size_t plan_index = 0; plan_index < options.factor; ++plan_index) {
      const MaskPlan plan = draw_mask_plan(
          source, derive_seed(options.seed, source.id, plan_index), options.max_ratio);
      if (plan.floor_applied) ++out.floor_applied;
      const MaskQuery query = apply_mask(source, plan);
      std::vector<std::vector<Proposal>> per_mask;
      try {
        per_mask = proposer.fill_candidates(query, ppm);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kNoProposal) throw;
        ++out.no_proposal;
        continue;
      }
      for (std::size_t j = 0; j < ppm; ++j) {
        const bool any_new = std::any_of(per_mask.begin(), per_mask.end(),
                                         [j](const auto& v) { return v.size() > j; });
        if (j > 0 && !any_new) break;
        std::vector<Proposal> chosen;
        chosen.reserve(per_mask.size());
        for (const auto& v : per_mask) chosen.push_back(v[std::min(j, v.size() - 1)]);
        std::optional<AugmentedSample> candidate;
        try {
          candidate.emplace(propagate(source, plan, chosen));
        } catch (const Error& e) {
          if (e.code() != ErrorCode::kNoProposal) throw;
          ++out.no_proposal;
          continue;
        }
        candidate->k = plan_index * ppm + j;
        out.candidates.push_back(std::move(*candidate));
      }
    }
  });

  AugmentResult result;
  result.report.plans = options.factor * sources.size();
  std::unordered_map<std::string, const Sample*> by_id;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    by_id[sources[i]->id] = sources[i];
    result.report.no_proposal += generated[i].no_proposal;
    result.report.mask_floor_applied += generated[i].floor_applied;
    for (AugmentedSample& c : generated[i].candidates)
      result.candidates.push_back(std::move(c));
  }

  filter(result.candidates, oracle, options.jobs);

  result.kept.provenance = "augment(" + manifest.provenance + ", seed=" +
                           std::to_string(options.seed) +
                           ", factor=" + std::to_string(options.factor) + ")";
  AugReport& report = result.report;
  report.candidates = result.candidates.size();
  for (const AugmentedSample& c : result.candidates) {
    switch (c.verdict) {
      case Verdict::kKept:
        ++report.kept;
        result.kept.samples.push_back(to_sample(c, *by_id.at(c.source_id)));
        break;
      case Verdict::kDroppedNoParse: ++report.dropped_no_parse; break;
      case Verdict::kDroppedMismatch: ++report.dropped_mismatch; break;
      case Verdict::kDroppedDuplicate: ++report.dropped_duplicate; break;
      case Verdict::kPending: break;
    }
  }
  return result;
}

Sample to_sample(const AugmentedSample& candidate, const Sample& source) {
  return Sample{
      .id = candidate.id(),
      .domain = source.domain,
      .utterance = candidate.x_aug,
      .parse = candidate.y_aug,
      .split = source.split,
      .audio_path = std::nullopt,
      .provenance =
          AugmentProvenance{
              .source_id = candidate.source_id,
              .positions = candidate.plan.positions,
              .replacements = candidate.replacements,
              .p = candidate.plan.p,
          },
  };
}

nlohmann::ordered_json candidate_to_json(const AugmentedSample& candidate) {
  nlohmann::ordered_json j;
  j["id"] = candidate.id();
  j["source_id"] = candidate.source_id;
  j["utterance"] = join(candidate.x_aug);
  j["parse"] = serialize(candidate.y_aug);
  j["verdict"] = verdict_name(candidate.verdict);
  j["oracle_parse"] = candidate.oracle_answer ? nlohmann::ordered_json(*candidate.oracle_answer)
                                              : nlohmann::ordered_json(nullptr);
  j["p"] = candidate.plan.p;
  j["positions"] = candidate.plan.positions;
  nlohmann::ordered_json repl = nlohmann::ordered_json::array();
  for (const auto& r : candidate.replacements)
    repl.push_back({r.position, r.old_token, r.new_token});
  j["replacements"] = std::move(repl);
  return j;
}

}  // namespace topkit
