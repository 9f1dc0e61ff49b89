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

// Masked-LM data augmentation.
//
// For a sample (x, y):
//   1. draw p ~ U[0, 0.2) and mask max(1, round(p * |x|)) positions of x;
//   2. fill each mask with a proposer token, giving x_aug;
//   3. where a masked position is the aligned position of a parse leaf,
//      put the same token into that leaf, giving y_aug.
// Candidates that repeat their source or an earlier candidate are dropped,
// and the rest are kept only if the parser oracle reproduces y_aug exactly
// from x_aug.

#ifndef TOPKIT_AUGMENT_H_
#define TOPKIT_AUGMENT_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "topkit/dataset.h"
#include "topkit/oracle.h"
#include "topkit/top_parse.h"

namespace topkit {

inline constexpr double kMaxMaskRatio = 0.2;

struct MaskPlan {
  std::string sample_id;
  double p = 0.0;
  std::vector<std::size_t> positions;  // sorted, distinct
  std::uint64_t seed = 0;
  // round(p * |x|) was 0 and the one-mask floor kicked in.
  bool floor_applied = false;
};

// max(1, round(p * length)), never more than `length`. Rounds half away
// from zero.
std::size_t mask_count(double p, std::size_t length);

// Deterministic in (sample.utterance.size(), seed).
MaskPlan draw_mask_plan(const Sample& sample, std::uint64_t seed,
                        double max_ratio = kMaxMaskRatio);

// The query carries the masked-out originals in `hidden`.
MaskQuery apply_mask(const Sample& sample, const MaskPlan& plan);

enum class Verdict {
  kPending,
  kKept,
  kDroppedNoParse,
  kDroppedMismatch,
  kDroppedDuplicate,
};

std::string_view verdict_name(Verdict v);

struct AugmentedSample {
  std::string source_id;
  std::size_t k = 0;
  Utterance source_utterance;
  ParseTree source_parse;
  Utterance x_aug;
  ParseTree y_aug;
  std::vector<AugmentProvenance::Replacement> replacements;
  MaskPlan plan;
  Verdict verdict = Verdict::kPending;
  std::optional<std::string> oracle_answer;

  std::string id() const { return source_id + "@aug" + std::to_string(k); }
};

// Substitutes one proposal per masked position (in plan order) into x and
// mirrors it into every parse leaf aligned to that position. Throws
// kAlignmentFailed if the source leaves do not align, kInvalidArgument if
// the proposals do not match the plan.
AugmentedSample propagate(const Sample& sample, const MaskPlan& plan,
                          const std::vector<Proposal>& proposals);

// Sets the verdict of every pending candidate, in order. Duplicates of the
// candidate's own source or of any earlier candidate are dropped before the
// oracle is consulted. Oracle failures propagate and leave no partial result.
void filter(std::vector<AugmentedSample>& candidates, const ParserOracle& oracle,
            std::size_t jobs = 1);

struct AugmentOptions {
  std::size_t factor = 1;  // mask plans per source sample
  std::uint64_t seed = 0;
  std::size_t proposals_per_mask = 1;
  std::size_t jobs = 1;
  double max_ratio = kMaxMaskRatio;
};

struct AugReport {
  std::size_t candidates = 0;
  std::size_t kept = 0;
  std::size_t dropped_no_parse = 0;
  std::size_t dropped_mismatch = 0;
  std::size_t dropped_duplicate = 0;
  // Plans abandoned because the proposer had nothing for some mask.
  std::size_t no_proposal = 0;
  std::size_t mask_floor_applied = 0;
  std::size_t plans = 0;

  nlohmann::ordered_json to_json() const;
};

struct AugmentResult {
  Manifest kept;
  AugReport report;
  // Every candidate with its verdict, ordered by (source_id, k).
  std::vector<AugmentedSample> candidates;
};

// Runs the whole procedure. Plan k of sample s uses
// derive_seed(seed, s.id, k); with proposals_per_mask = n, candidate index
// is plan * n + j where j picks the j-th proposal at every mask. Output is
// independent of `jobs`.
AugmentResult augment_manifest(const Manifest& manifest, const TokenProposer& proposer,
                               const ParserOracle& oracle,
                               const AugmentOptions& options);

// Kept candidate as a dataset sample "<source_id>@aug<k>" with provenance.
Sample to_sample(const AugmentedSample& candidate, const Sample& source);

nlohmann::ordered_json candidate_to_json(const AugmentedSample& candidate);

}  // namespace topkit

#endif  // TOPKIT_AUGMENT_H_
