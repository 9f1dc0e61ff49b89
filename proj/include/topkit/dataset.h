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

// Samples, manifests, TSV/JSONL ingestion and the held-in/low-resource mix.

#ifndef TOPKIT_DATASET_H_
#define TOPKIT_DATASET_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "topkit/top_parse.h"

namespace topkit {

enum class Domain {
  kAlarm,
  kEvent,
  kMessaging,
  kMusic,
  kNavigation,
  kTimer,
  kReminder,
  kWeather,
};

inline constexpr std::array<Domain, 8> kAllDomains = {
    Domain::kAlarm, Domain::kEvent,    Domain::kMessaging, Domain::kMusic,
    Domain::kNavigation, Domain::kTimer, Domain::kReminder, Domain::kWeather};

enum class Split { kTrain, kValid, kTest };

std::string_view domain_name(Domain d);
// Case-insensitive. Throws kBadDomain.
Domain parse_domain(std::string_view name);
std::string_view split_name(Split s);
// Accepts "train", "valid"/"eval"/"dev", "test". Throws kInvalidArgument.
Split parse_split(std::string_view name);

// Where an augmented sample came from.
struct AugmentProvenance {
  struct Replacement {
    std::size_t position = 0;
    Token old_token;
    Token new_token;
    friend bool operator==(const Replacement&, const Replacement&) = default;
  };
  std::string source_id;
  std::vector<std::size_t> positions;
  std::vector<Replacement> replacements;
  double p = 0.0;

  friend bool operator==(const AugmentProvenance&, const AugmentProvenance&) = default;
};

struct Sample {
  std::string id;
  Domain domain = Domain::kWeather;
  Utterance utterance;
  ParseTree parse;
  Split split = Split::kTrain;
  std::optional<std::string> audio_path;
  std::optional<AugmentProvenance> provenance;

  friend bool operator==(const Sample&, const Sample&) = default;
};

// Checks the cross-field invariants: non-empty utterance, non-empty id and
// leaves aligned with the utterance. Throws kBadToken/kAlignmentFailed.
void validate_sample(const Sample& sample);

// Equality compares samples only; provenance is a free-form note.
struct Manifest {
  std::vector<Sample> samples;
  std::string provenance;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }

  friend bool operator==(const Manifest& a, const Manifest& b) {
    return a.samples == b.samples;
  }
};

// Throws kDuplicateId naming the first repeated id.
void check_unique_ids(const Manifest& manifest);

struct RowIssue {
  std::size_t row = 0;
  std::string message;
};

struct TsvOptions {
  std::string utterance_column = "utterance";
  std::string parse_column = "semantic_parse";
  std::string domain_column = "domain";
  // Used when present in the header.
  std::string id_column = "id";
  std::string split_column = "split";
  std::string audio_column = "audio_path";
  Split default_split = Split::kTrain;
  bool strict = true;
};

// Reads a tab-separated file with a header row. Rows are numbered from 1 for
// the first data row; missing ids become "<filename>:<row>". In strict mode
// the first bad row throws (kMalformedParse, kAlignmentFailed, ...) with its
// row number; in lenient mode bad rows are skipped and appended to `skipped`.
Manifest load_tsv(const std::string& path, const TsvOptions& options = {},
                  std::vector<RowIssue>* skipped = nullptr);

nlohmann::ordered_json sample_to_json(const Sample& sample);
// `line` is used for error reporting only.
Sample sample_from_json(const nlohmann::json& record, std::size_t line);

// One JSON object per line. Blank lines are ignored. Bad lines throw
// kMalformedRecord (strict) or are skipped into `skipped`.
Manifest load_jsonl(const std::string& path, bool strict = true,
                    std::vector<RowIssue>* skipped = nullptr);
std::string to_jsonl(const Manifest& manifest);
void save_jsonl(const Manifest& manifest, const std::string& path);

// Picks the loader by extension: ".tsv" loads TSV, anything else JSONL.
Manifest load_manifest(const std::string& path, const TsvOptions& options = {},
                       std::vector<RowIssue>* skipped = nullptr);

Manifest filter_domain(const Manifest& manifest, const std::set<Domain>& domains);

// Each held-in sample once plus each low-resource sample `factor` times,
// shuffled with `seed`. Copy 0 keeps its id; copy k > 0 is "<id>#k".
Manifest upsample_mix(const Manifest& held_in, const Manifest& low_resource,
                      std::size_t factor, std::uint64_t seed);

// Writes `contents` to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::string& path, std::string_view contents);

}  // namespace topkit

#endif  // TOPKIT_DATASET_H_
