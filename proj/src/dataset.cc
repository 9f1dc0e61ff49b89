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

#include "topkit/dataset.h"

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <unordered_set>
#include <utility>

#include "topkit/error.h"
#include "topkit/random.h"

namespace topkit {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::string_view, 8> kDomainNames = {
    "alarm", "event", "messaging", "music",
    "navigation", "timer", "reminder", "weather"};

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

bool is_blank(const std::string& line) {
  return line.find_first_not_of(" \t\r\n") == std::string::npos;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  return in;
}

// Rethrows a record-level failure with the row attached.
[[noreturn]] void rethrow_with_row(const Error& e, std::size_t row,
                                   ErrorCode fallback) {
  ErrorCode code = e.code();
  if (code != ErrorCode::kAlignmentFailed && code != ErrorCode::kBadDomain &&
      code != ErrorCode::kMalformedRecord && code != ErrorCode::kMalformedParse)
    code = fallback;
  std::string msg = code == e.code()
                        ? e.detail()
                        : std::string(error_code_name(e.code())) + ": " + e.detail();
  throw Error(code, msg, row);
}

}  // namespace

std::string_view domain_name(Domain d) {
  return kDomainNames[static_cast<std::size_t>(d)];
}

Domain parse_domain(std::string_view name) {
  const std::string lowered = canonicalize(name);
  for (std::size_t i = 0; i < kDomainNames.size(); ++i)
    if (lowered == kDomainNames[i]) return kAllDomains[i];
  throw Error(ErrorCode::kBadDomain, "unknown domain '" + std::string(name) + "'");
}

std::string_view split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTest: return "test";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  const std::string lowered = canonicalize(name);
  if (lowered == "train") return Split::kTrain;
  if (lowered == "valid" || lowered == "eval" || lowered == "dev")
    return Split::kValid;
  if (lowered == "test") return Split::kTest;
  throw Error(ErrorCode::kInvalidArgument, "unknown split '" + std::string(name) + "'");
}

void validate_sample(const Sample& sample) {
  if (sample.id.empty()) throw Error(ErrorCode::kMalformedRecord, "empty id");
  if (sample.utterance.empty())
    throw Error(ErrorCode::kBadToken, "empty utterance in " + sample.id);
  for (const Token& t : sample.utterance)
    if (t.empty() || t.find_first_of(" \t\r\n") != Token::npos)
      throw Error(ErrorCode::kBadToken, "bad utterance token in " + sample.id);
  align_leaves(sample.parse, sample.utterance);
}

void check_unique_ids(const Manifest& manifest) {
  std::unordered_set<std::string> seen;
  for (const Sample& s : manifest.samples)
    if (!seen.insert(s.id).second)
      throw Error(ErrorCode::kDuplicateId, "duplicate id '" + s.id + "'");
}

Manifest load_tsv(const std::string& path, const TsvOptions& options,
                  std::vector<RowIssue>* skipped) {
  std::ifstream in = open_input(path);
  std::string line;
  if (!std::getline(in, line))
    throw Error(ErrorCode::kMissingColumn, "'" + path + "' has no header row");
  strip_cr(line);
  const std::vector<std::string> header = split_tabs(line);
  auto find_column = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (canonicalize(header[i]) == canonicalize(name)) return i;
    return std::nullopt;
  };
  auto require_column = [&](const std::string& name) {
    auto col = find_column(name);
    if (!col)
      throw Error(ErrorCode::kMissingColumn,
                  "'" + path + "' has no column '" + name + "'");
    return *col;
  };
  const std::size_t utt_col = require_column(options.utterance_column);
  const std::size_t parse_col = require_column(options.parse_column);
  const std::size_t domain_col = require_column(options.domain_column);
  const auto id_col = find_column(options.id_column);
  const auto split_col = find_column(options.split_column);
  const auto audio_col = find_column(options.audio_column);

  const std::string filename = fs::path(path).filename().string();
  Manifest manifest;
  manifest.provenance = "tsv:" + path;
  std::unordered_set<std::string> seen;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    strip_cr(line);
    if (is_blank(line)) continue;
    ++row;
    try {
      const std::vector<std::string> cells = split_tabs(line);
      if (cells.size() != header.size())
        throw Error(ErrorCode::kMalformedRecord,
                    "expected " + std::to_string(header.size()) + " columns, got " +
                        std::to_string(cells.size()));
      ParseTree parse = [&] {
        try {
          return parse_top(cells[parse_col]);
        } catch (const Error& e) {
          throw Error(ErrorCode::kMalformedParse, e.what());
        }
      }();
      Sample sample{
          .id = (id_col && !cells[*id_col].empty())
                    ? cells[*id_col]
                    : filename + ":" + std::to_string(row),
          .domain = parse_domain(cells[domain_col]),
          .utterance = tokenize(cells[utt_col]),
          .parse = std::move(parse),
          .split = (split_col && !cells[*split_col].empty())
                       ? parse_split(cells[*split_col])
                       : options.default_split,
          .audio_path = (audio_col && !cells[*audio_col].empty())
                            ? std::optional<std::string>(cells[*audio_col])
                            : std::nullopt,
          .provenance = std::nullopt,
      };
      validate_sample(sample);
      if (!seen.insert(sample.id).second)
        throw Error(ErrorCode::kDuplicateId, "duplicate id '" + sample.id + "'");
      manifest.samples.push_back(std::move(sample));
    } catch (const Error& e) {
      if (options.strict) {
        if (e.code() == ErrorCode::kDuplicateId) throw Error(e.code(), e.detail(), row);
        rethrow_with_row(e, row, ErrorCode::kMalformedRecord);
      }
      if (skipped) skipped->push_back({row, e.what()});
    }
  }
  return manifest;
}

nlohmann::ordered_json sample_to_json(const Sample& sample) {
  nlohmann::ordered_json j;
  j["id"] = sample.id;
  j["domain"] = domain_name(sample.domain);
  j["utterance"] = join(sample.utterance);
  j["parse"] = serialize(sample.parse);
  j["split"] = split_name(sample.split);
  if (sample.audio_path) j["audio_path"] = *sample.audio_path;
  if (sample.provenance) {
    const AugmentProvenance& p = *sample.provenance;
    nlohmann::ordered_json prov;
    prov["source_id"] = p.source_id;
    prov["positions"] = p.positions;
    nlohmann::ordered_json repl = nlohmann::ordered_json::array();
    for (const auto& r : p.replacements)
      repl.push_back({r.position, r.old_token, r.new_token});
    prov["replacements"] = std::move(repl);
    prov["p"] = p.p;
    j["provenance"] = std::move(prov);
  }
  return j;
}

Sample sample_from_json(const nlohmann::json& record, std::size_t line) {
  auto bad = [line](const std::string& msg) {
    return Error(ErrorCode::kMalformedRecord, msg, line);
  };
  if (!record.is_object()) throw bad("record is not an object");
  auto get_string = [&](const char* key) -> std::string {
    auto it = record.find(key);
    if (it == record.end()) throw bad(std::string("missing field '") + key + "'");
    if (!it->is_string()) throw bad(std::string("field '") + key + "' is not a string");
    return it->get<std::string>();
  };
  try {
    std::optional<std::string> audio;
    if (auto it = record.find("audio_path"); it != record.end() && !it->is_null()) {
      if (!it->is_string()) throw bad("field 'audio_path' is not a string");
      audio = it->get<std::string>();
    }
    std::optional<AugmentProvenance> provenance;
    if (auto it = record.find("provenance"); it != record.end() && !it->is_null()) {
      AugmentProvenance p;
      p.source_id = it->at("source_id").get<std::string>();
      p.positions = it->at("positions").get<std::vector<std::size_t>>();
      for (const auto& r : it->at("replacements"))
        p.replacements.push_back({r.at(0).get<std::size_t>(),
                                  r.at(1).get<std::string>(),
                                  r.at(2).get<std::string>()});
      p.p = it->at("p").get<double>();
      provenance = std::move(p);
    }
    Sample sample{
        .id = get_string("id"),
        .domain = parse_domain(get_string("domain")),
        .utterance = tokenize(get_string("utterance")),
        .parse = parse_top(get_string("parse")),
        .split = record.contains("split") ? parse_split(get_string("split"))
                                          : Split::kTrain,
        .audio_path = std::move(audio),
        .provenance = std::move(provenance),
    };
    validate_sample(sample);
    return sample;
  } catch (const nlohmann::json::exception& e) {
    throw bad(e.what());
  } catch (const Error& e) {
    if (e.row()) throw;
    throw bad(std::string(error_code_name(e.code())) + ": " + e.detail());
  }
}

Manifest load_jsonl(const std::string& path, bool strict,
                    std::vector<RowIssue>* skipped) {
  std::ifstream in = open_input(path);
  Manifest manifest;
  manifest.provenance = "jsonl:" + path;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    try {
      nlohmann::json record;
      try {
        record = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kMalformedRecord, e.what(), line_no);
      }
      Sample sample = sample_from_json(record, line_no);
      if (!seen.insert(sample.id).second)
        throw Error(ErrorCode::kDuplicateId, "duplicate id '" + sample.id + "'",
                    line_no);
      manifest.samples.push_back(std::move(sample));
    } catch (const Error& e) {
      if (strict) throw;
      if (skipped) skipped->push_back({line_no, e.what()});
    }
  }
  return manifest;
}

std::string to_jsonl(const Manifest& manifest) {
  std::string out;
  for (const Sample& s : manifest.samples) {
    out += sample_to_json(s).dump();
    out += '\n';
  }
  return out;
}

void save_jsonl(const Manifest& manifest, const std::string& path) {
  write_file_atomic(path, to_jsonl(manifest));
}

Manifest load_manifest(const std::string& path, const TsvOptions& options,
                       std::vector<RowIssue>* skipped) {
  if (fs::path(path).extension() == ".tsv") return load_tsv(path, options, skipped);
  return load_jsonl(path, options.strict, skipped);
}

Manifest filter_domain(const Manifest& manifest, const std::set<Domain>& domains) {
  Manifest out;
  out.provenance = manifest.provenance + " | filter_domain";
  for (const Sample& s : manifest.samples)
    if (domains.count(s.domain)) out.samples.push_back(s);
  return out;
}

Manifest upsample_mix(const Manifest& held_in, const Manifest& low_resource,
                      std::size_t factor, std::uint64_t seed) {
  if (factor == 0)
    throw Error(ErrorCode::kInvalidArgument, "upsampling factor must be >= 1");
  Manifest out;
  out.provenance = "mix(held_in=" + held_in.provenance +
                   ", low=" + low_resource.provenance +
                   ", factor=" + std::to_string(factor) +
                   ", seed=" + std::to_string(seed) + ")";
  out.samples.reserve(held_in.size() + factor * low_resource.size());
  out.samples = held_in.samples;
  for (std::size_t k = 0; k < factor; ++k) {
    for (const Sample& s : low_resource.samples) {
      Sample copy = s;
      if (k > 0) copy.id += "#" + std::to_string(k);
      out.samples.push_back(std::move(copy));
    }
  }
  check_unique_ids(out);
  Engine engine(derive_seed(seed, "upsample_mix", 0));
  shuffle(out.samples, engine);
  return out;
}

void write_file_atomic(const std::string& path, std::string_view contents) {
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write '" + tmp.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw Error(ErrorCode::kIo, "short write to '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::kIo, "cannot rename onto '" + path + "'");
  }
}

}  // namespace topkit
