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

#include "topkit/oracle.h"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <semaphore>
#include <thread>
#include <utility>

#include "httplib.h"
#include "topkit/error.h"

namespace topkit {

void MaskQuery::validate() const {
  for (std::size_t i = 0; i < mask_positions.size(); ++i) {
    const std::size_t pos = mask_positions[i];
    if (pos >= tokens.size())
      throw Error(ErrorCode::kInvalidQuery,
                  "mask position " + std::to_string(pos) + " out of range");
    if (i > 0 && pos <= mask_positions[i - 1])
      throw Error(ErrorCode::kInvalidQuery, "mask positions not strictly increasing");
    if (tokens[pos] != kMaskToken)
      throw Error(ErrorCode::kInvalidQuery,
                  "position " + std::to_string(pos) + " is not a mask");
  }
  if (!hidden.empty() && hidden.size() != mask_positions.size())
    throw Error(ErrorCode::kInvalidQuery, "hidden tokens do not match masks");
}

std::vector<Proposal> TokenProposer::fill(const MaskQuery& query) const {
  std::vector<std::vector<Proposal>> all = fill_candidates(query, 1);
  std::vector<Proposal> out;
  out.reserve(all.size());
  for (auto& per_mask : all) out.push_back(std::move(per_mask.front()));
  return out;
}

// ---------------------------------------------------------------------------
// LexiconProposer

LexiconProposer::LexiconProposer(const Table& table) {
  for (const auto& [key, replacements] : table) {
    std::vector<Token> cleaned;
    for (const Token& r : replacements) {
      std::string tok = canonicalize(r);
      if (!is_leaf_token(tok))
        throw Error(ErrorCode::kInvalidArgument,
                    "lexicon entry '" + key + "' has unusable replacement '" + r + "'");
      cleaned.push_back(std::move(tok));
    }
    if (!cleaned.empty()) table_[canonicalize(key)] = std::move(cleaned);
  }
}

LexiconProposer LexiconProposer::from_json(const nlohmann::json& j) {
  if (!j.is_object())
    throw Error(ErrorCode::kInvalidArgument, "lexicon must be a JSON object");
  Table table;
  try {
    for (const auto& [key, value] : j.items())
      table[key] = value.get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("bad lexicon: ") + e.what());
  }
  return LexiconProposer(table);
}

LexiconProposer LexiconProposer::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open lexicon '" + path + "'");
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kInvalidArgument,
                "lexicon '" + path + "' is not JSON: " + e.what());
  }
}

const std::vector<Token>* LexiconProposer::lookup(const MaskQuery& query,
                                                  std::size_t mask) const {
  const std::size_t pos = query.mask_positions[mask];
  const std::string left = pos == 0 ? "<s>" : query.tokens[pos - 1];
  const std::string right =
      pos + 1 == query.tokens.size() ? "</s>" : query.tokens[pos + 1];
  std::vector<std::string> keys = {left + " _ " + right, left + " _", "_ " + right};
  if (!query.hidden.empty()) keys.push_back(query.hidden[mask]);
  keys.push_back("_");
  for (const std::string& key : keys)
    if (auto it = table_.find(key); it != table_.end()) return &it->second;
  return nullptr;
}

std::vector<std::vector<Proposal>> LexiconProposer::fill_candidates(
    const MaskQuery& query, std::size_t top_k) const {
  query.validate();
  top_k = std::max<std::size_t>(1, top_k);
  std::vector<std::vector<Proposal>> out;
  out.reserve(query.mask_positions.size());
  for (std::size_t m = 0; m < query.mask_positions.size(); ++m) {
    const std::vector<Token>* entry = lookup(query, m);
    if (entry == nullptr)
      throw Error(ErrorCode::kNoProposal,
                  "lexicon has no entry for position " +
                      std::to_string(query.mask_positions[m]));
    std::vector<Proposal> per_mask;
    for (std::size_t r = 0; r < entry->size() && r < top_k; ++r)
      per_mask.push_back({query.mask_positions[m], (*entry)[r],
                          1.0 / static_cast<double>(r + 1)});
    out.push_back(std::move(per_mask));
  }
  return out;
}

std::string LexiconProposer::describe() const {
  return "lexicon(" + std::to_string(table_.size()) + " keys)";
}

// ---------------------------------------------------------------------------
// MemorizingOracle

MemorizingOracle::MemorizingOracle(const Manifest& manifest) { add(manifest); }

void MemorizingOracle::add(std::string_view utterance, std::string_view parse) {
  table_.emplace(canonicalize(utterance), serialize(parse_top(parse)));
}

void MemorizingOracle::add(const Manifest& manifest) {
  for (const Sample& s : manifest.samples)
    table_.emplace(join(s.utterance), serialize(s.parse));
}

void MemorizingOracle::add_pairs_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (canonicalize(line).empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw Error(ErrorCode::kMalformedRecord, "expected utterance<TAB>parse",
                  line_no);
    try {
      add(line.substr(0, tab), line.substr(tab + 1));
    } catch (const Error& e) {
      throw Error(ErrorCode::kMalformedParse, e.detail(), line_no);
    }
  }
}

std::optional<std::string> MemorizingOracle::parse(std::string_view utterance) const {
  if (auto it = table_.find(canonicalize(utterance)); it != table_.end())
    return it->second;
  return std::nullopt;
}

std::string MemorizingOracle::describe() const {
  return "memorizing(" + std::to_string(table_.size()) + " pairs)";
}

// ---------------------------------------------------------------------------
// RemoteClient

struct RemoteClient::Impl {
  explicit Impl(RemoteOptions o)
      : options(std::move(o)),
        in_flight(static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(options.max_in_flight, 1, 4096))) {}

  RemoteOptions options;
  mutable std::counting_semaphore<4096> in_flight;

  // Sends one request with retries. `unavailable` is the code used when the
  // service cannot be reached.
  nlohmann::json call(const std::string& method, const std::string& path,
                      const std::string& body, ErrorCode unavailable) const {
    in_flight.acquire();
    struct Release {
      std::counting_semaphore<4096>& sem;
      ~Release() { sem.release(); }
    } release{in_flight};

    const auto timeout = std::chrono::duration<double>(options.timeout_seconds);
    const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(timeout);
    std::string last_failure;
    for (std::size_t attempt = 0; attempt <= options.retries; ++attempt) {
      if (attempt > 0)
        std::this_thread::sleep_for(std::chrono::milliseconds(50 * attempt));
      httplib::Client client(options.url);
      client.set_connection_timeout(micros);
      client.set_read_timeout(micros);
      client.set_write_timeout(micros);
      httplib::Result res = method == "GET"
                                ? client.Get(path)
                                : client.Post(path, body, "application/json");
      if (!res) {
        last_failure = "cannot reach " + options.url + path + " (" +
                       httplib::to_string(res.error()) + ")";
        continue;
      }
      if (res->status == 503) {
        last_failure = options.url + path + " returned 503 (model not loaded)";
        continue;
      }
      if (res->status != 200)
        throw Error(ErrorCode::kProtocol, options.url + path + " returned HTTP " +
                                              std::to_string(res->status) + ": " +
                                              res->body);
      try {
        return nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::kProtocol,
                    options.url + path + " returned invalid JSON: " + e.what());
      }
    }
    throw Error(unavailable, last_failure);
  }
};

RemoteClient::RemoteClient(RemoteOptions options)
    : impl_(std::make_unique<Impl>(std::move(options))) {}

RemoteClient::~RemoteClient() = default;

nlohmann::ordered_json RemoteClient::fill_request(const MaskQuery& query,
                                                  std::size_t top_k) {
  nlohmann::ordered_json j;
  j["tokens"] = query.tokens;
  j["mask_positions"] = query.mask_positions;
  j["top_k"] = top_k;
  return j;
}

std::vector<std::vector<Proposal>> RemoteClient::decode_fill_response(
    const MaskQuery& query, const nlohmann::json& response, std::size_t top_k) {
  auto protocol = [](const std::string& msg) {
    return Error(ErrorCode::kProtocol, "fill_mask response: " + msg);
  };
  if (!response.is_object() || !response.contains("proposals") ||
      !response["proposals"].is_array())
    throw protocol("missing 'proposals' array");
  std::map<std::size_t, std::size_t> slot_of;
  for (std::size_t m = 0; m < query.mask_positions.size(); ++m)
    slot_of[query.mask_positions[m]] = m;
  std::vector<std::vector<Proposal>> out(query.mask_positions.size());
  for (const auto& p : response["proposals"]) {
    if (!p.is_object() || !p.contains("position") || !p["position"].is_number_unsigned())
      throw protocol("proposal without a position");
    const auto position = p["position"].get<std::size_t>();
    auto slot = slot_of.find(position);
    if (slot == slot_of.end())
      throw protocol("proposal for unmasked position " + std::to_string(position));
    const auto token_it = p.find("token");
    if (token_it == p.end() || token_it->is_null()) continue;  // no whole word
    if (!token_it->is_string()) throw protocol("token is not a string");
    std::string token = token_it->get<std::string>();
    if (token.find_first_of(" \t\r\n") != std::string::npos)
      throw protocol("token '" + token + "' contains whitespace");
    token = canonicalize(token);
    if (!is_leaf_token(token)) continue;
    double score = 0.0;
    if (auto s = p.find("score"); s != p.end() && s->is_number()) score = s->get<double>();
    auto& per_mask = out[slot->second];
    if (per_mask.size() < top_k) per_mask.push_back({position, std::move(token), score});
  }
  for (std::size_t m = 0; m < out.size(); ++m)
    if (out[m].empty())
      throw Error(ErrorCode::kNoProposal,
                  "bridge returned no usable token for position " +
                      std::to_string(query.mask_positions[m]));
  return out;
}

std::vector<std::vector<Proposal>> RemoteClient::fill_candidates(
    const MaskQuery& query, std::size_t top_k) const {
  query.validate();
  top_k = std::max<std::size_t>(1, top_k);
  if (query.mask_positions.empty()) return {};
  nlohmann::json response =
      impl_->call("POST", "/v1/fill_mask", fill_request(query, top_k).dump(),
                  ErrorCode::kProposerUnavailable);
  return decode_fill_response(query, response, top_k);
}

std::optional<std::string> RemoteClient::parse(std::string_view utterance) const {
  nlohmann::ordered_json body;
  body["utterance"] = canonicalize(utterance);
  nlohmann::json response =
      impl_->call("POST", "/v1/parse", body.dump(), ErrorCode::kOracleUnavailable);
  if (!response.is_object() || !response.contains("parse"))
    throw Error(ErrorCode::kProtocol, "parse response: missing 'parse'");
  const auto& parse = response["parse"];
  if (parse.is_null()) return std::nullopt;
  if (!parse.is_string())
    throw Error(ErrorCode::kProtocol, "parse response: 'parse' is not a string");
  return canonicalize(parse.get<std::string>());
}

nlohmann::json RemoteClient::health() const {
  return impl_->call("GET", "/v1/health", "", ErrorCode::kProposerUnavailable);
}

std::string RemoteClient::describe() const { return "remote(" + impl_->options.url + ")"; }

}  // namespace topkit
