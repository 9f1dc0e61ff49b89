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

// Model-facing interfaces used by augmentation: a mask-filling token
// proposer and an exact-parse oracle, plus offline built-ins and a client
// for the model bridge HTTP protocol.

#ifndef TOPKIT_ORACLE_H_
#define TOPKIT_ORACLE_H_

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "topkit/dataset.h"
#include "topkit/top_parse.h"

namespace topkit {

inline constexpr std::string_view kMaskToken = "[MASK]";

struct MaskQuery {
  Utterance tokens;
  // Strictly increasing; each indexes a kMaskToken.
  std::vector<std::size_t> mask_positions;
  // Original tokens behind the masks, parallel to mask_positions, or empty.
  // Offline proposers may consult them; they are never sent to a server.
  std::vector<Token> hidden;

  // Throws kInvalidQuery.
  void validate() const;
};

struct Proposal {
  std::size_t position = 0;
  Token token;
  double score = 0.0;

  friend bool operator==(const Proposal&, const Proposal&) = default;
};

class TokenProposer {
 public:
  virtual ~TokenProposer() = default;

  // Up to `top_k` proposals per mask, best first, in mask_positions order.
  // Every inner list is non-empty; a mask with nothing to offer throws
  // kNoProposal.
  virtual std::vector<std::vector<Proposal>> fill_candidates(
      const MaskQuery& query, std::size_t top_k) const = 0;

  // Exactly one proposal per mask.
  std::vector<Proposal> fill(const MaskQuery& query) const;

  virtual std::string describe() const = 0;
};

class ParserOracle {
 public:
  virtual ~ParserOracle() = default;

  // Canonical parse for `utterance`, or nullopt when the model has none.
  virtual std::optional<std::string> parse(std::string_view utterance) const = 0;

  virtual std::string describe() const = 0;
};

// Offline proposer driven by a substitution table. Keys are looked up per
// mask in this order, first hit wins:
//
//   "L _ R"   both neighbours ("<s>" / "</s>" at the edges)
//   "L _"     left neighbour
//   "_ R"     right neighbour
//   "tok"     the hidden original token, when the query carries it
//   "_"       catch-all
//
// Each key maps to replacements in priority order.
class LexiconProposer : public TokenProposer {
 public:
  using Table = std::map<std::string, std::vector<Token>>;

  // Keys are whitespace-normalized, replacements lowercased. Throws
  // kInvalidArgument for replacements that are not valid leaf tokens.
  explicit LexiconProposer(const Table& table);

  // {"key": ["replacement", ...], ...}
  static LexiconProposer from_json(const nlohmann::json& j);
  static LexiconProposer from_file(const std::string& path);

  std::vector<std::vector<Proposal>> fill_candidates(
      const MaskQuery& query, std::size_t top_k) const override;
  std::string describe() const override;

 private:
  const std::vector<Token>* lookup(const MaskQuery& query, std::size_t mask) const;

  Table table_;
};

// Exact lookup over known (utterance, parse) pairs. The first parse seen for
// an utterance wins.
class MemorizingOracle : public ParserOracle {
 public:
  MemorizingOracle() = default;
  explicit MemorizingOracle(const Manifest& manifest);

  void add(std::string_view utterance, std::string_view parse);
  void add(const Manifest& manifest);
  // Two tab-separated columns per line: utterance, parse. No header.
  void add_pairs_file(const std::string& path);

  std::size_t size() const { return table_.size(); }

  std::optional<std::string> parse(std::string_view utterance) const override;
  std::string describe() const override;

 private:
  std::unordered_map<std::string, std::string> table_;
};

struct RemoteOptions {
  std::string url = "http://127.0.0.1:8080";
  double timeout_seconds = 30.0;
  std::size_t max_in_flight = 8;
  // Extra attempts after a connection failure or 503.
  std::size_t retries = 2;
};

// Client for the model bridge:
//   POST /v1/fill_mask  {"tokens":[...],"mask_positions":[...],"top_k":k}
//   POST /v1/parse      {"utterance":"..."}
//   GET  /v1/health
// Connection failures and 503 surface as kProposerUnavailable /
// kOracleUnavailable; malformed responses and 4xx as kProtocol.
class RemoteClient : public TokenProposer, public ParserOracle {
 public:
  explicit RemoteClient(RemoteOptions options);
  ~RemoteClient() override;

  RemoteClient(const RemoteClient&) = delete;
  RemoteClient& operator=(const RemoteClient&) = delete;

  std::vector<std::vector<Proposal>> fill_candidates(
      const MaskQuery& query, std::size_t top_k) const override;
  std::optional<std::string> parse(std::string_view utterance) const override;
  nlohmann::json health() const;

  std::string describe() const override;

  // Wire encodings, exposed for tests and tools.
  static nlohmann::ordered_json fill_request(const MaskQuery& query,
                                             std::size_t top_k);
  static std::vector<std::vector<Proposal>> decode_fill_response(
      const MaskQuery& query, const nlohmann::json& response, std::size_t top_k);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace topkit

#endif  // TOPKIT_ORACLE_H_
