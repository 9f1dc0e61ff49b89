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

#ifndef TOPKIT_ERROR_H_
#define TOPKIT_ERROR_H_

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace topkit {

enum class ErrorCode {
  // top_parse
  kUnbalancedBrackets,
  kEmptyTree,
  kRootNotIntent,
  kBadLabel,
  kBadNesting,
  kSlotWithoutTokens,
  kBadToken,
  kAlignmentFailed,
  // metrics
  kEmptyCorpus,
  kEmptyReference,
  // dataset
  kMissingColumn,
  kMalformedParse,
  kMalformedRecord,
  kDuplicateId,
  kBadDomain,
  kIo,
  // oracle
  kInvalidQuery,
  kNoProposal,
  kProposerUnavailable,
  kOracleUnavailable,
  kProtocol,
  // retrieval
  kEmptyManifest,
  kBadIndexFile,
  // generic
  kInvalidArgument,
};

std::string_view error_code_name(ErrorCode code);

// True for failures of an external model service; the CLI maps these to a
// distinct exit status.
bool is_remote_failure(ErrorCode code);

// All library failures are reported by throwing Error. `row` carries a
// 1-based row or line number when the failure is tied to an input record.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::size_t> row = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  const std::optional<std::size_t>& row() const noexcept { return row_; }
  // The message without the code/row prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> row_;
  std::string detail_;
};

}  // namespace topkit

#endif  // TOPKIT_ERROR_H_
