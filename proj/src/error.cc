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

#include "topkit/error.h"

namespace topkit {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnbalancedBrackets: return "UnbalancedBrackets";
    case ErrorCode::kEmptyTree: return "EmptyTree";
    case ErrorCode::kRootNotIntent: return "RootNotIntent";
    case ErrorCode::kBadLabel: return "BadLabel";
    case ErrorCode::kBadNesting: return "BadNesting";
    case ErrorCode::kSlotWithoutTokens: return "SlotWithoutTokens";
    case ErrorCode::kBadToken: return "BadToken";
    case ErrorCode::kAlignmentFailed: return "AlignmentFailed";
    case ErrorCode::kEmptyCorpus: return "EmptyCorpus";
    case ErrorCode::kEmptyReference: return "EmptyReference";
    case ErrorCode::kMissingColumn: return "MissingColumn";
    case ErrorCode::kMalformedParse: return "MalformedParse";
    case ErrorCode::kMalformedRecord: return "MalformedRecord";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kBadDomain: return "BadDomain";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kInvalidQuery: return "InvalidQuery";
    case ErrorCode::kNoProposal: return "NoProposal";
    case ErrorCode::kProposerUnavailable: return "ProposerUnavailable";
    case ErrorCode::kOracleUnavailable: return "OracleUnavailable";
    case ErrorCode::kProtocol: return "Protocol";
    case ErrorCode::kEmptyManifest: return "EmptyManifest";
    case ErrorCode::kBadIndexFile: return "BadIndexFile";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

bool is_remote_failure(ErrorCode code) {
  return code == ErrorCode::kProposerUnavailable ||
         code == ErrorCode::kOracleUnavailable || code == ErrorCode::kProtocol;
}

namespace {

std::string format_message(ErrorCode code, const std::string& message,
                           const std::optional<std::size_t>& row) {
  std::string out(error_code_name(code));
  if (row) out += " (row " + std::to_string(*row) + ")";
  if (!message.empty()) out += ": " + message;
  return out;
}

}  // namespace

Error::Error(ErrorCode code, const std::string& message,
             std::optional<std::size_t> row)
    : std::runtime_error(format_message(code, message, row)),
      code_(code),
      row_(row),
      detail_(message) {}

}  // namespace topkit
