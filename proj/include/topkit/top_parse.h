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

// TOP-format semantic parses.
//
// A parse is a bracketed tree whose opening brackets are fused with their
// labels and whose closers stand alone:
//
//   [in:get_weather [sl:location sydney ] ]
//
// Intent nodes hold tokens and slot nodes; slot nodes hold tokens and
// (nested) intent nodes. The root is always an intent. Every slot must
// cover at least one token somewhere beneath it; intents may be empty.
//
// The canonical serialization (lowercase, single spaces) is the interchange
// format used by every other module.

#ifndef TOPKIT_TOP_PARSE_H_
#define TOPKIT_TOP_PARSE_H_

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace topkit {

using Token = std::string;
using Utterance = std::vector<Token>;

enum class NodeKind { kToken, kIntent, kSlot };

// One node of a parse. For kToken, `text` is the leaf token and `children`
// is empty; otherwise `text` is the label name (without "in:"/"sl:").
struct ParseNode {
  NodeKind kind = NodeKind::kToken;
  std::string text;
  std::vector<ParseNode> children;

  static ParseNode token(std::string text);
  static ParseNode intent(std::string name, std::vector<ParseNode> children = {});
  static ParseNode slot(std::string name, std::vector<ParseNode> children = {});

  bool is_token() const { return kind == NodeKind::kToken; }
  // "[in:name" or "[sl:name"; empty for tokens.
  std::string label() const;

  friend bool operator==(const ParseNode&, const ParseNode&) = default;
};

// A validated parse tree. Immutable once built.
class ParseTree {
 public:
  // Throws Error if `root` violates any tree invariant.
  explicit ParseTree(ParseNode root);

  const ParseNode& root() const { return root_; }

  // In-order leaf tokens.
  std::vector<Token> leaves() const;
  std::size_t leaf_count() const;

  // Copy with the leaf at each in-order index in `replacements` set to the
  // mapped token. Labels and shape are untouched.
  ParseTree with_leaves(const std::map<std::size_t, Token>& replacements) const;

  // Same labels and shape, ignoring leaf text.
  bool same_shape(const ParseTree& other) const;

  friend bool operator==(const ParseTree&, const ParseTree&) = default;

 private:
  ParseNode root_;
};

// Lowercase (ASCII), collapse whitespace runs to one space, trim.
std::string canonicalize(std::string_view text);

// Whitespace tokenization of canonicalize(text).
Utterance tokenize(std::string_view text);

std::string join(const Utterance& tokens, std::string_view sep = " ");

// A token usable as a parse leaf: non-empty, no whitespace, not starting
// with '[' and not the closer "]".
bool is_leaf_token(std::string_view token);

// True if `name` matches [a-z0-9_]+.
bool is_label_name(std::string_view name);

// Parses a TOP string. Throws Error with one of kEmptyTree,
// kUnbalancedBrackets, kRootNotIntent, kBadLabel, kBadNesting,
// kSlotWithoutTokens.
ParseTree parse_top(std::string_view text);

std::string serialize(const ParseTree& tree);

struct LeafAlignment {
  std::size_t leaf_index = 0;
  std::size_t position = 0;

  friend bool operator==(const LeafAlignment&, const LeafAlignment&) = default;
};

// Greedy left-to-right match of the tree's leaves as a subsequence of
// `utterance`, taking the earliest position each time. Throws
// kAlignmentFailed if the leaves are not a subsequence.
std::vector<LeafAlignment> align_leaves(const ParseTree& tree,
                                        const Utterance& utterance);

}  // namespace topkit

#endif  // TOPKIT_TOP_PARSE_H_
