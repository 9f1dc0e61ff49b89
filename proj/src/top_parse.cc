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

#include "topkit/top_parse.h"

#include <algorithm>
#include <optional>
#include <utility>

#include "topkit/error.h"

namespace topkit {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

char to_lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

constexpr std::string_view kIntentPrefix = "[in:";
constexpr std::string_view kSlotPrefix = "[sl:";
constexpr std::string_view kCloser = "]";

// Returns true if the subtree holds at least one token.
bool validate(const ParseNode& node, bool is_root) {
  if (is_root && node.kind != NodeKind::kIntent)
    throw Error(ErrorCode::kRootNotIntent,
                node.is_token() ? "root is a token" : "root is " + node.label());
  if (node.is_token()) {
    if (!is_leaf_token(node.text))
      throw Error(ErrorCode::kBadToken, "invalid leaf token '" + node.text + "'");
    return true;
  }
  if (!is_label_name(node.text))
    throw Error(ErrorCode::kBadLabel, "bad label name '" + node.text + "'");
  bool has_token = false;
  for (const ParseNode& child : node.children) {
    if (child.kind != NodeKind::kToken && child.kind == node.kind)
      throw Error(ErrorCode::kBadNesting,
                  child.label() + " directly under " + node.label());
    has_token = validate(child, false) || has_token;
  }
  if (node.kind == NodeKind::kSlot && !has_token)
    throw Error(ErrorCode::kSlotWithoutTokens, node.label() + " has no tokens");
  return has_token;
}

void collect_leaves(const ParseNode& node, std::vector<Token>& out) {
  if (node.is_token()) {
    out.push_back(node.text);
    return;
  }
  for (const ParseNode& child : node.children) collect_leaves(child, out);
}

void replace_leaves(ParseNode& node, const std::map<std::size_t, Token>& repl,
                    std::size_t& next) {
  if (node.is_token()) {
    if (auto it = repl.find(next); it != repl.end()) node.text = it->second;
    ++next;
    return;
  }
  for (ParseNode& child : node.children) replace_leaves(child, repl, next);
}

bool shape_equal(const ParseNode& a, const ParseNode& b) {
  if (a.kind != b.kind || a.children.size() != b.children.size()) return false;
  if (!a.is_token() && a.text != b.text) return false;
  for (std::size_t i = 0; i < a.children.size(); ++i)
    if (!shape_equal(a.children[i], b.children[i])) return false;
  return true;
}

void write(const ParseNode& node, std::string& out) {
  if (!out.empty()) out += ' ';
  if (node.is_token()) {
    out += node.text;
    return;
  }
  out += node.label();
  for (const ParseNode& child : node.children) write(child, out);
  out += ' ';
  out += kCloser;
}

}  // namespace

ParseNode ParseNode::token(std::string text) {
  return ParseNode{NodeKind::kToken, std::move(text), {}};
}

ParseNode ParseNode::intent(std::string name, std::vector<ParseNode> children) {
  return ParseNode{NodeKind::kIntent, std::move(name), std::move(children)};
}

ParseNode ParseNode::slot(std::string name, std::vector<ParseNode> children) {
  return ParseNode{NodeKind::kSlot, std::move(name), std::move(children)};
}

std::string ParseNode::label() const {
  switch (kind) {
    case NodeKind::kIntent: return std::string(kIntentPrefix) + text;
    case NodeKind::kSlot: return std::string(kSlotPrefix) + text;
    case NodeKind::kToken: break;
  }
  return {};
}

ParseTree::ParseTree(ParseNode root) : root_(std::move(root)) {
  validate(root_, true);
}

std::vector<Token> ParseTree::leaves() const {
  std::vector<Token> out;
  collect_leaves(root_, out);
  return out;
}

std::size_t ParseTree::leaf_count() const { return leaves().size(); }

ParseTree ParseTree::with_leaves(
    const std::map<std::size_t, Token>& replacements) const {
  ParseNode copy = root_;
  std::size_t next = 0;
  replace_leaves(copy, replacements, next);
  if (!replacements.empty() && replacements.rbegin()->first >= next)
    throw Error(ErrorCode::kInvalidArgument,
                "leaf index " + std::to_string(replacements.rbegin()->first) +
                    " out of range (" + std::to_string(next) + " leaves)");
  return ParseTree(std::move(copy));
}

bool ParseTree::same_shape(const ParseTree& other) const {
  return shape_equal(root_, other.root_);
}

std::string canonicalize(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += to_lower(c);
  }
  return out;
}

Utterance tokenize(std::string_view text) {
  Utterance tokens;
  std::string current;
  for (char c : text) {
    if (is_space(c)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current += to_lower(c);
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::string join(const Utterance& tokens, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

bool is_leaf_token(std::string_view token) {
  if (token.empty() || token.front() == '[' || token == kCloser) return false;
  return std::none_of(token.begin(), token.end(), is_space);
}

bool is_label_name(std::string_view name) {
  if (name.empty()) return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
  });
}

ParseTree parse_top(std::string_view text) {
  const Utterance tokens = tokenize(text);
  if (tokens.empty()) throw Error(ErrorCode::kEmptyTree, "empty parse string");

  std::vector<ParseNode> stack;
  std::optional<ParseNode> root;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const Token& tok = tokens[i];
    if (root)
      throw Error(ErrorCode::kUnbalancedBrackets,
                  "trailing material after root at token " + std::to_string(i));
    if (tok == kCloser) {
      if (stack.empty())
        throw Error(ErrorCode::kUnbalancedBrackets,
                    "unmatched ']' at token " + std::to_string(i));
      ParseNode done = std::move(stack.back());
      stack.pop_back();
      if (stack.empty())
        root = std::move(done);
      else
        stack.back().children.push_back(std::move(done));
    } else if (tok.front() == '[') {
      NodeKind kind;
      std::string_view rest(tok);
      if (rest.starts_with(kIntentPrefix))
        kind = NodeKind::kIntent;
      else if (rest.starts_with(kSlotPrefix))
        kind = NodeKind::kSlot;
      else
        throw Error(ErrorCode::kBadLabel, "bad label token '" + tok + "'");
      std::string name(rest.substr(kIntentPrefix.size()));
      if (!is_label_name(name))
        throw Error(ErrorCode::kBadLabel, "bad label token '" + tok + "'");
      if (stack.empty() && kind != NodeKind::kIntent)
        throw Error(ErrorCode::kRootNotIntent, "root is " + tok);
      stack.push_back(ParseNode{kind, std::move(name), {}});
    } else {
      if (stack.empty())
        throw Error(ErrorCode::kUnbalancedBrackets,
                    "token '" + tok + "' outside any bracket");
      stack.back().children.push_back(ParseNode::token(tok));
    }
  }
  if (!root)
    throw Error(ErrorCode::kUnbalancedBrackets,
                std::to_string(stack.size()) + " unclosed bracket(s)");
  return ParseTree(std::move(*root));
}

std::string serialize(const ParseTree& tree) {
  std::string out;
  write(tree.root(), out);
  return out;
}

std::vector<LeafAlignment> align_leaves(const ParseTree& tree,
                                        const Utterance& utterance) {
  const std::vector<Token> leaves = tree.leaves();
  std::vector<LeafAlignment> out;
  out.reserve(leaves.size());
  std::size_t pos = 0;
  for (std::size_t leaf = 0; leaf < leaves.size(); ++leaf) {
    while (pos < utterance.size() && utterance[pos] != leaves[leaf]) ++pos;
    if (pos == utterance.size())
      throw Error(ErrorCode::kAlignmentFailed,
                  "leaf " + std::to_string(leaf) + " '" + leaves[leaf] +
                      "' not found in order in '" + join(utterance) + "'");
    out.push_back({leaf, pos});
    ++pos;
  }
  return out;
}

}  // namespace topkit
