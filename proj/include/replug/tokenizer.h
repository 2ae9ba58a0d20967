// Copyright 2026 The RePlug Engine Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace replug {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

// Throws kInputEncoding if `text` is not well-formed UTF-8.
void validate_utf8(std::string_view text);

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;

  // Stable identifier recorded in corpus manifests and checkpoints.
  virtual std::string id() const = 0;
  virtual std::size_t vocab_size() const = 0;

  virtual TokenSeq tokenize(std::string_view text) const = 0;
  virtual std::string detokenize(std::span<const TokenId> tokens) const = 0;

  // The tokenizer's canonical form of `text`:
  // detokenize(tokenize(t)) == normalize(t) for in-vocabulary text.
  virtual std::string normalize(std::string_view text) const = 0;

  virtual std::string token_text(TokenId id) const = 0;
  virtual std::optional<TokenId> find(std::string_view token) const = 0;

  // Throws kVocabulary when the token is unknown.
  TokenId require(std::string_view token) const;
};

// One token per byte. Round-trips every valid UTF-8 string exactly.
class ByteTokenizer final : public Tokenizer {
 public:
  std::string id() const override { return "byte"; }
  std::size_t vocab_size() const override { return 256; }
  TokenSeq tokenize(std::string_view text) const override;
  std::string detokenize(std::span<const TokenId> tokens) const override;
  std::string normalize(std::string_view text) const override;
  std::string token_text(TokenId id) const override;
  std::optional<TokenId> find(std::string_view token) const override;
};

// Splits on whitespace. Each run of whitespace containing a newline becomes a
// single newline token; other runs are separators. Words outside the
// vocabulary map to the unknown token.
//
// Ids 0 and 1 are reserved for "<unk>" and "\n"; vocabulary words follow in
// the order given.
class WhitespaceTokenizer final : public Tokenizer {
 public:
  static constexpr TokenId kUnknown = 0;
  static constexpr TokenId kNewline = 1;

  explicit WhitespaceTokenizer(std::vector<std::string> words);

  // Vocabulary of all distinct words in `texts`, sorted bytewise.
  static WhitespaceTokenizer fit(std::span<const std::string> texts);
  static WhitespaceTokenizer load(const std::string& path);
  void save(const std::string& path) const;

  std::string id() const override;
  std::size_t vocab_size() const override { return vocab_.size(); }
  TokenSeq tokenize(std::string_view text) const override;
  std::string detokenize(std::span<const TokenId> tokens) const override;
  std::string normalize(std::string_view text) const override;
  std::string token_text(TokenId id) const override;
  std::optional<TokenId> find(std::string_view token) const override;

  // Words only, without the reserved tokens.
  std::vector<std::string> words() const;

 private:
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, TokenId> index_;
};

std::unique_ptr<Tokenizer> make_tokenizer(std::string_view kind,
                                          const std::string& vocab_path);

}  // namespace replug
