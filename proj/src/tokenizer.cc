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

#include "replug/tokenizer.h"

#include <algorithm>
#include <fstream>
#include <set>

#include "replug/error.h"
#include "replug/hash.h"

namespace replug {
namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

// A piece is either a word or (empty view) a newline marker.
struct Piece {
  std::string_view word;
  bool newline = false;
};

std::vector<Piece> split_pieces(std::string_view text) {
  std::vector<Piece> pieces;
  std::size_t i = 0;
  while (i < text.size()) {
    if (is_space(text[i])) {
      bool saw_newline = false;
      while (i < text.size() && is_space(text[i])) {
        saw_newline |= text[i] == '\n';
        ++i;
      }
      if (saw_newline) pieces.push_back({{}, true});
      continue;
    }
    std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    pieces.push_back({text.substr(start, i - start), false});
  }
  return pieces;
}

template <typename Pieces, typename IsNewline, typename Text>
std::string join_pieces(const Pieces& pieces, IsNewline is_newline, Text text) {
  std::string out;
  bool prev_word = false;
  for (const auto& p : pieces) {
    if (is_newline(p)) {
      out += '\n';
      prev_word = false;
    } else {
      if (prev_word) out += ' ';
      out += text(p);
      prev_word = true;
    }
  }
  return out;
}

}  // namespace

void validate_utf8(std::string_view text) {
  const auto* s = reinterpret_cast<const unsigned char*>(text.data());
  const std::size_t n = text.size();
  std::size_t i = 0;
  while (i < n) {
    unsigned char c = s[i];
    std::size_t extra = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      extra = 1;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      extra = 3;
      cp = c & 0x07;
    } else {
      throw Error(ErrorKind::kInputEncoding,
                  "invalid UTF-8 lead byte at offset " + std::to_string(i));
    }
    if (i + extra >= n) {
      throw Error(ErrorKind::kInputEncoding,
                  "truncated UTF-8 sequence at offset " + std::to_string(i));
    }
    for (std::size_t k = 1; k <= extra; ++k) {
      if ((s[i + k] & 0xC0) != 0x80) {
        throw Error(ErrorKind::kInputEncoding,
                    "invalid UTF-8 continuation at offset " + std::to_string(i + k));
      }
      cp = (cp << 6) | (s[i + k] & 0x3F);
    }
    static constexpr std::uint32_t kMin[] = {0, 0x80, 0x800, 0x10000};
    if (cp < kMin[extra] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      throw Error(ErrorKind::kInputEncoding,
                  "invalid UTF-8 code point at offset " + std::to_string(i));
    }
    i += extra + 1;
  }
}

TokenId Tokenizer::require(std::string_view token) const {
  auto id = find(token);
  if (!id) {
    throw Error(ErrorKind::kVocabulary, "unknown token '" + std::string(token) + "'");
  }
  return *id;
}

// ---- ByteTokenizer

TokenSeq ByteTokenizer::tokenize(std::string_view text) const {
  validate_utf8(text);
  TokenSeq out;
  out.reserve(text.size());
  for (unsigned char c : text) out.push_back(static_cast<TokenId>(c));
  return out;
}

std::string ByteTokenizer::detokenize(std::span<const TokenId> tokens) const {
  std::string out;
  out.reserve(tokens.size());
  for (TokenId t : tokens) {
    if (t < 0 || t > 255) {
      throw Error(ErrorKind::kVocabulary, "byte token out of range: " + std::to_string(t));
    }
    out.push_back(static_cast<char>(t));
  }
  return out;
}

std::string ByteTokenizer::normalize(std::string_view text) const {
  validate_utf8(text);
  return std::string(text);
}

std::string ByteTokenizer::token_text(TokenId id) const {
  return detokenize(std::span<const TokenId>(&id, 1));
}

std::optional<TokenId> ByteTokenizer::find(std::string_view token) const {
  if (token.size() != 1) return std::nullopt;
  return static_cast<TokenId>(static_cast<unsigned char>(token[0]));
}

// ---- WhitespaceTokenizer

WhitespaceTokenizer::WhitespaceTokenizer(std::vector<std::string> words) {
  vocab_.reserve(words.size() + 2);
  vocab_.push_back("<unk>");
  vocab_.push_back("\n");
  for (auto& w : words) {
    if (w.empty() || std::any_of(w.begin(), w.end(), is_space)) {
      throw Error(ErrorKind::kConfiguration, "vocabulary word must be non-empty and space-free");
    }
    if (w == "<unk>") continue;
    vocab_.push_back(std::move(w));
  }
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    auto [it, inserted] = index_.emplace(vocab_[i], static_cast<TokenId>(i));
    if (!inserted) {
      throw Error(ErrorKind::kConfiguration, "duplicate vocabulary word '" + vocab_[i] + "'");
    }
  }
}

WhitespaceTokenizer WhitespaceTokenizer::fit(std::span<const std::string> texts) {
  std::set<std::string> words;
  for (const auto& t : texts) {
    validate_utf8(t);
    for (const auto& p : split_pieces(t)) {
      if (!p.newline && p.word != "<unk>") words.emplace(p.word);
    }
  }
  return WhitespaceTokenizer(std::vector<std::string>(words.begin(), words.end()));
}

WhitespaceTokenizer WhitespaceTokenizer::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open vocabulary file " + path);
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) words.push_back(line);
  }
  return WhitespaceTokenizer(std::move(words));
}

void WhitespaceTokenizer::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write vocabulary file " + path);
  for (std::size_t i = 2; i < vocab_.size(); ++i) out << vocab_[i] << '\n';
}

std::string WhitespaceTokenizer::id() const {
  std::uint64_t h = fnv1a64("whitespace");
  for (const auto& w : vocab_) {
    h = fnv1a64(w, h);
    h = fnv1a64("\x1f", h);
  }
  return "whitespace-" + hex64(h);
}

TokenSeq WhitespaceTokenizer::tokenize(std::string_view text) const {
  validate_utf8(text);
  TokenSeq out;
  for (const auto& p : split_pieces(text)) {
    if (p.newline) {
      out.push_back(kNewline);
      continue;
    }
    auto it = index_.find(std::string(p.word));
    out.push_back(it == index_.end() ? kUnknown : it->second);
  }
  return out;
}

std::string WhitespaceTokenizer::detokenize(std::span<const TokenId> tokens) const {
  for (TokenId t : tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= vocab_.size()) {
      throw Error(ErrorKind::kVocabulary, "token id out of range: " + std::to_string(t));
    }
  }
  return join_pieces(
      tokens, [](TokenId t) { return t == kNewline; },
      [this](TokenId t) -> const std::string& { return vocab_[t]; });
}

std::string WhitespaceTokenizer::normalize(std::string_view text) const {
  validate_utf8(text);
  return join_pieces(
      split_pieces(text), [](const Piece& p) { return p.newline; },
      [](const Piece& p) { return p.word; });
}

std::string WhitespaceTokenizer::token_text(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= vocab_.size()) {
    throw Error(ErrorKind::kVocabulary, "token id out of range: " + std::to_string(id));
  }
  return vocab_[id];
}

std::optional<TokenId> WhitespaceTokenizer::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> WhitespaceTokenizer::words() const {
  return {vocab_.begin() + 2, vocab_.end()};
}

std::unique_ptr<Tokenizer> make_tokenizer(std::string_view kind, const std::string& vocab_path) {
  if (kind == "byte") return std::make_unique<ByteTokenizer>();
  if (kind == "whitespace") {
    if (vocab_path.empty()) {
      throw Error(ErrorKind::kConfiguration, "whitespace tokenizer requires a vocabulary file");
    }
    return std::make_unique<WhitespaceTokenizer>(WhitespaceTokenizer::load(vocab_path));
  }
  throw Error(ErrorKind::kConfiguration, "unknown tokenizer '" + std::string(kind) + "'");
}

}  // namespace replug
