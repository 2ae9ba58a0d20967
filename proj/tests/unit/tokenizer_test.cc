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

#include <gtest/gtest.h>

#include <random>
#include <string>

#include "replug/error.h"
#include "replug/tokenizer.h"
#include "test_util.h"

namespace replug {
namespace {

// Reference split rule written independently of the library: maximal runs of
// non-space bytes are words; a whitespace run holding '\n' is one token.
std::vector<std::string> oracle_split(const std::string& text) {
  std::vector<std::string> out;
  std::string word;
  bool in_space = false;
  bool space_has_newline = false;
  auto is_ws = [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
  };
  for (char c : text) {
    if (is_ws(c)) {
      if (!word.empty()) {
        out.push_back(word);
        word.clear();
      }
      in_space = true;
      space_has_newline |= c == '\n';
    } else {
      if (in_space && space_has_newline) out.push_back("\n");
      in_space = false;
      space_has_newline = false;
      word.push_back(c);
    }
  }
  if (!word.empty()) out.push_back(word);
  if (in_space && space_has_newline) out.push_back("\n");
  return out;
}

std::string fixture_paragraph() {
  std::mt19937_64 rng(42);
  const std::vector<std::string> words = {"retrieval", "the", "model", "a", "documents",
                                          "of",        "is",  "LM",    "x", "ensemble"};
  const std::vector<std::string> gaps = {" ", "  ", "\t", " \n", "\n\n", " "};
  std::string text;
  while (text.size() < 1024) {
    text += words[rng() % words.size()];
    text += gaps[rng() % gaps.size()];
  }
  return text.substr(0, 1024);
}

TEST(Tokenizer, EmptyInputGivesNoTokens) {
  const auto ws = WhitespaceTokenizer::fit(std::vector<std::string>{"a b"});
  EXPECT_TRUE(ws.tokenize("").empty());
  EXPECT_TRUE(ByteTokenizer().tokenize("").empty());
}

TEST(Tokenizer, RepetitionGivesEqualTokens) {
  const auto ws = WhitespaceTokenizer::fit(std::vector<std::string>{"a"});
  const auto t = ws.tokenize("a a a");
  ASSERT_EQ(t.size(), 3u);
  EXPECT_EQ(t[0], t[1]);
  EXPECT_EQ(t[1], t[2]);
}

TEST(Tokenizer, ParagraphMatchesReferenceSplit) {
  const std::string text = fixture_paragraph();
  ASSERT_EQ(text.size(), 1024u);
  const auto ws = WhitespaceTokenizer::fit(std::vector<std::string>{text});
  const auto tokens = ws.tokenize(text);
  const auto expected = oracle_split(text);
  ASSERT_EQ(tokens.size(), expected.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    EXPECT_EQ(ws.token_text(tokens[i]), expected[i]) << "position " << i;
  }
}

TEST(Tokenizer, RoundTripsToNormalizedText) {
  const std::string text = fixture_paragraph();
  const auto ws = WhitespaceTokenizer::fit(std::vector<std::string>{text});
  EXPECT_EQ(ws.detokenize(ws.tokenize(text)), ws.normalize(text));
  EXPECT_EQ(ws.normalize("  a\t b \n\n c "), "a b\nc");
  const ByteTokenizer bt;
  EXPECT_EQ(bt.detokenize(bt.tokenize(text)), text);
}

TEST(Tokenizer, Deterministic) {
  const std::string text = fixture_paragraph();
  const auto a = WhitespaceTokenizer::fit(std::vector<std::string>{text});
  const auto b = WhitespaceTokenizer::fit(std::vector<std::string>{text});
  EXPECT_EQ(a.id(), b.id());
  EXPECT_EQ(a.tokenize(text), b.tokenize(text));
}

TEST(Tokenizer, InvalidUtf8IsRejected) {
  const auto ws = WhitespaceTokenizer::fit(std::vector<std::string>{"a"});
  for (const std::string bad : {std::string("\xff"), std::string("a\xc3"),
                                std::string("\xe2\x82"), std::string("\xc0\xaf")}) {
    try {
      ws.tokenize(bad);
      ADD_FAILURE() << "accepted invalid UTF-8";
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kInputEncoding);
    }
    EXPECT_THROW(ByteTokenizer().tokenize(bad), Error);
  }
  EXPECT_NO_THROW(ws.tokenize("caf\xc3\xa9 \xe2\x82\xac"));
}

TEST(Tokenizer, UnknownWordsMapToUnk) {
  const auto ws = WhitespaceTokenizer::fit(std::vector<std::string>{"a"});
  EXPECT_EQ(ws.tokenize("zzz").front(), WhitespaceTokenizer::kUnknown);
  EXPECT_EQ(ws.tokenize("\n").front(), WhitespaceTokenizer::kNewline);
  EXPECT_THROW(ws.require("zzz"), Error);
}

TEST(Tokenizer, VocabularyFileRoundTrip) {
  testing::TempDir dir("vocab");
  const auto ws = WhitespaceTokenizer::fit(std::vector<std::string>{"b a c a"});
  ws.save(dir.file("vocab.txt"));
  const auto loaded = WhitespaceTokenizer::load(dir.file("vocab.txt"));
  EXPECT_EQ(loaded.id(), ws.id());
  EXPECT_EQ(loaded.tokenize("a b c"), ws.tokenize("a b c"));
  auto made = make_tokenizer("whitespace", dir.file("vocab.txt"));
  EXPECT_EQ(made->id(), ws.id());
  EXPECT_EQ(make_tokenizer("byte", "")->vocab_size(), 256u);
  EXPECT_THROW(make_tokenizer("bpe", ""), Error);
}

}  // namespace
}  // namespace replug
