#include "probekit/corpus.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "probekit/error.hpp"
#include "support.hpp"

namespace probekit {
namespace {

using Tokens = std::vector<std::string>;

Corpus read(const std::string& text) {
  std::istringstream in(text);
  return read_corpus(in);
}

Corpus untagged(std::size_t n) {
  std::vector<Utterance> us;
  for (std::size_t i = 0; i < n; ++i) {
    Utterance u;
    u.id = "id" + std::to_string(i);
    u.speaker_id = "s" + std::to_string(i % 7);
    u.text = "word";
    u.tokens = tokenize(u.text);
    us.push_back(u);
  }
  return Corpus(std::move(us));
}

TEST(TokenizeTest, DetachesSentencePunctuation) {
  EXPECT_EQ(tokenize("The boy falls."), (Tokens{"the", "boy", "falls", "."}));
}

TEST(TokenizeTest, EmptyInput) { EXPECT_TRUE(tokenize("").empty()); }

TEST(TokenizeTest, SplitsCliticsBeforeApostrophe) {
  EXPECT_EQ(tokenize("it's overflowing!"), (Tokens{"it", "'s", "overflowing", "!"}));
}

TEST(TokenizeTest, AllDetachedMarksAndWhitespaceRuns) {
  EXPECT_EQ(tokenize("  Well,she  sat;then:who?\tNo! "),
            (Tokens{"well", ",", "she", "sat", ";", "then", ":", "who", "?", "no", "!"}));
}

TEST(LoadCorpusTest, ComputesTokens) {
  const auto c = read(R"({"id":"u1","speaker":"s1","text":"The boy falls.","label":"AD"})" "\n");
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].id, "u1");
  EXPECT_EQ(c[0].speaker_id, "s1");
  EXPECT_EQ(c[0].label, Label::AD);
  EXPECT_EQ(c[0].tokens, (Tokens{"the", "boy", "falls", "."}));
  EXPECT_FALSE(c[0].split.has_value());
}

TEST(LoadCorpusTest, EmptyFileGivesEmptyCorpus) { EXPECT_EQ(read("").size(), 0u); }

TEST(LoadCorpusTest, DuplicateIdIsValidationError) {
  const std::string line = R"({"id":"u1","speaker":"s1","text":"x","label":"AD"})" "\n";
  EXPECT_THROW(read(line + line), ValidationError);
}

TEST(LoadCorpusTest, UnknownLabelIsValidationError) {
  EXPECT_THROW(read(R"({"id":"u1","speaker":"s1","text":"x","label":"MCI"})"), ValidationError);
}

TEST(LoadCorpusTest, MalformedLineReportsLineNumber) {
  const std::string text = R"({"id":"u1","speaker":"s1","text":"x","label":"AD"})"
                           "\n"
                           R"({"id":"u2","speaker":)";
  try {
    read(text);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.position(), 2u);
  }
}

TEST(LoadCorpusTest, MissingRequiredKey) {
  EXPECT_THROW(read(R"({"id":"u1","text":"x","label":"AD"})"), ParseError);
}

TEST(LoadCorpusTest, OptionalSplitAndParse) {
  const auto c = read(R"j({"id":"u1","speaker":"s","text":"dog","label":"Control","split":"val","parse":"(NN dog)"})j");
  EXPECT_EQ(c[0].split, Split::Val);
  EXPECT_EQ(c[0].parse, "(NN dog)");
}

TEST(LoadCorpusTest, SaveThenLoadIsIdentity) {
  const auto original = testing::synthetic_corpus({.size = 50, .seed = 3});
  std::stringstream buf;
  write_corpus(buf, original);
  EXPECT_EQ(read_corpus(buf), original);

  const auto bare = untagged(5);
  std::stringstream buf2;
  write_corpus(buf2, bare);
  EXPECT_EQ(read_corpus(buf2), bare);
}

TEST(AssignSplitsTest, ExactDivision) {
  const auto c = assign_splits(untagged(100), {{0.82, 0.09, 0.09}, 11});
  EXPECT_EQ(c.split_counts(), (SplitCounts{82, 9, 9, 0}));
}

TEST(AssignSplitsTest, DeterministicForSeed) {
  const auto a = assign_splits(untagged(10), {{0.82, 0.09, 0.09}, 7});
  const auto b = assign_splits(untagged(10), {{0.82, 0.09, 0.09}, 7});
  EXPECT_EQ(a, b);
  EXPECT_TRUE(a.all_tagged());
}

TEST(AssignSplitsTest, PreTaggedCountsPassThrough) {
  std::vector<Utterance> us;
  for (std::size_t i = 0; i < 5107; ++i) {
    Utterance u;
    u.id = "u" + std::to_string(i);
    u.speaker_id = "s";
    u.split = i < 4269 ? Split::Train : (i < 4269 + 429 ? Split::Val : Split::Test);
    us.push_back(u);
  }
  const Corpus tagged(std::move(us));
  const auto out = assign_splits(tagged, {});
  EXPECT_EQ(out, tagged);
  EXPECT_EQ(out.split_counts(), (SplitCounts{4269, 429, 409, 0}));
}

TEST(AssignSplitsTest, RatiosMustSumToOne) {
  EXPECT_THROW(assign_splits(untagged(10), {{0.8, 0.1, 0.2}, 0}), ValidationError);
  EXPECT_THROW(assign_splits(untagged(10), {{1.0, 0.0, 0.0}, 0}), ValidationError);
}

TEST(AssignSplitsTest, PartiallyTaggedIsRejected) {
  std::vector<Utterance> us = untagged(3).utterances();
  us[0].split = Split::Train;
  EXPECT_THROW(assign_splits(Corpus(us), {}), ValidationError);
}

TEST(AssignSplitsTest, InputOrderDoesNotChangeTags) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.below(300);
    auto us = untagged(n).utterances();
    const SplitOptions opts{{0.82, 0.09, 0.09}, rng.next()};
    const auto reference = assign_splits(Corpus(us), opts);
    rng.shuffle(us.begin(), us.end());
    const auto shuffled = assign_splits(Corpus(us), opts);
    for (const auto& u : shuffled.utterances()) EXPECT_EQ(u.split, reference[*reference.find(u.id)].split);
  }
}

TEST(AssignSplitsTest, CountsStayWithinClassCountOfTarget) {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = rng.below(2000);
    const double val = 0.05 + 0.2 * rng.uniform();
    const double test = 0.05 + 0.2 * rng.uniform();
    const SplitRatios r{1.0 - val - test, val, test};
    const auto counts = assign_splits(untagged(n), {r, rng.next()}).split_counts();
    EXPECT_EQ(counts.train + counts.val + counts.test, n);
    EXPECT_LE(std::abs(static_cast<double>(counts.train) - n * r.train), 3.0);
    EXPECT_LE(std::abs(static_cast<double>(counts.val) - n * r.val), 3.0);
    EXPECT_LE(std::abs(static_cast<double>(counts.test) - n * r.test), 3.0);
  }
}

TEST(AssignSplitsTest, SpeakerGroupingKeepsSpeakersTogether) {
  SplitOptions opts;
  opts.group_by_speaker = true;
  opts.seed = 2;
  const auto c = assign_splits(untagged(200), opts);
  std::map<std::string, Split> seen;
  for (const auto& u : c.utterances()) {
    auto [it, inserted] = seen.emplace(u.speaker_id, *u.split);
    EXPECT_EQ(it->second, *u.split) << u.speaker_id;
  }
  EXPECT_TRUE(c.all_tagged());
}

}  // namespace
}  // namespace probekit
