#include <cmath>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "oracles/enumerate.hpp"
#include "test_util.hpp"
#include "texeval/ngram_lm.hpp"
#include "texeval/nll.hpp"

namespace texeval {
namespace {

using Text = std::vector<std::vector<std::string>>;

TEST(NllOracle, ZeroOracleIsTLogV) {
  auto vocab = std::make_shared<const Vocabulary>(Vocabulary::synthetic(5000));
  const OracleModel zero(OracleShape{5000, 4, 4}, 0);
  std::mt19937_64 gen(1);
  std::vector<Sentence> s(30, Sentence(20));
  for (auto& row : s) {
    for (auto& t : row) t = static_cast<TokenId>(gen() % 5000);
  }
  const auto r = nll_oracle(zero, Corpus(s, vocab, SplitTag::generated, LengthMode::fixed));
  EXPECT_NEAR(r.mean, 20.0 * std::log(5000.0), 1e-9);
  EXPECT_NEAR(r.mean, 170.34386382832477, 1e-9);
  EXPECT_NEAR(r.stderr_, 0.0, 1e-9);
  EXPECT_EQ(r.count, 30u);
}

TEST(NllOracle, ExpectedValueMatchesEntropyByEnumeration) {
  // The mean NLL of the full sequence space weighted by its own probability
  // is the entropy; recompute it from per-sentence values.
  const auto m = init_oracle(6, 2, 3, 3);
  auto vocab = std::make_shared<const Vocabulary>(Vocabulary::synthetic(2));
  std::vector<Sentence> all;
  oracle::for_each_sequence(2, 3, [&](const std::vector<std::uint32_t>& s) { all.push_back(s); });
  const auto r = nll_oracle(m, Corpus(all, vocab, SplitTag::generated, LengthMode::fixed));
  double entropy = 0.0, mass = 0.0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const double p = std::exp(-r.per_sentence[i]);
    mass += p;
    entropy += p * r.per_sentence[i];
  }
  EXPECT_NEAR(mass, 1.0, 1e-12);
  EXPECT_GT(entropy, 0.0);
  EXPECT_LE(entropy, 3.0 * std::log(2.0) + 1e-12);
}

TEST(NllOracle, VocabularyMismatch) {
  const auto m = init_oracle(1, 10, 2, 2);
  auto vocab = std::make_shared<const Vocabulary>(Vocabulary::synthetic(11));
  EXPECT_THROW(nll_oracle(m, Corpus({{1}}, vocab, SplitTag::generated)), ConfigError);
}

TEST(NllTest, UniformGeneratorIsTLogV) {
  auto vocab = std::make_shared<const Vocabulary>(Vocabulary::synthetic(5000));
  const UniformGenerator g(vocab, LengthMode::fixed);
  const Corpus test(std::vector<Sentence>(5, Sentence(20, 9)), vocab, SplitTag::test, LengthMode::fixed);
  const auto r = nll_test(g, test);
  EXPECT_EQ(r.mean, 20.0 * std::log(5000.0));
  EXPECT_EQ(r.stderr_, 0.0);
}

Corpus encode_text(const Text& text, VocabularyPtr vocab, SplitTag tag) {
  std::vector<Sentence> ids;
  for (const auto& s : text) ids.push_back(encode(*vocab, s));
  return Corpus(std::move(ids), vocab, tag);
}

TEST(NllTest, UnigramHandValue) {
  // V = 4, delta = 1. Counts a:2 b:1 END:2 over 5 tokens, so
  // p(a) = p(END) = 3/9, p(b) = 2/9. Test NLL = (4 ln 3 + ln 4.5) / 2.
  auto vocab = std::make_shared<const Vocabulary>(build_vocab(Text{{"a", "a"}, {"b"}}, 1));
  const auto lm = train_ngram_mle(encode_text({{"a", "a"}, {"b"}}, vocab, SplitTag::train), 1, 1.0);
  const auto r = nll_test(lm, encode_text({{"a"}, {"b", "a"}}, vocab, SplitTag::test));
  EXPECT_NEAR(r.mean, 2.9492632757243564195, 1e-13);
  EXPECT_EQ(r.per_sentence.size(), 2u);
  EXPECT_NEAR(r.per_token_mean, r.mean * 2.0 / 5.0, 1e-13);
}

TEST(NllTest, TrainedModelBeatsUniform) {
  const Text train{{"a", "dog", "runs"}, {"a", "cat", "runs"}, {"the", "dog", "sleeps"},
                   {"a", "dog", "sleeps"}, {"the", "cat", "runs"}};
  auto vocab = std::make_shared<const Vocabulary>(build_vocab(train, 1));
  const auto lm = train_ngram_mle(encode_text(train, vocab, SplitTag::train), 2, 0.01);
  const auto test = encode_text({{"the", "dog", "runs"}, {"a", "cat", "sleeps"}}, vocab, SplitTag::test);
  const UniformGenerator uniform(vocab, LengthMode::variable);
  EXPECT_LT(nll_test(lm, test).mean, nll_test(uniform, test).mean);
}

TEST(NllTest, InvariantUnderPermutation) {
  std::mt19937_64 gen(9);
  auto vocab = std::make_shared<const Vocabulary>(Vocabulary::synthetic(8));
  std::vector<Sentence> s(40);
  for (auto& row : s) {
    row.resize(1 + gen() % 6);
    for (auto& t : row) t = static_cast<TokenId>(2 + gen() % 6);
  }
  const auto lm = train_ngram_mle(Corpus(s, vocab, SplitTag::train), 2, 0.1);
  const double base = nll_test(lm, Corpus(s, vocab, SplitTag::test)).mean;
  std::shuffle(s.begin(), s.end(), gen);
  EXPECT_NEAR(nll_test(lm, Corpus(s, vocab, SplitTag::test)).mean, base, 1e-12);
}

TEST(NllTest, MismatchedModeOrVocabulary) {
  auto vocab = std::make_shared<const Vocabulary>(Vocabulary::synthetic(8));
  const UniformGenerator fixed(vocab, LengthMode::fixed);
  EXPECT_THROW(nll_test(fixed, Corpus({{2}}, vocab, SplitTag::test, LengthMode::variable)), ConfigError);
  auto other = std::make_shared<const Vocabulary>(Vocabulary::synthetic(9));
  EXPECT_THROW(nll_test(fixed, Corpus({{2}}, other, SplitTag::test, LengthMode::fixed)), ConfigError);
}

TEST(NllTest, LogProbFileAgreesWithModel) {
  testing::TempDir dir;
  auto vocab = std::make_shared<const Vocabulary>(build_vocab(Text{{"a", "a"}, {"b"}}, 1));
  const auto lm = train_ngram_mle(encode_text({{"a", "a"}, {"b"}}, vocab, SplitTag::train), 1, 1.0);
  const auto test = encode_text({{"a"}, {"b", "a"}}, vocab, SplitTag::test);
  {
    std::ofstream out(dir / "lp.txt");
    for (const auto& s : test) {
      const auto sc = lm.score(s);
      for (std::size_t i = 0; i < sc.per_token.size(); ++i) {
        out << (i ? " " : "") << format_double(sc.per_token[i]);
      }
      out << '\n';
    }
  }
  const auto from_file = nll_test(read_logprob_file(dir / "lp.txt"), test);
  EXPECT_NEAR(from_file.mean, nll_test(lm, test).mean, 1e-13);
}

TEST(NllTest, LogProbFileErrors) {
  auto vocab = std::make_shared<const Vocabulary>(Vocabulary::synthetic(6));
  const Corpus test({{2, 3}, {4}}, vocab, SplitTag::test);
  using Rows = std::vector<std::vector<double>>;
  EXPECT_THROW(nll_test(Rows{{-1, -1, -1}}, test), AlignmentError);
  EXPECT_THROW(nll_test(Rows{{-1, -1}, {-1, -1}}, test), AlignmentError);
  EXPECT_THROW(nll_test(Rows{{-1, 0.5, -1}, {-1, -1}}, test), ValidityError);
  EXPECT_THROW(nll_test(Rows{{-1, NAN, -1}, {-1, -1}}, test), ValidityError);
  EXPECT_THROW(nll_test(Rows{{-1, -INFINITY, -1}, {-1, -1}}, test), ValidityError);
  EXPECT_NEAR(nll_test(Rows{{-1, -2, -3}, {0, -1}}, test).mean, 3.5, 1e-15);

  testing::TempDir dir;
  std::ofstream(dir / "bad.txt") << "-1 -2\n-1 abc\n";
  try {
    read_logprob_file(dir / "bad.txt");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

}  // namespace
}  // namespace texeval
