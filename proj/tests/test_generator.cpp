#include <cmath>
#include <map>
#include <random>

#include <gtest/gtest.h>

#include "oracles/enumerate.hpp"
#include "test_util.hpp"
#include "texeval/generator.hpp"
#include "texeval/ngram_lm.hpp"

namespace texeval {
namespace {

using Text = std::vector<std::vector<std::string>>;

Corpus text_corpus(const Text& text, LengthMode mode = LengthMode::variable) {
  auto vocab = std::make_shared<const Vocabulary>(build_vocab(text, 1));
  std::vector<Sentence> ids;
  for (const auto& s : text) ids.push_back(encode(*vocab, s));
  return Corpus(std::move(ids), vocab, SplitTag::train, mode);
}

double sum_exp(const std::vector<double>& lp) {
  double s = 0.0;
  for (double v : lp) s += std::exp(v);
  return s;
}

TEST(NGram, UnigramHandCount) {
  // Tokens with END markers: a, a, b, END, END, END.
  const auto c = text_corpus({{"a"}, {"a"}, {"b"}});
  const auto lm = train_ngram_mle(c, 1, 1e-12);
  const auto lp = lm.next_token_log_probs({});
  const auto& v = c.vocab();
  EXPECT_NEAR(std::exp(lp[v.id("a")]), 2.0 / 6.0, 1e-9);
  EXPECT_NEAR(std::exp(lp[v.id("b")]), 1.0 / 6.0, 1e-9);
  EXPECT_NEAR(std::exp(lp[v.end_id()]), 3.0 / 6.0, 1e-9);
  EXPECT_EQ(lm.table(1).at({}).total, 6u);
}

TEST(NGram, BigramHandChain) {
  // V = 4 (START, END, a, b), delta = 0.5.
  // p(a|S) = 2.5/4, p(b|a) = 1.5/4, p(END|b) = 1.5/3  -> 0.1171875
  // p(b|S) = 0.5/4, p(a|b) = 0.5/3, p(END|a) = 1.5/4  -> 0.0078125
  const auto c = text_corpus({{"a", "b"}, {"a"}});
  const auto lm = train_ngram_mle(c, 2, 0.5);
  const auto& v = c.vocab();
  const TokenId a = v.id("a"), b = v.id("b");
  EXPECT_NEAR(lm.score(Sentence{a, b}).total, std::log(0.1171875), 1e-12);
  EXPECT_NEAR(lm.score(Sentence{b, a}).total, std::log(0.0078125), 1e-12);
  EXPECT_EQ(lm.score(Sentence{a, b}).per_token.size(), 3u);
}

TEST(NGram, CountsMatchRecount) {
  const auto c = text_corpus({{"x", "y", "x"}, {"y", "y"}, {"x"}});
  const auto lm = train_ngram_mle(c, 2, 0.1);
  const auto& v = c.vocab();
  // Bigram (x -> y) occurs once; (y -> y) once; (S -> x) twice.
  EXPECT_EQ(lm.table(2).at({v.id("x")}).count(v.id("y")), 1u);
  EXPECT_EQ(lm.table(2).at({v.id("y")}).count(v.id("y")), 1u);
  EXPECT_EQ(lm.table(2).at({v.start_id()}).count(v.id("x")), 2u);
  std::uint64_t total = 0;
  for (const auto& [ctx, e] : lm.table(2)) total += e.total;
  EXPECT_EQ(total, 6u + 3u);
}

TEST(NGram, DistributionsNormalize) {
  std::mt19937_64 gen(5);
  Text text;
  for (int i = 0; i < 60; ++i) {
    std::vector<std::string> s(1 + gen() % 8);
    for (auto& w : s) w = "w" + std::to_string(gen() % 12);
    text.push_back(s);
  }
  const auto c = text_corpus(text);
  for (std::size_t order = 1; order <= 4; ++order) {
    const auto lm = train_ngram_mle(c, order, 0.01);
    for (int trial = 0; trial < 50; ++trial) {
      Sentence prefix(gen() % 6);
      for (auto& t : prefix) t = static_cast<TokenId>(gen() % c.vocab().size());
      const auto lp = lm.next_token_log_probs(prefix);
      EXPECT_NEAR(sum_exp(lp), 1.0, 1e-12);
      for (double x : lp) EXPECT_TRUE(std::isfinite(x));
    }
  }
}

TEST(NGram, UnseenContextBacksOffToShorter) {
  const auto c = text_corpus({{"a", "b", "c"}, {"b", "a"}});
  const auto lm3 = train_ngram_mle(c, 3, 0.2);
  const auto lm2 = train_ngram_mle(c, 2, 0.2);
  const auto& v = c.vocab();
  // (c, a) never occurs as a trigram context; (a) does as a bigram context.
  const Sentence prefix{v.id("c"), v.id("a")};
  EXPECT_EQ(lm3.next_token_log_probs(prefix), lm2.next_token_log_probs(Sentence{v.id("a")}));
}

TEST(NGram, ScoreMatchesChainOfNextTokenDistributions) {
  const auto c = text_corpus({{"a", "b", "c", "a"}, {"c", "c"}, {"b"}});
  const auto lm = train_ngram_mle(c, 3, 0.05);
  const Sentence s{2, 4, 3, 3, 2};
  double chain = 0.0;
  for (std::size_t t = 0; t < s.size(); ++t) {
    chain += lm.next_token_log_probs(std::span(s).first(t))[s[t]];
  }
  chain += lm.next_token_log_probs(s)[c.vocab().end_id()];
  EXPECT_NEAR(lm.score(s).total, chain, 1e-12);
}

TEST(NGram, DegenerateModelHasLogProbNearZero) {
  auto vocab = std::make_shared<const Vocabulary>(Vocabulary::synthetic(3));
  const Corpus c(std::vector<Sentence>(1000, Sentence{2}), vocab, SplitTag::train, LengthMode::fixed);
  const auto lm = train_ngram_mle(c, 1, 1e-12);
  EXPECT_NEAR(lm.score(Sentence{2}).total, 0.0, 1e-12);
}

TEST(NGram, FixedLengthExhaustiveSumIsOne) {
  auto vocab = std::make_shared<const Vocabulary>(Vocabulary::synthetic(2));
  const Corpus c({{0, 1, 1}, {1, 1, 0}, {1, 0, 0}}, vocab, SplitTag::train, LengthMode::fixed);
  for (std::size_t order = 1; order <= 3; ++order) {
    const auto lm = train_ngram_mle(c, order, 0.3);
    double total = 0.0;
    oracle::for_each_sequence(2, 3, [&](const std::vector<std::uint32_t>& s) {
      total += std::exp(lm.score(s).total);
    });
    EXPECT_NEAR(total, 1.0, 1e-9) << "order " << order;
  }
}

TEST(NGram, NoZeroProbabilities) {
  const auto c = text_corpus({{"a", "b"}});
  const auto lm = train_ngram_mle(c, 3, 1e-6);
  for (double lp : lm.next_token_log_probs(Sentence{3, 3, 3})) EXPECT_TRUE(std::isfinite(lp));
}

TEST(NGram, BeatsUniformOnTrainingData) {
  const auto c = text_corpus({{"the", "cat", "sat"}, {"the", "dog", "sat"}, {"the", "cat", "ran"}});
  const auto lm = train_ngram_mle(c, 2, 0.01);
  const UniformGenerator uniform(c.vocab_ptr(), LengthMode::variable);
  double lm_total = 0.0, uniform_total = 0.0;
  for (const auto& s : c) {
    lm_total += lm.score(s).total;
    uniform_total += uniform.score(s).total;
  }
  EXPECT_GT(lm_total, uniform_total);
}

TEST(NGram, DeterministicFingerprint) {
  const auto c = text_corpus({{"a", "b", "a"}, {"b"}});
  EXPECT_EQ(train_ngram_mle(c, 2, 0.01).fingerprint(), train_ngram_mle(c, 2, 0.01).fingerprint());
  EXPECT_NE(train_ngram_mle(c, 2, 0.01).fingerprint(), train_ngram_mle(c, 2, 0.02).fingerprint());
}

TEST(NGram, Errors) {
  const auto c = text_corpus({{"a"}});
  EXPECT_THROW(train_ngram_mle(c, 0, 0.1), ConfigError);
  EXPECT_THROW(train_ngram_mle(c, 2, 0.0), ConfigError);
  const Corpus empty({}, c.vocab_ptr(), SplitTag::train);
  EXPECT_THROW(train_ngram_mle(empty, 2, 0.1), InputError);
  const auto lm = train_ngram_mle(c, 2, 0.1);
  EXPECT_THROW(lm.score(Sentence{7}), RangeError);
}

TEST(NGramSample, PointMassReproducesSentence) {
  const auto c = text_corpus({{"a", "b", "c"}, {"a", "b", "c"}});
  const auto lm = train_ngram_mle(c, 3, 1e-12);
  const auto out = lm.sample(20, 10, 3);
  for (const auto& s : out) EXPECT_EQ(s, c[0]);
  EXPECT_EQ(out.tag(), SplitTag::generated);
}

TEST(NGramSample, DeterministicAndBounded) {
  const auto c = text_corpus({{"a", "b"}, {"b", "c", "a", "a"}, {"c"}});
  const auto lm = train_ngram_mle(c, 2, 0.5);
  const auto x = lm.sample(100, 4, 11);
  EXPECT_EQ(x, lm.sample(100, 4, 11));
  for (const auto& s : x) EXPECT_LE(s.size(), 4u);
  set_thread_count(3);
  EXPECT_EQ(x, lm.sample(100, 4, 11));
  set_thread_count(0);
}

TEST(NGramSample, UnigramFrequenciesMatchModel) {
  auto vocab = std::make_shared<const Vocabulary>(Vocabulary::synthetic(6));
  const Corpus c({{2, 2, 3}, {4, 2, 5}, {3, 0}}, vocab, SplitTag::train, LengthMode::fixed);
  const auto lm = train_ngram_mle(c, 1, 0.5);
  const std::size_t n = 100000;
  const auto out = lm.sample(n, 1, 2024);
  std::vector<double> counts(6, 0.0);
  for (const auto& s : out) counts[s[0]] += 1.0;
  const auto lp = lm.next_token_log_probs({});
  double chi2 = 0.0;
  for (std::size_t v = 0; v < 6; ++v) {
    const double e = static_cast<double>(n) * std::exp(lp[v]);
    chi2 += (counts[v] - e) * (counts[v] - e) / e;
  }
  // 99.9th percentile of chi-square with 5 degrees of freedom.
  EXPECT_LT(chi2, 20.515);
}

TEST(NGramFile, RoundTrip) {
  testing::TempDir dir;
  const auto c = text_corpus({{"a", "b", "c"}, {"c", "a"}, {"b", "b"}});
  const auto lm = train_ngram_mle(c, 3, 0.07);
  save_ngram(lm, dir / "m.bin");
  const auto back = load_ngram(dir / "m.bin", c.vocab_ptr());
  EXPECT_EQ(back.fingerprint(), lm.fingerprint());
  EXPECT_EQ(back.training_fingerprint(), c.fingerprint());
  for (const auto& s : c) EXPECT_EQ(back.score(s).total, lm.score(s).total);
  auto wrong = std::make_shared<const Vocabulary>(Vocabulary::synthetic(3));
  EXPECT_THROW(load_ngram(dir / "m.bin", wrong), ConfigError);
}

TEST(UniformGenerator, ScoreIsExactlyTLogV) {
  auto vocab = std::make_shared<const Vocabulary>(Vocabulary::synthetic(5000));
  const UniformGenerator g(vocab, LengthMode::fixed);
  EXPECT_EQ(-g.score(Sentence(20, 7)).total, 20.0 * std::log(5000.0));
  const UniformGenerator gv(vocab, LengthMode::variable);
  EXPECT_EQ(gv.score(Sentence(3, 7)).per_token.size(), 4u);
  EXPECT_NEAR(sum_exp(g.next_token_log_probs({})), 1.0, 1e-9);
}

TEST(OracleGenerator, MatchesOracleScoring) {
  auto model = std::make_shared<const OracleModel>(init_oracle(4, 40, 6, 6));
  const OracleGenerator g(model);
  const Sentence s{3, 9, 39, 0};
  double chain = 0.0;
  for (std::size_t t = 0; t < s.size(); ++t) {
    const auto lp = g.next_token_log_probs(std::span(s).first(t));
    EXPECT_NEAR(sum_exp(lp), 1.0, 1e-9);
    chain += lp[s[t]];
  }
  EXPECT_NEAR(chain, g.score(s).total, 1e-10);
  EXPECT_EQ(g.sample(5, 7, 1).size(), 5u);
}

}  // namespace
}  // namespace texeval
