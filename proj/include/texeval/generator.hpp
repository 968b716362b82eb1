#pragma once

#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "texeval/corpus.hpp"
#include "texeval/numeric.hpp"
#include "texeval/oracle.hpp"

namespace texeval {

/// An autoregressive model: next-token distributions over a shared
/// vocabulary, sentence scoring by the chain rule, and seeded sampling.
class Generator {
 public:
  virtual ~Generator() = default;

  virtual const VocabularyPtr& vocab() const = 0;
  std::size_t vocab_size() const { return vocab()->size(); }
  virtual LengthMode length_mode() const = 0;

  /// Natural-log next-token distribution given the tokens so far (START is
  /// implicit and never part of `prefix`).
  virtual std::vector<double> next_token_log_probs(std::span<const TokenId> prefix) const = 0;

  /// Chain-rule log-probability; in variable mode the END transition is the
  /// last entry of per_token.
  virtual SentenceLogProb score(std::span<const TokenId> sentence) const {
    check_ids(sentence);
    SentenceLogProb out;
    CompensatedSum total;
    auto add = [&](std::size_t t, TokenId y) {
      const double lp = next_token_log_probs(sentence.first(t))[y];
      out.per_token.push_back(lp);
      total.add(lp);
    };
    for (std::size_t t = 0; t < sentence.size(); ++t) add(t, sentence[t]);
    if (length_mode() == LengthMode::variable) add(sentence.size(), vocab()->end_id());
    out.total = total.value();
    return out;
  }

  /// In variable mode sampling stops at END (not emitted) or max_length;
  /// in fixed mode every sentence has exactly max_length tokens.
  virtual Corpus sample(std::size_t count, std::size_t max_length, std::uint64_t seed) const = 0;

  virtual std::string name() const = 0;
  virtual std::string fingerprint() const = 0;

 protected:
  void check_ids(std::span<const TokenId> sentence) const {
    const auto V = vocab_size();
    for (TokenId t : sentence) {
      if (t >= V) {
        throw RangeError("token id " + std::to_string(t) + " >= vocabulary size " +
                         std::to_string(V));
      }
    }
  }

  /// Inverse-CDF draw from a log-probability vector.
  static TokenId draw(std::span<const double> log_probs, Rng& rng) {
    const double u = rng.uniform();
    double cum = 0.0;
    for (std::size_t v = 0; v < log_probs.size(); ++v) {
      cum += std::exp(log_probs[v]);
      if (u < cum) return static_cast<TokenId>(v);
    }
    return static_cast<TokenId>(log_probs.size() - 1);
  }

  /// Shared ancestral-sampling loop over next_token_log_probs.
  Corpus sample_by_chain(std::size_t count, std::size_t max_length, std::uint64_t seed) const {
    if (count < 1) throw ConfigError("sample count must be >= 1");
    if (max_length < 1) throw ConfigError("sample max_length must be >= 1");
    std::vector<Sentence> out(count);
    const TokenId end = vocab()->end_id();
    const bool variable = length_mode() == LengthMode::variable;
    parallel_for(count, [&](std::size_t i) {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
      Sentence s;
      while (s.size() < max_length) {
        const TokenId y = draw(next_token_log_probs(s), rng);
        if (variable && y == end) break;
        s.push_back(y);
      }
      out[i] = std::move(s);
    });
    return Corpus(std::move(out), vocab(), SplitTag::generated, length_mode(), name());
  }
};

/// Every token equally likely: the untrained baseline.
class UniformGenerator final : public Generator {
 public:
  UniformGenerator(VocabularyPtr vocab, LengthMode mode) : vocab_(std::move(vocab)), mode_(mode) {
    if (!vocab_) throw ConfigError("generator requires a vocabulary");
  }

  const VocabularyPtr& vocab() const override { return vocab_; }
  LengthMode length_mode() const override { return mode_; }

  std::vector<double> next_token_log_probs(std::span<const TokenId>) const override {
    return std::vector<double>(vocab_->size(), -std::log(static_cast<double>(vocab_->size())));
  }

  SentenceLogProb score(std::span<const TokenId> sentence) const override {
    check_ids(sentence);
    const double lp = -std::log(static_cast<double>(vocab_->size()));
    const std::size_t n = sentence.size() + (mode_ == LengthMode::variable ? 1 : 0);
    return {static_cast<double>(n) * lp, std::vector<double>(n, lp)};
  }

  Corpus sample(std::size_t count, std::size_t max_length, std::uint64_t seed) const override {
    if (count < 1) throw ConfigError("sample count must be >= 1");
    if (max_length < 1) throw ConfigError("sample max_length must be >= 1");
    std::vector<Sentence> out(count);
    const TokenId end = vocab_->end_id();
    const std::uint64_t V = vocab_->size();
    parallel_for(count, [&](std::size_t i) {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
      Sentence s;
      while (s.size() < max_length) {
        const auto y = static_cast<TokenId>(rng.below(V));
        if (mode_ == LengthMode::variable && y == end) break;
        s.push_back(y);
      }
      out[i] = std::move(s);
    });
    return Corpus(std::move(out), vocab_, SplitTag::generated, mode_, name());
  }

  std::string name() const override { return "uniform"; }
  std::string fingerprint() const override {
    Fingerprint fp;
    fp.add(name()).add(vocab_->fingerprint()).add(static_cast<std::uint64_t>(mode_));
    return fp.hex();
  }

 private:
  VocabularyPtr vocab_;
  LengthMode mode_;
};

/// Exposes an OracleModel through the generator contract (fixed-length).
class OracleGenerator final : public Generator {
 public:
  explicit OracleGenerator(std::shared_ptr<const OracleModel> model, VocabularyPtr vocab = nullptr)
      : model_(std::move(model)), vocab_(std::move(vocab)) {
    if (!vocab_) {
      vocab_ = std::make_shared<const Vocabulary>(Vocabulary::synthetic(model_->vocab_size()));
    }
    if (vocab_->size() != model_->vocab_size()) {
      throw ConfigError("vocabulary size does not match oracle");
    }
  }

  const VocabularyPtr& vocab() const override { return vocab_; }
  LengthMode length_mode() const override { return LengthMode::fixed; }

  std::vector<double> next_token_log_probs(std::span<const TokenId> prefix) const override {
    check_ids(prefix);
    LstmState state = LstmState::zeros(model_->shape().hidden);
    std::vector<double> logits(model_->vocab_size()), scratch;
    model_->step_into(state, OracleModel::kStart, logits, scratch);
    for (TokenId t : prefix) model_->step_into(state, t, logits, scratch);
    log_softmax_inplace(logits);
    return logits;
  }

  SentenceLogProb score(std::span<const TokenId> sentence) const override {
    return log_prob(*model_, sentence);
  }

  Corpus sample(std::size_t count, std::size_t max_length, std::uint64_t seed) const override {
    auto c = texeval::sample(*model_, count, max_length, seed, vocab_);
    return Corpus(c.sentences(), vocab_, SplitTag::generated, LengthMode::fixed, name());
  }

  std::string name() const override { return "oracle-lstm"; }
  std::string fingerprint() const override { return model_->fingerprint(); }

  const OracleModel& model() const { return *model_; }

 private:
  std::shared_ptr<const OracleModel> model_;
  VocabularyPtr vocab_;
};

}  // namespace texeval
