#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "texeval/corpus.hpp"
#include "texeval/error.hpp"
#include "texeval/generator.hpp"
#include "texeval/numeric.hpp"
#include "texeval/oracle.hpp"

namespace texeval {

/// Mean per-sentence negative log-likelihood in nats. Each sentence value is
/// a sum over its tokens; the metric is the mean over sentences.
struct NllResult {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t count = 0;
  /// Total NLL over total scored tokens; informational only.
  double per_token_mean = 0.0;
  std::vector<double> per_sentence;
  std::string scorer_fingerprint;
  std::string corpus_fingerprint;
};

namespace detail {
inline NllResult summarize(std::vector<double> per_sentence, std::size_t tokens,
                           std::string scorer, std::string corpus) {
  NllResult r;
  r.count = per_sentence.size();
  r.mean = compensated_mean(per_sentence);
  r.stderr_ = standard_error(per_sentence);
  r.per_token_mean = tokens ? compensated_sum(per_sentence) / static_cast<double>(tokens) : 0.0;
  r.per_sentence = std::move(per_sentence);
  r.scorer_fingerprint = std::move(scorer);
  r.corpus_fingerprint = std::move(corpus);
  return r;
}
}  // namespace detail

/// NLL of generated sentences under the oracle (no END term).
inline NllResult nll_oracle(const OracleModel& oracle, const Corpus& generated) {
  if (generated.empty()) throw InputError("NLL-oracle needs a non-empty corpus");
  if (generated.vocab().size() != oracle.vocab_size()) {
    throw ConfigError("corpus vocabulary size " + std::to_string(generated.vocab().size()) +
                      " does not match oracle vocabulary " +
                      std::to_string(oracle.vocab_size()));
  }
  std::vector<double> nll(generated.size());
  parallel_for(generated.size(), [&](std::size_t i) { nll[i] = -log_prob(oracle, generated[i]).total; });
  return detail::summarize(std::move(nll), generated.token_count(), oracle.fingerprint(),
                           generated.fingerprint());
}

/// NLL of held-out sentences under a generator. In variable-length mode the
/// END transition is scored too.
inline NllResult nll_test(const Generator& generator, const Corpus& test) {
  if (test.empty()) throw InputError("NLL-test needs a non-empty corpus");
  if (!(test.vocab_ptr() == generator.vocab() || test.vocab() == *generator.vocab())) {
    throw ConfigError("generator and test corpus use different vocabularies");
  }
  if (generator.length_mode() != test.length_mode()) {
    throw ConfigError("generator is " + to_string(generator.length_mode()) +
                      "-length but test corpus is " + to_string(test.length_mode()) + "-length");
  }
  std::vector<double> nll(test.size());
  parallel_for(test.size(), [&](std::size_t i) { nll[i] = -generator.score(test[i]).total; });
  const std::size_t extra = test.length_mode() == LengthMode::variable ? test.size() : 0;
  return detail::summarize(std::move(nll), test.token_count() + extra, generator.fingerprint(),
                           test.fingerprint());
}

/// One line per sentence, space-separated natural-log probabilities.
inline std::vector<std::vector<double>> read_logprob_file(const std::filesystem::path& path) {
  std::vector<std::vector<double>> out;
  const auto lines = read_lines(path);
  for (std::size_t li = 0; li < lines.size(); ++li) {
    std::vector<double> row;
    for (const auto& field : tokenize(lines[li], TokenizationPolicy::whitespace)) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc() || ptr != field.data() + field.size()) {
        throw ParseError(path.string(), li + 1, "not a number: '" + field + "'");
      }
      row.push_back(v);
    }
    out.push_back(std::move(row));
  }
  return out;
}

/// NLL-test from per-token log-probabilities produced by an external model.
inline NllResult nll_test(const std::vector<std::vector<double>>& log_probs, const Corpus& test,
                          const std::string& source = "logprob-file") {
  if (test.empty()) throw InputError("NLL-test needs a non-empty corpus");
  if (log_probs.size() != test.size()) {
    throw AlignmentError("log-prob file has " + std::to_string(log_probs.size()) +
                         " lines but the test corpus has " + std::to_string(test.size()) +
                         " sentences");
  }
  const std::size_t extra = test.length_mode() == LengthMode::variable ? 1 : 0;
  std::vector<double> nll(test.size());
  std::size_t tokens = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto expected = test[i].size() + extra;
    if (log_probs[i].size() != expected) {
      throw AlignmentError("line " + std::to_string(i + 1) + ": expected " +
                           std::to_string(expected) + " values, got " +
                           std::to_string(log_probs[i].size()));
    }
    CompensatedSum s;
    for (double v : log_probs[i]) {
      if (!std::isfinite(v) || v > 0.0) {
        throw ValidityError("line " + std::to_string(i + 1) + ": invalid log-probability " +
                            format_double(v));
      }
      s.add(v);
    }
    nll[i] = -s.value();
    tokens += expected;
  }
  Fingerprint fp;
  fp.add(source);
  for (const auto& row : log_probs) {
    for (double v : row) fp.add(v);
  }
  return detail::summarize(std::move(nll), tokens, fp.hex(), test.fingerprint());
}

}  // namespace texeval
