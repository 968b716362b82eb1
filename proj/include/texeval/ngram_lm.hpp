#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "texeval/binary_io.hpp"
#include "texeval/corpus.hpp"
#include "texeval/error.hpp"
#include "texeval/generator.hpp"

namespace texeval {

struct NGramConfig {
  std::size_t order = 3;
  double delta = 0.01;
  double backoff = 0.4;
};

namespace detail {
struct ContextHash {
  std::size_t operator()(const std::vector<TokenId>& ctx) const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (TokenId t : ctx) h = mix64(h ^ t);
    return static_cast<std::size_t>(h);
  }
};
}  // namespace detail

/// Additively smoothed n-gram MLE model with stupid backoff.
///
/// For a context seen in training, p(x|ctx) = (c(ctx,x) + delta) /
/// (c(ctx) + delta * V). An unseen context backs off to the next shorter one
/// with weight `backoff`; since every token receives the same weight the
/// renormalized result is exactly the shorter context's distribution.
class NGramLM final : public Generator {
 public:
  struct ContextCounts {
    std::uint64_t total = 0;
    /// Sorted by token id.
    std::vector<std::pair<TokenId, std::uint64_t>> counts;

    std::uint64_t count(TokenId t) const {
      auto it = std::lower_bound(counts.begin(), counts.end(), t,
                                 [](const auto& e, TokenId v) { return e.first < v; });
      return it != counts.end() && it->first == t ? it->second : 0;
    }
  };
  using Table = std::unordered_map<std::vector<TokenId>, ContextCounts, detail::ContextHash>;

  NGramLM(NGramConfig cfg, VocabularyPtr vocab, LengthMode mode, std::vector<Table> tables,
          std::string training_fingerprint)
      : cfg_(cfg),
        vocab_(std::move(vocab)),
        mode_(mode),
        tables_(std::move(tables)),
        training_fingerprint_(std::move(training_fingerprint)) {
    if (cfg_.order < 1) throw ConfigError("n-gram order must be >= 1");
    if (!(cfg_.delta > 0.0)) throw ConfigError("n-gram delta must be > 0");
    if (tables_.size() != cfg_.order) throw ConfigError("n-gram table count != order");
  }

  const VocabularyPtr& vocab() const override { return vocab_; }
  LengthMode length_mode() const override { return mode_; }
  const NGramConfig& config() const { return cfg_; }
  std::size_t order() const { return cfg_.order; }
  const std::string& training_fingerprint() const { return training_fingerprint_; }

  /// Counts of order n (1-based) keyed by their n-1 token context.
  const Table& table(std::size_t n) const { return tables_.at(n - 1); }

  /// Natural-log p(token | history), where `history` is the full padded
  /// history; only its last order-1 tokens are used.
  double conditional_log_prob(std::span<const TokenId> history, TokenId token) const {
    const auto* entry = find_context(history);
    const double V = static_cast<double>(vocab_->size());
    return std::log((static_cast<double>(entry->count(token)) + cfg_.delta) /
                    (static_cast<double>(entry->total) + cfg_.delta * V));
  }

  std::vector<double> next_token_log_probs(std::span<const TokenId> prefix) const override {
    check_ids(prefix);
    const auto history = padded_history(prefix);
    const auto* entry = find_context(history);
    const double V = static_cast<double>(vocab_->size());
    const double denom = static_cast<double>(entry->total) + cfg_.delta * V;
    std::vector<double> out(vocab_->size(), std::log(cfg_.delta / denom));
    for (const auto& [t, c] : entry->counts) {
      out[t] = std::log((static_cast<double>(c) + cfg_.delta) / denom);
    }
    return out;
  }

  SentenceLogProb score(std::span<const TokenId> sentence) const override {
    check_ids(sentence);
    std::vector<TokenId> history(cfg_.order - 1, vocab_->start_id());
    history.insert(history.end(), sentence.begin(), sentence.end());
    if (mode_ == LengthMode::variable) history.push_back(vocab_->end_id());
    const std::size_t pad = cfg_.order - 1;
    SentenceLogProb out;
    CompensatedSum total;
    for (std::size_t t = pad; t < history.size(); ++t) {
      const double lp =
          conditional_log_prob(std::span<const TokenId>(history).first(t), history[t]);
      out.per_token.push_back(lp);
      total.add(lp);
    }
    out.total = total.value();
    return out;
  }

  /// One uniform draw per token: with probability c(ctx)/(c(ctx)+delta*V)
  /// the token comes from the observed counts, otherwise uniformly.
  Corpus sample(std::size_t count, std::size_t max_length, std::uint64_t seed) const override {
    if (count < 1) throw ConfigError("sample count must be >= 1");
    if (max_length < 1) throw ConfigError("sample max_length must be >= 1");
    std::vector<Sentence> out(count);
    const TokenId end = vocab_->end_id();
    const bool variable = mode_ == LengthMode::variable;
    const std::size_t V = vocab_->size();
    parallel_for(count, [&](std::size_t i) {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
      std::vector<TokenId> history(cfg_.order - 1, vocab_->start_id());
      Sentence s;
      while (s.size() < max_length) {
        const auto* entry = find_context(history);
        const double T = static_cast<double>(entry->total);
        double u = rng.uniform() * (T + cfg_.delta * static_cast<double>(V));
        TokenId y = static_cast<TokenId>(V - 1);
        if (u < T) {
          double cum = 0.0;
          y = entry->counts.back().first;
          for (const auto& [t, c] : entry->counts) {
            cum += static_cast<double>(c);
            if (u < cum) {
              y = t;
              break;
            }
          }
        } else {
          const auto k = static_cast<std::size_t>((u - T) / cfg_.delta);
          y = static_cast<TokenId>(std::min(k, V - 1));
        }
        if (variable && y == end) break;
        s.push_back(y);
        history.push_back(y);
      }
      out[i] = std::move(s);
    });
    return Corpus(std::move(out), vocab_, SplitTag::generated, mode_, name());
  }

  std::string name() const override { return "ngram-mle-" + std::to_string(cfg_.order); }

  std::string fingerprint() const override {
    Fingerprint fp;
    fp.add(static_cast<std::uint64_t>(cfg_.order))
        .add(cfg_.delta)
        .add(cfg_.backoff)
        .add(static_cast<std::uint64_t>(mode_))
        .add(vocab_->fingerprint());
    for (std::size_t n = 1; n <= cfg_.order; ++n) {
      for (const auto& rec : sorted_records(n)) {
        for (TokenId t : rec.context) fp.add(static_cast<std::uint64_t>(t));
        fp.add(static_cast<std::uint64_t>(rec.token)).add(rec.count);
      }
    }
    return fp.hex();
  }

  struct Record {
    std::vector<TokenId> context;
    TokenId token;
    std::uint64_t count;
  };

  /// All (context, token, count) records of order n, lexicographically sorted.
  std::vector<Record> sorted_records(std::size_t n) const {
    std::vector<Record> out;
    for (const auto& [ctx, entry] : table(n)) {
      for (const auto& [t, c] : entry.counts) out.push_back({ctx, t, c});
    }
    std::sort(out.begin(), out.end(), [](const Record& a, const Record& b) {
      if (a.context != b.context) return a.context < b.context;
      return a.token < b.token;
    });
    return out;
  }

 private:
  std::vector<TokenId> padded_history(std::span<const TokenId> prefix) const {
    std::vector<TokenId> h(cfg_.order - 1, vocab_->start_id());
    h.insert(h.end(), prefix.begin(), prefix.end());
    return h;
  }

  /// Longest context (up to order-1 tokens) with training mass.
  const ContextCounts* find_context(std::span<const TokenId> history) const {
    for (std::size_t n = cfg_.order; n >= 2; --n) {
      const std::size_t len = n - 1;
      if (history.size() < len) continue;
      std::vector<TokenId> ctx(history.end() - static_cast<std::ptrdiff_t>(len), history.end());
      auto it = tables_[n - 1].find(ctx);
      if (it != tables_[n - 1].end() && it->second.total > 0) return &it->second;
    }
    return &tables_[0].at({});
  }

  NGramConfig cfg_;
  VocabularyPtr vocab_;
  LengthMode mode_;
  std::vector<Table> tables_;
  std::string training_fingerprint_;
};

/// Counts every order over sentences padded with order-1 STARTs and, in
/// variable-length mode, one END.
inline NGramLM train_ngram_mle(const Corpus& train, NGramConfig cfg) {
  if (cfg.order < 1) throw ConfigError("n-gram order must be >= 1");
  if (!(cfg.delta > 0.0)) throw ConfigError("n-gram delta must be > 0");
  if (train.empty()) throw InputError("cannot train on an empty corpus");
  const bool variable = train.length_mode() == LengthMode::variable;
  const TokenId start = train.vocab().start_id();
  const TokenId end = train.vocab().end_id();

  using RawTable = std::unordered_map<std::vector<TokenId>, std::unordered_map<TokenId, std::uint64_t>,
                                      detail::ContextHash>;
  std::vector<RawTable> raw(cfg.order);
  std::size_t events = 0;
  std::vector<TokenId> padded;
  for (const auto& s : train) {
    padded.assign(cfg.order - 1, start);
    padded.insert(padded.end(), s.begin(), s.end());
    if (variable) padded.push_back(end);
    for (std::size_t t = cfg.order - 1; t < padded.size(); ++t) {
      ++events;
      for (std::size_t n = 1; n <= cfg.order; ++n) {
        std::vector<TokenId> ctx(padded.begin() + static_cast<std::ptrdiff_t>(t - (n - 1)),
                                 padded.begin() + static_cast<std::ptrdiff_t>(t));
        ++raw[n - 1][std::move(ctx)][padded[t]];
      }
    }
  }
  if (events == 0) throw InputError("training corpus has no tokens");

  std::vector<NGramLM::Table> tables(cfg.order);
  for (std::size_t n = 0; n < cfg.order; ++n) {
    for (auto& [ctx, counts] : raw[n]) {
      NGramLM::ContextCounts entry;
      entry.counts.assign(counts.begin(), counts.end());
      std::sort(entry.counts.begin(), entry.counts.end());
      for (const auto& [t, c] : entry.counts) entry.total += c;
      tables[n].emplace(ctx, std::move(entry));
    }
  }
  return NGramLM(cfg, train.vocab_ptr(), train.length_mode(), std::move(tables),
                 train.fingerprint());
}

inline NGramLM train_ngram_mle(const Corpus& train, std::size_t order, double delta) {
  return train_ngram_mle(train, NGramConfig{order, delta, 0.4});
}

// ---------------------------------------------------------------------------
// Model file: little-endian header {magic, version, order, delta (f64), V,
// length mode, backoff (f64)}, then per order n = 1..k a record count and
// sorted records of (n-1 context ids, token id, count), all u64. A
// "<file>.meta" sidecar holds the fingerprints. The vocabulary itself is
// stored separately (see save_vocab); load_ngram checks its size.

inline constexpr std::uint64_t kNGramMagic = magic_word("TXNGRAM1");
inline constexpr std::uint64_t kNGramVersion = 1;

inline void save_ngram(const NGramLM& lm, const std::filesystem::path& path) {
  BinaryWriter w(path);
  w.u64(kNGramMagic);
  w.u64(kNGramVersion);
  w.u64(lm.order());
  w.f64(lm.config().delta);
  w.u64(lm.vocab_size());
  w.u64(lm.length_mode() == LengthMode::fixed ? 0 : 1);
  w.f64(lm.config().backoff);
  for (std::size_t n = 1; n <= lm.order(); ++n) {
    const auto records = lm.sorted_records(n);
    w.u64(records.size());
    for (const auto& r : records) {
      for (TokenId t : r.context) w.u64(t);
      w.u64(r.token);
      w.u64(r.count);
    }
  }
  w.finish();

  std::ofstream meta(path.string() + ".meta", std::ios::trunc);
  if (!meta) throw IoError("cannot write sidecar for " + path.string());
  meta << "format: texeval-ngram v" << kNGramVersion << '\n'
       << "order: " << lm.order() << '\n'
       << "delta: " << format_double(lm.config().delta) << '\n'
       << "backoff: " << format_double(lm.config().backoff) << '\n'
       << "vocab: " << lm.vocab_size() << '\n'
       << "vocab_fingerprint: " << lm.vocab()->fingerprint() << '\n'
       << "length_mode: " << to_string(lm.length_mode()) << '\n'
       << "training_fingerprint: " << lm.training_fingerprint() << '\n'
       << "fingerprint: " << lm.fingerprint() << '\n';
  if (!meta) throw IoError("cannot write sidecar for " + path.string());
}

inline NGramLM load_ngram(const std::filesystem::path& path, VocabularyPtr vocab) {
  BinaryReader r(path);
  r.expect_header(kNGramMagic, kNGramVersion);
  NGramConfig cfg;
  cfg.order = r.u64();
  cfg.delta = r.f64();
  const std::uint64_t V = r.u64();
  const LengthMode mode = r.u64() == 0 ? LengthMode::fixed : LengthMode::variable;
  cfg.backoff = r.f64();
  if (cfg.order < 1 || cfg.order > 64) throw IoError("implausible n-gram order in " + path.string());
  if (!vocab) {
    vocab = std::make_shared<const Vocabulary>(Vocabulary::synthetic(V));
  } else if (vocab->size() != V) {
    throw ConfigError("model vocabulary size " + std::to_string(V) +
                      " does not match supplied vocabulary of size " +
                      std::to_string(vocab->size()));
  }
  std::vector<NGramLM::Table> tables(cfg.order);
  for (std::size_t n = 1; n <= cfg.order; ++n) {
    const std::uint64_t count = r.u64();
    for (std::uint64_t i = 0; i < count; ++i) {
      std::vector<TokenId> ctx(n - 1);
      for (auto& t : ctx) t = static_cast<TokenId>(r.u64());
      const auto tok = static_cast<TokenId>(r.u64());
      const auto c = r.u64();
      if (tok >= V) throw IoError("token id out of range in " + path.string());
      auto& entry = tables[n - 1][ctx];
      entry.counts.emplace_back(tok, c);
      entry.total += c;
    }
  }
  r.expect_eof();
  std::string training = "unknown";
  if (std::ifstream meta(path.string() + ".meta"); meta) {
    std::string line;
    while (std::getline(meta, line)) {
      if (line.rfind("training_fingerprint: ", 0) == 0) training = line.substr(22);
    }
  }
  if (tables[0].find({}) == tables[0].end()) throw IoError("model has no unigram counts");
  return NGramLM(cfg, std::move(vocab), mode, std::move(tables), training);
}

}  // namespace texeval
