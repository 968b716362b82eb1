#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "texeval/corpus.hpp"
#include "texeval/error.hpp"
#include "texeval/numeric.hpp"
#include "texeval/random.hpp"

namespace texeval {

inline constexpr std::size_t kMaxBleuOrder = 5;

/// An n-gram of at most kMaxBleuOrder ids, stored inline.
struct NGramKey {
  std::array<TokenId, kMaxBleuOrder> ids{};
  std::uint8_t n = 0;

  NGramKey() = default;
  explicit NGramKey(std::span<const TokenId> gram) : n(static_cast<std::uint8_t>(gram.size())) {
    std::copy(gram.begin(), gram.end(), ids.begin());
  }

  friend bool operator==(const NGramKey&, const NGramKey&) = default;
};

struct NGramKeyHash {
  std::size_t operator()(const NGramKey& k) const noexcept {
    std::uint64_t h = k.n;
    for (std::size_t i = 0; i < k.n; ++i) h = mix64(h ^ (static_cast<std::uint64_t>(k.ids[i]) << 8));
    return static_cast<std::size_t>(h);
  }
};

using NGramCounts = std::unordered_map<NGramKey, std::uint32_t, NGramKeyHash>;

/// Sliding-window n-gram multiset of one sentence.
inline NGramCounts ngram_counts(std::span<const TokenId> sentence, std::size_t n) {
  if (n < 1 || n > kMaxBleuOrder) {
    throw ConfigError("n-gram order must lie in [1, " + std::to_string(kMaxBleuOrder) + "]");
  }
  NGramCounts out;
  if (sentence.size() < n) return out;
  for (std::size_t i = 0; i + n <= sentence.size(); ++i) ++out[NGramKey(sentence.subspan(i, n))];
  return out;
}

/// Counts for orders 1..max_order; index 0 holds unigrams.
using NGramProfile = std::vector<NGramCounts>;

inline NGramProfile ngram_profile(std::span<const TokenId> sentence, std::size_t max_order) {
  NGramProfile p;
  for (std::size_t n = 1; n <= max_order; ++n) p.push_back(ngram_counts(sentence, n));
  return p;
}

enum class BleuSmoothing { none, epsilon };

inline std::string to_string(BleuSmoothing s) { return s == BleuSmoothing::none ? "none" : "epsilon"; }

inline BleuSmoothing parse_smoothing(std::string_view s) {
  if (s == "none") return BleuSmoothing::none;
  if (s == "epsilon") return BleuSmoothing::epsilon;
  throw ConfigError("unknown BLEU smoothing '" + std::string(s) + "'");
}

struct BleuConfig {
  std::size_t max_order = 4;
  BleuSmoothing smoothing = BleuSmoothing::none;
  double epsilon = 1e-9;

  void validate() const {
    if (max_order < 1 || max_order > kMaxBleuOrder) {
      throw ConfigError("BLEU max_order must lie in [1, 5]");
    }
    if (!(epsilon > 0.0)) throw ConfigError("BLEU epsilon must be > 0");
  }

  /// Uniform weights over orders 1..max_order.
  double weight() const { return 1.0 / static_cast<double>(max_order); }

  std::string fingerprint() const {
    Fingerprint fp;
    fp.add(std::string("bleu")).add(static_cast<std::uint64_t>(max_order))
        .add(to_string(smoothing)).add(epsilon);
    return fp.hex();
  }
};

struct ClippedCount {
  std::uint64_t clipped = 0;
  std::uint64_t total = 0;
};

/// Per-type hypothesis counts clipped at the maximum count in any reference.
inline ClippedCount modified_precision(std::span<const TokenId> hyp,
                                       std::span<const Sentence> refs, std::size_t n) {
  if (refs.empty()) throw ConfigError("modified precision needs at least one reference");
  const auto hyp_counts = ngram_counts(hyp, n);
  NGramCounts max_ref;
  for (const auto& ref : refs) {
    for (const auto& [g, c] : ngram_counts(ref, n)) {
      if (!hyp_counts.count(g)) continue;
      auto& m = max_ref[g];
      m = std::max(m, c);
    }
  }
  ClippedCount out;
  for (const auto& [g, c] : hyp_counts) {
    out.total += c;
    auto it = max_ref.find(g);
    if (it != max_ref.end()) out.clipped += std::min(c, it->second);
  }
  return out;
}

namespace detail {

/// Combines clipped counts and lengths into a score. A zero denominator
/// (hypothesis shorter than n) is taken as 1.
inline double combine_bleu(std::span<const ClippedCount> per_order, std::size_t hyp_len,
                           std::size_t ref_len, const BleuConfig& cfg) {
  if (hyp_len == 0) return 0.0;
  double log_sum = 0.0;
  for (const auto& p : per_order) {
    double num = static_cast<double>(p.clipped);
    const double den = static_cast<double>(std::max<std::uint64_t>(p.total, 1));
    if (p.clipped == 0) {
      if (cfg.smoothing == BleuSmoothing::none) return 0.0;
      num = cfg.epsilon;
    }
    log_sum += cfg.weight() * std::log(num / den);
  }
  const double c = static_cast<double>(hyp_len);
  const double r = static_cast<double>(ref_len);
  const double bp = hyp_len > ref_len ? 1.0 : std::min(1.0, std::exp(1.0 - r / c));
  return std::exp(log_sum) * bp;
}

}  // namespace detail

/// Reference length closest to hyp_len, ties resolved toward the shorter.
inline std::size_t closest_ref_length(std::span<const Sentence> refs, std::size_t hyp_len) {
  std::size_t best = refs.front().size();
  for (const auto& r : refs) {
    const auto d = [&](std::size_t len) { return len > hyp_len ? len - hyp_len : hyp_len - len; };
    if (d(r.size()) < d(best) || (d(r.size()) == d(best) && r.size() < best)) best = r.size();
  }
  return best;
}

/// Sentence BLEU: geometric mean of modified precisions times the brevity
/// penalty. An empty hypothesis scores 0.
inline double bleu(std::span<const TokenId> hyp, std::span<const Sentence> refs,
                   const BleuConfig& cfg) {
  cfg.validate();
  if (refs.empty()) throw ConfigError("BLEU needs at least one reference");
  std::vector<ClippedCount> per_order;
  for (std::size_t n = 1; n <= cfg.max_order; ++n) {
    per_order.push_back(modified_precision(hyp, refs, n));
  }
  return detail::combine_bleu(per_order, hyp.size(), closest_ref_length(refs, hyp.size()), cfg);
}

// ---------------------------------------------------------------------------

/// Reference statistics indexed once per corpus: for every n-gram the largest
/// and second-largest per-sentence count plus how many sentences attain the
/// largest, and the multiset of sentence lengths. This is enough to clip
/// against "all references" or "all references except sentence i".
class ReferenceIndex {
 public:
  ReferenceIndex(const Corpus& refs, std::size_t max_order) : max_order_(max_order) {
    if (refs.empty()) throw ConfigError("reference corpus is empty");
    for (const auto& s : refs) {
      ++lengths_[s.size()];
      for (std::size_t n = 1; n <= max_order; ++n) {
        for (const auto& [g, c] : ngram_counts(s, n)) {
          auto& st = stats_[g];
          if (c > st.max1) {
            st.max2 = st.max1;
            st.max1 = c;
            st.max1_mult = 1;
          } else if (c == st.max1) {
            ++st.max1_mult;
          } else if (c > st.max2) {
            st.max2 = c;
          }
        }
      }
    }
  }

  std::size_t max_order() const { return max_order_; }

  /// Max reference count of g; when `own` is set, the sentence contributing
  /// that count is excluded.
  std::uint32_t max_count(const NGramKey& g, std::optional<std::uint32_t> own) const {
    auto it = stats_.find(g);
    if (it == stats_.end()) return 0;
    const auto& st = it->second;
    if (own && *own == st.max1 && st.max1_mult == 1) return st.max2;
    return st.max1;
  }

  /// Closest reference length (ties toward shorter), optionally excluding
  /// one sentence of length `own`. Returns nullopt when nothing remains.
  std::optional<std::size_t> closest_length(std::size_t hyp_len,
                                            std::optional<std::size_t> own) const {
    auto available = [&](auto it) {
      return own && it->first == *own ? it->second > 1 : it->second > 0;
    };
    std::optional<std::size_t> up, down;
    for (auto it = lengths_.lower_bound(hyp_len); it != lengths_.end(); ++it) {
      if (available(it)) {
        up = it->first;
        break;
      }
    }
    for (auto it = lengths_.lower_bound(hyp_len); it != lengths_.begin();) {
      --it;
      if (available(it)) {
        down = it->first;
        break;
      }
    }
    if (!up) return down;
    if (!down) return up;
    return (*up - hyp_len) < (hyp_len - *down) ? up : down;
  }

 private:
  struct Stats {
    std::uint32_t max1 = 0;
    std::uint32_t max1_mult = 0;
    std::uint32_t max2 = 0;
  };
  std::size_t max_order_;
  std::unordered_map<NGramKey, Stats, NGramKeyHash> stats_;
  std::map<std::size_t, std::size_t> lengths_;
};

/// Sentence BLEU of hyp against an indexed reference set. With
/// `exclude_self`, hyp is assumed to be a member of the set and is removed.
inline double bleu(std::span<const TokenId> hyp, const ReferenceIndex& index,
                   const BleuConfig& cfg, bool exclude_self = false) {
  if (cfg.max_order > index.max_order()) throw ConfigError("index built for a lower max_order");
  if (hyp.empty()) return 0.0;
  std::vector<ClippedCount> per_order;
  for (std::size_t n = 1; n <= cfg.max_order; ++n) {
    ClippedCount cc;
    for (const auto& [g, c] : ngram_counts(hyp, n)) {
      cc.total += c;
      const auto m = index.max_count(g, exclude_self ? std::optional(c) : std::nullopt);
      cc.clipped += std::min(c, m);
    }
    per_order.push_back(cc);
  }
  const auto r = index.closest_length(hyp.size(),
                                      exclude_self ? std::optional(hyp.size()) : std::nullopt);
  if (!r) throw MetricError("no references remain after exclusion");
  return detail::combine_bleu(per_order, hyp.size(), *r, cfg);
}

struct CorpusBleu {
  double value = 0.0;
  std::size_t hypotheses = 0;
  /// Empty hypotheses score 0; counted so callers can warn.
  std::size_t empty_hypotheses = 0;
};

namespace detail {
inline CorpusBleu mean_of(const std::vector<double>& scores, std::size_t empty) {
  return {compensated_mean(scores), scores.size(), empty};
}
}  // namespace detail

/// Mean over hypotheses of sentence BLEU against every reference sentence.
inline CorpusBleu corpus_bleu(const Corpus& hyps, const Corpus& refs, const BleuConfig& cfg) {
  cfg.validate();
  if (hyps.empty() || refs.empty()) throw ConfigError("corpus BLEU needs non-empty corpora");
  if (!same_vocabulary(hyps, refs)) throw ConfigError("hypothesis and reference vocabularies differ");
  const ReferenceIndex index(refs, cfg.max_order);
  std::vector<double> scores(hyps.size());
  parallel_for(hyps.size(), [&](std::size_t i) { scores[i] = bleu(hyps[i], index, cfg); });
  std::size_t empty = 0;
  for (const auto& h : hyps) empty += h.empty();
  return detail::mean_of(scores, empty);
}

/// Mean over (optionally sub-sampled) sentences of BLEU against all other
/// sentences of the same corpus. The reference set is always the full
/// remainder.
inline CorpusBleu self_bleu(const Corpus& corpus, const BleuConfig& cfg,
                            std::optional<std::size_t> sample_size = std::nullopt,
                            std::uint64_t seed = 0) {
  cfg.validate();
  if (corpus.size() < 2) throw MetricError("Self-BLEU needs at least two sentences");
  std::vector<std::size_t> chosen(corpus.size());
  for (std::size_t i = 0; i < chosen.size(); ++i) chosen[i] = i;
  if (sample_size && *sample_size < corpus.size()) {
    if (*sample_size == 0) throw ConfigError("Self-BLEU sample size must be >= 1");
    Rng rng(derive_seed(seed, "self-bleu-sample"));
    for (std::size_t i = 0; i < *sample_size; ++i) {
      std::swap(chosen[i], chosen[i + rng.below(chosen.size() - i)]);
    }
    chosen.resize(*sample_size);
    std::sort(chosen.begin(), chosen.end());
  }
  const ReferenceIndex index(corpus, cfg.max_order);
  std::vector<double> scores(chosen.size());
  parallel_for(chosen.size(), [&](std::size_t i) {
    scores[i] = bleu(corpus[chosen[i]], index, cfg, /*exclude_self=*/true);
  });
  std::size_t empty = 0;
  for (std::size_t i : chosen) empty += corpus[i].empty();
  return detail::mean_of(scores, empty);
}

}  // namespace texeval
