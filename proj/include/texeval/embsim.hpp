#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "texeval/binary_io.hpp"
#include "texeval/corpus.hpp"
#include "texeval/error.hpp"
#include "texeval/numeric.hpp"
#include "texeval/random.hpp"

namespace texeval {

struct SkipGramConfig {
  std::size_t dim = 32;
  std::size_t window = 5;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  double lr = 0.025;
  std::uint64_t seed = 0;

  void validate() const {
    if (dim < 1 || window < 1 || negatives < 1 || epochs < 1) {
      throw ConfigError("skip-gram dim, window, negatives and epochs must be >= 1");
    }
    if (!(lr > 0.0)) throw ConfigError("skip-gram learning rate must be > 0");
  }

  std::string fingerprint() const {
    Fingerprint fp;
    fp.add(std::string("skipgram-ns"))
        .add(static_cast<std::uint64_t>(dim))
        .add(static_cast<std::uint64_t>(window))
        .add(static_cast<std::uint64_t>(negatives))
        .add(static_cast<std::uint64_t>(epochs))
        .add(lr)
        .add(seed);
    return fp.hex();
  }
};

/// Input (word) and output (context) vectors, N rows of D each.
struct EmbeddingTable {
  std::size_t vocab = 0;
  SkipGramConfig config;
  std::vector<double> input;
  std::vector<double> output;
  std::string corpus_fingerprint;
  /// Mean per-pair loss of each epoch (empty for loaded tables).
  std::vector<double> epoch_losses;

  std::size_t dim() const { return config.dim; }
  std::span<const double> word(std::size_t i) const { return {input.data() + i * dim(), dim()}; }
  std::span<double> word(std::size_t i) { return {input.data() + i * dim(), dim()}; }
  std::span<const double> context(std::size_t i) const { return {output.data() + i * dim(), dim()}; }
  std::span<double> context(std::size_t i) { return {output.data() + i * dim(), dim()}; }

  std::string fingerprint() const {
    Fingerprint fp;
    fp.add(static_cast<std::uint64_t>(vocab)).add(config.fingerprint()).add(corpus_fingerprint);
    for (double v : input) fp.add(v);
    return fp.hex();
  }
};

/// log(sigmoid(x)) without overflow.
inline double log_sigmoid(double x) {
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

struct PairGradient {
  double loss = 0.0;
  std::vector<double> d_word;
  std::vector<double> d_context;
  std::vector<std::vector<double>> d_negatives;
};

/// Negative-sampling loss of one (word, context) pair and its gradient:
///   L = -log s(u_o . v) - sum_k log s(-u_k . v)
///   dL/dv   = (s(u_o . v) - 1) u_o + sum_k s(u_k . v) u_k
///   dL/du_o = (s(u_o . v) - 1) v
///   dL/du_k = s(u_k . v) v
inline PairGradient skipgram_pair_gradient(std::span<const double> word,
                                           std::span<const double> ctx,
                                           const std::vector<std::span<const double>>& negatives) {
  const std::size_t D = word.size();
  auto dot = [&](std::span<const double> a) {
    double s = 0.0;
    for (std::size_t k = 0; k < D; ++k) s += a[k] * word[k];
    return s;
  };
  PairGradient g;
  g.d_word.assign(D, 0.0);
  const double s_pos = dot(ctx);
  g.loss = -log_sigmoid(s_pos);
  const double coef_pos = sigmoid(s_pos) - 1.0;
  g.d_context.resize(D);
  for (std::size_t k = 0; k < D; ++k) {
    g.d_word[k] += coef_pos * ctx[k];
    g.d_context[k] = coef_pos * word[k];
  }
  for (const auto& neg : negatives) {
    const double s = dot(neg);
    g.loss -= log_sigmoid(-s);
    const double coef = sigmoid(s);
    std::vector<double> dn(D);
    for (std::size_t k = 0; k < D; ++k) {
      g.d_word[k] += coef * neg[k];
      dn[k] = coef * word[k];
    }
    g.d_negatives.push_back(std::move(dn));
  }
  return g;
}

/// Skip-gram with negative sampling, plain SGD, single-threaded.
///
/// Input vectors start uniform in [-0.5/D, 0.5/D), output vectors at zero.
/// Words that never occur keep their initial vectors. Negatives come from
/// the unigram distribution raised to 0.75 (a negative equal to the context
/// word is skipped). The learning rate decays linearly from lr to lr/100
/// over all center positions of all epochs.
inline EmbeddingTable train_skipgram(const Corpus& corpus, const SkipGramConfig& cfg) {
  cfg.validate();
  if (corpus.empty()) throw InputError("skip-gram needs a non-empty corpus");
  const std::size_t N = corpus.vocab().size();
  const std::size_t D = cfg.dim;

  std::vector<std::uint64_t> counts(N, 0);
  for (const auto& s : corpus) {
    for (TokenId t : s) ++counts[t];
  }
  if (std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }) < 2) {
    throw InputError("skip-gram needs at least two distinct tokens");
  }
  std::vector<double> cumulative(N);
  double acc = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    acc += counts[i] ? std::pow(static_cast<double>(counts[i]), 0.75) : 0.0;
    cumulative[i] = acc;
  }

  EmbeddingTable table;
  table.vocab = N;
  table.config = cfg;
  table.corpus_fingerprint = corpus.fingerprint();
  table.input.resize(N * D);
  table.output.assign(N * D, 0.0);
  Rng init(derive_seed(cfg.seed, "skipgram-init"));
  for (double& v : table.input) v = (init.uniform() - 0.5) / static_cast<double>(D);

  Rng rng(derive_seed(cfg.seed, "skipgram-negatives"));
  auto draw_negative = [&] {
    const double u = rng.uniform() * acc;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    return static_cast<TokenId>(std::min<std::size_t>(it - cumulative.begin(), N - 1));
  };

  const double total_steps = static_cast<double>(cfg.epochs * corpus.token_count());
  double processed = 0.0;
  std::vector<double> d_word(D);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    CompensatedSum epoch_loss;
    std::size_t pairs = 0;
    for (const auto& s : corpus) {
      for (std::size_t i = 0; i < s.size(); ++i) {
        const double lr = cfg.lr * (1.0 - 0.99 * processed / total_steps);
        processed += 1.0;
        auto v = table.word(s[i]);
        const std::size_t lo = i >= cfg.window ? i - cfg.window : 0;
        const std::size_t hi = std::min(s.size(), i + cfg.window + 1);
        for (std::size_t j = lo; j < hi; ++j) {
          if (j == i) continue;
          std::fill(d_word.begin(), d_word.end(), 0.0);
          double loss = 0.0;
          auto update = [&](TokenId target, double label) {
            auto u = table.context(target);
            double score = 0.0;
            for (std::size_t k = 0; k < D; ++k) score += u[k] * v[k];
            loss -= label > 0 ? log_sigmoid(score) : log_sigmoid(-score);
            const double coef = sigmoid(score) - label;
            for (std::size_t k = 0; k < D; ++k) {
              d_word[k] += coef * u[k];
              u[k] -= lr * coef * v[k];
            }
          };
          update(s[j], 1.0);
          for (std::size_t n = 0; n < cfg.negatives; ++n) {
            const TokenId neg = draw_negative();
            if (neg == s[j]) continue;
            update(neg, 0.0);
          }
          for (std::size_t k = 0; k < D; ++k) v[k] -= lr * d_word[k];
          epoch_loss.add(loss);
          ++pairs;
        }
      }
    }
    table.epoch_losses.push_back(pairs ? epoch_loss.value() / static_cast<double>(pairs) : 0.0);
  }
  return table;
}

// ---------------------------------------------------------------------------

/// N x N cosine matrix of word vectors. T = float is the compact storage
/// mode; accumulation is always in double.
template <typename T = double>
class SimilarityMatrix {
 public:
  SimilarityMatrix(std::size_t n, std::vector<T> values, std::string source)
      : n_(n), values_(std::move(values)), source_(std::move(source)) {
    if (values_.size() != n_ * n_) throw ConfigError("similarity matrix must be N x N");
  }

  std::size_t size() const { return n_; }
  T operator()(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }
  /// Row i; equals column i by symmetry.
  std::span<const T> column(std::size_t i) const { return {values_.data() + i * n_, n_}; }
  const std::string& source_fingerprint() const { return source_; }

 private:
  std::size_t n_;
  std::vector<T> values_;
  std::string source_;
};

/// W(i, j) = cos(e_i, e_j) over input vectors. Zero vectors give a zero
/// row, column and diagonal entry.
template <typename T = double>
SimilarityMatrix<T> similarity_matrix(const EmbeddingTable& emb) {
  const std::size_t N = emb.vocab, D = emb.dim();
  std::vector<double> norms(N);
  for (std::size_t i = 0; i < N; ++i) {
    double s = 0.0;
    for (double x : emb.word(i)) s += x * x;
    norms[i] = std::sqrt(s);
  }
  std::vector<T> values(N * N, T(0));
  parallel_for(N, [&](std::size_t i) {
    if (norms[i] == 0.0) return;
    values[i * N + i] = T(1);
    const auto a = emb.word(i);
    for (std::size_t j = i + 1; j < N; ++j) {
      if (norms[j] == 0.0) continue;
      const auto b = emb.word(j);
      double dot = 0.0;
      for (std::size_t k = 0; k < D; ++k) dot += a[k] * b[k];
      const double c = std::clamp(dot / (norms[i] * norms[j]), -1.0, 1.0);
      values[i * N + j] = static_cast<T>(c);
    }
  });
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = i + 1; j < N; ++j) values[j * N + i] = values[i * N + j];
  }
  return SimilarityMatrix<T>(N, std::move(values), emb.fingerprint());
}

inline constexpr double kEmbSimFloor = 1e-12;

/// log(mean_i cos(W_gen column i, W_real column i)), the mean clamped below
/// at 1e-12. A column with zero norm contributes cosine 0.
template <typename T>
double embsim(const SimilarityMatrix<T>& real, const SimilarityMatrix<T>& gen) {
  if (real.size() != gen.size()) {
    throw ConfigError("similarity matrices differ in size: " + std::to_string(real.size()) +
                      " vs " + std::to_string(gen.size()));
  }
  const std::size_t N = real.size();
  if (N == 0) throw ConfigError("empty similarity matrices");
  std::vector<double> cosines(N);
  parallel_for(N, [&](std::size_t i) {
    const auto a = gen.column(i);
    const auto b = real.column(i);
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
      const double x = a[k], y = b[k];
      dot += x * y;
      na += x * x;
      nb += y * y;
    }
    cosines[i] = (na == 0.0 || nb == 0.0) ? 0.0 : std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
  });
  const double mean = compensated_mean(cosines);
  return std::log(std::max(mean, kEmbSimFloor));
}

// ---------------------------------------------------------------------------
// Embedding file: little-endian header {magic, version, N, D, window,
// negatives, epochs, lr (f64), seed}, then N input rows and N output rows as
// f64. "<file>.meta" sidecar carries the fingerprints.

inline constexpr std::uint64_t kEmbedMagic = magic_word("TXEMBED1");
inline constexpr std::uint64_t kEmbedVersion = 1;

inline void save_embeddings(const EmbeddingTable& emb, const std::filesystem::path& path) {
  BinaryWriter w(path);
  w.u64(kEmbedMagic);
  w.u64(kEmbedVersion);
  w.u64(emb.vocab);
  w.u64(emb.config.dim);
  w.u64(emb.config.window);
  w.u64(emb.config.negatives);
  w.u64(emb.config.epochs);
  w.f64(emb.config.lr);
  w.u64(emb.config.seed);
  w.f64s(emb.input);
  w.f64s(emb.output);
  w.finish();

  std::ofstream meta(path.string() + ".meta", std::ios::trunc);
  if (!meta) throw IoError("cannot write sidecar for " + path.string());
  meta << "format: texeval-embeddings v" << kEmbedVersion << '\n'
       << "vocab: " << emb.vocab << '\n'
       << "config_fingerprint: " << emb.config.fingerprint() << '\n'
       << "corpus_fingerprint: " << emb.corpus_fingerprint << '\n'
       << "vectors: input\n"
       << "fingerprint: " << emb.fingerprint() << '\n';
  if (!meta) throw IoError("cannot write sidecar for " + path.string());
}

inline EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  BinaryReader r(path);
  r.expect_header(kEmbedMagic, kEmbedVersion);
  EmbeddingTable emb;
  emb.vocab = r.u64();
  emb.config.dim = r.u64();
  emb.config.window = r.u64();
  emb.config.negatives = r.u64();
  emb.config.epochs = r.u64();
  emb.config.lr = r.f64();
  emb.config.seed = r.u64();
  const auto file_size = std::filesystem::file_size(path);
  if (emb.vocab * emb.config.dim * 16 + 72 != file_size) {
    throw IoError("embedding file size does not match header: " + path.string());
  }
  emb.input.resize(emb.vocab * emb.config.dim);
  emb.output.resize(emb.vocab * emb.config.dim);
  r.f64s(emb.input);
  r.f64s(emb.output);
  r.expect_eof();
  if (std::ifstream meta(path.string() + ".meta"); meta) {
    std::string line;
    while (std::getline(meta, line)) {
      if (line.rfind("corpus_fingerprint: ", 0) == 0) emb.corpus_fingerprint = line.substr(20);
    }
  }
  return emb;
}

}  // namespace texeval
