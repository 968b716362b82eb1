#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "texeval/binary_io.hpp"
#include "texeval/corpus.hpp"
#include "texeval/error.hpp"
#include "texeval/numeric.hpp"
#include "texeval/random.hpp"

namespace texeval {

struct OracleShape {
  std::size_t vocab = 5000;
  std::size_t embed = 32;
  std::size_t hidden = 32;
};

enum class Gate : std::size_t { input = 0, forget = 1, output = 2, candidate = 3 };

struct LstmState {
  std::vector<double> h;
  std::vector<double> c;

  static LstmState zeros(std::size_t hidden) {
    return {std::vector<double>(hidden, 0.0), std::vector<double>(hidden, 0.0)};
  }
};

/// Single-layer LSTM language model with fixed random parameters.
///
/// Parameter order (also the on-disk order): embedding (V x E, row per
/// token), then for each gate in {input, forget, output, candidate} its
/// weight matrix (H x (E + H), row-major, input columns first) followed by
/// its bias (H), then the output projection (V x H, stored column-major:
/// entry (v, k) at k * V + v) and output bias (V).
/// Sentences are conditioned on the START marker (id 0) from a zero state.
class OracleModel {
 public:
  static constexpr TokenId kStart = Vocabulary::kStart;

  /// All-zero parameters. Callers may fill them through the mutable views.
  OracleModel(OracleShape shape, std::uint64_t seed, std::string init_tag = "zeros")
      : shape_(shape), seed_(seed), init_tag_(std::move(init_tag)) {
    if (shape.vocab < 1 || shape.embed < 1 || shape.hidden < 1) {
      throw ConfigError("oracle dimensions must be positive");
    }
    params_.assign(parameter_count(shape), 0.0);
  }

  static std::size_t parameter_count(const OracleShape& s) {
    const std::size_t in = s.embed + s.hidden;
    return s.vocab * s.embed + 4 * (s.hidden * in + s.hidden) + s.vocab * s.hidden + s.vocab;
  }

  const OracleShape& shape() const { return shape_; }
  std::size_t vocab_size() const { return shape_.vocab; }
  std::uint64_t seed() const { return seed_; }
  const std::string& init_tag() const { return init_tag_; }

  std::span<const double> parameters() const { return params_; }
  std::span<double> parameters() { return params_; }

  std::span<const double> embedding(TokenId t) const {
    return {params_.data() + t * shape_.embed, shape_.embed};
  }
  std::span<double> embedding_matrix() { return {params_.data(), shape_.vocab * shape_.embed}; }
  std::span<const double> gate_weights(Gate g) const {
    return {params_.data() + gate_offset(g), shape_.hidden * gate_inputs()};
  }
  std::span<double> gate_weights(Gate g) {
    return {params_.data() + gate_offset(g), shape_.hidden * gate_inputs()};
  }
  std::span<const double> gate_bias(Gate g) const {
    return {params_.data() + gate_offset(g) + shape_.hidden * gate_inputs(), shape_.hidden};
  }
  std::span<double> gate_bias(Gate g) {
    return {params_.data() + gate_offset(g) + shape_.hidden * gate_inputs(), shape_.hidden};
  }
  std::span<const double> output_weights() const {
    return {params_.data() + output_offset(), shape_.vocab * shape_.hidden};
  }
  std::span<double> output_weights() {
    return {params_.data() + output_offset(), shape_.vocab * shape_.hidden};
  }
  std::span<const double> output_bias() const {
    return {params_.data() + output_offset() + shape_.vocab * shape_.hidden, shape_.vocab};
  }
  std::span<double> output_bias() {
    return {params_.data() + output_offset() + shape_.vocab * shape_.hidden, shape_.vocab};
  }

  std::string checksum() const {
    Fingerprint fp;
    for (double p : params_) fp.add(p);
    return fp.hex();
  }

  std::string fingerprint() const {
    Fingerprint fp;
    fp.add(static_cast<std::uint64_t>(shape_.vocab))
        .add(static_cast<std::uint64_t>(shape_.embed))
        .add(static_cast<std::uint64_t>(shape_.hidden))
        .add(seed_)
        .add(checksum());
    return fp.hex();
  }

  /// Advances `state` by one token and writes the next-token logits.
  void step_into(LstmState& state, TokenId token, std::span<double> logits,
                 std::vector<double>& scratch) const {
    const std::size_t E = shape_.embed, H = shape_.hidden, in = E + H;
    if (token >= shape_.vocab) {
      throw RangeError("token id " + std::to_string(token) + " >= oracle vocabulary " +
                       std::to_string(shape_.vocab));
    }
    if (state.h.size() != H || state.c.size() != H) {
      throw ConfigError("LSTM state does not match hidden size " + std::to_string(H));
    }
    scratch.resize(in + 4 * H);
    double* x = scratch.data();
    double* pre = scratch.data() + in;
    const auto emb = embedding(token);
    std::copy(emb.begin(), emb.end(), x);
    std::copy(state.h.begin(), state.h.end(), x + E);
    for (std::size_t g = 0; g < 4; ++g) {
      const double* W = params_.data() + gate_offset(static_cast<Gate>(g));
      const double* b = W + H * in;
      for (std::size_t r = 0; r < H; ++r) {
        const double* row = W + r * in;
        double acc = 0.0;
        for (std::size_t k = 0; k < in; ++k) acc += row[k] * x[k];
        pre[g * H + r] = acc + b[r];
      }
    }
    for (std::size_t r = 0; r < H; ++r) {
      const double i = sigmoid(pre[r]);
      const double f = sigmoid(pre[H + r]);
      const double o = sigmoid(pre[2 * H + r]);
      const double g = std::tanh(pre[3 * H + r]);
      state.c[r] = f * state.c[r] + i * g;
      state.h[r] = o * std::tanh(state.c[r]);
    }
    project(state.h, logits);
  }

  std::pair<LstmState, std::vector<double>> step(const LstmState& state, TokenId token) const {
    LstmState next = state;
    std::vector<double> logits(shape_.vocab);
    std::vector<double> scratch;
    step_into(next, token, logits, scratch);
    return {std::move(next), std::move(logits)};
  }

 private:
  static double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

  std::size_t gate_inputs() const { return shape_.embed + shape_.hidden; }
  std::size_t gate_offset(Gate g) const {
    return shape_.vocab * shape_.embed +
           static_cast<std::size_t>(g) * (shape_.hidden * gate_inputs() + shape_.hidden);
  }
  std::size_t output_offset() const { return gate_offset(Gate::candidate) + shape_.hidden * gate_inputs() + shape_.hidden; }

  void project(std::span<const double> h, std::span<double> logits) const {
    const std::size_t H = shape_.hidden;
    const double* W = params_.data() + output_offset();
    const double* b = W + shape_.vocab * H;
    const std::size_t V = shape_.vocab;
    constexpr std::size_t kBlock = 256;
    for (std::size_t lo = 0; lo < V; lo += kBlock) {
      const std::size_t hi = std::min(V, lo + kBlock);
      double* out = logits.data();
      std::copy(b + lo, b + hi, out + lo);
      for (std::size_t k = 0; k < H; ++k) {
        const double* col = W + k * V;
        const double hk = h[k];
        for (std::size_t v = lo; v < hi; ++v) out[v] += col[v] * hk;
      }
    }
  }

  OracleShape shape_;
  std::uint64_t seed_;
  std::string init_tag_;
  std::vector<double> params_;
};

/// Every parameter (biases included) drawn i.i.d. from N(0, 1) in storage
/// order from one seeded stream.
inline OracleModel init_oracle(std::uint64_t seed, OracleShape shape) {
  if (shape.vocab < 2) throw ConfigError("oracle vocabulary must be >= 2");
  if (shape.embed < 1 || shape.hidden < 1) throw ConfigError("oracle E and H must be >= 1");
  OracleModel model(shape, seed, "normal(0,1)");
  Rng rng(derive_seed(seed, "oracle-init"));
  for (double& p : model.parameters()) p = rng.normal();
  return model;
}

inline OracleModel init_oracle(std::uint64_t seed, std::size_t V, std::size_t E, std::size_t H) {
  return init_oracle(seed, OracleShape{V, E, H});
}

struct SentenceLogProb {
  double total = 0.0;
  std::vector<double> per_token;
};

/// Natural-log probability of each token given START and the preceding
/// tokens. No END transition: oracle sentences are fixed-length.
inline SentenceLogProb log_prob(const OracleModel& model, std::span<const TokenId> sentence) {
  const std::size_t V = model.vocab_size();
  for (TokenId t : sentence) {
    if (t >= V) {
      throw RangeError("token id " + std::to_string(t) + " >= oracle vocabulary " +
                       std::to_string(V));
    }
  }
  SentenceLogProb out;
  out.per_token.reserve(sentence.size());
  LstmState state = LstmState::zeros(model.shape().hidden);
  std::vector<double> logits(V), scratch;
  TokenId prev = OracleModel::kStart;
  CompensatedSum total;
  for (TokenId y : sentence) {
    model.step_into(state, prev, logits, scratch);
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double v : logits) z += std::exp(v - mx);
    const double lp = logits[y] - mx - std::log(z);
    out.per_token.push_back(lp);
    total.add(lp);
    prev = y;
  }
  out.total = total.value();
  return out;
}

struct OracleSample {
  Corpus corpus;
  /// Log-probability of each sampled sentence, accumulated while sampling.
  std::vector<double> log_probs;
};

/// Ancestral sampling of `count` fixed-length sentences. Sentence i draws
/// from its own substream derive_seed(seed, i), so output does not depend
/// on the thread count.
inline OracleSample sample_with_scores(const OracleModel& model, std::size_t count,
                                       std::size_t length, std::uint64_t seed,
                                       VocabularyPtr vocab = nullptr) {
  if (count < 1 || length < 1) throw ConfigError("sample count and length must be >= 1");
  const std::size_t V = model.vocab_size();
  if (!vocab) vocab = std::make_shared<const Vocabulary>(Vocabulary::synthetic(std::max<std::size_t>(V, 2)));
  if (vocab->size() != V) throw ConfigError("vocabulary size does not match oracle");
  std::vector<Sentence> sentences(count);
  std::vector<double> scores(count);
  parallel_for(count, [&](std::size_t i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    LstmState state = LstmState::zeros(model.shape().hidden);
    std::vector<double> logits(V), weights(V), scratch;
    Sentence s;
    s.reserve(length);
    TokenId prev = OracleModel::kStart;
    CompensatedSum total;
    for (std::size_t t = 0; t < length; ++t) {
      model.step_into(state, prev, logits, scratch);
      const double mx = *std::max_element(logits.begin(), logits.end());
      double z = 0.0;
      for (std::size_t v = 0; v < V; ++v) {
        weights[v] = std::exp(logits[v] - mx);
        z += weights[v];
      }
      const double u = rng.uniform() * z;
      double cum = 0.0;
      TokenId pick = static_cast<TokenId>(V - 1);
      for (std::size_t v = 0; v < V; ++v) {
        cum += weights[v];
        if (u < cum) {
          pick = static_cast<TokenId>(v);
          break;
        }
      }
      total.add(logits[pick] - mx - std::log(z));
      s.push_back(pick);
      prev = pick;
    }
    sentences[i] = std::move(s);
    scores[i] = total.value();
  });
  return {Corpus(std::move(sentences), std::move(vocab), SplitTag::oracle, LengthMode::fixed,
                 "oracle"),
          std::move(scores)};
}

inline Corpus sample(const OracleModel& model, std::size_t count, std::size_t length,
                     std::uint64_t seed, VocabularyPtr vocab = nullptr) {
  return sample_with_scores(model, count, length, seed, std::move(vocab)).corpus;
}

// ---------------------------------------------------------------------------
// Parameter file: little-endian header {magic, version, V, E, H, seed} as
// u64, then every parameter as f64 in storage order. A "<file>.meta" text
// sidecar carries the init tag and checksums.

inline constexpr std::uint64_t kOracleMagic = magic_word("TXORACLE");
inline constexpr std::uint64_t kOracleVersion = 1;

inline std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  return path.string() + ".meta";
}

inline void save_oracle(const OracleModel& model, const std::filesystem::path& path) {
  BinaryWriter w(path);
  w.u64(kOracleMagic);
  w.u64(kOracleVersion);
  w.u64(model.shape().vocab);
  w.u64(model.shape().embed);
  w.u64(model.shape().hidden);
  w.u64(model.seed());
  w.f64s(model.parameters());
  w.finish();

  std::ofstream meta(sidecar_path(path), std::ios::trunc);
  if (!meta) throw IoError("cannot write sidecar for " + path.string());
  meta << "format: texeval-oracle v" << kOracleVersion << '\n'
       << "vocab: " << model.shape().vocab << '\n'
       << "embed: " << model.shape().embed << '\n'
       << "hidden: " << model.shape().hidden << '\n'
       << "seed: " << model.seed() << '\n'
       << "init: " << model.init_tag() << '\n'
       << "start_conditioning: start-marker-embedding\n"
       << "parameters: " << model.parameters().size() << '\n'
       << "checksum: " << model.checksum() << '\n'
       << "fingerprint: " << model.fingerprint() << '\n';
  if (!meta) throw IoError("cannot write sidecar for " + path.string());
}

inline OracleModel load_oracle(const std::filesystem::path& path) {
  BinaryReader r(path);
  r.expect_header(kOracleMagic, kOracleVersion);
  OracleShape shape;
  shape.vocab = r.u64();
  shape.embed = r.u64();
  shape.hidden = r.u64();
  const std::uint64_t seed = r.u64();
  std::string tag = "file";
  if (std::ifstream meta(sidecar_path(path)); meta) {
    std::string line;
    while (std::getline(meta, line)) {
      if (line.rfind("init: ", 0) == 0) tag = line.substr(6);
    }
  }
  const auto expected = 48 + 8 * OracleModel::parameter_count(shape);
  if (std::filesystem::file_size(path) != expected) {
    throw IoError("oracle file size does not match header: " + path.string());
  }
  OracleModel model(shape, seed, tag);
  r.f64s(model.parameters());
  r.expect_eof();
  return model;
}

}  // namespace texeval
