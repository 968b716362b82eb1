#pragma once

// Experiment configuration: an INI document with sections [data], [oracle],
// [generator], [metrics] and [schedule]. Every key has a default except the
// seeds a mode consumes, which must be given explicitly.

#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "texeval/bleu.hpp"
#include "texeval/corpus.hpp"
#include "texeval/embsim.hpp"
#include "texeval/error.hpp"
#include "texeval/numeric.hpp"
#include "texeval/oracle.hpp"

namespace texeval {

enum class ExperimentMode { synthetic, real };

inline std::string to_string(ExperimentMode m) { return m == ExperimentMode::synthetic ? "synthetic" : "real"; }

inline ExperimentMode parse_experiment_mode(std::string_view s) {
  if (s == "synthetic") return ExperimentMode::synthetic;
  if (s == "real") return ExperimentMode::real;
  throw ConfigError("unknown mode '" + std::string(s) + "' (expected synthetic or real)");
}

enum class SimilarityStorage { f64, f32 };

struct ExperimentConfig {
  ExperimentMode mode = ExperimentMode::synthetic;
  /// Directory that relative paths resolve against.
  std::filesystem::path base_dir = ".";

  struct Data {
    std::string corpus;
    TokenizationPolicy tokenization = TokenizationPolicy::whitespace_lowercase;
    /// First N non-blank lines are used; 0 = all.
    std::size_t max_sentences = 20000;
    double split_ratio = 0.5;
    std::optional<std::uint64_t> split_seed;
  } data;

  struct Oracle {
    std::string file;
    OracleShape shape;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> sample_seed;
    std::size_t length = 20;
    std::size_t train_sentences = 10000;
    std::size_t test_sentences = 10000;
  } oracle;

  struct Generator {
    /// 0 = 2 for synthetic, 3 for real.
    std::size_t order = 0;
    double delta = 0.01;
    std::optional<std::uint64_t> seed;
    /// 0 = test-set size.
    std::size_t sentences = 0;
    /// 0 = oracle length (synthetic) or longest training sentence (real).
    std::size_t max_length = 0;
  } generator;

  struct Metrics {
    std::vector<std::size_t> bleu_orders{2, 3, 4, 5};
    BleuSmoothing smoothing = BleuSmoothing::none;
    /// 0 = every sentence is a hypothesis.
    std::size_t self_bleu_sample = 0;
    SkipGramConfig skipgram;
    SimilarityStorage storage = SimilarityStorage::f64;
    std::optional<std::uint64_t> seed;
  } metrics;

  struct Schedule {
    std::vector<double> checkpoints{0.0, 0.1, 0.5, 1.0};
  } schedule;

  std::size_t effective_order() const {
    return generator.order ? generator.order : (mode == ExperimentMode::synthetic ? 2 : 3);
  }

  std::filesystem::path resolve(const std::string& p) const {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  }

  SkipGramConfig skipgram() const {
    SkipGramConfig c = metrics.skipgram;
    c.seed = metrics.seed.value_or(0);
    return c;
  }

  /// Rejects out-of-range values, missing seeds and unresolvable paths.
  void validate() const;

  /// Canonical "section.key" -> value listing of every setting.
  std::map<std::string, std::string> entries() const;

  /// Hash of every setting except file paths (data identity is fingerprinted
  /// separately from content).
  std::string fingerprint() const {
    Fingerprint fp;
    fp.add(std::string("texeval-experiment"));
    for (const auto& [k, v] : entries()) {
      if (k == "data.corpus" || k == "oracle.file") continue;
      fp.add(k).add(v);
    }
    return fp.hex();
  }
};
/// Parses an INI document. Unknown sections or keys are errors. A mode
/// override replaces data.mode.
ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& base_dir,
                              std::optional<ExperimentMode> mode_override = std::nullopt);

/// Relative paths in the file resolve against its directory.
ExperimentConfig load_config(const std::filesystem::path& path,
                             std::optional<ExperimentMode> mode_override = std::nullopt);

}  // namespace texeval
