#include "texeval/harness.hpp"

#include <chrono>
#include <memory>
#include <string>
#include <vector>

#include "texeval/bleu.hpp"
#include "texeval/config.hpp"
#include "texeval/corpus.hpp"
#include "texeval/embsim.hpp"
#include "texeval/generator.hpp"
#include "texeval/ngram_lm.hpp"
#include "texeval/nll.hpp"
#include "texeval/oracle.hpp"
#include "texeval/report.hpp"

namespace texeval {

namespace detail {

class StageClock {
 public:
  explicit StageClock(MetricReport& report) : report_(report) {}

  void lap(std::string stage) {
    const auto now = std::chrono::steady_clock::now();
    report_.timing.push_back({std::move(stage), std::chrono::duration<double>(now - last_).count()});
    last_ = now;
  }

 private:
  MetricReport& report_;
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

inline std::string metric_fingerprint(const std::string& config_fp, const std::string& name,
                                      const std::string& params) {
  Fingerprint fp;
  fp.add(config_fp).add(name).add(params);
  return fp.hex();
}

inline MetricValue nll_value(const std::string& name, const NllResult& r, const std::string& config_fp) {
  return {name, r.mean, r.stderr_, r.count,
          metric_fingerprint(config_fp, name, r.scorer_fingerprint + "/" + r.corpus_fingerprint)};
}

inline Corpus prefix(const Corpus& c, std::size_t n, SplitTag tag) {
  std::vector<Sentence> s(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(n));
  return Corpus(std::move(s), c.vocab_ptr(), tag, c.length_mode(), c.policy());
}

inline std::size_t fraction_count(double fraction, std::size_t total) {
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(total)));
}

/// Fraction 0 is the untrained (uniform) model.
inline std::unique_ptr<Generator> checkpoint_generator(const Corpus& train, std::size_t n,
                                                      const ExperimentConfig& cfg) {
  if (n == 0) return std::make_unique<UniformGenerator>(train.vocab_ptr(), train.length_mode());
  return std::make_unique<NGramLM>(
      train_ngram_mle(prefix(train, n, SplitTag::train), cfg.effective_order(), cfg.generator.delta));
}

inline MetricReport start_report(const ExperimentConfig& cfg) {
  MetricReport r;
  r.mode = to_string(cfg.mode);
  r.config_fingerprint = cfg.fingerprint();
  r.config = cfg.entries();
  r.threads = thread_count();
  auto seed = [&](const char* key, const std::optional<std::uint64_t>& s) {
    if (s) r.seeds[key] = *s;
  };
  seed("generator.seed", cfg.generator.seed);
  if (cfg.mode == ExperimentMode::synthetic) {
    seed("oracle.seed", cfg.oracle.seed);
    seed("oracle.sample_seed", cfg.oracle.sample_seed);
  } else {
    seed("data.split_seed", cfg.data.split_seed);
    seed("metrics.seed", cfg.metrics.seed);
  }
  r.disclosures.push_back("NLL values use the natural log; per-sentence sums averaged over sentences");
  return r;
}

}  // namespace detail

MetricReport run_synthetic(const ExperimentConfig& cfg) {
  if (cfg.mode != ExperimentMode::synthetic) throw ConfigError("run_synthetic needs mode = synthetic");
  cfg.validate();
  MetricReport report = detail::start_report(cfg);
  detail::StageClock clock(report);
  const std::string cfp = report.config_fingerprint;

  std::shared_ptr<const OracleModel> oracle;
  if (!cfg.oracle.file.empty()) {
    auto loaded = load_oracle(cfg.resolve(cfg.oracle.file));
    const auto& s = loaded.shape();
    if (s.vocab != cfg.oracle.shape.vocab || s.embed != cfg.oracle.shape.embed ||
        s.hidden != cfg.oracle.shape.hidden) {
      throw ConfigError("oracle.file shape differs from [oracle] vocab/embed/hidden");
    }
    oracle = std::make_shared<const OracleModel>(std::move(loaded));
  } else {
    oracle = std::make_shared<const OracleModel>(init_oracle(*cfg.oracle.seed, cfg.oracle.shape));
  }
  auto vocab = std::make_shared<const Vocabulary>(Vocabulary::synthetic(oracle->vocab_size()));
  clock.lap("oracle");

  const std::uint64_t sample_seed = *cfg.oracle.sample_seed;
  const auto as = [&](Corpus c, SplitTag tag) {
    return Corpus(std::vector<Sentence>(c.sentences()), vocab, tag, LengthMode::fixed);
  };
  const Corpus train = as(sample(*oracle, cfg.oracle.train_sentences, cfg.oracle.length,
                                 derive_seed(sample_seed, "oracle-train"), vocab),
                          SplitTag::train);
  const Corpus test = as(sample(*oracle, cfg.oracle.test_sentences, cfg.oracle.length,
                                derive_seed(sample_seed, "oracle-test"), vocab),
                         SplitTag::test);
  clock.lap("oracle-samples");

  const std::size_t generated = cfg.generator.sentences ? cfg.generator.sentences : test.size();
  const std::size_t max_length = cfg.generator.max_length ? cfg.generator.max_length : cfg.oracle.length;
  report.data = {{"oracle_fingerprint", oracle->fingerprint()},
                 {"oracle_checksum", oracle->checksum()},
                 {"vocab_size", vocab->size()},
                 {"sequence_length", cfg.oracle.length},
                 {"train_sentences", train.size()},
                 {"train_fingerprint", train.fingerprint()},
                 {"test_sentences", test.size()},
                 {"test_fingerprint", test.fingerprint()},
                 {"generated_sentences", generated},
                 {"generated_max_length", max_length}};
  if (!cfg.generator.sentences) {
    report.disclosures.push_back("generated corpus size defaults to the test-set size (" +
                                 std::to_string(generated) + ")");
  }

  for (std::size_t i = 0; i < cfg.schedule.checkpoints.size(); ++i) {
    const double f = cfg.schedule.checkpoints[i];
    const std::size_t n = detail::fraction_count(f, train.size());
    const auto gen = detail::checkpoint_generator(train, n, cfg);
    const Corpus out =
        gen->sample(generated, max_length, derive_seed(*cfg.generator.seed, "checkpoint-" + format_double(f)));
    Checkpoint cp{i, f, n, gen->name(), gen->fingerprint(), out.fingerprint(), out.size(), {}};
    cp.metrics.push_back(detail::nll_value("nll_oracle", nll_oracle(*oracle, out), cfp));
    cp.metrics.push_back(detail::nll_value("nll_test", nll_test(*gen, test), cfp));
    report.checkpoints.push_back(std::move(cp));
    clock.lap("checkpoint-" + std::to_string(i));
  }
  return report;
}

namespace detail {

template <typename T>
double embsim_against(const SimilarityMatrix<T>& real, const Corpus& other, const SkipGramConfig& sg) {
  return embsim(real, similarity_matrix<T>(train_skipgram(other, sg)));
}

/// Picks a sentence long enough to score 1.0 at every BLEU order when
/// repeated; the longest one if none is.
inline const Sentence& degenerate_sentence(const Corpus& train, std::size_t max_order) {
  const Sentence* best = &train[0];
  for (const auto& s : train) {
    if (s.size() >= max_order) return s;
    if (s.size() > best->size()) best = &s;
  }
  return *best;
}

template <typename T>
void run_real_checkpoints(const ExperimentConfig& cfg, const Corpus& train, const Corpus& test,
                          std::size_t generated, std::size_t max_length, MetricReport& report,
                          StageClock& clock) {
  const std::string cfp = report.config_fingerprint;
  const SkipGramConfig sg = cfg.skipgram();
  const std::uint64_t metrics_seed = *cfg.metrics.seed;
  const std::optional<std::size_t> sample_size =
      cfg.metrics.self_bleu_sample ? std::optional(cfg.metrics.self_bleu_sample) : std::nullopt;
  auto bleu_cfg = [&](std::size_t n) {
    BleuConfig b;
    b.max_order = n;
    b.smoothing = cfg.metrics.smoothing;
    return b;
  };
  auto scalar = [&](const std::string& name, double v, std::size_t count, const std::string& params) {
    return MetricValue{name, v, std::nullopt, count, metric_fingerprint(cfp, name, params)};
  };
  auto self_bleu_value = [&](const std::string& name, const Corpus& c, std::size_t n) {
    const auto r = self_bleu(c, bleu_cfg(n), sample_size, derive_seed(metrics_seed, name));
    return scalar(name, r.value, r.hypotheses, bleu_cfg(n).fingerprint() + "/" + c.fingerprint());
  };

  const auto real = similarity_matrix<T>(train_skipgram(train, sg));
  clock.lap("real-embeddings");

  std::size_t max_order = 1;
  for (std::size_t n : cfg.metrics.bleu_orders) max_order = std::max(max_order, n);
  const Corpus degenerate(std::vector<Sentence>(generated, degenerate_sentence(train, max_order)),
                          train.vocab_ptr(), SplitTag::generated, LengthMode::variable);
  for (std::size_t n : cfg.metrics.bleu_orders) {
    const std::string suffix = std::to_string(n);
    report.references.push_back(self_bleu_value("self_bleu" + suffix + "_train_data", train, n));
    report.references.push_back(self_bleu_value("self_bleu" + suffix + "_degenerate", degenerate, n));
  }
  report.references.push_back(scalar("embsim_test_data", embsim_against(real, test, sg), test.size(),
                                     sg.fingerprint() + "/" + test.fingerprint()));
  clock.lap("references");

  for (std::size_t i = 0; i < cfg.schedule.checkpoints.size(); ++i) {
    const double f = cfg.schedule.checkpoints[i];
    const std::size_t n = fraction_count(f, train.size());
    const auto gen = checkpoint_generator(train, n, cfg);
    const Corpus out =
        gen->sample(generated, max_length, derive_seed(*cfg.generator.seed, "checkpoint-" + format_double(f)));
    Checkpoint cp{i, f, n, gen->name(), gen->fingerprint(), out.fingerprint(), out.size(), {}};
    for (std::size_t order : cfg.metrics.bleu_orders) {
      const std::string suffix = std::to_string(order);
      const auto b = bleu_cfg(order);
      const auto vs_train = corpus_bleu(out, train, b);
      const auto vs_test = corpus_bleu(out, test, b);
      cp.metrics.push_back(scalar("bleu" + suffix + "_train", vs_train.value, vs_train.hypotheses,
                                  b.fingerprint() + "/" + train.fingerprint()));
      cp.metrics.push_back(scalar("bleu" + suffix + "_test", vs_test.value, vs_test.hypotheses,
                                  b.fingerprint() + "/" + test.fingerprint()));
      cp.metrics.push_back(self_bleu_value("self_bleu" + suffix, out, order));
    }
    cp.metrics.push_back(scalar("embsim", embsim_against(real, out, sg), out.size(),
                                sg.fingerprint() + "/" + train.fingerprint()));
    cp.metrics.push_back(nll_value("nll_test", nll_test(*gen, test), cfp));
    report.checkpoints.push_back(std::move(cp));
    clock.lap("checkpoint-" + std::to_string(i));
  }
}

}  // namespace detail

MetricReport run_real(const ExperimentConfig& cfg) {
  if (cfg.mode != ExperimentMode::real) throw ConfigError("run_real needs mode = real");
  cfg.validate();
  MetricReport report = detail::start_report(cfg);
  detail::StageClock clock(report);

  auto text = read_text_corpus(cfg.resolve(cfg.data.corpus), cfg.data.tokenization);
  if (cfg.data.max_sentences && text.size() > cfg.data.max_sentences) text.resize(cfg.data.max_sentences);
  auto vocab = std::make_shared<const Vocabulary>(build_vocab(text, 1));
  const Corpus all = encode_corpus(text, vocab, SplitTag::train, cfg.data.tokenization);
  auto [train, test] = split(all, cfg.data.split_ratio, *cfg.data.split_seed);
  if (train.empty() || test.empty()) throw InputError("corpus too small to split");
  clock.lap("data");

  std::size_t longest = 1;
  for (const auto& s : train) longest = std::max(longest, s.size());
  const std::size_t generated = cfg.generator.sentences ? cfg.generator.sentences : test.size();
  const std::size_t max_length = cfg.generator.max_length ? cfg.generator.max_length : longest;
  report.data = {{"corpus_sentences", all.size()},
                 {"vocab_size", vocab->size()},
                 {"vocab_fingerprint", vocab->fingerprint()},
                 {"train_sentences", train.size()},
                 {"train_fingerprint", train.fingerprint()},
                 {"test_sentences", test.size()},
                 {"test_fingerprint", test.fingerprint()},
                 {"generated_sentences", generated},
                 {"generated_max_length", max_length}};
  if (!cfg.generator.sentences) {
    report.disclosures.push_back("generated corpus size defaults to the test-set size (" +
                                 std::to_string(generated) + ")");
  }
  report.disclosures.push_back("BLEU references are the full training or test half");

  if (cfg.metrics.storage == SimilarityStorage::f64) {
    detail::run_real_checkpoints<double>(cfg, train, test, generated, max_length, report, clock);
  } else {
    detail::run_real_checkpoints<float>(cfg, train, test, generated, max_length, report, clock);
  }
  return report;
}

MetricReport run_experiment(const ExperimentConfig& cfg) {
  return cfg.mode == ExperimentMode::synthetic ? run_synthetic(cfg) : run_real(cfg);
}

}  // namespace texeval
