// Command-line front end. Every command prints one JSON object on stdout.
// Exit status: 0 success, 1 invalid arguments or configuration, 2 runtime
// failure.

#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "texeval/texeval.hpp"

namespace {

using namespace texeval;
using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

void print(const Json& j) { std::cout << j.dump(2) << '\n'; }

fs::path vocab_path_for(const fs::path& model) { return model.string() + ".vocab"; }

/// Builds a vocabulary over the union of the given text files so every
/// token of either side is in range.
VocabularyPtr union_vocab(const std::vector<std::vector<std::vector<std::string>>>& texts) {
  std::vector<std::vector<std::string>> all;
  for (const auto& t : texts) all.insert(all.end(), t.begin(), t.end());
  return std::make_shared<const Vocabulary>(build_vocab(all, 1));
}

std::uint64_t peek_magic(const fs::path& path) {
  BinaryReader r(path);
  return r.u64();
}

// --- oracle ----------------------------------------------------------------

struct OracleGenArgs {
  std::string out;
  std::size_t vocab = 5000, embed = 32, hidden = 32;
  std::uint64_t seed = 0;
};

void oracle_gen(const OracleGenArgs& a) {
  const auto m = init_oracle(a.seed, OracleShape{a.vocab, a.embed, a.hidden});
  save_oracle(m, a.out);
  print(Json{{"command", "oracle gen"},
             {"path", a.out},
             {"vocab", a.vocab},
             {"embed", a.embed},
             {"hidden", a.hidden},
             {"seed", a.seed},
             {"checksum", m.checksum()},
             {"fingerprint", m.fingerprint()}});
}

struct OracleSampleArgs {
  std::string oracle, out;
  std::size_t count = 10000, length = 20;
  std::uint64_t seed = 0;
};

void oracle_sample(const OracleSampleArgs& a) {
  const auto m = load_oracle(a.oracle);
  const auto c = sample(m, a.count, a.length, a.seed);
  save_corpus(c, a.out);
  print(Json{{"command", "oracle sample"},
             {"path", a.out},
             {"count", c.size()},
             {"length", a.length},
             {"seed", a.seed},
             {"oracle_fingerprint", m.fingerprint()},
             {"corpus_fingerprint", c.fingerprint()}});
}

// --- train / generate ------------------------------------------------------

struct TrainArgs {
  std::string train, out, vocab_file, input_format = "text", length_mode, tokenization = "whitespace";
  std::size_t order = 3, vocab_size = 0;
  double delta = 0.01;
};

void train(const TrainArgs& a) {
  VocabularyPtr vocab;
  std::optional<Corpus> corpus;
  const auto policy = parse_tokenization_policy(a.tokenization);
  if (a.input_format == "ids") {
    if (!a.vocab_file.empty()) {
      vocab = std::make_shared<const Vocabulary>(load_vocab(a.vocab_file));
    } else if (a.vocab_size) {
      vocab = std::make_shared<const Vocabulary>(Vocabulary::synthetic(a.vocab_size));
    } else {
      throw ConfigError("--input-format ids needs --vocab or --vocab-size");
    }
    const auto mode = parse_length_mode(a.length_mode.empty() ? "fixed" : a.length_mode);
    corpus.emplace(load_corpus(a.train, vocab, SplitTag::train, mode));
  } else if (a.input_format == "text") {
    const auto text = read_text_corpus(a.train, policy);
    vocab = a.vocab_file.empty() ? std::make_shared<const Vocabulary>(build_vocab(text, 1))
                                 : std::make_shared<const Vocabulary>(load_vocab(a.vocab_file));
    const auto mode = parse_length_mode(a.length_mode.empty() ? "variable" : a.length_mode);
    const auto encoded = encode_corpus(text, vocab, SplitTag::train, policy);
    corpus.emplace(std::vector<Sentence>(encoded.sentences()), vocab, SplitTag::train, mode, to_string(policy));
  } else {
    throw ConfigError("--input-format must be ids or text");
  }
  const auto lm = train_ngram_mle(*corpus, a.order, a.delta);
  save_ngram(lm, a.out);
  save_vocab(*vocab, vocab_path_for(a.out));
  print(Json{{"command", "train"},
             {"path", a.out},
             {"vocab_path", vocab_path_for(a.out).string()},
             {"order", a.order},
             {"delta", a.delta},
             {"vocab_size", vocab->size()},
             {"length_mode", to_string(corpus->length_mode())},
             {"sentences", corpus->size()},
             {"model_fingerprint", lm.fingerprint()},
             {"training_fingerprint", lm.training_fingerprint()}});
}

NGramLM load_model_with_vocab(const fs::path& model) {
  VocabularyPtr vocab;
  if (fs::exists(vocab_path_for(model))) {
    vocab = std::make_shared<const Vocabulary>(load_vocab(vocab_path_for(model)));
  }
  return load_ngram(model, vocab);
}

struct GenerateArgs {
  std::string model, out;
  std::size_t count = 10000, max_length = 20;
  std::uint64_t seed = 0;
  bool text = false;
};

void generate(const GenerateArgs& a) {
  const auto lm = load_model_with_vocab(a.model);
  const auto c = lm.sample(a.count, a.max_length, a.seed);
  if (a.text) {
    std::ofstream out(a.out, std::ios::trunc);
    if (!out) throw IoError("cannot write " + a.out);
    for (const auto& s : c) {
      const auto words = decode(c.vocab(), s);
      for (std::size_t i = 0; i < words.size(); ++i) out << (i ? " " : "") << words[i];
      out << '\n';
    }
    if (!out) throw IoError("write failed: " + a.out);
  } else {
    save_corpus(c, a.out);
  }
  print(Json{{"command", "generate"},
             {"path", a.out},
             {"count", c.size()},
             {"max_length", a.max_length},
             {"seed", a.seed},
             {"format", a.text ? "text" : "ids"},
             {"model_fingerprint", lm.fingerprint()},
             {"corpus_fingerprint", c.fingerprint()}});
}

// --- metrics ---------------------------------------------------------------

struct BleuArgs {
  std::string hyp, ref, corpus, smoothing = "none", tokenization = "whitespace";
  std::size_t max_order = 4, sample = 0;
  std::uint64_t seed = 0;
};

BleuConfig bleu_config(const BleuArgs& a) {
  BleuConfig cfg;
  cfg.max_order = a.max_order;
  cfg.smoothing = parse_smoothing(a.smoothing);
  cfg.validate();
  return cfg;
}

void bleu_cmd(const BleuArgs& a) {
  const auto cfg = bleu_config(a);
  const auto policy = parse_tokenization_policy(a.tokenization);
  const auto hyp_text = read_text_corpus(a.hyp, policy);
  const auto ref_text = read_text_corpus(a.ref, policy);
  const auto vocab = union_vocab({hyp_text, ref_text});
  const auto r = corpus_bleu(encode_corpus(hyp_text, vocab, SplitTag::generated, policy),
                             encode_corpus(ref_text, vocab, SplitTag::test, policy), cfg);
  print(Json{{"metric", "bleu"},
             {"value", r.value},
             {"max_order", cfg.max_order},
             {"smoothing", to_string(cfg.smoothing)},
             {"hypotheses", r.hypotheses},
             {"empty_hypotheses", r.empty_hypotheses},
             {"references", ref_text.size()},
             {"config_fingerprint", cfg.fingerprint()}});
}

void self_bleu_cmd(const BleuArgs& a) {
  const auto cfg = bleu_config(a);
  const auto policy = parse_tokenization_policy(a.tokenization);
  const auto text = read_text_corpus(a.corpus, policy);
  const auto vocab = union_vocab({text});
  std::optional<std::size_t> sample;
  if (a.sample) sample = a.sample;
  const auto r = self_bleu(encode_corpus(text, vocab, SplitTag::generated, policy), cfg, sample, a.seed);
  Fingerprint fp;
  fp.add(cfg.fingerprint()).add(static_cast<std::uint64_t>(a.sample)).add(a.seed);
  print(Json{{"metric", "self-bleu"},
             {"value", r.value},
             {"max_order", cfg.max_order},
             {"smoothing", to_string(cfg.smoothing)},
             {"hypotheses", r.hypotheses},
             {"empty_hypotheses", r.empty_hypotheses},
             {"config_fingerprint", fp.hex()}});
}

struct EmbSimArgs {
  std::string real, gen, storage = "double", tokenization = "whitespace";
  SkipGramConfig sg;
};

void embsim_cmd(const EmbSimArgs& a) {
  a.sg.validate();
  const auto policy = parse_tokenization_policy(a.tokenization);
  const auto real_text = read_text_corpus(a.real, policy);
  const auto gen_text = read_text_corpus(a.gen, policy);
  const auto vocab = union_vocab({real_text, gen_text});
  const auto real = train_skipgram(encode_corpus(real_text, vocab, SplitTag::train, policy), a.sg);
  const auto gen = train_skipgram(encode_corpus(gen_text, vocab, SplitTag::generated, policy), a.sg);
  double value = 0.0;
  if (a.storage == "double") {
    value = embsim(similarity_matrix<double>(real), similarity_matrix<double>(gen));
  } else if (a.storage == "float") {
    value = embsim(similarity_matrix<float>(real), similarity_matrix<float>(gen));
  } else {
    throw ConfigError("--storage must be double or float");
  }
  Fingerprint fp;
  fp.add(a.sg.fingerprint()).add(a.storage);
  print(Json{{"metric", "embsim"},
             {"value", value},
             {"vocab_size", vocab->size()},
             {"storage", a.storage},
             {"config_fingerprint", fp.hex()},
             {"real_embedding_fingerprint", real.fingerprint()},
             {"gen_embedding_fingerprint", gen.fingerprint()}});
}

Json nll_json(const std::string& metric, const NllResult& r) {
  return Json{{"metric", metric},
              {"mean", r.mean},
              {"stderr", r.stderr_},
              {"count", r.count},
              {"per_token_mean", r.per_token_mean},
              {"fingerprints", {{"scorer", r.scorer_fingerprint}, {"corpus", r.corpus_fingerprint}}}};
}

struct NllArgs {
  std::string oracle, gen, model, logprobs, test, length_mode = "variable", tokenization = "whitespace";
};

void nll_oracle_cmd(const NllArgs& a) {
  const auto m = load_oracle(a.oracle);
  auto vocab = std::make_shared<const Vocabulary>(Vocabulary::synthetic(m.vocab_size()));
  print(nll_json("nll-oracle", nll_oracle(m, load_corpus(a.gen, vocab, SplitTag::generated, LengthMode::fixed))));
}

void nll_test_cmd(const NllArgs& a) {
  if (a.model.empty() == a.logprobs.empty()) throw ConfigError("give exactly one of --model or --logprobs");
  if (!a.logprobs.empty()) {
    const auto policy = parse_tokenization_policy(a.tokenization);
    const auto text = read_text_corpus(a.test, policy);
    const auto vocab = union_vocab({text});
    const auto encoded = encode_corpus(text, vocab, SplitTag::test, policy);
    const Corpus test(std::vector<Sentence>(encoded.sentences()), vocab, SplitTag::test,
                      parse_length_mode(a.length_mode));
    print(nll_json("nll-test", nll_test(read_logprob_file(a.logprobs), test, a.logprobs)));
    return;
  }
  const auto magic = peek_magic(a.model);
  if (magic == kOracleMagic) {
    auto m = std::make_shared<const OracleModel>(load_oracle(a.model));
    const OracleGenerator g(m);
    print(nll_json("nll-test", nll_test(g, load_corpus(a.test, g.vocab(), SplitTag::test, LengthMode::fixed))));
    return;
  }
  if (magic != kNGramMagic) throw IoError("unrecognized model file: " + a.model);
  const auto lm = load_model_with_vocab(a.model);
  std::optional<Corpus> test;
  if (fs::exists(vocab_path_for(a.model))) {
    // Text test file encoded with the training vocabulary.
    const auto text = read_text_corpus(a.test, parse_tokenization_policy(a.tokenization));
    std::vector<Sentence> ids;
    for (const auto& s : text) ids.push_back(encode(*lm.vocab(), s));
    test.emplace(std::move(ids), lm.vocab(), SplitTag::test, lm.length_mode());
  } else {
    test.emplace(load_corpus(a.test, lm.vocab(), SplitTag::test, lm.length_mode()));
  }
  print(nll_json("nll-test", nll_test(lm, *test)));
}

// --- validate --------------------------------------------------------------

void validate_cmd(const std::string& path, const std::string& tokenization) {
  const auto policy = parse_tokenization_policy(tokenization);
  const auto text = read_text_corpus(path, policy);
  const auto vocab = build_vocab(text, 1);
  std::size_t tokens = 0, longest = 0;
  for (const auto& s : text) {
    tokens += s.size();
    longest = std::max(longest, s.size());
  }
  print(Json{{"command", "validate"},
             {"path", path},
             {"valid", true},
             {"sentences", text.size()},
             {"tokens", tokens},
             {"longest_sentence", longest},
             {"vocab_size", vocab.size()}});
}

// --- experiment ------------------------------------------------------------

struct ExperimentArgs {
  std::string config, mode, out;
};

void experiment(const ExperimentArgs& a) {
  std::optional<ExperimentMode> mode;
  if (!a.mode.empty()) mode = parse_experiment_mode(a.mode);
  const auto cfg = load_config(a.config, mode);
  cfg.validate();
  fs::create_directories(a.out);
  const auto report = run_experiment(cfg);
  const fs::path json_path = fs::path(a.out) / "report.json";
  const fs::path csv_path = fs::path(a.out) / "report.csv";
  emit_report(report, json_path, ReportFormat::json);
  emit_report(report, csv_path, ReportFormat::csv);
  Json summary{{"command", "experiment"},
               {"mode", report.mode},
               {"config_fingerprint", report.config_fingerprint},
               {"report_json", json_path.string()},
               {"report_csv", csv_path.string()}};
  Json final_metrics = Json::object();
  for (const auto& m : report.final_checkpoint().metrics) final_metrics[m.name] = m.value;
  summary["final_checkpoint"] = final_metrics;
  print(summary);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"texeval: text-generation evaluation metrics and experiment harness"};
  app.require_subcommand(1);
  int threads = -1;
  app.add_option("--threads", threads, "Worker threads (default: TEXEVAL_THREADS or 1)");

  auto* oracle = app.add_subcommand("oracle", "Random LSTM oracle");
  oracle->require_subcommand(1);
  OracleGenArgs og;
  auto* gen_cmd = oracle->add_subcommand("gen", "Initialize and save an oracle");
  gen_cmd->add_option("--out", og.out, "Output parameter file")->required();
  gen_cmd->add_option("--vocab", og.vocab, "Vocabulary size")->capture_default_str();
  gen_cmd->add_option("--embed", og.embed, "Embedding size")->capture_default_str();
  gen_cmd->add_option("--hidden", og.hidden, "Hidden size")->capture_default_str();
  gen_cmd->add_option("--seed", og.seed, "Initialization seed")->required();
  OracleSampleArgs os;
  auto* sample_cmd = oracle->add_subcommand("sample", "Sample a token-id corpus from an oracle");
  sample_cmd->add_option("--oracle", os.oracle, "Oracle parameter file")->required()->check(CLI::ExistingFile);
  sample_cmd->add_option("--out", os.out, "Output corpus file")->required();
  sample_cmd->add_option("--count", os.count, "Sentences")->capture_default_str();
  sample_cmd->add_option("--length", os.length, "Tokens per sentence")->capture_default_str();
  sample_cmd->add_option("--seed", os.seed, "Sampling seed")->required();

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train the n-gram baseline");
  train_cmd->add_option("--train", ta.train, "Training corpus")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", ta.out, "Output model file (vocabulary saved as <out>.vocab)")->required();
  train_cmd->add_option("--order", ta.order, "n-gram order")->capture_default_str();
  train_cmd->add_option("--delta", ta.delta, "Additive smoothing constant")->capture_default_str();
  train_cmd->add_option("--input-format", ta.input_format, "text or ids")->capture_default_str();
  train_cmd->add_option("--vocab", ta.vocab_file, "Existing vocabulary file");
  train_cmd->add_option("--vocab-size", ta.vocab_size, "Synthetic vocabulary size for id corpora");
  train_cmd->add_option("--length-mode", ta.length_mode, "fixed or variable (default: fixed for ids, variable for text)");
  train_cmd->add_option("--tokenization", ta.tokenization, "whitespace or whitespace_lowercase")->capture_default_str();

  GenerateArgs ga;
  auto* generate_cmd = app.add_subcommand("generate", "Sample from a trained n-gram model");
  generate_cmd->add_option("--model", ga.model, "Model file")->required()->check(CLI::ExistingFile);
  generate_cmd->add_option("--out", ga.out, "Output corpus file")->required();
  generate_cmd->add_option("--count", ga.count, "Sentences")->capture_default_str();
  generate_cmd->add_option("--max-length", ga.max_length, "Maximum tokens per sentence")->capture_default_str();
  generate_cmd->add_option("--seed", ga.seed, "Sampling seed")->required();
  generate_cmd->add_flag("--text", ga.text, "Write tokens instead of ids");

  BleuArgs ba;
  auto* bleu = app.add_subcommand("bleu", "Corpus BLEU of hypotheses against references");
  bleu->add_option("--hyp", ba.hyp, "Hypothesis corpus")->required()->check(CLI::ExistingFile);
  bleu->add_option("--ref", ba.ref, "Reference corpus")->required()->check(CLI::ExistingFile);
  bleu->add_option("--max-order", ba.max_order, "Highest n-gram order")->required();
  bleu->add_option("--smoothing", ba.smoothing, "none or epsilon")->capture_default_str();
  bleu->add_option("--tokenization", ba.tokenization, "whitespace or whitespace_lowercase")->capture_default_str();
  BleuArgs sba;
  auto* self = app.add_subcommand("self-bleu", "Self-BLEU of a corpus");
  self->add_option("--corpus", sba.corpus, "Corpus")->required()->check(CLI::ExistingFile);
  self->add_option("--max-order", sba.max_order, "Highest n-gram order")->required();
  self->add_option("--smoothing", sba.smoothing, "none or epsilon")->capture_default_str();
  self->add_option("--sample", sba.sample, "Hypotheses to sample (0 = all)")->capture_default_str();
  self->add_option("--seed", sba.seed, "Sampling seed")->capture_default_str();
  self->add_option("--tokenization", sba.tokenization, "whitespace or whitespace_lowercase")->capture_default_str();

  EmbSimArgs ea;
  auto* emb = app.add_subcommand("embsim", "EmbSim between a real and a generated corpus");
  emb->add_option("--real", ea.real, "Real corpus")->required()->check(CLI::ExistingFile);
  emb->add_option("--gen", ea.gen, "Generated corpus")->required()->check(CLI::ExistingFile);
  emb->add_option("--dim", ea.sg.dim, "Embedding size")->capture_default_str();
  emb->add_option("--window", ea.sg.window, "Context window")->capture_default_str();
  emb->add_option("--neg", ea.sg.negatives, "Negative samples per pair")->capture_default_str();
  emb->add_option("--epochs", ea.sg.epochs, "Training epochs")->capture_default_str();
  emb->add_option("--lr", ea.sg.lr, "Initial learning rate")->capture_default_str();
  emb->add_option("--seed", ea.sg.seed, "Training seed")->required();
  emb->add_option("--storage", ea.storage, "double or float")->capture_default_str();
  emb->add_option("--tokenization", ea.tokenization, "whitespace or whitespace_lowercase")->capture_default_str();

  NllArgs na;
  auto* nllo = app.add_subcommand("nll-oracle", "NLL of a generated id corpus under an oracle");
  nllo->add_option("--oracle", na.oracle, "Oracle parameter file")->required()->check(CLI::ExistingFile);
  nllo->add_option("--gen", na.gen, "Generated token-id corpus")->required()->check(CLI::ExistingFile);
  NllArgs nt;
  auto* nllt = app.add_subcommand("nll-test", "NLL of a test corpus under a model or log-prob file");
  nllt->add_option("--model", nt.model, "n-gram or oracle model file")->check(CLI::ExistingFile);
  nllt->add_option("--logprobs", nt.logprobs, "Per-token log-prob file")->check(CLI::ExistingFile);
  nllt->add_option("--test", nt.test, "Test corpus")->required()->check(CLI::ExistingFile);
  nllt->add_option("--length-mode", nt.length_mode, "With --logprobs: fixed or variable")->capture_default_str();
  nllt->add_option("--tokenization", nt.tokenization, "whitespace or whitespace_lowercase")->capture_default_str();

  std::string validate_path, validate_tok = "whitespace_lowercase";
  auto* val = app.add_subcommand("validate", "Check a one-sentence-per-line UTF-8 text corpus");
  val->add_option("--corpus", validate_path, "Text corpus")->required()->check(CLI::ExistingFile);
  val->add_option("--tokenization", validate_tok, "whitespace or whitespace_lowercase")->capture_default_str();

  ExperimentArgs xa;
  auto* exp = app.add_subcommand("experiment", "Run a configured experiment");
  exp->add_option("--config", xa.config, "INI config file")->required()->check(CLI::ExistingFile);
  exp->add_option("--mode", xa.mode, "Override data.mode: synthetic or real");
  exp->add_option("--out", xa.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (threads >= 0) set_thread_count(threads);
    if (*gen_cmd) oracle_gen(og);
    else if (*sample_cmd) oracle_sample(os);
    else if (*train_cmd) train(ta);
    else if (*generate_cmd) generate(ga);
    else if (*bleu) bleu_cmd(ba);
    else if (*self) self_bleu_cmd(sba);
    else if (*emb) embsim_cmd(ea);
    else if (*nllo) nll_oracle_cmd(na);
    else if (*nllt) nll_test_cmd(nt);
    else if (*exp) experiment(xa);
    else if (*val) validate_cmd(validate_path, validate_tok);
  } catch (const ConfigError& e) {
    std::cerr << "texeval: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "texeval: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
