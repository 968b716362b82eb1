#include <cmath>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "texeval/texeval.hpp"

namespace texeval {
namespace {

using testing::TempDir;
namespace fs = std::filesystem;

const fs::path kSampleCorpus = fs::path(TEXEVAL_SOURCE_DIR) / "data" / "sample_captions.txt";

ExperimentConfig parse(const std::string& text, const fs::path& base = ".",
                       std::optional<ExperimentMode> mode = std::nullopt) {
  std::istringstream in(text);
  return parse_config(in, base, mode);
}

ExperimentConfig small_synthetic() {
  auto c = parse(R"(
[data]
mode = synthetic
[oracle]
vocab = 40
embed = 8
hidden = 8
seed = 7
sample_seed = 8
length = 8
train_sentences = 300
test_sentences = 200
[generator]
seed = 9
[schedule]
checkpoints = 0, 0.5, 1
)");
  c.validate();
  return c;
}

ExperimentConfig small_real() {
  ExperimentConfig c;
  c.mode = ExperimentMode::real;
  c.data.corpus = kSampleCorpus.string();
  c.data.max_sentences = 600;
  c.data.split_seed = 21;
  c.generator.seed = 22;
  c.metrics.seed = 23;
  c.metrics.bleu_orders = {2, 4};
  c.metrics.skipgram.dim = 8;
  c.metrics.skipgram.epochs = 2;
  c.schedule.checkpoints = {0.0, 1.0};
  c.validate();
  return c;
}

// --- config ----------------------------------------------------------------

TEST(Config, DefaultsMatchExperimentConstants) {
  const auto c = parse("[data]\nmode = synthetic\n");
  EXPECT_EQ(c.oracle.shape.vocab, 5000u);
  EXPECT_EQ(c.oracle.shape.embed, 32u);
  EXPECT_EQ(c.oracle.shape.hidden, 32u);
  EXPECT_EQ(c.oracle.length, 20u);
  EXPECT_EQ(c.oracle.train_sentences, 10000u);
  EXPECT_EQ(c.data.max_sentences, 20000u);
  EXPECT_DOUBLE_EQ(c.data.split_ratio, 0.5);
  EXPECT_EQ(c.effective_order(), 2u);
  EXPECT_EQ(parse("[data]\nmode = real\n").effective_order(), 3u);
}

TEST(Config, InlineCommentsAreStripped) {
  const auto c = parse("[generator]\nseed = 5     ; required\norder = 4 ; n\n");
  EXPECT_EQ(c.generator.seed.value(), 5u);
  EXPECT_EQ(c.generator.order, 4u);
}

TEST(Config, MissingSeedsAreRejected) {
  EXPECT_THROW(parse("[data]\nmode = synthetic\n[oracle]\nseed = 1\nsample_seed = 2\n").validate(),
               ConfigError);
  EXPECT_THROW(parse("[data]\nmode = synthetic\n[generator]\nseed = 1\n[oracle]\nseed = 1\n").validate(),
               ConfigError);
  auto real = small_real();
  real.metrics.seed.reset();
  EXPECT_THROW(real.validate(), ConfigError);
  real = small_real();
  real.data.split_seed.reset();
  EXPECT_THROW(real.validate(), ConfigError);
}

TEST(Config, UnresolvablePathsAreRejected) {
  auto real = small_real();
  real.data.corpus = "no/such/file.txt";
  EXPECT_THROW(real.validate(), ConfigError);
  auto syn = small_synthetic();
  syn.oracle.file = "missing.bin";
  EXPECT_THROW(syn.validate(), ConfigError);
}

TEST(Config, RelativePathsResolveAgainstConfigDirectory) {
  TempDir dir;
  fs::create_directories(dir / "sub");
  fs::copy_file(kSampleCorpus, dir / "corpus.txt");
  {
    std::ofstream out(dir / "sub" / "run.ini");
    out << "[data]\nmode = real\ncorpus = ../corpus.txt\nsplit_seed = 1\n"
        << "[generator]\nseed = 2\n[metrics]\nseed = 3\n";
  }
  const auto c = load_config(dir / "sub" / "run.ini");
  EXPECT_NO_THROW(c.validate());
  EXPECT_TRUE(fs::equivalent(c.resolve(c.data.corpus), dir / "corpus.txt"));
}

TEST(Config, UnknownKeysAndBadValuesAreRejected) {
  EXPECT_THROW(parse("[data]\nmodee = real\n"), ConfigError);
  EXPECT_THROW(parse("[extra]\nx = 1\n"), ConfigError);
  EXPECT_THROW(parse("[generator]\nseed = -1\n"), ConfigError);
  EXPECT_THROW(parse("[generator]\ndelta = abc\n"), ConfigError);
  EXPECT_THROW(parse("[data]\nmode = both\n"), ConfigError);
  EXPECT_THROW(parse("[metrics]\nembsim_storage = half\n"), ConfigError);
  auto c = small_synthetic();
  c.schedule.checkpoints = {0.5, 0.1};
  EXPECT_THROW(c.validate(), ConfigError);
  c.schedule.checkpoints = {0.0, 1.5};
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, ModeOverrideWins) {
  const auto c = parse("[data]\nmode = synthetic\n", ".", ExperimentMode::real);
  EXPECT_EQ(c.mode, ExperimentMode::real);
}

TEST(Config, FingerprintTracksSettingsButNotPaths) {
  auto a = small_real();
  auto b = a;
  EXPECT_EQ(a.fingerprint(), b.fingerprint());
  b.data.corpus = "/elsewhere/" + kSampleCorpus.filename().string();
  EXPECT_EQ(a.fingerprint(), b.fingerprint());
  b.generator.delta = 0.02;
  EXPECT_NE(a.fingerprint(), b.fingerprint());
}

// --- report ----------------------------------------------------------------

TEST(Report, JsonRoundTripIsStructurallyEqual) {
  const auto r = run_synthetic(small_synthetic());
  TempDir dir;
  emit_report(r, dir / "r.json", ReportFormat::json);
  EXPECT_EQ(read_report(dir / "r.json"), r);
}

TEST(Report, CsvHasOneFiniteRowPerCheckpointMetric) {
  const auto r = run_real(small_real());
  TempDir dir;
  emit_report(r, dir / "r.csv", ReportFormat::csv);
  std::ifstream in(dir / "r.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "checkpoint,fraction,metric,value,config_fingerprint");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
    ASSERT_EQ(f.size(), 5u) << line;
    EXPECT_TRUE(std::isfinite(std::stod(f[1])));
    EXPECT_TRUE(std::isfinite(std::stod(f[3]))) << line;
    EXPECT_FALSE(f[4].empty());
  }
  // 2 orders x (train, test, self) + embsim + nll_test per checkpoint.
  const std::size_t per_checkpoint = 2 * 3 + 2;
  EXPECT_EQ(r.checkpoints.front().metrics.size(), per_checkpoint);
  EXPECT_EQ(rows, r.checkpoints.size() * per_checkpoint);
}

TEST(Report, MissingFingerprintFailsValidation) {
  const auto r = run_synthetic(small_synthetic());
  auto j = nlohmann::json(r);
  j["checkpoints"][0]["metrics"][0].erase("config_fingerprint");
  EXPECT_THROW(j.get<MetricReport>(), ValidityError);
  j = nlohmann::json(r);
  j["checkpoints"][0]["metrics"][0]["config_fingerprint"] = "";
  EXPECT_THROW(j.get<MetricReport>(), ValidityError);
}

TEST(Report, EveryValueCarriesAFingerprint) {
  const auto r = run_real(small_real());
  for (const auto& c : r.checkpoints) {
    for (const auto& m : c.metrics) EXPECT_FALSE(m.config_fingerprint.empty()) << m.name;
  }
  for (const auto& m : r.references) EXPECT_FALSE(m.config_fingerprint.empty()) << m.name;
}

TEST(Report, UnwritablePathIsAnIoError) {
  const auto r = run_synthetic(small_synthetic());
  EXPECT_THROW(emit_report(r, "/nonexistent-dir/x/r.json", ReportFormat::json), IoError);
}

// --- synthetic pipeline ----------------------------------------------------

TEST(Synthetic, RecordsNllAtEveryCheckpoint) {
  const auto r = run_synthetic(small_synthetic());
  ASSERT_EQ(r.checkpoints.size(), 3u);
  EXPECT_EQ(r.checkpoints[0].generator, "uniform");
  EXPECT_EQ(r.checkpoints[0].train_sentences, 0u);
  EXPECT_EQ(r.checkpoints[1].train_sentences, 150u);
  EXPECT_EQ(r.checkpoints[2].train_sentences, 300u);
  EXPECT_EQ(r.checkpoints[2].generator, "ngram-mle-2");
  for (const auto& c : r.checkpoints) {
    ASSERT_EQ(c.metrics.size(), 2u);
    EXPECT_EQ(c.generated_sentences, 200u);
    for (const auto& m : c.metrics) {
      EXPECT_TRUE(std::isfinite(m.value));
      EXPECT_GE(m.value, 0.0);
    }
  }
  // Uniform NLL-test on fixed length-8 sentences is exactly 8 ln 40.
  EXPECT_NEAR(find_metric(r.checkpoints[0].metrics, "nll_test").value, 8 * std::log(40.0), 1e-9);
  EXPECT_EQ(r.data["train_sentences"], 300);
  EXPECT_EQ(r.data["test_sentences"], 200);
  EXPECT_EQ(r.data["vocab_size"], 40);
}

TEST(Synthetic, TrainedCheckpointBeatsUniform) {
  const auto r = run_synthetic(small_synthetic());
  for (const char* m : {"nll_oracle", "nll_test"}) {
    EXPECT_LT(find_metric(r.final_checkpoint().metrics, m).value,
              find_metric(r.checkpoints.front().metrics, m).value)
        << m;
  }
}

TEST(Synthetic, SavedOracleFileGivesTheSameReport) {
  TempDir dir;
  auto c = small_synthetic();
  save_oracle(init_oracle(*c.oracle.seed, c.oracle.shape), dir / "o.bin");
  const auto direct = run_synthetic(c);
  c.oracle.file = (dir / "o.bin").string();
  const auto loaded = run_synthetic(c);
  EXPECT_EQ(loaded.checkpoints, direct.checkpoints);
  EXPECT_EQ(loaded.data, direct.data);
  EXPECT_EQ(loaded.config_fingerprint, direct.config_fingerprint);
  c.oracle.shape.hidden = 9;
  EXPECT_THROW(run_synthetic(c), ConfigError);
}

TEST(Synthetic, DeterministicAcrossRunsAndThreads) {
  const auto c = small_synthetic();
  set_thread_count(1);
  const auto a = metrics_json(run_synthetic(c)).dump();
  const auto b = metrics_json(run_synthetic(c)).dump();
  set_thread_count(4);
  const auto d = metrics_json(run_synthetic(c)).dump();
  set_thread_count(0);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, d);
}

TEST(Synthetic, WrongModeIsRejected) {
  EXPECT_THROW(run_synthetic(small_real()), ConfigError);
  EXPECT_THROW(run_real(small_synthetic()), ConfigError);
}

// --- real pipeline ---------------------------------------------------------

TEST(Real, SplitsHalfAndHalf) {
  TempDir dir;
  {
    std::ofstream out(dir / "big.txt");
    for (int i = 0; i < 20000; ++i) out << "w" << (i % 97) << " w" << (i % 13) << " w" << (i % 7) << '\n';
  }
  auto c = small_real();
  c.data.corpus = (dir / "big.txt").string();
  c.data.max_sentences = 20000;
  c.schedule.checkpoints = {1.0};
  c.metrics.bleu_orders = {2};
  c.generator.sentences = 50;
  const auto r = run_real(c);
  EXPECT_EQ(r.data["corpus_sentences"], 20000);
  EXPECT_EQ(r.data["train_sentences"], 10000);
  EXPECT_EQ(r.data["test_sentences"], 10000);
}

TEST(Real, MaxSentencesTruncates) {
  const auto r = run_real(small_real());
  EXPECT_EQ(r.data["corpus_sentences"], 600);
  EXPECT_EQ(r.data["train_sentences"], 300);
  EXPECT_EQ(r.data["generated_sentences"], 300);
}

TEST(Real, DegenerateSelfBleuIsOne) {
  const auto r = run_real(small_real());
  for (std::size_t n : {2u, 4u}) {
    const auto& deg = find_metric(r.references, "self_bleu" + std::to_string(n) + "_degenerate");
    const auto& data = find_metric(r.references, "self_bleu" + std::to_string(n) + "_train_data");
    EXPECT_EQ(deg.value, 1.0);
    EXPECT_LT(data.value, deg.value);
  }
}

TEST(Real, TrainedModelImprovesOverUniform) {
  const auto r = run_real(small_real());
  const auto& first = r.checkpoints.front().metrics;
  const auto& last = r.final_checkpoint().metrics;
  EXPECT_GT(find_metric(last, "bleu2_test").value, find_metric(first, "bleu2_test").value);
  EXPECT_LT(find_metric(last, "nll_test").value, find_metric(first, "nll_test").value);
  EXPECT_LE(find_metric(last, "embsim").value, 0.0);
}

TEST(Real, FloatStorageStaysClose) {
  auto c = small_real();
  const auto d = run_real(c);
  c.metrics.storage = SimilarityStorage::f32;
  const auto f = run_real(c);
  EXPECT_NEAR(find_metric(d.final_checkpoint().metrics, "embsim").value,
              find_metric(f.final_checkpoint().metrics, "embsim").value, 1e-5);
}

TEST(Real, DeterministicAcrossRunsAndThreads) {
  const auto c = small_real();
  set_thread_count(1);
  const auto a = metrics_json(run_real(c)).dump();
  const auto b = metrics_json(run_real(c)).dump();
  set_thread_count(4);
  const auto d = metrics_json(run_real(c)).dump();
  set_thread_count(0);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, d);
}

}  // namespace
}  // namespace texeval
