#include "texeval/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace texeval {

namespace detail {

inline std::uint64_t parse_u64(const std::string& key, const std::string& s) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + s + "'");
  }
  return v;
}

inline double parse_real(const std::string& key, const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ConfigError(key + ": expected a finite number, got '" + s + "'");
  }
  return v;
}

/// Drops an inline "; comment" and surrounding blanks.
inline std::string strip_value(const std::string& raw) {
  std::string v = raw;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] == ';' && (i == 0 || v[i - 1] == ' ' || v[i - 1] == '\t')) {
      v.resize(i);
      break;
    }
  }
  const auto b = v.find_first_not_of(" \t");
  const auto e = v.find_last_not_of(" \t");
  return b == std::string::npos ? "" : v.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    out.push_back(b == std::string::npos ? "" : item.substr(b, e - b + 1));
  }
  return out;
}

template <typename T, typename F>
std::string join(const std::vector<T>& xs, F&& fmt) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + fmt(xs[i]);
  return out;
}

inline std::string seed_string(const std::optional<std::uint64_t>& s) {
  return s ? std::to_string(*s) : "";
}

}  // namespace detail

std::map<std::string, std::string> ExperimentConfig::entries() const {
  auto num = [](std::size_t v) { return std::to_string(v); };
  return {
      {"data.mode", to_string(mode)},
      {"data.corpus", data.corpus},
      {"data.tokenization", to_string(data.tokenization)},
      {"data.max_sentences", num(data.max_sentences)},
      {"data.split_ratio", format_double(data.split_ratio)},
      {"data.split_seed", detail::seed_string(data.split_seed)},
      {"oracle.file", oracle.file},
      {"oracle.vocab", num(oracle.shape.vocab)},
      {"oracle.embed", num(oracle.shape.embed)},
      {"oracle.hidden", num(oracle.shape.hidden)},
      {"oracle.seed", detail::seed_string(oracle.seed)},
      {"oracle.sample_seed", detail::seed_string(oracle.sample_seed)},
      {"oracle.length", num(oracle.length)},
      {"oracle.train_sentences", num(oracle.train_sentences)},
      {"oracle.test_sentences", num(oracle.test_sentences)},
      {"generator.order", num(effective_order())},
      {"generator.delta", format_double(generator.delta)},
      {"generator.seed", detail::seed_string(generator.seed)},
      {"generator.sentences", num(generator.sentences)},
      {"generator.max_length", num(generator.max_length)},
      {"metrics.bleu_orders", detail::join(metrics.bleu_orders, num)},
      {"metrics.smoothing", to_string(metrics.smoothing)},
      {"metrics.self_bleu_sample", num(metrics.self_bleu_sample)},
      {"metrics.embsim_dim", num(metrics.skipgram.dim)},
      {"metrics.embsim_window", num(metrics.skipgram.window)},
      {"metrics.embsim_negatives", num(metrics.skipgram.negatives)},
      {"metrics.embsim_epochs", num(metrics.skipgram.epochs)},
      {"metrics.embsim_lr", format_double(metrics.skipgram.lr)},
      {"metrics.embsim_storage", metrics.storage == SimilarityStorage::f64 ? "double" : "float"},
      {"metrics.seed", detail::seed_string(metrics.seed)},
      {"schedule.checkpoints",
       detail::join(schedule.checkpoints, [](double v) { return format_double(v); })},
  };
}

void ExperimentConfig::validate() const {
  auto require_seed = [](const std::optional<std::uint64_t>& s, const char* key) {
    if (!s) throw ConfigError(std::string("missing required seed ") + key);
  };
  require_seed(generator.seed, "generator.seed");
  if (mode == ExperimentMode::synthetic) {
    require_seed(oracle.seed, "oracle.seed");
    require_seed(oracle.sample_seed, "oracle.sample_seed");
    if (oracle.shape.vocab < 2 || oracle.shape.embed < 1 || oracle.shape.hidden < 1) {
      throw ConfigError("oracle shape needs vocab >= 2, embed >= 1, hidden >= 1");
    }
    if (oracle.length < 1 || oracle.train_sentences < 1 || oracle.test_sentences < 1) {
      throw ConfigError("oracle.length, train_sentences and test_sentences must be >= 1");
    }
    if (!oracle.file.empty() && !std::filesystem::is_regular_file(resolve(oracle.file))) {
      throw ConfigError("oracle.file not found: " + resolve(oracle.file).string());
    }
  } else {
    require_seed(data.split_seed, "data.split_seed");
    require_seed(metrics.seed, "metrics.seed");
    if (data.corpus.empty()) throw ConfigError("data.corpus is required in real mode");
    if (!std::filesystem::is_regular_file(resolve(data.corpus))) {
      throw ConfigError("data.corpus not found: " + resolve(data.corpus).string());
    }
    if (!(data.split_ratio > 0.0 && data.split_ratio < 1.0)) {
      throw ConfigError("data.split_ratio must lie strictly between 0 and 1");
    }
    if (metrics.bleu_orders.empty()) throw ConfigError("metrics.bleu_orders must not be empty");
    for (std::size_t n : metrics.bleu_orders) {
      if (n < 1 || n > kMaxBleuOrder) throw ConfigError("metrics.bleu_orders entries must lie in [1, 5]");
    }
    metrics.skipgram.validate();
  }
  if (!(generator.delta > 0.0)) throw ConfigError("generator.delta must be > 0");
  if (schedule.checkpoints.empty()) throw ConfigError("schedule.checkpoints must not be empty");
  for (std::size_t i = 0; i < schedule.checkpoints.size(); ++i) {
    const double f = schedule.checkpoints[i];
    if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("checkpoint fractions must lie in [0, 1]");
    if (i && !(f > schedule.checkpoints[i - 1])) {
      throw ConfigError("checkpoint fractions must be strictly increasing");
    }
  }
}

ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& base_dir,
                              std::optional<ExperimentMode> mode_override) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
  }
  ExperimentConfig c;
  c.base_dir = base_dir;
  for (const auto& [section, keys] : tree) {
    if (keys.empty() && !keys.data().empty()) {
      throw ConfigError("key '" + section + "' must belong to a section");
    }
    for (const auto& [key, node] : keys) {
      const std::string name = section + "." + key;
      const std::string v = detail::strip_value(node.get_value<std::string>());
      auto u64 = [&] { return detail::parse_u64(name, v); };
      auto real = [&] { return detail::parse_real(name, v); };
      if (name == "data.mode") c.mode = parse_experiment_mode(v);
      else if (name == "data.corpus") c.data.corpus = v;
      else if (name == "data.tokenization") c.data.tokenization = parse_tokenization_policy(v);
      else if (name == "data.max_sentences") c.data.max_sentences = u64();
      else if (name == "data.split_ratio") c.data.split_ratio = real();
      else if (name == "data.split_seed") c.data.split_seed = u64();
      else if (name == "oracle.file") c.oracle.file = v;
      else if (name == "oracle.vocab") c.oracle.shape.vocab = u64();
      else if (name == "oracle.embed") c.oracle.shape.embed = u64();
      else if (name == "oracle.hidden") c.oracle.shape.hidden = u64();
      else if (name == "oracle.seed") c.oracle.seed = u64();
      else if (name == "oracle.sample_seed") c.oracle.sample_seed = u64();
      else if (name == "oracle.length") c.oracle.length = u64();
      else if (name == "oracle.train_sentences") c.oracle.train_sentences = u64();
      else if (name == "oracle.test_sentences") c.oracle.test_sentences = u64();
      else if (name == "generator.order") c.generator.order = u64();
      else if (name == "generator.delta") c.generator.delta = real();
      else if (name == "generator.seed") c.generator.seed = u64();
      else if (name == "generator.sentences") c.generator.sentences = u64();
      else if (name == "generator.max_length") c.generator.max_length = u64();
      else if (name == "metrics.bleu_orders") {
        c.metrics.bleu_orders.clear();
        for (const auto& item : detail::split_list(v)) {
          c.metrics.bleu_orders.push_back(detail::parse_u64(name, item));
        }
      } else if (name == "metrics.smoothing") c.metrics.smoothing = parse_smoothing(v);
      else if (name == "metrics.self_bleu_sample") c.metrics.self_bleu_sample = u64();
      else if (name == "metrics.embsim_dim") c.metrics.skipgram.dim = u64();
      else if (name == "metrics.embsim_window") c.metrics.skipgram.window = u64();
      else if (name == "metrics.embsim_negatives") c.metrics.skipgram.negatives = u64();
      else if (name == "metrics.embsim_epochs") c.metrics.skipgram.epochs = u64();
      else if (name == "metrics.embsim_lr") c.metrics.skipgram.lr = real();
      else if (name == "metrics.embsim_storage") {
        if (v == "double") c.metrics.storage = SimilarityStorage::f64;
        else if (v == "float") c.metrics.storage = SimilarityStorage::f32;
        else throw ConfigError(name + ": expected double or float, got '" + v + "'");
      } else if (name == "metrics.seed") c.metrics.seed = u64();
      else if (name == "schedule.checkpoints") {
        c.schedule.checkpoints.clear();
        for (const auto& item : detail::split_list(v)) {
          c.schedule.checkpoints.push_back(detail::parse_real(name, item));
        }
      } else {
        throw ConfigError("unknown config key '" + name + "'");
      }
    }
  }
  if (mode_override) c.mode = *mode_override;
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, std::optional<ExperimentMode> mode_override) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  auto c = parse_config(in, path.parent_path().empty() ? "." : path.parent_path(), mode_override);
  return c;
}

}  // namespace texeval
