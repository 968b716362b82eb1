#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "texeval/error.hpp"
#include "texeval/numeric.hpp"
#include "texeval/random.hpp"

namespace texeval {

using TokenId = std::uint32_t;
using Sentence = std::vector<TokenId>;

enum class TokenizationPolicy { whitespace, whitespace_lowercase };

inline std::string to_string(TokenizationPolicy p) {
  return p == TokenizationPolicy::whitespace ? "whitespace" : "whitespace+lowercase";
}

inline TokenizationPolicy parse_tokenization_policy(std::string_view s) {
  if (s == "whitespace") return TokenizationPolicy::whitespace;
  if (s == "whitespace+lowercase" || s == "whitespace_lowercase" || s == "lowercase") {
    return TokenizationPolicy::whitespace_lowercase;
  }
  throw ConfigError("unknown tokenization policy '" + std::string(s) + "'");
}

/// Splits on ASCII whitespace. Lowercasing touches ASCII letters only, so
/// multi-byte UTF-8 sequences pass through unchanged.
inline std::vector<std::string> tokenize(std::string_view line,
                                         TokenizationPolicy policy) {
  auto is_space = [](unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
  };
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !is_space(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) {
      std::string tok(line.substr(i, j - i));
      if (policy == TokenizationPolicy::whitespace_lowercase) {
        for (char& c : tok) {
          if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        }
      }
      out.push_back(std::move(tok));
    }
    i = j;
  }
  return out;
}

// ---------------------------------------------------------------------------

/// Bijection between surface tokens and dense ids in [0, size()). Ids 0 and 1
/// are always the START and END markers.
class Vocabulary {
 public:
  static constexpr TokenId kStart = 0;
  static constexpr TokenId kEnd = 1;
  static constexpr std::string_view kStartToken = "<s>";
  static constexpr std::string_view kEndToken = "</s>";

  /// `tokens[0]` and `tokens[1]` are taken as START and END.
  explicit Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    if (tokens_.size() < 2) {
      throw ConfigError("vocabulary needs at least the START and END markers");
    }
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      const auto& t = tokens_[i];
      if (t.empty()) throw ConfigError("empty token at id " + std::to_string(i));
      if (!ids_.emplace(t, static_cast<TokenId>(i)).second) {
        throw ConfigError("duplicate token '" + t + "' in vocabulary");
      }
    }
  }

  /// Vocabulary of size n whose non-reserved tokens are their own decimal ids.
  static Vocabulary synthetic(std::size_t n) {
    if (n < 2) throw ConfigError("synthetic vocabulary size must be >= 2");
    std::vector<std::string> tokens{std::string(kStartToken), std::string(kEndToken)};
    for (std::size_t i = 2; i < n; ++i) tokens.push_back(std::to_string(i));
    return Vocabulary(std::move(tokens));
  }

  std::size_t size() const { return tokens_.size(); }
  TokenId start_id() const { return kStart; }
  TokenId end_id() const { return kEnd; }

  bool contains(std::string_view token) const {
    return ids_.find(std::string(token)) != ids_.end();
  }

  TokenId id(std::string_view token) const {
    auto it = ids_.find(std::string(token));
    if (it == ids_.end()) throw OovError(std::string(token));
    return it->second;
  }

  const std::string& token(TokenId id) const {
    if (id >= tokens_.size()) {
      throw RangeError("token id " + std::to_string(id) + " out of range for vocabulary of size " +
                       std::to_string(tokens_.size()));
    }
    return tokens_[id];
  }

  const std::vector<std::string>& tokens() const { return tokens_; }

  std::string fingerprint() const {
    Fingerprint fp;
    for (const auto& t : tokens_) fp.add(t);
    return fp.hex();
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

using VocabularyPtr = std::shared_ptr<const Vocabulary>;

/// Frequency-descending ids after the two markers; ties broken
/// lexicographically on the token bytes.
inline Vocabulary build_vocab(const std::vector<std::vector<std::string>>& source,
                              std::size_t min_count = 1) {
  if (source.empty()) throw InputError("cannot build a vocabulary from an empty source");
  std::map<std::string, std::size_t> counts;
  for (const auto& sentence : source) {
    for (const auto& tok : sentence) ++counts[tok];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [tok, c] : counts) {
    if (c >= min_count && tok != Vocabulary::kStartToken && tok != Vocabulary::kEndToken) {
      ranked.emplace_back(tok, c);
    }
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens{std::string(Vocabulary::kStartToken),
                                  std::string(Vocabulary::kEndToken)};
  for (auto& [tok, c] : ranked) tokens.push_back(tok);
  return Vocabulary(std::move(tokens));
}

inline Sentence encode(const Vocabulary& vocab, const std::vector<std::string>& tokens) {
  Sentence out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(vocab.id(t));
  return out;
}

inline std::vector<std::string> decode(const Vocabulary& vocab, std::span<const TokenId> ids) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (TokenId id : ids) out.push_back(vocab.token(id));
  return out;
}

// ---------------------------------------------------------------------------

enum class SplitTag { train, test, generated, oracle };

inline std::string to_string(SplitTag t) {
  switch (t) {
    case SplitTag::train: return "train";
    case SplitTag::test: return "test";
    case SplitTag::generated: return "generated";
    case SplitTag::oracle: return "oracle";
  }
  return "unknown";
}

/// Fixed-length corpora (synthetic protocol) have no END transition;
/// variable-length corpora end every sentence with an implicit END.
enum class LengthMode { fixed, variable };

inline std::string to_string(LengthMode m) {
  return m == LengthMode::fixed ? "fixed" : "variable";
}

inline LengthMode parse_length_mode(std::string_view s) {
  if (s == "fixed") return LengthMode::fixed;
  if (s == "variable") return LengthMode::variable;
  throw ConfigError("unknown length mode '" + std::string(s) + "'");
}

/// Immutable ordered collection of id sequences over a shared vocabulary.
class Corpus {
 public:
  Corpus(std::vector<Sentence> sentences, VocabularyPtr vocab, SplitTag tag,
         LengthMode mode = LengthMode::variable, std::string policy = "ids")
      : sentences_(std::move(sentences)),
        vocab_(std::move(vocab)),
        tag_(tag),
        mode_(mode),
        policy_(std::move(policy)) {
    if (!vocab_) throw ConfigError("corpus requires a vocabulary");
    const auto n = vocab_->size();
    for (std::size_t s = 0; s < sentences_.size(); ++s) {
      for (TokenId id : sentences_[s]) {
        if (id >= n) {
          throw RangeError("sentence " + std::to_string(s) + ": id " + std::to_string(id) +
                           " >= vocabulary size " + std::to_string(n));
        }
      }
    }
  }

  const std::vector<Sentence>& sentences() const { return sentences_; }
  std::size_t size() const { return sentences_.size(); }
  bool empty() const { return sentences_.empty(); }
  const Sentence& operator[](std::size_t i) const { return sentences_[i]; }
  auto begin() const { return sentences_.begin(); }
  auto end() const { return sentences_.end(); }

  const Vocabulary& vocab() const { return *vocab_; }
  const VocabularyPtr& vocab_ptr() const { return vocab_; }
  SplitTag tag() const { return tag_; }
  LengthMode length_mode() const { return mode_; }
  const std::string& policy() const { return policy_; }

  std::size_t token_count() const {
    std::size_t n = 0;
    for (const auto& s : sentences_) n += s.size();
    return n;
  }

  std::string fingerprint() const {
    Fingerprint fp;
    fp.add(vocab_->fingerprint());
    fp.add(static_cast<std::uint64_t>(mode_));
    for (const auto& s : sentences_) {
      fp.add(static_cast<std::uint64_t>(s.size()));
      for (TokenId id : s) fp.add(static_cast<std::uint64_t>(id));
    }
    return fp.hex();
  }

  /// Same sequences in the same order; tags and policy are metadata.
  friend bool operator==(const Corpus& a, const Corpus& b) {
    return a.sentences_ == b.sentences_ && *a.vocab_ == *b.vocab_;
  }

 private:
  std::vector<Sentence> sentences_;
  VocabularyPtr vocab_;
  SplitTag tag_;
  LengthMode mode_;
  std::string policy_;
};

/// True when both corpora index the same token table.
inline bool same_vocabulary(const Corpus& a, const Corpus& b) {
  return a.vocab_ptr() == b.vocab_ptr() || a.vocab() == b.vocab();
}

/// Seeded partition into (train, test) with |train| = round(ratio * |corpus|).
/// Both halves keep the input order of their members.
inline std::pair<Corpus, Corpus> split(const Corpus& corpus, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw ConfigError("split ratio must lie in (0, 1), got " + format_double(ratio));
  }
  if (corpus.empty()) throw InputError("cannot split an empty corpus");
  const std::size_t n = corpus.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(seed, "split"));
  for (std::size_t i = n - 1; i > 0; --i) {
    std::swap(order[i], order[rng.below(i + 1)]);
  }
  const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
  std::vector<bool> in_train(n, false);
  for (std::size_t i = 0; i < n_train; ++i) in_train[order[i]] = true;
  std::vector<Sentence> train, test;
  for (std::size_t i = 0; i < n; ++i) {
    (in_train[i] ? train : test).push_back(corpus[i]);
  }
  return {Corpus(std::move(train), corpus.vocab_ptr(), SplitTag::train, corpus.length_mode(),
                 corpus.policy()),
          Corpus(std::move(test), corpus.vocab_ptr(), SplitTag::test, corpus.length_mode(),
                 corpus.policy())};
}

// ---------------------------------------------------------------------------
// Files

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  if (in.bad()) throw IoError("read failed: " + path.string());
  return lines;
}

/// Rejects overlong forms, surrogates and code points above U+10FFFF.
inline bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t n = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      n = 1, cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      n = 2, cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      n = 3, cp = c & 0x07;
    } else {
      return false;
    }
    if (i + n >= s.size()) return false;
    for (std::size_t k = 1; k <= n; ++k) {
      const auto b = static_cast<unsigned char>(s[i + k]);
      if ((b & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (b & 0x3F);
    }
    static constexpr std::uint32_t kMin[] = {0, 0x80, 0x800, 0x10000};
    if (cp < kMin[n] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
    i += n + 1;
  }
  return true;
}

/// UTF-8 text, one sentence per line; blank lines are skipped. Invalid
/// UTF-8 is a ParseError naming the line.
inline std::vector<std::vector<std::string>> read_text_corpus(const std::filesystem::path& path,
                                                              TokenizationPolicy policy) {
  std::vector<std::vector<std::string>> out;
  std::size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    if (!valid_utf8(line)) throw ParseError(path.string(), line_no, "invalid UTF-8");
    auto toks = tokenize(line, policy);
    if (!toks.empty()) out.push_back(std::move(toks));
  }
  if (out.empty()) throw InputError("no sentences in " + path.string());
  return out;
}

/// Token-id format: ASCII decimal ids separated by single spaces, one
/// sentence per line, newline-terminated.
inline void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  for (const auto& s : corpus) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i) out << ' ';
      out << s[i];
    }
    out << '\n';
  }
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

inline Sentence parse_id_line(std::string_view line, std::size_t vocab_size,
                              const std::string& path, std::size_t line_no) {
  Sentence s;
  if (line.empty()) return s;
  std::size_t pos = 0;
  while (true) {
    const std::size_t sp = line.find(' ', pos);
    const std::string_view field =
        line.substr(pos, sp == std::string_view::npos ? std::string_view::npos : sp - pos);
    if (field.empty()) throw ParseError(path, line_no, "empty field");
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
      throw ParseError(path, line_no, "non-integer field '" + std::string(field) + "'");
    }
    if (v >= vocab_size) {
      throw ParseError(path, line_no,
                       "id " + std::to_string(v) + " >= vocabulary size " +
                           std::to_string(vocab_size));
    }
    s.push_back(static_cast<TokenId>(v));
    if (sp == std::string_view::npos) break;
    pos = sp + 1;
  }
  return s;
}

inline Corpus load_corpus(const std::filesystem::path& path, VocabularyPtr vocab,
                          SplitTag tag = SplitTag::generated,
                          LengthMode mode = LengthMode::variable) {
  if (!vocab) throw ConfigError("load_corpus requires a vocabulary");
  const auto lines = read_lines(path);
  if (lines.empty()) throw InputError("empty corpus file: " + path.string());
  std::vector<Sentence> sentences;
  sentences.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    sentences.push_back(parse_id_line(lines[i], vocab->size(), path.string(), i + 1));
  }
  return Corpus(std::move(sentences), std::move(vocab), tag, mode);
}

inline void save_vocab(const Vocabulary& vocab, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  for (const auto& t : vocab.tokens()) out << t << '\n';
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

inline Vocabulary load_vocab(const std::filesystem::path& path) {
  auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) throw ParseError(path.string(), i + 1, "empty token");
    if (lines[i].find_first_of(" \t\r") != std::string::npos) {
      throw ParseError(path.string(), i + 1, "token contains whitespace");
    }
  }
  return Vocabulary(std::move(lines));
}

/// Tokenizes and encodes text sentences against an existing vocabulary.
inline Corpus encode_corpus(const std::vector<std::vector<std::string>>& text,
                            VocabularyPtr vocab, SplitTag tag, TokenizationPolicy policy) {
  std::vector<Sentence> ids;
  ids.reserve(text.size());
  for (const auto& s : text) ids.push_back(encode(*vocab, s));
  return Corpus(std::move(ids), std::move(vocab), tag, LengthMode::variable, to_string(policy));
}

}  // namespace texeval
