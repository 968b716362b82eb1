#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "texeval/error.hpp"
#include "texeval/numeric.hpp"

namespace texeval {

inline constexpr const char* kArtifactVersion = "1.0.0";
inline constexpr const char* kReportSchema = "texeval-report/1";

/// One metric value and the fingerprint of the settings that produced it.
struct MetricValue {
  std::string name;
  double value = 0.0;
  std::optional<double> stderr_;
  std::optional<std::size_t> count;
  std::string config_fingerprint;

  friend bool operator==(const MetricValue&, const MetricValue&) = default;
};

struct Checkpoint {
  std::size_t index = 0;
  double fraction = 0.0;
  std::size_t train_sentences = 0;
  std::string generator;
  std::string generator_fingerprint;
  std::string generated_fingerprint;
  std::size_t generated_sentences = 0;
  std::vector<MetricValue> metrics;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

struct StageTiming {
  std::string stage;
  double seconds = 0.0;

  friend bool operator==(const StageTiming&, const StageTiming&) = default;
};

struct MetricReport {
  std::string mode;
  std::string config_fingerprint;
  std::map<std::string, std::string> config;
  std::map<std::string, std::uint64_t> seeds;
  /// Sizes and content fingerprints of every corpus and model used.
  nlohmann::json data = nlohmann::json::object();
  std::vector<Checkpoint> checkpoints;
  /// Values that do not depend on a checkpoint (e.g. Self-BLEU of the data).
  std::vector<MetricValue> references;
  std::vector<std::string> disclosures;
  std::vector<StageTiming> timing;
  int threads = 1;

  const Checkpoint& final_checkpoint() const {
    if (checkpoints.empty()) throw MetricError("report has no checkpoints");
    return checkpoints.back();
  }

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

/// Looks up a metric by name; throws MetricError when absent.
inline const MetricValue& find_metric(const std::vector<MetricValue>& values, const std::string& name) {
  for (const auto& v : values) {
    if (v.name == name) return v;
  }
  throw MetricError("metric '" + name + "' not in report");
}
void to_json(nlohmann::json& j, const MetricValue& m);
/// Throws ValidityError when the config fingerprint is missing or empty.
void from_json(const nlohmann::json& j, MetricValue& m);
void to_json(nlohmann::json& j, const Checkpoint& c);
void from_json(const nlohmann::json& j, Checkpoint& c);
void to_json(nlohmann::json& j, const MetricReport& r);
void from_json(const nlohmann::json& j, MetricReport& r);

/// Everything except run-dependent fields (timing, thread count).
nlohmann::json metrics_json(const MetricReport& r);

enum class ReportFormat { json, csv };

/// One row per (checkpoint, metric); references are JSON-only.
std::string report_csv(const MetricReport& r);

void emit_report(const MetricReport& r, const std::filesystem::path& path, ReportFormat format);
MetricReport read_report(const std::filesystem::path& path);

}  // namespace texeval
