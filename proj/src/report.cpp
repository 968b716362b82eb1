#include "texeval/report.hpp"

#include <fstream>

namespace texeval {

void to_json(nlohmann::json& j, const MetricValue& m) {
  j = nlohmann::json{{"name", m.name}, {"value", m.value}, {"config_fingerprint", m.config_fingerprint}};
  if (m.stderr_) j["stderr"] = *m.stderr_;
  if (m.count) j["count"] = *m.count;
}

void from_json(const nlohmann::json& j, MetricValue& m) {
  m.name = j.at("name").get<std::string>();
  m.value = j.at("value").get<double>();
  if (!j.contains("config_fingerprint") || j.at("config_fingerprint").get<std::string>().empty()) {
    throw ValidityError("metric '" + m.name + "' has no config fingerprint");
  }
  m.config_fingerprint = j.at("config_fingerprint").get<std::string>();
  m.stderr_ = j.contains("stderr") ? std::optional(j.at("stderr").get<double>()) : std::nullopt;
  m.count = j.contains("count") ? std::optional(j.at("count").get<std::size_t>()) : std::nullopt;
}

void to_json(nlohmann::json& j, const Checkpoint& c) {
  j = nlohmann::json{{"index", c.index},
                     {"fraction", c.fraction},
                     {"train_sentences", c.train_sentences},
                     {"generator", c.generator},
                     {"generator_fingerprint", c.generator_fingerprint},
                     {"generated_fingerprint", c.generated_fingerprint},
                     {"generated_sentences", c.generated_sentences},
                     {"metrics", c.metrics}};
}

void from_json(const nlohmann::json& j, Checkpoint& c) {
  j.at("index").get_to(c.index);
  j.at("fraction").get_to(c.fraction);
  j.at("train_sentences").get_to(c.train_sentences);
  j.at("generator").get_to(c.generator);
  j.at("generator_fingerprint").get_to(c.generator_fingerprint);
  j.at("generated_fingerprint").get_to(c.generated_fingerprint);
  j.at("generated_sentences").get_to(c.generated_sentences);
  j.at("metrics").get_to(c.metrics);
}

nlohmann::json metrics_json(const MetricReport& r) {
  return nlohmann::json{{"schema", kReportSchema},
                        {"mode", r.mode},
                        {"config_fingerprint", r.config_fingerprint},
                        {"config", r.config},
                        {"environment", {{"artifact", "texeval"}, {"version", kArtifactVersion}, {"seeds", r.seeds}}},
                        {"data", r.data},
                        {"checkpoints", r.checkpoints},
                        {"references", r.references},
                        {"disclosures", r.disclosures}};
}

void to_json(nlohmann::json& j, const MetricReport& r) {
  j = metrics_json(r);
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& t : r.timing) stages.push_back({{"stage", t.stage}, {"seconds", t.seconds}});
  j["run"] = {{"threads", r.threads}, {"timing", stages}};
}

void from_json(const nlohmann::json& j, MetricReport& r) {
  if (j.value("schema", "") != kReportSchema) throw ValidityError("not a texeval report");
  j.at("mode").get_to(r.mode);
  j.at("config_fingerprint").get_to(r.config_fingerprint);
  j.at("config").get_to(r.config);
  j.at("environment").at("seeds").get_to(r.seeds);
  r.data = j.at("data");
  j.at("checkpoints").get_to(r.checkpoints);
  j.at("references").get_to(r.references);
  j.at("disclosures").get_to(r.disclosures);
  r.timing.clear();
  if (j.contains("run")) {
    j.at("run").at("threads").get_to(r.threads);
    for (const auto& t : j.at("run").at("timing")) {
      r.timing.push_back({t.at("stage").get<std::string>(), t.at("seconds").get<double>()});
    }
  }
}

std::string report_csv(const MetricReport& r) {
  std::string out = "checkpoint,fraction,metric,value,config_fingerprint\n";
  for (const auto& c : r.checkpoints) {
    for (const auto& m : c.metrics) {
      out += std::to_string(c.index) + "," + format_double(c.fraction) + "," + m.name + "," +
             format_double(m.value) + "," + m.config_fingerprint + "\n";
    }
  }
  return out;
}

void emit_report(const MetricReport& r, const std::filesystem::path& path, ReportFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write report: " + path.string());
  if (format == ReportFormat::json) {
    out << nlohmann::json(r).dump(2) << '\n';
  } else {
    out << report_csv(r);
  }
  if (!out) throw IoError("write failed: " + path.string());
}

MetricReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open report: " + path.string());
  try {
    return nlohmann::json::parse(in).get<MetricReport>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 0, e.what());
  }
}

}  // namespace texeval
