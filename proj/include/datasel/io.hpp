#pragma once

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "datasel/bayesopt.hpp"
#include "datasel/corpus.hpp"
#include "datasel/lda.hpp"
#include "datasel/metrics.hpp"
#include "datasel/select.hpp"
#include "datasel/util.hpp"

namespace datasel {

using json = nlohmann::json;

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open ", path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot open ", path, " for writing");
  out << content;
}

// ---------------------------------------------------------------------------
// Vocabulary / LDA artifacts.
// ---------------------------------------------------------------------------

inline json vocabulary_to_json(const Vocabulary& vocab) {
  return json{{"types", vocab.types()}, {"probs", vocab.probs()}};
}

inline Vocabulary vocabulary_from_json(const json& j) {
  return Vocabulary(j.at("types").get<std::vector<std::string>>(),
                    j.at("probs").get<std::vector<double>>());
}

inline json lda_to_json(const LdaModel& model) {
  return json{{"topics", model.topics()},
              {"vocab_size", model.vocab_size()},
              {"alpha", model.alpha()},
              {"beta", model.beta()},
              {"seed", model.seed()},
              {"infer_sweeps", model.infer_sweeps()},
              {"word_topic", model.word_topic_counts()},
              {"topic_total", model.topic_totals()}};
}

inline LdaModel lda_from_json(const json& j) {
  return LdaModel(j.at("topics").get<int>(), j.at("vocab_size").get<int>(),
                  j.at("alpha").get<double>(), j.at("beta").get<double>(),
                  j.at("seed").get<std::uint64_t>(), j.at("infer_sweeps").get<int>(),
                  j.at("word_topic").get<std::vector<std::vector<int>>>(),
                  j.at("topic_total").get<std::vector<std::int64_t>>());
}

// ---------------------------------------------------------------------------
// Weight artifacts.
// ---------------------------------------------------------------------------

inline json weights_to_json(const WeightArtifact& artifact) {
  json runs = json::array();
  for (const auto& r : artifact.runs) {
    std::vector<double> w(r.w.data(), r.w.data() + r.w.size());
    runs.push_back(json{{"seed", r.seed}, {"w", w}, {"validation", r.validation}, {"test", r.test}});
  }
  return json{{"config_id", artifact.config_id},
              {"task", artifact.task},
              {"target", artifact.target},
              {"columns", artifact.columns},
              {"runs", runs},
              {"best_index", artifact.best_index}};
}

inline WeightArtifact weights_from_json(const json& j) {
  WeightArtifact artifact;
  artifact.config_id = j.at("config_id").get<std::string>();
  artifact.task = j.at("task").get<std::string>();
  artifact.target = j.at("target").get<std::string>();
  artifact.columns = j.at("columns").get<std::vector<std::string>>();
  for (const auto& r : j.at("runs")) {
    WeightRun run;
    run.seed = r.at("seed").get<std::uint64_t>();
    const auto w = r.at("w").get<std::vector<double>>();
    run.w = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    run.validation = r.at("validation").get<double>();
    run.test = r.at("test").get<double>();
    artifact.runs.push_back(std::move(run));
  }
  artifact.best_index = j.at("best_index").get<std::size_t>();
  require(artifact.best_index < artifact.runs.size(), "weights artifact: best_index out of range");
  return artifact;
}

inline void save_weights(const std::string& path, const WeightArtifact& artifact) {
  write_text_file(path, weights_to_json(artifact).dump(2) + "\n");
}

inline WeightArtifact load_weights(const std::string& path) {
  return weights_from_json(json::parse(read_text_file(path)));
}

// ---------------------------------------------------------------------------
// Reports.
// ---------------------------------------------------------------------------

inline json report_row_to_json(const ExperimentReport& report, const RunRow& row) {
  json j{{"method", report.method},
         {"target", report.target},
         {"task", report.task},
         {"seed", row.seed},
         {"value", row.value}};
  if (row.validation) j["validation"] = *row.validation;
  return j;
}

// One JSON object per line: every run row, then a summary row.
inline std::string report_to_jsonl(const ExperimentReport& report) {
  std::ostringstream os;
  for (const auto& row : report.rows) os << report_row_to_json(report, row).dump() << '\n';
  json summary{{"method", report.method}, {"target", report.target}, {"task", report.task},
               {"runs", report.rows.size()}, {"mean", report.mean}};
  if (report.variance) summary["variance"] = *report.variance;
  os << summary.dump() << '\n';
  return os.str();
}

inline std::string report_to_text(const ExperimentReport& report) {
  std::ostringstream os;
  os.precision(6);
  os << "method: " << report.method << "\ntask: " << report.task
     << "\ntarget: " << report.target << "\nruns: " << report.rows.size() << '\n';
  os << "\nseed\tvalue";
  const bool has_validation =
      !report.rows.empty() && report.rows.front().validation.has_value();
  if (has_validation) os << "\tvalidation";
  os << '\n';
  for (const auto& row : report.rows) {
    os << row.seed << '\t' << row.value;
    if (row.validation) os << '\t' << *row.validation;
    os << '\n';
  }
  os << "\nmean\t" << report.mean << '\n';
  if (report.variance) os << "variance\t" << *report.variance << '\n';
  return os.str();
}

}  // namespace datasel
