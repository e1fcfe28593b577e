#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cotdistill/types.hpp"

namespace cotdistill {

struct PredictionRecord {
  std::string post_id;
  std::string raw_output;
  ParsedClass parsed_label;
  std::string rationale;  // text after the explanation separator, else empty
};

/// Splits "<Label>. Explanation: <R>" outputs; anything else is classified by
/// parse_class over the whole output with an empty rationale.
PredictionRecord parse_prediction(std::string_view raw, const TaskVocabulary& vocab, std::string post_id = {});

/// Hate is the positive class. An unknown prediction is wrong for accuracy
/// and counts as a negative prediction for precision and recall; on a
/// negative gold it lands in `unknown_neg`, not `tn`.
struct Metrics {
  double accuracy = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::size_t support_pos = 0;
  std::size_t support_neg = 0;
  std::size_t unknown_count = 0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;
  std::size_t unknown_neg = 0;

  std::size_t total() const { return support_pos + support_neg; }
};

/// Positionally aligned inputs; ids must match pairwise.
Metrics compute_metrics(const std::vector<PredictionRecord>& preds, const std::vector<PostRecord>& golds);

/// Reorders `preds` into gold order by id. Throws DataError listing the
/// first mismatched ids when the id sets differ.
std::vector<PredictionRecord> align_by_id(const std::vector<PredictionRecord>& preds,
                                          const std::vector<PostRecord>& golds);

struct ReportRow {
  std::string dataset;
  Metrics metrics;
};

struct CrossReport {
  std::vector<ReportRow> rows;

  std::string render_table() const;
  std::vector<nlohmann::json> lines() const;
};

CrossReport cross_report(const std::map<std::string, std::vector<PredictionRecord>>& model_outputs,
                         const std::map<std::string, std::vector<PostRecord>>& golds);

/// Prediction files are {post_id, raw_output} lines.
std::vector<PredictionRecord> read_prediction_file(const std::filesystem::path& path, const TaskVocabulary& vocab);
void write_prediction_file(const std::filesystem::path& path, const std::vector<PredictionRecord>& preds);

std::vector<ReportRow> read_report_file(const std::filesystem::path& path);

}  // namespace cotdistill
