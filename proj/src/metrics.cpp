#include "cotdistill/metrics.hpp"

#include <cstdio>
#include <unordered_map>

#include "cotdistill/distill.hpp"
#include "cotdistill/io.hpp"

namespace cotdistill {
namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

// Case-insensitive prefix test; returns the matched length.
std::size_t match_prefix(std::string_view text, std::string_view prefix) {
  if (text.size() < prefix.size()) return 0;
  return to_lower_ascii(text.substr(0, prefix.size())) == to_lower_ascii(prefix) ? prefix.size() : 0;
}

}  // namespace

PredictionRecord parse_prediction(std::string_view raw, const TaskVocabulary& vocab, std::string post_id) {
  PredictionRecord out;
  out.post_id = std::move(post_id);
  out.raw_output = std::string(raw);

  const std::string text = trim(raw);
  // The negative render contains the positive word, so test it first.
  for (const auto label : {BinaryLabel::not_hate, BinaryLabel::hate}) {
    const std::string render = class_render(label, vocab);
    const std::size_t n = match_prefix(text, render);
    if (n == 0) continue;
    out.parsed_label = ParsedClass{to_class(label), text.substr(0, n)};
    const std::string rest = trim(std::string_view(text).substr(n));
    const std::string marker = trim(kExplanationSeparator);
    if (const std::size_t m = match_prefix(rest, marker); m > 0) out.rationale = trim(std::string_view(rest).substr(m));
    return out;
  }
  out.parsed_label = parse_class(text, vocab);
  return out;
}

Metrics compute_metrics(const std::vector<PredictionRecord>& preds, const std::vector<PostRecord>& golds) {
  if (preds.empty() || golds.empty()) throw DataError("metrics need at least one prediction");
  if (preds.size() != golds.size()) {
    throw DataError("prediction/gold length mismatch: " + std::to_string(preds.size()) + " vs " +
                    std::to_string(golds.size()));
  }
  Metrics m;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].post_id != golds[i].id) {
      throw DataError("id mismatch at position " + std::to_string(i) + ": '" + preds[i].post_id + "' vs '" +
                      golds[i].id + "'");
    }
    const ClassLabel pred = preds[i].parsed_label.label;
    const bool gold_pos = golds[i].gold_label == BinaryLabel::hate;
    if (pred == ClassLabel::unknown) ++m.unknown_count;
    if (gold_pos) {
      ++m.support_pos;
      pred == ClassLabel::hate ? ++m.tp : ++m.fn;
    } else {
      ++m.support_neg;
      if (pred == ClassLabel::hate) {
        ++m.fp;
      } else if (pred == ClassLabel::not_hate) {
        ++m.tn;
      } else {
        ++m.unknown_neg;
      }
    }
  }
  m.accuracy = ratio(m.tp + m.tn, m.total());
  m.precision = ratio(m.tp, m.tp + m.fp);
  m.recall = ratio(m.tp, m.tp + m.fn);
  m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

std::vector<PredictionRecord> align_by_id(const std::vector<PredictionRecord>& preds,
                                          const std::vector<PostRecord>& golds) {
  std::unordered_map<std::string, const PredictionRecord*> by_id;
  std::vector<std::string> duplicate_or_extra;
  for (const auto& p : preds) {
    if (!by_id.emplace(p.post_id, &p).second) duplicate_or_extra.push_back(p.post_id + " (duplicate)");
  }
  std::vector<PredictionRecord> aligned;
  std::vector<std::string> missing;
  std::unordered_map<std::string, bool> gold_ids;
  for (const auto& g : golds) {
    gold_ids.emplace(g.id, true);
    auto it = by_id.find(g.id);
    if (it == by_id.end()) {
      missing.push_back(g.id);
    } else {
      aligned.push_back(*it->second);
    }
  }
  for (const auto& p : preds) {
    if (!gold_ids.contains(p.post_id)) duplicate_or_extra.push_back(p.post_id + " (no gold)");
  }
  if (missing.empty() && duplicate_or_extra.empty()) return aligned;

  std::string message = "predictions do not align with gold records;";
  auto list = [&](const char* what, const std::vector<std::string>& ids) {
    if (ids.empty()) return;
    message += std::string(" ") + what + " " + std::to_string(ids.size()) + ":";
    for (std::size_t i = 0; i < ids.size() && i < 5; ++i) message += " " + ids[i];
    if (ids.size() > 5) message += " ...";
  };
  list("missing predictions", missing);
  list("unexpected predictions", duplicate_or_extra);
  throw DataError(message);
}

CrossReport cross_report(const std::map<std::string, std::vector<PredictionRecord>>& model_outputs,
                         const std::map<std::string, std::vector<PostRecord>>& golds) {
  CrossReport report;
  for (const auto& [dataset, records] : golds) {
    if (!model_outputs.contains(dataset)) throw UsageError("no predictions for dataset '" + dataset + "'");
  }
  for (const auto& [dataset, preds] : model_outputs) {
    auto it = golds.find(dataset);
    if (it == golds.end()) throw UsageError("no gold records for dataset '" + dataset + "'");
    if (preds.empty()) throw DataError("empty predictions for dataset '" + dataset + "'");
    report.rows.push_back({dataset, compute_metrics(align_by_id(preds, it->second), it->second)});
  }
  return report;
}

std::string CrossReport::render_table() const {
  std::size_t width = 7;
  for (const auto& row : rows) width = std::max(width, row.dataset.size());
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %7s  %7s  %9s  %7s  %7s  %6s\n", static_cast<int>(width), "Dataset", "Acc",
                "F1", "Precision", "Recall", "Unknown", "N");
  out += buf;
  out += std::string(width + 2 + 7 + 2 + 7 + 2 + 9 + 2 + 7 + 2 + 7 + 2 + 6, '-') + "\n";
  for (const auto& row : rows) {
    const auto& m = row.metrics;
    std::snprintf(buf, sizeof buf, "%-*s  %7.2f  %7.2f  %9.2f  %7.2f  %7zu  %6zu\n", static_cast<int>(width),
                  row.dataset.c_str(), 100 * m.accuracy, 100 * m.f1, 100 * m.precision, 100 * m.recall,
                  m.unknown_count, m.total());
    out += buf;
  }
  return out;
}

std::vector<json> CrossReport::lines() const {
  std::vector<json> out;
  for (const auto& row : rows) {
    const auto& m = row.metrics;
    out.push_back(json{{"dataset", row.dataset},
                       {"accuracy", m.accuracy},
                       {"precision", m.precision},
                       {"recall", m.recall},
                       {"f1", m.f1},
                       {"unknown_count", m.unknown_count},
                       {"tp", m.tp},
                       {"fp", m.fp},
                       {"fn", m.fn},
                       {"tn", m.tn},
                       {"unknown_neg", m.unknown_neg}});
  }
  return out;
}

std::vector<PredictionRecord> read_prediction_file(const std::filesystem::path& path, const TaskVocabulary& vocab) {
  std::vector<PredictionRecord> out;
  for (const auto& line : read_jsonl(path)) {
    try {
      out.push_back(parse_prediction(line.at("raw_output").get<std::string>(), vocab,
                                     line.at("post_id").get<std::string>()));
    } catch (const json::exception& e) {
      throw DataError("'" + path.string() + "': bad prediction line: " + e.what());
    }
  }
  return out;
}

void write_prediction_file(const std::filesystem::path& path, const std::vector<PredictionRecord>& preds) {
  std::vector<json> lines;
  lines.reserve(preds.size());
  for (const auto& p : preds) lines.push_back(json{{"post_id", p.post_id}, {"raw_output", p.raw_output}});
  write_jsonl(path, lines);
}

std::vector<ReportRow> read_report_file(const std::filesystem::path& path) {
  std::vector<ReportRow> rows;
  for (const auto& line : read_jsonl(path)) {
    try {
      ReportRow row;
      row.dataset = line.at("dataset").get<std::string>();
      auto& m = row.metrics;
      m.accuracy = line.at("accuracy").get<double>();
      m.precision = line.at("precision").get<double>();
      m.recall = line.at("recall").get<double>();
      m.f1 = line.at("f1").get<double>();
      m.unknown_count = line.at("unknown_count").get<std::size_t>();
      m.tp = line.value("tp", std::size_t{0});
      m.fp = line.value("fp", std::size_t{0});
      m.fn = line.value("fn", std::size_t{0});
      m.tn = line.value("tn", std::size_t{0});
      m.unknown_neg = line.value("unknown_neg", std::size_t{0});
      m.support_pos = m.tp + m.fn;
      m.support_neg = m.fp + m.tn + m.unknown_neg;
      rows.push_back(std::move(row));
    } catch (const json::exception& e) {
      throw DataError("'" + path.string() + "': bad report line: " + e.what());
    }
  }
  return rows;
}

}  // namespace cotdistill
