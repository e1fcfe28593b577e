#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "cotdistill/io.hpp"
#include "cotdistill/metrics.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace cotdistill;
using test_support::TempDir;

namespace {

const TaskVocabulary kOff = TaskVocabulary::offensive();

struct Built {
  std::vector<PredictionRecord> preds;
  std::vector<PostRecord> golds;
};

Built build(const std::vector<int>& preds, const std::vector<bool>& gold_hate) {
  Built b;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    PostRecord g;
    g.id = "id" + std::to_string(i);
    g.post = "x";
    g.gold_label = gold_hate[i] ? BinaryLabel::hate : BinaryLabel::not_hate;
    b.golds.push_back(g);
    PredictionRecord p;
    p.post_id = g.id;
    if (preds[i] == oracle::kHate) p.parsed_label = {ClassLabel::hate, "x"};
    if (preds[i] == oracle::kNotHate) p.parsed_label = {ClassLabel::not_hate, "x"};
    b.preds.push_back(p);
  }
  return b;
}

Metrics run(const std::vector<int>& preds, const std::vector<bool>& gold_hate) {
  const auto b = build(preds, gold_hate);
  return compute_metrics(b.preds, b.golds);
}

}  // namespace

TEST(ParsePrediction, TargetFormat) {
  auto p = parse_prediction("Offensive. Explanation: it demeans X.", kOff);
  EXPECT_EQ(p.parsed_label.label, ClassLabel::hate);
  EXPECT_EQ(p.rationale, "it demeans X.");
  p = parse_prediction("Not offensive.", kOff);
  EXPECT_EQ(p.parsed_label.label, ClassLabel::not_hate);
  EXPECT_EQ(p.rationale, "");
  p = parse_prediction("this text demeans X so it is offensive", kOff);
  EXPECT_EQ(p.parsed_label.label, ClassLabel::hate);
  EXPECT_EQ(p.rationale, "");
  p = parse_prediction("  not offensive. explanation: lowercase works ", kOff, "id");
  EXPECT_EQ(p.parsed_label.label, ClassLabel::not_hate);
  EXPECT_EQ(p.rationale, "lowercase works");
  EXPECT_EQ(p.post_id, "id");
  EXPECT_EQ(parse_prediction("", kOff).parsed_label.label, ClassLabel::unknown);
  EXPECT_EQ(parse_prediction("Hateful. Explanation: r", TaskVocabulary::hateful()).parsed_label.label, ClassLabel::hate);
}

TEST(ComputeMetrics, HandExample) {
  // TP=2, FP=1, FN=1, TN=1
  const auto m = run({oracle::kHate, oracle::kHate, oracle::kHate, oracle::kNotHate, oracle::kNotHate},
                     {true, true, false, true, false});
  EXPECT_DOUBLE_EQ(m.precision, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.recall, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.f1, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.accuracy, 3.0 / 5.0);
}

TEST(ComputeMetrics, Perfect) {
  const auto m = run({oracle::kHate, oracle::kNotHate}, {true, false});
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(m.f1, 1.0);
}

TEST(ComputeMetrics, DegenerateConventions) {
  // No positives anywhere: P, R, F1 are 0, accuracy comes from TN.
  auto m = run({oracle::kNotHate, oracle::kNotHate, oracle::kHate}, {false, false, false});
  EXPECT_EQ(m.precision, 0.0);
  EXPECT_EQ(m.recall, 0.0);
  EXPECT_EQ(m.f1, 0.0);
  EXPECT_DOUBLE_EQ(m.accuracy, 2.0 / 3.0);
  m = run({oracle::kNotHate, oracle::kNotHate}, {false, false});
  EXPECT_EQ(m.f1, 0.0);
  EXPECT_EQ(m.accuracy, 1.0);
  // All-positive gold and predictions.
  m = run({oracle::kHate, oracle::kHate}, {true, true});
  EXPECT_EQ(m.precision, 1.0);
  EXPECT_EQ(m.recall, 1.0);
  // All-negative predictions on positive gold.
  m = run({oracle::kNotHate, oracle::kUnknown}, {true, true});
  EXPECT_EQ(m.precision, 0.0);
  EXPECT_EQ(m.recall, 0.0);
  EXPECT_EQ(m.accuracy, 0.0);
}

TEST(ComputeMetrics, UnknownPolicy) {
  const auto m = run({oracle::kUnknown, oracle::kUnknown, oracle::kHate}, {true, false, true});
  EXPECT_EQ(m.unknown_count, 2u);
  EXPECT_EQ(m.fn, 1u);
  EXPECT_EQ(m.tn, 0u);
  EXPECT_EQ(m.unknown_neg, 1u);
  EXPECT_DOUBLE_EQ(m.accuracy, 1.0 / 3.0);
  EXPECT_EQ(m.precision, 1.0);
  EXPECT_DOUBLE_EQ(m.recall, 0.5);
}

TEST(ComputeMetrics, MatchesOracleOnRandomInputs) {
  std::mt19937_64 rng(12345);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto c = oracle::random_case(rng);
    const auto expect = oracle::metrics(c.preds, c.gold_hate);
    const auto m = run(c.preds, c.gold_hate);
    ASSERT_NEAR(m.accuracy, expect.accuracy, 1e-12);
    ASSERT_NEAR(m.precision, expect.precision, 1e-12);
    ASSERT_NEAR(m.recall, expect.recall, 1e-12);
    ASSERT_NEAR(m.f1, expect.f1, 1e-12);
    ASSERT_EQ(m.tp, expect.tp);
    ASSERT_EQ(m.fp, expect.fp);
    ASSERT_EQ(m.fn, expect.fn);
    ASSERT_EQ(m.tn, expect.tn);
    // accuracy * total recovers TP + TN.
    ASSERT_EQ(std::llround(m.accuracy * static_cast<double>(m.total())), static_cast<long long>(m.tp + m.tn));
  }
}

TEST(ComputeMetrics, JointPermutationInvariant) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    auto c = oracle::random_case(rng, 60);
    const auto before = run(c.preds, c.gold_hate);
    std::vector<std::size_t> order(c.preds.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    oracle::RandomCase shuffled;
    for (auto i : order) {
      shuffled.preds.push_back(c.preds[i]);
      shuffled.gold_hate.push_back(c.gold_hate[i]);
    }
    const auto after = run(shuffled.preds, shuffled.gold_hate);
    EXPECT_EQ(before.accuracy, after.accuracy);
    EXPECT_EQ(before.f1, after.f1);
    EXPECT_EQ(before.tp, after.tp);
  }
}

TEST(ComputeMetrics, ComplementSwapsRoles) {
  // Without unknowns, complementing every label swaps TP<->TN and FP<->FN.
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    auto c = oracle::random_case(rng, 80);
    for (auto& p : c.preds) if (p == oracle::kUnknown) p = oracle::kHate;
    auto flipped = c;
    for (auto& p : flipped.preds) p = p == oracle::kHate ? oracle::kNotHate : oracle::kHate;
    for (std::size_t i = 0; i < flipped.gold_hate.size(); ++i) flipped.gold_hate[i] = !flipped.gold_hate[i];
    const auto a = run(c.preds, c.gold_hate);
    const auto b = run(flipped.preds, flipped.gold_hate);
    EXPECT_EQ(a.accuracy, b.accuracy);
    EXPECT_EQ(a.tp, b.tn);
    EXPECT_EQ(a.fp, b.fn);
    EXPECT_EQ(a.support_pos, b.support_neg);
  }
}

TEST(ComputeMetrics, InputErrors) {
  auto b = build({oracle::kHate, oracle::kHate}, {true, true});
  EXPECT_THROW(compute_metrics({}, {}), DataError);
  EXPECT_THROW(compute_metrics({b.preds[0]}, b.golds), DataError);
  std::swap(b.preds[0], b.preds[1]);
  EXPECT_THROW(compute_metrics(b.preds, b.golds), DataError);
}

TEST(AlignById, ReordersAndReports) {
  auto b = build({oracle::kHate, oracle::kNotHate, oracle::kHate}, {true, false, true});
  std::reverse(b.preds.begin(), b.preds.end());
  const auto aligned = align_by_id(b.preds, b.golds);
  for (std::size_t i = 0; i < aligned.size(); ++i) EXPECT_EQ(aligned[i].post_id, b.golds[i].id);

  auto missing = b.preds;
  missing.pop_back();
  try {
    align_by_id(missing, b.golds);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("missing predictions 1: id0"), std::string::npos);
  }
  auto dup = b.preds;
  dup.push_back(dup[0]);
  EXPECT_THROW(align_by_id(dup, b.golds), DataError);
}

TEST(CrossReport, RowsTableAndErrors) {
  const auto b = build({oracle::kHate, oracle::kNotHate}, {true, false});
  const auto report = cross_report({{"HateXplain", b.preds}, {"DynaHate", b.preds}},
                                   {{"HateXplain", b.golds}, {"DynaHate", b.golds}});
  ASSERT_EQ(report.rows.size(), 2u);
  EXPECT_EQ(report.rows[0].metrics.f1, report.rows[1].metrics.f1);
  const auto table = report.render_table();
  EXPECT_LT(table.find("Acc"), table.find("F1"));
  EXPECT_NE(table.find("100.00"), std::string::npos);

  EXPECT_THROW(cross_report({{"HateXplain", b.preds}}, {{"HateXplain", b.golds}, {"DynaHate", b.golds}}),
               UsageError);
  EXPECT_THROW(cross_report({{"HateXplain", {}}}, {{"HateXplain", b.golds}}), DataError);
}

TEST(ReportFile, RoundTrip) {
  TempDir dir;
  const auto b = build({oracle::kHate, oracle::kUnknown, oracle::kNotHate}, {true, false, true});
  const auto report = cross_report({{"SBIC", b.preds}}, {{"SBIC", b.golds}});
  write_jsonl(dir / "r.jsonl", report.lines());
  const auto line = read_jsonl(dir / "r.jsonl").at(0);
  for (const char* key : {"dataset", "accuracy", "precision", "recall", "f1", "unknown_count"}) {
    EXPECT_TRUE(line.contains(key)) << key;
  }
  const auto rows = read_report_file(dir / "r.jsonl");
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].dataset, "SBIC");
  EXPECT_EQ(rows[0].metrics.f1, report.rows[0].metrics.f1);
  EXPECT_EQ(rows[0].metrics.total(), 3u);
}

TEST(PredictionFile, StudentInterfaceRoundTrip) {
  // The trainer writes {post_id, raw_output}; evaluation reads it back.
  TempDir dir;
  write_text_atomic(dir / "p.jsonl",
                    "{\"post_id\":\"a\",\"raw_output\":\"Offensive. Explanation: x\"}\n"
                    "{\"post_id\":\"b\",\"raw_output\":\"Not offensive.\"}\n");
  const auto preds = read_prediction_file(dir / "p.jsonl", kOff);
  ASSERT_EQ(preds.size(), 2u);
  EXPECT_EQ(preds[0].rationale, "x");
  EXPECT_EQ(preds[1].parsed_label.label, ClassLabel::not_hate);
  write_prediction_file(dir / "q.jsonl", preds);
  EXPECT_EQ(read_text(dir / "p.jsonl"), read_text(dir / "q.jsonl"));
  write_text_atomic(dir / "bad.jsonl", "{\"post_id\":\"a\"}\n");
  EXPECT_THROW(read_prediction_file(dir / "bad.jsonl", kOff), DataError);
}
