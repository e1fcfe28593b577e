#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "cotdistill/io.hpp"
#include "cotdistill/judge.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace cotdistill;
using test_support::data_dir;
using test_support::slurp;

namespace {

constexpr MethodChoice kChoices[] = {MethodChoice::method1, MethodChoice::method2, MethodChoice::tie};

PairVerdict verdict(Presentation order, MethodChoice choice, std::string post_id = "p") {
  PairVerdict v;
  v.post_id = std::move(post_id);
  v.order = order;
  v.method_chosen = choice;
  return v;
}

MethodChoice relabel(MethodChoice c) {
  if (c == MethodChoice::method1) return MethodChoice::method2;
  if (c == MethodChoice::method2) return MethodChoice::method1;
  return c;
}

PostRecord annotated(std::string id) {
  PostRecord p;
  p.id = std::move(id);
  p.post = "post " + p.id;
  p.gold_label = BinaryLabel::hate;
  p.targets = {"group"};
  p.implied_statements = {"group is bad"};
  return p;
}

}  // namespace

TEST(ParseRating, FixtureCorpus) {
  const json corpus = json::parse(slurp(data_dir() / "judge_replies.json"));
  std::size_t ratings = 0;
  for (const auto& c : corpus) {
    if (c["kind"] != "rating") continue;
    ++ratings;
    const auto reply = c["reply"].get<std::string>();
    if (c["expect"] == "error") {
      EXPECT_THROW(parse_rating(reply), JudgeParseError) << reply;
    } else {
      EXPECT_EQ(parse_rating(reply).value, c["expect"].get<int>()) << reply;
    }
  }
  EXPECT_GE(ratings, 10u);
}

TEST(ParseVerdict, FixtureCorpus) {
  const json corpus = json::parse(slurp(data_dir() / "judge_replies.json"));
  for (const auto& c : corpus) {
    if (c["kind"] != "verdict") continue;
    const auto reply = c["reply"].get<std::string>();
    if (c["expect"] == "error") {
      EXPECT_THROW(parse_verdict(reply), JudgeParseError) << reply;
    } else {
      EXPECT_EQ(std::string(1, parse_verdict(reply).letter), c["expect"].get<std::string>()) << reply;
    }
  }
  EXPECT_GE(corpus.size(), 20u);
}

TEST(ParseTokens, KeepTokenText) {
  EXPECT_EQ(parse_rating("x [[ 7 ]]").token, "[[ 7 ]]");
  EXPECT_EQ(parse_verdict("[[B]] end").token, "[[B]]");
  // A parse error is a data error, so it maps to the data exit code.
  try {
    parse_rating("nothing");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::data);
  }
}

TEST(TranslateLetter, ByOrder) {
  EXPECT_EQ(translate_letter('A', Presentation::original), MethodChoice::method1);
  EXPECT_EQ(translate_letter('B', Presentation::original), MethodChoice::method2);
  EXPECT_EQ(translate_letter('A', Presentation::swapped), MethodChoice::method2);
  EXPECT_EQ(translate_letter('B', Presentation::swapped), MethodChoice::method1);
  EXPECT_EQ(translate_letter('C', Presentation::swapped), MethodChoice::tie);
  EXPECT_THROW(translate_letter('D', Presentation::original), JudgeParseError);
}

TEST(ResolveVerdicts, TruthTable) {
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      const auto got = resolve_verdicts(verdict(Presentation::original, kChoices[a]),
                                        verdict(Presentation::swapped, kChoices[b]));
      EXPECT_EQ(got.outcome, kChoices[oracle::kResolution[a][b]]) << a << "," << b;
      EXPECT_EQ(got.post_id, "p");
    }
  }
}

TEST(ResolveVerdicts, RelabelingSymmetry) {
  for (const auto a : kChoices) {
    for (const auto b : kChoices) {
      const auto plain = resolve_verdicts(verdict(Presentation::original, a), verdict(Presentation::swapped, b));
      const auto relabeled =
          resolve_verdicts(verdict(Presentation::original, relabel(a)), verdict(Presentation::swapped, relabel(b)));
      EXPECT_EQ(relabeled.outcome, relabel(plain.outcome));
    }
  }
}

TEST(ResolveVerdicts, OrderSwapComposesToIdentity) {
  // Judging (a1, a2) in swapped order equals judging (a2, a1) in original
  // order with the methods relabeled.
  for (const char letter : {'A', 'B', 'C'}) {
    EXPECT_EQ(translate_letter(letter, Presentation::swapped), relabel(translate_letter(letter, Presentation::original)));
  }
}

TEST(ResolveVerdicts, Preconditions) {
  const auto o = verdict(Presentation::original, MethodChoice::tie);
  EXPECT_THROW(resolve_verdicts(o, o), UsageError);
  EXPECT_THROW(resolve_verdicts(o, verdict(Presentation::swapped, MethodChoice::tie, "other")), UsageError);
}

TEST(Aggregate, NormalIntervalHandValue) {
  const auto s = aggregate_values({6, 8});
  EXPECT_EQ(s.n, 2u);
  EXPECT_NEAR(s.mean, 7.0, 1e-12);
  EXPECT_NEAR(s.ci_low, 5.04, 1e-9);
  EXPECT_NEAR(s.ci_high, 8.96, 1e-9);
}

TEST(Aggregate, WidthScalesWithInverseRootN) {
  // Replicating [6, 8] m times keeps the mean; the sample sd becomes
  // sqrt(2m / (2m - 1)), so width * sqrt(n) / sd is constant.
  const double base = 8.96 - 5.04;
  for (std::size_t m : {2, 4, 8, 50}) {
    std::vector<double> values;
    for (std::size_t i = 0; i < m; ++i) values.insert(values.end(), {6.0, 8.0});
    const auto s = aggregate_values(values);
    const double n = static_cast<double>(2 * m);
    const double sd = std::sqrt(n / (n - 1));
    EXPECT_NEAR(s.mean, 7.0, 1e-12);
    EXPECT_NEAR((s.ci_high - s.ci_low), 2 * 1.96 * sd / std::sqrt(n), 1e-9);
    EXPECT_NEAR((s.ci_high - s.ci_low) * std::sqrt(n) / sd, base, 1e-9);
  }
}

TEST(Aggregate, DegenerateAndErrors) {
  const auto one = aggregate_values({7});
  EXPECT_EQ(one.ci_low, 7.0);
  EXPECT_EQ(one.ci_high, 7.0);
  const auto flat = aggregate_values({7, 7, 7});
  EXPECT_EQ(flat.ci_low, 7.0);
  EXPECT_EQ(flat.ci_high, 7.0);
  EXPECT_THROW(aggregate_values({}), UsageError);
  std::vector<SingleGrade> grades(2);
  grades[0].score = 6;
  grades[1].score = 8;
  EXPECT_NEAR(aggregate_scores(grades).ci_low, 5.04, 1e-9);
}

TEST(Aggregate, BootstrapIsSeededAndBracketsMean) {
  const std::vector<double> values{3, 5, 6, 7, 8, 8, 9, 10};
  const auto a = aggregate_values(values, CiMethod::bootstrap, 11);
  const auto b = aggregate_values(values, CiMethod::bootstrap, 11);
  EXPECT_EQ(a.ci_low, b.ci_low);
  EXPECT_EQ(a.ci_high, b.ci_high);
  EXPECT_LT(a.ci_low, a.mean);
  EXPECT_GT(a.ci_high, a.mean);
  // Close to the normal interval for a well-behaved sample.
  const auto normal = aggregate_values(values);
  EXPECT_NEAR(a.ci_low, normal.ci_low, 0.6);
  EXPECT_NEAR(a.ci_high, normal.ci_high, 0.6);
}

TEST(Judge, MockScriptedRepliesAndRouting) {
  const json fixture = json::parse(R"({"judge": {
      "single": {"fr": "Fine. [[8]]", "co": "[[5]]"},
      "pairwise": {"original": "[[A]]", "swapped": "[[B]]"}}})");
  LlmClient client(std::make_shared<MockBackend>(0, fixture), ClientOptions{});
  Judge judge(client, JudgeOptions{});
  const auto p = annotated("x");
  EXPECT_EQ(judge.grade_single(p, "fr", "Offensive. Explanation: a").score, 8);
  EXPECT_EQ(judge.grade_single(p, "co", "Offensive. Explanation: b").score, 5);
  const auto [original, swapped] = judge.compare_pair(p, "one", "two");
  EXPECT_EQ(original.method_chosen, MethodChoice::method1);
  EXPECT_EQ(swapped.method_chosen, MethodChoice::method1);
  EXPECT_EQ(resolve_verdicts(original, swapped).outcome, MethodChoice::method1);
}

TEST(Judge, AlwaysAIsAllTies) {
  LlmClient client(std::make_shared<MockBackend>(0, json::parse(R"({"judge": {"pairwise": "[[A]]"}})")),
                   ClientOptions{});
  Judge judge(client, JudgeOptions{});
  for (const char* id : {"a", "b", "c"}) {
    const auto [o, s] = judge.compare_pair(annotated(id), "one", "two");
    EXPECT_EQ(resolve_verdicts(o, s).outcome, MethodChoice::tie);
  }
}

TEST(Judge, UnparsableReplyRaises) {
  LlmClient client(std::make_shared<MockBackend>(0, json::parse(R"({"judge": {"single": "Rating: 8/10"}})")),
                   ClientOptions{});
  Judge judge(client, JudgeOptions{});
  EXPECT_THROW(judge.grade_single(annotated("a"), "fr", "ans"), JudgeParseError);
}

TEST(SelectInstances, EligibilityAndDeterminism) {
  std::vector<PostRecord> golds;
  std::vector<PredictionRecord> m1, m2;
  for (int i = 0; i < 30; ++i) {
    auto p = annotated("p" + std::to_string(i));
    p.gold_label = i % 3 == 0 ? BinaryLabel::not_hate : BinaryLabel::hate;
    golds.push_back(p);
    PredictionRecord a{p.id, "", {ClassLabel::hate, "x"}, ""};
    PredictionRecord b{p.id, "", {i % 5 == 0 ? ClassLabel::not_hate : ClassLabel::hate, "x"}, ""};
    m1.push_back(a);
    m2.push_back(b);
  }
  const auto all = select_judge_instances(golds, {m1, m2}, 100, 1);
  // Hate gold (i % 3 != 0) and method 2 correct (i % 5 != 0).
  std::size_t expected = 0;
  for (int i = 0; i < 30; ++i) expected += (i % 3 != 0 && i % 5 != 0);
  EXPECT_EQ(all.size(), expected);
  const auto some = select_judge_instances(golds, {m1, m2}, 5, 42);
  ASSERT_EQ(some.size(), 5u);
  EXPECT_EQ(some, select_judge_instances(golds, {m1, m2}, 5, 42));
  for (std::size_t i = 1; i < some.size(); ++i) {
    EXPECT_LT(std::find(golds.begin(), golds.end(), some[i - 1]), std::find(golds.begin(), golds.end(), some[i]));
  }
  for (const auto& p : some) EXPECT_EQ(p.gold_label, BinaryLabel::hate);
  EXPECT_NE(some, select_judge_instances(golds, {m1, m2}, 5, 43));
}
