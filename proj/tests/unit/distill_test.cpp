#include <gtest/gtest.h>

#include "cotdistill/distill.hpp"
#include "cotdistill/io.hpp"
#include "support.hpp"

using namespace cotdistill;
using test_support::TempDir;

namespace {

const TaskVocabulary kOff = TaskVocabulary::offensive();
const TaskVocabulary kHate = TaskVocabulary::hateful();

PostRecord post(std::string id, BinaryLabel gold, std::string text = "some post") {
  PostRecord r;
  r.id = std::move(id);
  r.post = std::move(text);
  r.gold_label = gold;
  return r;
}

RationaleSample sample(const std::string& post_id, std::uint32_t index, ClassLabel stage2,
                       std::string rationale = "because reasons") {
  RationaleSample s;
  s.post_id = post_id;
  s.sample_index = index;
  s.rationale = std::move(rationale);
  s.stage2_class = stage2 == ClassLabel::unknown ? ParsedClass::unknown() : ParsedClass{stage2, "x"};
  return s;
}

}  // namespace

TEST(ParseClass, Table) {
  struct Case {
    const char* text;
    ClassLabel expect;
    const char* evidence;
  };
  const Case cases[] = {
      {"(A) Offensive", ClassLabel::hate, "(A)"},
      {"(B) Not offensive", ClassLabel::not_hate, "(B)"},
      {"I'd pick (A), no wait, (b)", ClassLabel::not_hate, "(b)"},
      {"A", ClassLabel::hate, "A"},
      {" b. ", ClassLabel::not_hate, "b"},
      {"Answer: A", ClassLabel::hate, "A"},
      {"The post is not offensive.", ClassLabel::not_hate, "not offensive"},
      {"It isn't really offensive.", ClassLabel::not_hate, "n't really offensive"},
      {"It isn\xE2\x80\x99t offensive.", ClassLabel::not_hate, "n\xE2\x80\x99t offensive"},
      {"A non-offensive joke.", ClassLabel::not_hate, "non-offensive"},
      {"Quite inoffensive.", ClassLabel::not_hate, "inoffensive"},
      {"Therefore, the post is OFFENSIVE.", ClassLabel::hate, "OFFENSIVE"},
      {"offensiveness aside, nothing", ClassLabel::unknown, ""},
      {"A post about apples.", ClassLabel::unknown, ""},
      {"", ClassLabel::unknown, ""},
      {"I cannot determine this.", ClassLabel::unknown, ""},
  };
  for (const auto& c : cases) {
    const auto parsed = parse_class(c.text, kOff);
    EXPECT_EQ(parsed.label, c.expect) << c.text;
    EXPECT_EQ(parsed.evidence, c.evidence) << c.text;
  }
}

TEST(ParseClass, UsesTaskWord) {
  EXPECT_EQ(parse_class("The post is hateful.", kHate).label, ClassLabel::hate);
  EXPECT_EQ(parse_class("The post is hateful.", kOff).label, ClassLabel::unknown);
  EXPECT_EQ(parse_class("Not hateful at all", kHate).label, ClassLabel::not_hate);
}

TEST(ParseClass, EvidenceIsSubstringOfInput) {
  for (const std::string text : {"The post is Not Offensive!", "(A) something", "clearly offensive"}) {
    const auto parsed = parse_class(text, kOff);
    ASSERT_NE(parsed.label, ClassLabel::unknown);
    EXPECT_NE(text.find(parsed.evidence), std::string::npos);
  }
}

TEST(StripLeadIn, Variants) {
  EXPECT_EQ(strip_lead_in("Let's explain step by step.\nThe post mocks X."), "The post mocks X.");
  EXPECT_EQ(strip_lead_in("  let\xE2\x80\x99s explain step-by-step: The post."), "The post.");
  EXPECT_EQ(strip_lead_in("Lets think step by step\nR"), "R");
  EXPECT_EQ(strip_lead_in("The post is fine."), "The post is fine.");
  EXPECT_EQ(strip_lead_in("Let's explain step by step."), "");
  EXPECT_EQ(strip_lead_in("R\nLet's explain step by step."), "R\nLet's explain step by step.");
}

TEST(FilterAndTarget, AgreementKeepsRationale) {
  const auto p = post("p", BinaryLabel::hate, "hello");
  const auto ex = filter_and_target(sample("p", 0, ClassLabel::hate, "R"), p, kOff);
  EXPECT_EQ(ex.kind, ExampleKind::class_and_rationale);
  EXPECT_EQ(ex.target, "Offensive. Explanation: R");
  EXPECT_EQ(ex.input, "Determine whether the following post is offensive, and explain why.\nPost: hello");
}

TEST(FilterAndTarget, DisagreementOrUnknownDropsRationale) {
  const auto p = post("p", BinaryLabel::not_hate);
  for (const auto stage2 : {ClassLabel::hate, ClassLabel::unknown}) {
    const auto ex = filter_and_target(sample("p", 0, stage2), p, kHate);
    EXPECT_EQ(ex.kind, ExampleKind::class_only);
    EXPECT_EQ(ex.target, "Not hateful.");
  }
  // Agreement with an empty rationale has nothing to keep.
  EXPECT_EQ(filter_and_target(sample("p", 0, ClassLabel::not_hate, ""), p, kHate).kind, ExampleKind::class_only);
}

TEST(FilterAndTarget, TargetAlwaysStartsWithGoldClass) {
  // Property: the stage-1 class never leaks into the target.
  for (const auto gold : {BinaryLabel::hate, BinaryLabel::not_hate}) {
    for (const auto s1 : {ClassLabel::hate, ClassLabel::not_hate, ClassLabel::unknown}) {
      for (const auto s2 : {ClassLabel::hate, ClassLabel::not_hate, ClassLabel::unknown}) {
        auto s = sample("p", 0, s2);
        s.stage1_class = s1 == ClassLabel::unknown ? ParsedClass::unknown() : ParsedClass{s1, "y"};
        const auto ex = filter_and_target(s, post("p", gold), kOff);
        EXPECT_TRUE(ex.target.rfind(class_render(gold, kOff), 0) == 0);
        EXPECT_EQ(ex.kind == ExampleKind::class_and_rationale, s2 == to_class(gold));
      }
    }
  }
}

TEST(FilterAndTarget, MismatchedPostIsUsageError) {
  EXPECT_THROW(filter_and_target(sample("a", 0, ClassLabel::hate), post("b", BinaryLabel::hate), kOff), UsageError);
}

TEST(FilterAndTarget, NoInstructionPrefix) {
  TargetOptions options;
  options.instruction_prefix = false;
  EXPECT_EQ(filter_and_target(sample("p", 0, ClassLabel::hate), post("p", BinaryLabel::hate, "raw"), kOff, options).input,
            "raw");
}

TEST(BuildExamples, MixedAndFullyFailed) {
  const auto p = post("p", BinaryLabel::hate);
  const std::vector<RationaleSample> mixed{sample("p", 0, ClassLabel::hate), sample("p", 1, ClassLabel::not_hate),
                                           sample("p", 2, ClassLabel::unknown), sample("p", 3, ClassLabel::hate)};
  const auto ex = build_examples(p, mixed, kOff);
  ASSERT_EQ(ex.size(), 4u);
  EXPECT_EQ(std::count_if(ex.begin(), ex.end(), [](auto& e) { return e.kind == ExampleKind::class_only; }), 2);

  const std::vector<RationaleSample> failed{sample("p", 0, ClassLabel::not_hate), sample("p", 1, ClassLabel::unknown)};
  const auto one = build_examples(p, failed, kOff);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].kind, ExampleKind::class_only);
  TargetOptions keep;
  keep.dedup_class_only = false;
  EXPECT_EQ(build_examples(p, failed, kOff, keep).size(), 2u);
  EXPECT_TRUE(build_examples(p, {}, kOff).empty());
}

TEST(TwoStageExtract, ScriptedAgreement) {
  const json fixture = json::parse(R"({"posts": {"p": {"samples": [
      {"rationale": "R0", "stage1": "hate", "stage2": "hate"},
      {"rationale": "R1", "stage1": "hate", "stage2": "not_hate"},
      {"fail": true},
      {"rationale": "R3", "stage1": "not_hate", "stage2": "unknown"}]}}})");
  LlmClient client(std::make_shared<MockBackend>(0, fixture), ClientOptions{});
  ExtractOptions options;
  options.teacher.model_name = "teacher";
  const auto samples = two_stage_extract(client, post("p", BinaryLabel::hate), Variant::fr, 4, kOff, options);
  ASSERT_EQ(samples.size(), 4u);
  EXPECT_EQ(samples[0].rationale, "R0\nTherefore, the post is offensive.");
  EXPECT_EQ(samples[0].stage2_class.label, ClassLabel::hate);
  EXPECT_EQ(samples[1].stage2_class.label, ClassLabel::not_hate);
  EXPECT_FALSE(samples[2].error.empty());
  EXPECT_EQ(samples[2].stage2_class.label, ClassLabel::unknown);
  EXPECT_EQ(samples[3].stage1_class.label, ClassLabel::not_hate);
  EXPECT_EQ(samples[3].stage2_class.label, ClassLabel::unknown);
  for (std::uint32_t i = 0; i < 4; ++i) EXPECT_EQ(samples[i].sample_index, i);

  const auto ex = build_examples(post("p", BinaryLabel::hate), samples, kOff);
  EXPECT_EQ(std::count_if(ex.begin(), ex.end(), [](auto& e) { return e.kind == ExampleKind::class_and_rationale; }),
            1);
}

TEST(TrainingFile, FormatOrderingAndRoundTrip) {
  TempDir dir;
  const auto p1 = post("b", BinaryLabel::hate, "x");
  const auto p2 = post("a", BinaryLabel::not_hate, "y");
  std::vector<TrainingExample> examples{filter_and_target(sample("b", 1, ClassLabel::hate, "R1"), p1, kOff),
                                        filter_and_target(sample("b", 0, ClassLabel::hate, "R0"), p1, kOff),
                                        filter_and_target(sample("a", 0, ClassLabel::hate), p2, kOff)};
  const auto path = dir / "train.jsonl";
  EXPECT_EQ(emit_training_file(examples, path), 3u);
  const auto lines = read_jsonl(path);
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0]["post_id"], "a");
  EXPECT_EQ(lines[1]["target"], "Offensive. Explanation: R0");
  EXPECT_EQ(lines[2]["target"], "Offensive. Explanation: R1");
  for (const auto& line : lines) {
    EXPECT_EQ(line.size(), 4u);
    for (const char* key : {"post_id", "input", "target", "kind"}) EXPECT_TRUE(line.at(key).is_string());
  }
  const auto back = read_training_file(path);
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[0], examples[2]);
  EXPECT_EQ(back[1], examples[1]);
  EXPECT_EQ(back[2], examples[0]);
  // Emission is byte-stable regardless of input order.
  std::reverse(examples.begin(), examples.end());
  emit_training_file(examples, dir / "again.jsonl");
  EXPECT_EQ(read_text(path), read_text(dir / "again.jsonl"));
}

TEST(TrainingFile, BadLinesAreDataErrors) {
  TempDir dir;
  write_text_atomic(dir / "bad.jsonl", "{\"post_id\":\"a\",\"input\":\"i\",\"target\":\"t\",\"kind\":\"weird\"}\n");
  EXPECT_THROW(read_training_file(dir / "bad.jsonl"), DataError);
  write_text_atomic(dir / "bad2.jsonl", "{\"post_id\":\"a\"}\n");
  EXPECT_THROW(read_training_file(dir / "bad2.jsonl"), DataError);
}

TEST(AuditFile, RoundTrip) {
  TempDir dir;
  auto a = sample("z", 0, ClassLabel::hate);
  a.stage1_class = {ClassLabel::not_hate, "not offensive"};
  a.raw_stage1 = "Let's explain step by step.\nbecause reasons";
  a.raw_stage2 = "(A) Offensive";
  a.variant = Variant::co;
  auto b = sample("a", 2, ClassLabel::unknown, "");
  b.error = "HTTP 503";
  write_audit_file(dir / "audit.jsonl", {a, b});
  const auto back = read_audit_file(dir / "audit.jsonl");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0], b);
  EXPECT_EQ(back[1], a);
}

TEST(Variant, Parse) {
  EXPECT_EQ(parse_variant("co"), Variant::co);
  EXPECT_THROW(parse_variant("CoT"), UsageError);
}
