#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cotdistill/llm_client.hpp"
#include "cotdistill/types.hpp"

namespace cotdistill {

enum class Variant { fr, co };

std::string_view to_string(Variant variant);
Variant parse_variant(std::string_view text);

/// Reads a class out of free text. Rules, first match wins:
///   1. an option letter "(A)" / "(B)" (last occurrence), or a bare "A"/"B" answer;
///   2. a negated task word ("not offensive", "isn't really offensive", "non-offensive");
///   3. the task word on its own.
/// Matching is case-insensitive. Nothing matched means unknown.
ParsedClass parse_class(std::string_view text, const TaskVocabulary& vocab);

/// Drops a leading "Let's explain step by step" restatement, then trims.
std::string strip_lead_in(std::string_view completion);

struct RationaleSample {
  std::string post_id;
  Variant variant = Variant::fr;
  std::uint32_t sample_index = 0;
  std::string rationale;
  ParsedClass stage1_class;
  ParsedClass stage2_class;
  std::string raw_stage1;
  std::string raw_stage2;
  std::string error;  // transport failure in either stage

  friend bool operator==(const RationaleSample&, const RationaleSample&) = default;
};

void to_json(nlohmann::json& j, const RationaleSample& s);
void from_json(const nlohmann::json& j, RationaleSample& s);

struct ExtractOptions {
  SampleParams teacher;  // stage 1
  SampleParams stage2{.model_name = {}, .temperature = 0.0, .top_p = 1.0, .max_tokens = 16};
};

/// Stage 1 samples k rationales from the variant prompt; stage 2 asks the
/// teacher for the class given each rationale. Request failures become
/// samples with unknown classes, never exceptions.
std::vector<RationaleSample> two_stage_extract(LlmClient& client, const PostRecord& post, Variant variant,
                                               std::size_t k, const TaskVocabulary& vocab,
                                               const ExtractOptions& options);

enum class ExampleKind { class_and_rationale, class_only };

std::string_view to_string(ExampleKind kind);
ExampleKind parse_example_kind(std::string_view text);

struct TrainingExample {
  std::string post_id;
  std::uint32_t sample_index = 0;  // ordering only; not serialized
  std::string input;
  std::string target;
  ExampleKind kind = ExampleKind::class_only;

  friend bool operator==(const TrainingExample& a, const TrainingExample& b) {
    return a.post_id == b.post_id && a.input == b.input && a.target == b.target && a.kind == b.kind;
  }
};

inline constexpr std::string_view kExplanationSeparator = " Explanation: ";

/// "Offensive." / "Not hateful." and so on.
std::string class_render(BinaryLabel label, const TaskVocabulary& vocab);

struct TargetOptions {
  bool instruction_prefix = true;  // student input = instruction + "\nPost: " + post
  bool dedup_class_only = true;    // fully-failed posts emit a single class-only example
};

std::string student_input(const PostRecord& post, const TaskVocabulary& vocab, const TargetOptions& options);

/// Keeps the rationale only when the stage-2 class equals gold.
TrainingExample filter_and_target(const RationaleSample& sample, const PostRecord& post,
                                  const TaskVocabulary& vocab, const TargetOptions& options = {});

/// All examples for one post, with class-only deduplication applied.
std::vector<TrainingExample> build_examples(const PostRecord& post, const std::vector<RationaleSample>& samples,
                                            const TaskVocabulary& vocab, const TargetOptions& options = {});

/// Writes {post_id, input, target, kind} lines sorted by (post_id,
/// sample_index). Returns the number of lines.
std::size_t emit_training_file(std::vector<TrainingExample> examples, const std::filesystem::path& path);

std::vector<TrainingExample> read_training_file(const std::filesystem::path& path);

void write_audit_file(const std::filesystem::path& path, std::vector<RationaleSample> samples);
std::vector<RationaleSample> read_audit_file(const std::filesystem::path& path);

}  // namespace cotdistill
