#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cotdistill/types.hpp"

namespace cotdistill {

enum class TemplateId { fr_stage1, co_stage1, stage2_class, judge_single, judge_pairwise };

std::string_view to_string(TemplateId id);
TemplateId parse_template_id(std::string_view text);

struct PromptText {
  std::string text;
  TemplateId template_id = TemplateId::fr_stage1;
  TaskVocabulary vocabulary;

  friend bool operator==(const PromptText&, const PromptText&) = default;
};

/// Raw template asset (placeholders unresolved).
std::string_view template_source(TemplateId id);

/// Substitutes `{{name}}` placeholders in one left-to-right pass. Throws
/// UsageError if the template names a placeholder missing from `values`.
std::string substitute(std::string_view tmpl,
                       const std::vector<std::pair<std::string_view, std::string_view>>& values);

// Separator used when a post carries several targets or implied statements.
inline constexpr std::string_view kAnnotationJoiner = "; ";

std::string join_annotations(const std::vector<std::string>& values);

PromptText render_fr_prompt(const PostRecord& post, const TaskVocabulary& vocab);

/// Co prompt, using the target and implied-statement annotations.
/// Falls back to the Fr prompt for posts without annotations.
PromptText render_co_prompt(const PostRecord& post, const TaskVocabulary& vocab);

PromptText render_stage2_prompt(const PostRecord& post, std::string_view rationale,
                                const TaskVocabulary& vocab);

PromptText render_judge_single(const PostRecord& post, std::string_view answer);

/// Requires both targets and implied statements on `post`.
PromptText render_judge_pairwise(const PostRecord& post, std::string_view answer_a,
                                 std::string_view answer_b);

/// First line of the Fr prompt, used as the student instruction.
std::string instruction_sentence(const TaskVocabulary& vocab);

}  // namespace cotdistill
