#include "cotdistill/prompting.hpp"

namespace cotdistill {

namespace assets {
std::string_view template_source(std::string_view name);
}

namespace {

void require_non_empty(std::string_view value, const char* what) {
  if (trim(value).empty()) throw UsageError(std::string(what) + " must not be empty");
}

PromptText make(TemplateId id, std::string text, const TaskVocabulary& vocab) {
  return PromptText{std::move(text), id, vocab};
}

}  // namespace

std::string_view to_string(TemplateId id) {
  switch (id) {
    case TemplateId::fr_stage1: return "fr_stage1";
    case TemplateId::co_stage1: return "co_stage1";
    case TemplateId::stage2_class: return "stage2_class";
    case TemplateId::judge_single: return "judge_single";
    case TemplateId::judge_pairwise: return "judge_pairwise";
  }
  return "fr_stage1";
}

TemplateId parse_template_id(std::string_view text) {
  for (auto id : {TemplateId::fr_stage1, TemplateId::co_stage1, TemplateId::stage2_class,
                  TemplateId::judge_single, TemplateId::judge_pairwise}) {
    if (to_string(id) == text) return id;
  }
  throw UsageError("unknown template '" + std::string(text) + "'");
}

std::string_view template_source(TemplateId id) {
  const auto source = assets::template_source(to_string(id));
  if (source.empty()) throw std::logic_error("template asset missing: " + std::string(to_string(id)));
  return source;
}

std::string substitute(std::string_view tmpl,
                       const std::vector<std::pair<std::string_view, std::string_view>>& values) {
  std::string out;
  out.reserve(tmpl.size() + 256);
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find("{{", pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    const auto close = tmpl.find("}}", open + 2);
    if (close == std::string_view::npos) throw UsageError("unterminated placeholder in template");
    out.append(tmpl.substr(pos, open - pos));
    const auto name = tmpl.substr(open + 2, close - open - 2);
    auto it = std::find_if(values.begin(), values.end(), [&](const auto& kv) { return kv.first == name; });
    if (it == values.end()) throw UsageError("unresolved placeholder '{{" + std::string(name) + "}}'");
    out.append(it->second);
    pos = close + 2;
  }
  return out;
}

std::string join_annotations(const std::vector<std::string>& values) {
  std::string out;
  for (const auto& v : values) {
    if (!out.empty()) out.append(kAnnotationJoiner);
    out.append(v);
  }
  return out;
}

PromptText render_fr_prompt(const PostRecord& post, const TaskVocabulary& vocab) {
  require_non_empty(post.post, "post");
  return make(TemplateId::fr_stage1,
              substitute(template_source(TemplateId::fr_stage1),
                         {{"positive_word", vocab.positive_word}, {"post", post.post}}),
              vocab);
}

PromptText render_co_prompt(const PostRecord& post, const TaskVocabulary& vocab) {
  if (!post.has_annotations()) return render_fr_prompt(post, vocab);
  require_non_empty(post.post, "post");
  const std::string target = join_annotations(post.targets);
  const std::string implied = join_annotations(post.implied_statements);
  return make(TemplateId::co_stage1,
              substitute(template_source(TemplateId::co_stage1), {{"positive_word", vocab.positive_word},
                                                                  {"post", post.post},
                                                                  {"target", target},
                                                                  {"implied", implied}}),
              vocab);
}

PromptText render_stage2_prompt(const PostRecord& post, std::string_view rationale,
                                const TaskVocabulary& vocab) {
  require_non_empty(post.post, "post");
  require_non_empty(rationale, "rationale");
  return make(TemplateId::stage2_class,
              substitute(template_source(TemplateId::stage2_class),
                         {{"positive_word", vocab.positive_word},
                          {"post", post.post},
                          {"rationale", rationale},
                          {"positive_label", vocab.positive_label_render},
                          {"negative_label", vocab.negative_label_render}}),
              vocab);
}

PromptText render_judge_single(const PostRecord& post, std::string_view answer) {
  require_non_empty(post.post, "post");
  require_non_empty(answer, "answer");
  return make(TemplateId::judge_single,
              substitute(template_source(TemplateId::judge_single), {{"post", post.post}, {"answer", answer}}),
              TaskVocabulary::offensive());
}

PromptText render_judge_pairwise(const PostRecord& post, std::string_view answer_a,
                                 std::string_view answer_b) {
  require_non_empty(post.post, "post");
  if (post.targets.empty() || post.implied_statements.empty()) {
    throw UsageError("pairwise judging needs target and implied statement annotations (post " + post.id + ")");
  }
  require_non_empty(answer_a, "answer A");
  require_non_empty(answer_b, "answer B");
  const std::string target = join_annotations(post.targets);
  const std::string implied = join_annotations(post.implied_statements);
  return make(TemplateId::judge_pairwise,
              substitute(template_source(TemplateId::judge_pairwise), {{"target", target},
                                                                       {"implied", implied},
                                                                       {"post", post.post},
                                                                       {"answer_a", answer_a},
                                                                       {"answer_b", answer_b}}),
              TaskVocabulary::offensive());
}

std::string instruction_sentence(const TaskVocabulary& vocab) {
  const auto source = template_source(TemplateId::fr_stage1);
  return substitute(source.substr(0, source.find('\n')), {{"positive_word", vocab.positive_word}});
}

}  // namespace cotdistill
