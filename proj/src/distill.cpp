#include "cotdistill/distill.hpp"

#include <algorithm>
#include <regex>

#include "cotdistill/io.hpp"
#include "cotdistill/prompting.hpp"

namespace cotdistill {
namespace {

std::string regex_escape(std::string_view text) {
  static const std::regex special(R"([.^$|()\[\]{}*+?\\])");
  return std::regex_replace(std::string(text), special, R"(\$&)");
}

struct Match {
  std::size_t position = 0;
  std::size_t length = 0;
  bool found = false;
};

Match last_match(const std::string& haystack, const std::regex& re, std::size_t group = 0) {
  Match m;
  for (auto it = std::sregex_iterator(haystack.begin(), haystack.end(), re); it != std::sregex_iterator(); ++it) {
    m.position = static_cast<std::size_t>(it->position(group));
    m.length = static_cast<std::size_t>(it->length(group));
    m.found = true;
  }
  return m;
}

Match first_match(const std::string& haystack, const std::regex& re) {
  std::smatch sm;
  if (!std::regex_search(haystack, sm, re)) return {};
  return {static_cast<std::size_t>(sm.position(0)), static_cast<std::size_t>(sm.length(0)), true};
}

ParsedClass found(ClassLabel label, std::string_view text, const Match& m) {
  return ParsedClass{label, std::string(text.substr(m.position, m.length))};
}

}  // namespace

std::string_view to_string(Variant variant) { return variant == Variant::fr ? "fr" : "co"; }

Variant parse_variant(std::string_view text) {
  if (text == "fr") return Variant::fr;
  if (text == "co") return Variant::co;
  throw UsageError("unknown variant '" + std::string(text) + "' (expected fr or co)");
}

std::string_view to_string(ExampleKind kind) {
  return kind == ExampleKind::class_and_rationale ? "class_and_rationale" : "class_only";
}

ExampleKind parse_example_kind(std::string_view text) {
  if (text == "class_and_rationale") return ExampleKind::class_and_rationale;
  if (text == "class_only") return ExampleKind::class_only;
  throw DataError("unknown example kind '" + std::string(text) + "'");
}

ParsedClass parse_class(std::string_view text, const TaskVocabulary& vocab) {
  // Lowercasing is ASCII-only, so byte offsets line up with `text`.
  const std::string lower = to_lower_ascii(text);

  static const std::regex option_re(R"(\(([ab])\))");
  if (const Match m = last_match(lower, option_re); m.found) {
    return found(lower[m.position + 1] == 'a' ? ClassLabel::hate : ClassLabel::not_hate, text, m);
  }
  static const std::regex bare_re(R"(^\s*(?:answer\s*:\s*)?([ab])\s*[.):]?\s*$)");
  if (std::smatch sm; std::regex_match(lower, sm, bare_re)) {
    const Match m{static_cast<std::size_t>(sm.position(1)), 1, true};
    return found(sm.str(1) == "a" ? ClassLabel::hate : ClassLabel::not_hate, text, m);
  }

  const std::string word = regex_escape(to_lower_ascii(vocab.positive_word));
  const std::regex negated_re("(?:\\bnot|\\bnever|n(?:'|\xE2\x80\x99)t|\\bnon)[\\s-]+(?:[a-z]+\\s+){0,3}?" + word +
                              "\\b|\\bin" + word + "\\b");
  if (const Match m = first_match(lower, negated_re); m.found) return found(ClassLabel::not_hate, text, m);

  const std::regex positive_re("\\b" + word + "\\b");
  if (const Match m = first_match(lower, positive_re); m.found) return found(ClassLabel::hate, text, m);

  return ParsedClass::unknown();
}

std::string strip_lead_in(std::string_view completion) {
  std::string text = trim(completion);
  static const std::regex lead_in(R"(^let(?:'|\xE2\x80\x99)?s (?:explain|think) step[ -]by[ -]step[.:!]*[ \t]*\r?\n?)",
                                  std::regex::icase);
  std::smatch sm;
  if (std::regex_search(text, sm, lead_in)) text.erase(0, static_cast<std::size_t>(sm.length(0)));
  return trim(text);
}

void to_json(json& j, const RationaleSample& s) {
  j = json{{"post_id", s.post_id},
           {"variant", to_string(s.variant)},
           {"sample_index", s.sample_index},
           {"rationale", s.rationale},
           {"stage1_class", s.stage1_class},
           {"stage2_class", s.stage2_class},
           {"raw_stage1", s.raw_stage1},
           {"raw_stage2", s.raw_stage2}};
  if (!s.error.empty()) j["error"] = s.error;
}

void from_json(const json& j, RationaleSample& s) {
  s.post_id = j.at("post_id").get<std::string>();
  s.variant = parse_variant(j.at("variant").get<std::string>());
  s.sample_index = j.at("sample_index").get<std::uint32_t>();
  s.rationale = j.at("rationale").get<std::string>();
  s.stage1_class = j.at("stage1_class").get<ParsedClass>();
  s.stage2_class = j.at("stage2_class").get<ParsedClass>();
  s.raw_stage1 = j.at("raw_stage1").get<std::string>();
  s.raw_stage2 = j.at("raw_stage2").get<std::string>();
  s.error = j.value("error", std::string{});
}

std::vector<RationaleSample> two_stage_extract(LlmClient& client, const PostRecord& post, Variant variant,
                                               std::size_t k, const TaskVocabulary& vocab,
                                               const ExtractOptions& options) {
  const PromptText prompt = variant == Variant::fr ? render_fr_prompt(post, vocab) : render_co_prompt(post, vocab);
  const auto responses = client.sample_k(prompt, k, options.teacher, RequestMeta{post.id, "stage1"});

  std::vector<RationaleSample> samples;
  samples.reserve(k);
  for (std::size_t i = 0; i < responses.size(); ++i) {
    const auto& response = responses[i];
    RationaleSample s;
    s.post_id = post.id;
    s.variant = variant;
    s.sample_index = static_cast<std::uint32_t>(i);
    if (!response.ok()) {
      s.error = response.error;
      samples.push_back(std::move(s));
      continue;
    }
    s.raw_stage1 = response.text;
    s.rationale = strip_lead_in(response.text);
    s.stage1_class = parse_class(s.rationale, vocab);
    if (!s.rationale.empty()) {
      CompletionRequest request{render_stage2_prompt(post, s.rationale, vocab),
                                options.stage2.model_name.empty() ? options.teacher.model_name
                                                                  : options.stage2.model_name,
                                options.stage2.temperature,
                                options.stage2.top_p,
                                options.stage2.max_tokens,
                                s.sample_index,
                                RequestMeta{post.id, "stage2"}};
      try {
        s.raw_stage2 = client.complete(request).text;
        s.stage2_class = parse_class(s.raw_stage2, vocab);
      } catch (const TransportError& e) {
        s.error = e.what();
      }
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

std::string class_render(BinaryLabel label, const TaskVocabulary& vocab) {
  return std::string(vocab.render(label)) + ".";
}

std::string student_input(const PostRecord& post, const TaskVocabulary& vocab, const TargetOptions& options) {
  if (!options.instruction_prefix) return post.post;
  return instruction_sentence(vocab) + "\nPost: " + post.post;
}

TrainingExample filter_and_target(const RationaleSample& sample, const PostRecord& post,
                                  const TaskVocabulary& vocab, const TargetOptions& options) {
  if (sample.post_id != post.id) throw UsageError("sample for '" + sample.post_id + "' paired with post '" + post.id + "'");
  TrainingExample ex;
  ex.post_id = post.id;
  ex.sample_index = sample.sample_index;
  ex.input = student_input(post, vocab, options);
  ex.target = class_render(post.gold_label, vocab);
  if (sample.stage2_class.matches(post.gold_label) && !sample.rationale.empty()) {
    ex.kind = ExampleKind::class_and_rationale;
    ex.target += std::string(kExplanationSeparator) + sample.rationale;
  } else {
    ex.kind = ExampleKind::class_only;
  }
  return ex;
}

std::vector<TrainingExample> build_examples(const PostRecord& post, const std::vector<RationaleSample>& samples,
                                            const TaskVocabulary& vocab, const TargetOptions& options) {
  std::vector<TrainingExample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(filter_and_target(s, post, vocab, options));
  const bool all_failed = !out.empty() && std::all_of(out.begin(), out.end(), [](const TrainingExample& e) {
    return e.kind == ExampleKind::class_only;
  });
  if (options.dedup_class_only && all_failed) out.resize(1);
  return out;
}

std::size_t emit_training_file(std::vector<TrainingExample> examples, const std::filesystem::path& path) {
  std::stable_sort(examples.begin(), examples.end(), [](const TrainingExample& a, const TrainingExample& b) {
    return std::tie(a.post_id, a.sample_index) < std::tie(b.post_id, b.sample_index);
  });
  std::vector<json> lines;
  lines.reserve(examples.size());
  for (const auto& e : examples) {
    lines.push_back(json{{"post_id", e.post_id}, {"input", e.input}, {"target", e.target}, {"kind", to_string(e.kind)}});
  }
  write_jsonl(path, lines);
  return lines.size();
}

std::vector<TrainingExample> read_training_file(const std::filesystem::path& path) {
  std::vector<TrainingExample> out;
  for (const auto& line : read_jsonl(path)) {
    try {
      TrainingExample e;
      e.post_id = line.at("post_id").get<std::string>();
      e.input = line.at("input").get<std::string>();
      e.target = line.at("target").get<std::string>();
      e.kind = parse_example_kind(line.at("kind").get<std::string>());
      e.sample_index = out.empty() || out.back().post_id != e.post_id ? 0 : out.back().sample_index + 1;
      out.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw DataError("'" + path.string() + "': bad training example: " + ex.what());
    }
  }
  return out;
}

void write_audit_file(const std::filesystem::path& path, std::vector<RationaleSample> samples) {
  std::stable_sort(samples.begin(), samples.end(), [](const RationaleSample& a, const RationaleSample& b) {
    return std::tie(a.post_id, a.sample_index) < std::tie(b.post_id, b.sample_index);
  });
  std::vector<json> lines(samples.begin(), samples.end());
  write_jsonl(path, lines);
}

std::vector<RationaleSample> read_audit_file(const std::filesystem::path& path) {
  std::vector<RationaleSample> out;
  for (const auto& line : read_jsonl(path)) {
    try {
      out.push_back(line.get<RationaleSample>());
    } catch (const json::exception& e) {
      throw DataError("'" + path.string() + "': bad audit line: " + e.what());
    }
  }
  return out;
}

}  // namespace cotdistill
