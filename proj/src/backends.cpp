#include <cstdlib>
#include <regex>

#include <httplib.h>

#include "cotdistill/io.hpp"
#include "cotdistill/llm_client.hpp"

namespace cotdistill {

// ---------------------------------------------------------------------------
// HTTP

HttpBackendOptions HttpBackendOptions::from_environment() {
  HttpBackendOptions options;
  const char* url = std::getenv("OPENAI_BASE_URL");
  options.base_url = url && *url ? url : "https://api.openai.com/v1";
  const char* key = std::getenv("OPENAI_API_KEY");
  options.api_key = key ? key : "";
  return options;
}

HttpBackend::HttpBackend(HttpBackendOptions options) : options_(std::move(options)) {
  static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)", std::regex::icase);
  std::smatch match;
  if (!std::regex_match(options_.base_url, match, url_re)) {
    throw UsageError("invalid endpoint URL '" + options_.base_url + "'");
  }
  host_ = match[1].str();
  path_prefix_ = match[2].matched ? match[2].str() : "";
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

json HttpBackend::request_body(const CompletionRequest& request) {
  return json{{"model", request.model_name},
              {"messages", json::array({{{"role", "user"}, {"content", request.prompt.text}}})},
              {"temperature", request.temperature},
              {"top_p", request.top_p},
              {"max_tokens", request.max_tokens}};
}

BackendReply HttpBackend::parse_body(const std::string& body) {
  try {
    const json doc = json::parse(body);
    const auto& choice = doc.at("choices").at(0);
    BackendReply reply;
    const auto& content = choice.at("message").at("content");
    reply.text = content.is_null() ? std::string{} : content.get<std::string>();
    const auto finish = choice.value("finish_reason", json("stop"));
    reply.finish_reason = finish.is_string() ? parse_finish_reason(finish.get<std::string>()) : FinishReason::stop;
    return reply;
  } catch (const json::exception& e) {
    throw TransportError(TransportErrorKind::malformed_response, std::string("malformed endpoint response: ") + e.what());
  }
}

BackendReply HttpBackend::send(const CompletionRequest& request) {
  httplib::Client client(host_);
  client.set_connection_timeout(options_.timeout);
  client.set_read_timeout(options_.timeout);
  client.set_write_timeout(options_.timeout);
  httplib::Headers headers;
  if (!options_.api_key.empty()) headers.emplace("Authorization", "Bearer " + options_.api_key);

  const auto result =
      client.Post(path_prefix_ + "/chat/completions", headers, request_body(request).dump(), "application/json");
  if (!result) {
    throw TransportError(TransportErrorKind::unavailable, "request failed: " + httplib::to_string(result.error()),
                         /*retryable=*/true);
  }
  const int status = result->status;
  if (status == 200) return parse_body(result->body);

  std::optional<std::chrono::milliseconds> retry_after;
  if (result->has_header("Retry-After")) {
    try {
      retry_after = std::chrono::milliseconds(
          static_cast<std::int64_t>(std::stod(result->get_header_value("Retry-After")) * 1000.0));
    } catch (const std::exception&) {
    }
  }
  const std::string what = "endpoint returned HTTP " + std::to_string(status);
  if (status == 401 || status == 403) throw TransportError(TransportErrorKind::authentication, what);
  if (status == 429 || status >= 500) {
    throw TransportError(TransportErrorKind::unavailable, what, /*retryable=*/true, retry_after);
  }
  throw TransportError(TransportErrorKind::request_rejected, what + ": " + result->body.substr(0, 200));
}

// ---------------------------------------------------------------------------
// Mock

namespace {

std::string conclusion(ClassLabel label, const TaskVocabulary& vocab) {
  switch (label) {
    case ClassLabel::hate: return "Therefore, the post is " + vocab.positive_word + ".";
    case ClassLabel::not_hate: return "Therefore, the post is not " + vocab.positive_word + ".";
    case ClassLabel::unknown: return "I cannot determine this.";
  }
  return "I cannot determine this.";
}

std::string option_reply(ClassLabel label, const TaskVocabulary& vocab) {
  switch (label) {
    case ClassLabel::hate: return "(A) " + vocab.positive_label_render;
    case ClassLabel::not_hate: return "(B) " + vocab.negative_label_render;
    case ClassLabel::unknown: return "I cannot determine this.";
  }
  return "I cannot determine this.";
}

const json* lookup(const json& node, std::string_view key) {
  if (!node.is_object()) return nullptr;
  auto it = node.find(std::string(key));
  return it == node.end() ? nullptr : &*it;
}

}  // namespace

MockBackend::MockBackend(std::uint64_t seed, json fixture) : seed_(seed), fixture_(std::move(fixture)) {
  if (fixture_.is_null()) fixture_ = json::object();
}

std::uint64_t MockBackend::hash_of(const CompletionRequest& request) const {
  const auto digest = sha256_hex(cache_key(request).digest + ":" + std::to_string(seed_));
  return std::stoull(digest.substr(0, 16), nullptr, 16);
}

const json* MockBackend::sample_script(const CompletionRequest& request) const {
  const json* posts = lookup(fixture_, "posts");
  const json* post = posts ? lookup(*posts, request.meta.post_id) : nullptr;
  const json* samples = post ? lookup(*post, "samples") : nullptr;
  if (!samples || !samples->is_array() || request.sample_index >= samples->size()) return nullptr;
  return &(*samples)[request.sample_index];
}

BackendReply MockBackend::send(const CompletionRequest& request) {
  const auto& vocab = request.prompt.vocabulary;
  const std::uint64_t h = hash_of(request);
  const json* script = nullptr;
  switch (request.prompt.template_id) {
    case TemplateId::fr_stage1:
    case TemplateId::co_stage1:
    case TemplateId::stage2_class: script = sample_script(request); break;
    default: break;
  }
  if (script && script->value("fail", false)) {
    throw TransportError(TransportErrorKind::request_rejected, "mock: scripted failure for " + request.meta.post_id);
  }

  BackendReply reply;
  switch (request.prompt.template_id) {
    case TemplateId::fr_stage1:
    case TemplateId::co_stage1: {
      if (script) {
        const auto label = parse_class_label(script->value("stage1", std::string("unknown")));
        reply.text = "Let's explain step by step.\n" + script->value("rationale", std::string("No rationale.")) + "\n" +
                     conclusion(label, vocab);
      } else {
        char hex[17];
        std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
        const auto label = (h & 1U) ? ClassLabel::hate : ClassLabel::not_hate;
        reply.text = std::string("Mock rationale ") + hex + " weighs the wording and context of the post.\n" +
                     conclusion(label, vocab);
      }
      break;
    }
    case TemplateId::stage2_class: {
      const auto label = script ? parse_class_label(script->value("stage2", std::string("unknown")))
                                : ((h >> 1) & 1U) ? ClassLabel::hate : ClassLabel::not_hate;
      reply.text = option_reply(label, vocab);
      break;
    }
    case TemplateId::judge_single: {
      const json* judge = lookup(fixture_, "judge");
      const json* single = judge ? lookup(*judge, "single") : nullptr;
      if (single && single->is_object()) single = lookup(*single, request.meta.route);
      reply.text = single && single->is_string() ? single->get<std::string>()
                                                 : "Mock judgement. [[" + std::to_string(1 + h % 10) + "]]";
      break;
    }
    case TemplateId::judge_pairwise: {
      const json* judge = lookup(fixture_, "judge");
      const json* pairwise = judge ? lookup(*judge, "pairwise") : nullptr;
      if (pairwise && pairwise->is_object()) pairwise = lookup(*pairwise, request.meta.route);
      static constexpr const char* kLetters[] = {"A", "B", "C"};
      reply.text = pairwise && pairwise->is_string() ? pairwise->get<std::string>()
                                                     : std::string("Mock comparison. [[") + kLetters[h % 3] + "]]";
      break;
    }
  }
  return reply;
}

}  // namespace cotdistill
