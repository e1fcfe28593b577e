#include "cotdistill/llm_client.hpp"

#include <cmath>
#include <thread>

#include <spdlog/spdlog.h>

#include "cotdistill/io.hpp"

namespace cotdistill {

std::string_view to_string(FinishReason reason) {
  switch (reason) {
    case FinishReason::stop: return "stop";
    case FinishReason::length: return "length";
    case FinishReason::content_filter: return "content_filter";
    case FinishReason::error: return "error";
  }
  return "error";
}

FinishReason parse_finish_reason(std::string_view text) {
  if (text == "length") return FinishReason::length;
  if (text == "content_filter") return FinishReason::content_filter;
  if (text == "error") return FinishReason::error;
  return FinishReason::stop;
}

std::string_view to_string(TransportErrorKind kind) {
  switch (kind) {
    case TransportErrorKind::retries_exhausted: return "retries_exhausted";
    case TransportErrorKind::authentication: return "authentication";
    case TransportErrorKind::malformed_response: return "malformed_response";
    case TransportErrorKind::request_rejected: return "request_rejected";
    case TransportErrorKind::unavailable: return "unavailable";
  }
  return "unavailable";
}

CacheKey cache_key(const CompletionRequest& request) {
  const json keyed = json::array({request.model_name, request.prompt.text, request.temperature, request.top_p,
                                  request.max_tokens, request.sample_index});
  return CacheKey{sha256_hex(keyed.dump())};
}

void LlmClient::Gate::acquire() {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [&] { return active_ < limit_; });
  ++active_;
  peak_ = std::max(peak_, active_);
}

void LlmClient::Gate::release() {
  {
    std::lock_guard lock(mutex_);
    --active_;
  }
  cv_.notify_one();
}

std::size_t LlmClient::Gate::peak() const {
  std::lock_guard lock(mutex_);
  return peak_;
}

LlmClient::LlmClient(std::shared_ptr<Backend> backend, ClientOptions options)
    : backend_(std::move(backend)),
      options_(std::move(options)),
      gate_(options_.max_in_flight),
      rng_(options_.jitter_seed) {
  if (!backend_) throw UsageError("no completion backend configured");
  if (options_.retry.max_attempts < 1) throw UsageError("retry attempts must be at least 1");
  if (options_.cache_dir) cache_.emplace(*options_.cache_dir);
}

void LlmClient::pace() {
  if (options_.requests_per_minute <= 0) return;
  const auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(60.0 / options_.requests_per_minute));
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(pace_mutex_);
    slot = std::max(std::chrono::steady_clock::now(), next_slot_);
    next_slot_ = slot + interval;
  }
  std::this_thread::sleep_until(slot);
}

std::chrono::milliseconds LlmClient::backoff(int attempt, std::optional<std::chrono::milliseconds> hint) {
  double factor;
  {
    std::lock_guard lock(rng_mutex_);
    std::uniform_real_distribution<double> dist(1.0 - options_.retry.jitter, 1.0 + options_.retry.jitter);
    factor = dist(rng_);
  }
  const double base = static_cast<double>(options_.retry.base_delay.count()) * std::pow(2.0, attempt - 1) * factor;
  auto delay = std::chrono::milliseconds(static_cast<std::int64_t>(base));
  if (hint) delay = std::max(delay, *hint);
  return std::min(delay, options_.retry.max_delay);
}

CompletionResponse LlmClient::complete(const CompletionRequest& request) {
  if (request.max_tokens < 1) throw UsageError("max_tokens must be at least 1");
  if (request.temperature < 0) throw UsageError("temperature must be non-negative");
  if (!(request.top_p > 0.0 && request.top_p <= 1.0)) throw UsageError("top_p must be in (0, 1]");

  ++requests_;
  const CacheKey key = cache_key(request);
  if (cache_) {
    if (auto hit = cache_->load(key)) {
      ++cache_hits_;
      return *hit;
    }
  }

  std::string last_error;
  for (int attempt = 1; attempt <= options_.retry.max_attempts; ++attempt) {
    pace();
    const auto started = std::chrono::steady_clock::now();
    ++backend_calls_;
    if (backend_->is_network()) ++network_calls_;
    try {
      BackendReply reply;
      {
        gate_.acquire();
        struct Release {
          Gate& gate;
          ~Release() { gate.release(); }
        } release{gate_};
        reply = backend_->send(request);
      }
      if (reply.text.empty() && (reply.finish_reason == FinishReason::stop || reply.finish_reason == FinishReason::length)) {
        throw TransportError(TransportErrorKind::malformed_response, "endpoint returned an empty completion");
      }
      CompletionResponse response;
      response.text = std::move(reply.text);
      response.finish_reason = reply.finish_reason;
      response.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                std::chrono::steady_clock::now() - started)
                                .count();
      if (cache_) cache_->store(key, request, response);
      return response;
    } catch (const TransportError& e) {
      last_error = e.what();
      if (!e.retryable()) {
        ++errors_;
        throw;
      }
      if (attempt == options_.retry.max_attempts) break;
      ++retries_;
      const auto delay = backoff(attempt, e.retry_after());
      spdlog::debug("retrying request after {} ms: {}", delay.count(), e.what());
      std::this_thread::sleep_for(delay);
    }
  }
  ++errors_;
  throw TransportError(TransportErrorKind::retries_exhausted,
                       "gave up after " + std::to_string(options_.retry.max_attempts) + " attempts: " + last_error);
}

std::vector<CompletionResponse> LlmClient::sample_k(const PromptText& prompt, std::size_t k,
                                                    const SampleParams& params, const RequestMeta& meta) {
  if (k < 1) throw UsageError("k must be at least 1");
  if (k > 1 && params.temperature <= 0) throw UsageError("distinct samples need temperature > 0 when k > 1");
  std::vector<CompletionResponse> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    CompletionRequest request{prompt, params.model_name, params.temperature, params.top_p,
                              params.max_tokens, static_cast<std::uint32_t>(i), meta};
    try {
      out.push_back(complete(request));
    } catch (const TransportError& e) {
      CompletionResponse failed;
      failed.finish_reason = FinishReason::error;
      failed.error = e.what();
      out.push_back(std::move(failed));
    }
  }
  return out;
}

ClientStats LlmClient::stats() const {
  ClientStats s;
  s.requests = requests_;
  s.cache_hits = cache_hits_;
  s.backend_calls = backend_calls_;
  s.network_calls = network_calls_;
  s.retries = retries_;
  s.errors = errors_;
  s.peak_in_flight = gate_.peak();
  return s;
}

}  // namespace cotdistill
