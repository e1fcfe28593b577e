#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cotdistill/prompting.hpp"
#include "cotdistill/types.hpp"

namespace cotdistill {

enum class FinishReason { stop, length, content_filter, error };

std::string_view to_string(FinishReason reason);
FinishReason parse_finish_reason(std::string_view text);

// Routing hints for scripted backends. Not part of the cache key.
struct RequestMeta {
  std::string post_id;
  std::string route;
};

struct CompletionRequest {
  PromptText prompt;
  std::string model_name;
  double temperature = 0.0;
  double top_p = 1.0;
  int max_tokens = 512;
  std::uint32_t sample_index = 0;
  RequestMeta meta;
};

struct CompletionResponse {
  std::string text;
  FinishReason finish_reason = FinishReason::stop;
  bool cached = false;
  std::int64_t latency_ms = 0;
  std::string error;  // set when finish_reason == error

  bool ok() const { return finish_reason != FinishReason::error; }
};

struct CacheKey {
  std::string digest;  // 64 lowercase hex chars
  friend bool operator==(const CacheKey&, const CacheKey&) = default;
};

/// SHA-256 over (model, prompt text, temperature, top_p, max_tokens,
/// sample_index), serialized canonically so the digest survives restarts.
CacheKey cache_key(const CompletionRequest& request);

enum class TransportErrorKind {
  retries_exhausted,
  authentication,
  malformed_response,
  request_rejected,
  unavailable,
};

std::string_view to_string(TransportErrorKind kind);

class TransportError : public Error {
 public:
  TransportError(TransportErrorKind kind, const std::string& what, bool retryable = false,
                 std::optional<std::chrono::milliseconds> retry_after = std::nullopt)
      : Error(ErrorCategory::transport, what), kind_(kind), retryable_(retryable), retry_after_(retry_after) {}

  TransportErrorKind kind() const noexcept { return kind_; }
  bool retryable() const noexcept { return retryable_; }
  std::optional<std::chrono::milliseconds> retry_after() const noexcept { return retry_after_; }

 private:
  TransportErrorKind kind_;
  bool retryable_;
  std::optional<std::chrono::milliseconds> retry_after_;
};

struct BackendReply {
  std::string text;
  FinishReason finish_reason = FinishReason::stop;
};

/// One completion attempt. Throws TransportError; retryable() marks failures
/// the client may retry (429, 5xx, connection loss).
class Backend {
 public:
  virtual ~Backend() = default;
  virtual BackendReply send(const CompletionRequest& request) = 0;
  virtual bool is_network() const = 0;
};

struct HttpBackendOptions {
  std::string base_url;  // e.g. https://api.openai.com/v1
  std::string api_key;
  std::chrono::seconds timeout{120};

  // OPENAI_BASE_URL / OPENAI_API_KEY, with the public endpoint as default URL.
  static HttpBackendOptions from_environment();
};

/// Chat-completions over HTTP: a single user message per request.
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(HttpBackendOptions options);
  BackendReply send(const CompletionRequest& request) override;
  bool is_network() const override { return true; }

  static nlohmann::json request_body(const CompletionRequest& request);
  static BackendReply parse_body(const std::string& body);

 private:
  HttpBackendOptions options_;
  std::string host_;
  std::string path_prefix_;
};

/// Deterministic offline backend. Replies are scripted from a fixture table
/// when the request's post id (and sample index) is listed, and otherwise
/// derived from the cache digest and the seed.
///
/// Fixture layout:
///   {"posts": {"<id>": {"samples": [{"rationale": "...", "stage1": "hate",
///                                    "stage2": "not_hate", "fail": false}]}},
///    "judge": {"single": "... [[7]]",
///              "pairwise": {"original": "[[A]]", "swapped": "[[A]]"}}}
/// `pairwise` may also be a single string used for both orders.
class MockBackend final : public Backend {
 public:
  explicit MockBackend(std::uint64_t seed, nlohmann::json fixture = nlohmann::json::object());
  BackendReply send(const CompletionRequest& request) override;
  bool is_network() const override { return false; }

 private:
  const nlohmann::json* sample_script(const CompletionRequest& request) const;
  std::uint64_t hash_of(const CompletionRequest& request) const;

  std::uint64_t seed_;
  nlohmann::json fixture_;
};

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds base_delay{1000};
  std::chrono::milliseconds max_delay{60000};
  double jitter = 0.25;  // delay scaled by a factor in [1 - jitter, 1 + jitter]
};

struct ClientOptions {
  std::optional<std::filesystem::path> cache_dir;
  std::size_t max_in_flight = 8;
  double requests_per_minute = 0;  // 0 disables pacing
  RetryPolicy retry;
  std::uint64_t jitter_seed = 0;
};

struct ClientStats {
  std::uint64_t requests = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t backend_calls = 0;  // attempts, retries included
  std::uint64_t network_calls = 0;  // backend_calls made over the network
  std::uint64_t retries = 0;
  std::uint64_t errors = 0;
  std::uint64_t peak_in_flight = 0;
};

/// One file per cache key under <dir>/<d0d1>/<d2d3>/<digest>.json, holding
/// the request echo and the response. Writes go through rename, so a crash
/// never leaves a readable partial entry.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  std::filesystem::path path_for(const CacheKey& key) const;
  std::optional<CompletionResponse> load(const CacheKey& key) const;
  void store(const CacheKey& key, const CompletionRequest& request, const CompletionResponse& response) const;

 private:
  std::filesystem::path dir_;
};

struct SampleParams {
  std::string model_name;
  double temperature = 0.7;
  double top_p = 1.0;
  int max_tokens = 512;
};

class LlmClient {
 public:
  LlmClient(std::shared_ptr<Backend> backend, ClientOptions options);

  /// Cache lookup, then bounded retries against the backend. Throws
  /// TransportError (or UsageError for invalid requests).
  CompletionResponse complete(const CompletionRequest& request);

  /// k requests differing only in sample_index, returned in index order.
  /// Failed elements carry finish_reason == error and the message.
  std::vector<CompletionResponse> sample_k(const PromptText& prompt, std::size_t k, const SampleParams& params,
                                           const RequestMeta& meta = {});

  ClientStats stats() const;

 private:
  class Gate {
   public:
    explicit Gate(std::size_t limit) : limit_(limit == 0 ? 1 : limit) {}
    void acquire();
    void release();
    std::size_t peak() const;

   private:
    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::size_t limit_;
    std::size_t active_ = 0;
    std::size_t peak_ = 0;
  };

  void pace();
  std::chrono::milliseconds backoff(int attempt, std::optional<std::chrono::milliseconds> hint);

  std::shared_ptr<Backend> backend_;
  ClientOptions options_;
  std::optional<ResponseCache> cache_;
  Gate gate_;

  std::mutex pace_mutex_;
  std::chrono::steady_clock::time_point next_slot_{};

  std::mutex rng_mutex_;
  std::mt19937_64 rng_;

  std::atomic<std::uint64_t> requests_{0};
  std::atomic<std::uint64_t> cache_hits_{0};
  std::atomic<std::uint64_t> backend_calls_{0};
  std::atomic<std::uint64_t> network_calls_{0};
  std::atomic<std::uint64_t> retries_{0};
  std::atomic<std::uint64_t> errors_{0};
};

}  // namespace cotdistill
