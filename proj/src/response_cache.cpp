#include <fstream>
#include <sstream>

#include "cotdistill/io.hpp"
#include "cotdistill/llm_client.hpp"

namespace cotdistill {

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw UsageError("cannot create cache directory '" + dir_.string() + "': " + ec.message());
}

std::filesystem::path ResponseCache::path_for(const CacheKey& key) const {
  return dir_ / key.digest.substr(0, 2) / key.digest.substr(2, 2) / (key.digest + ".json");
}

std::optional<CompletionResponse> ResponseCache::load(const CacheKey& key) const {
  const auto path = path_for(key);
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    const json entry = json::parse(buffer.str());
    if (entry.at("key").get<std::string>() != key.digest) return std::nullopt;
    const auto& response = entry.at("response");
    CompletionResponse out;
    out.text = response.at("text").get<std::string>();
    out.finish_reason = parse_finish_reason(response.at("finish_reason").get<std::string>());
    out.cached = true;
    return out;
  } catch (const json::exception&) {
    // Unreadable entries are treated as misses and overwritten.
    return std::nullopt;
  }
}

void ResponseCache::store(const CacheKey& key, const CompletionRequest& request,
                          const CompletionResponse& response) const {
  const json entry = {
      {"key", key.digest},
      {"request",
       {{"model", request.model_name},
        {"prompt", request.prompt.text},
        {"template_id", to_string(request.prompt.template_id)},
        {"temperature", request.temperature},
        {"top_p", request.top_p},
        {"max_tokens", request.max_tokens},
        {"sample_index", request.sample_index}}},
      {"response", {{"text", response.text}, {"finish_reason", to_string(response.finish_reason)}}},
  };
  write_text_atomic(path_for(key), entry.dump(2, ' ', false, json::error_handler_t::replace) + "\n");
}

}  // namespace cotdistill
