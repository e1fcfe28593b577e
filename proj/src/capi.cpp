#include "cotdistill.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include <spdlog/spdlog.h>

#include "cotdistill/orchestrator.hpp"

namespace {

thread_local std::string g_last_error;

cotd_status fail(cotd_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

char* duplicate(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

nlohmann::json parse_json_arg(const char* text, const char* what) {
  if (text == nullptr || *text == '\0') return nlohmann::json::object();
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw cotdistill::UsageError(std::string(what) + " is not valid JSON: " + e.what());
  }
}

// Maps the library's exceptions onto status codes.
template <class F>
cotd_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return COTD_OK;
  } catch (const cotdistill::Error& e) {
    return fail(static_cast<cotd_status>(e.category()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(COTD_INTERNAL, "out of memory");
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(COTD_DATA, e.what());
  } catch (const std::exception& e) {
    return fail(COTD_INTERNAL, e.what());
  } catch (...) {
    return fail(COTD_INTERNAL, "unknown error");
  }
}

}  // namespace

struct cotd_context {
  cotdistill::RunConfig config;
};

extern "C" {

const char* cotd_version(void) { return "0.1.0"; }

const char* cotd_status_name(cotd_status status) {
  switch (status) {
    case COTD_OK: return "ok";
    case COTD_USAGE: return "usage";
    case COTD_DATA: return "data";
    case COTD_TRANSPORT: return "transport";
    case COTD_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* cotd_last_error(void) { return g_last_error.c_str(); }

void cotd_string_free(char* s) { std::free(s); }

cotd_status cotd_context_new(const char* config_path, const char* overrides_json, cotd_context** out) {
  if (out == nullptr) return fail(COTD_USAGE, "out pointer is NULL");
  *out = nullptr;
  return guarded([&] {
    std::optional<std::filesystem::path> path;
    if (config_path != nullptr && *config_path != '\0') path = config_path;
    auto config = cotdistill::load_config(path, parse_json_arg(overrides_json, "overrides"));
    *out = new cotd_context{std::move(config)};
  });
}

void cotd_context_free(cotd_context* ctx) { delete ctx; }

cotd_status cotd_context_config(const cotd_context* ctx, char** out_json) {
  if (ctx == nullptr || out_json == nullptr) return fail(COTD_USAGE, "context and out pointer are required");
  return guarded([&] { *out_json = duplicate(ctx->config.to_json().dump(2)); });
}

cotd_status cotd_run(cotd_context* ctx, const char* command, const char* args_json, char** out_json) {
  if (ctx == nullptr || command == nullptr) return fail(COTD_USAGE, "context and command are required");
  if (out_json != nullptr) *out_json = nullptr;
  return guarded([&] {
    const auto manifest = cotdistill::run_command(ctx->config, command, parse_json_arg(args_json, "arguments"));
    if (out_json != nullptr) *out_json = duplicate(manifest.dump(2));
  });
}

void cotd_set_log_level(int level) {
  spdlog::set_level(level <= 0 ? spdlog::level::warn : level == 1 ? spdlog::level::info : spdlog::level::debug);
}

}  // extern "C"
