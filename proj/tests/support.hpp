#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <random>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace test_support {

inline std::filesystem::path data_dir() { return COTD_TEST_DATA_DIR; }

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("cotd-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Chat-completions endpoint on localhost. `handler` sees the request body and
/// fills the response; the default replies with an option letter so stage-2
/// prompts parse. Counts calls and the peak number of concurrent requests.
class FakeServer {
 public:
  using Handler = std::function<void(const nlohmann::json& body, httplib::Response& res, int call_index)>;

  explicit FakeServer(Handler handler = {}, std::chrono::milliseconds delay = std::chrono::milliseconds(0))
      : handler_(std::move(handler)), delay_(delay) {
    server_.new_task_queue = [] { return new httplib::ThreadPool(64); };
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      const int index = calls_.fetch_add(1);
      const int now = ++active_;
      {
        std::lock_guard lock(mutex_);
        peak_ = std::max(peak_, now);
      }
      if (delay_.count() > 0) std::this_thread::sleep_for(delay_);
      const auto body = nlohmann::json::parse(req.body);
      if (handler_) {
        handler_(body, res, index);
      } else {
        reply(res, default_text(body));
      }
      --active_;
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~FakeServer() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
  int calls() const { return calls_.load(); }
  int peak() const {
    std::lock_guard lock(mutex_);
    return peak_;
  }

  static void reply(httplib::Response& res, const std::string& text, const std::string& finish = "stop") {
    nlohmann::json body{{"id", "fake"},
                        {"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", text}}},
                                      {"finish_reason", finish}}}}};
    res.set_content(body.dump(), "application/json");
  }

  static std::string default_text(const nlohmann::json& body) {
    const std::string prompt = body["messages"][0]["content"].get<std::string>();
    if (prompt.rfind("Given the explanation", 0) == 0) return "(A) Offensive";
    return "Let's explain step by step.\nThe post singles out a group.\nTherefore, the post is offensive.";
  }

 private:
  httplib::Server server_;
  Handler handler_;
  std::chrono::milliseconds delay_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> calls_{0};
  std::atomic<int> active_{0};
  mutable std::mutex mutex_;
  int peak_ = 0;
};

}  // namespace test_support
