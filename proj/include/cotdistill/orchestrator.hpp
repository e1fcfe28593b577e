#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cotdistill/dataset.hpp"
#include "cotdistill/distill.hpp"
#include "cotdistill/judge.hpp"
#include "cotdistill/llm_client.hpp"
#include "cotdistill/types.hpp"

namespace cotdistill {

/// Where training posts come from. `sbic` reads the three official split
/// files, `implicit_hate` the class file (plus companion) split by `ratios`,
/// and `jsonl` canonical PostRecord files written by `ingest`.
struct DatasetConfig {
  std::string kind = "jsonl";  // sbic | implicit_hate | jsonl
  SourceDataset source = SourceDataset::sbic;  // vocabulary and k default for jsonl
  std::filesystem::path train;
  std::filesystem::path val;
  std::filesystem::path test;
  std::filesystem::path classes;
  std::optional<std::filesystem::path> companion;
  std::array<double, 3> ratios{0.6, 0.2, 0.2};
  double sbic_threshold = 0.5;

  SourceDataset effective_source() const;
};

struct BackendConfig {
  std::string kind = "mock";  // mock | http
  std::optional<std::filesystem::path> fixture;
  std::uint64_t seed = 0;
  std::string base_url;  // http only; empty means OPENAI_BASE_URL or the default
};

struct JudgeConfig {
  std::string model_name = "gpt-4";
  int max_tokens = 1024;
  std::size_t sample_size = 50;
  CiMethod ci = CiMethod::normal;
};

struct RunConfig {
  DatasetConfig dataset;
  Variant variant = Variant::fr;
  std::optional<std::size_t> k;  // unset: 4 for SBIC, 8 for Implicit Hate
  SampleParams teacher{.model_name = "gpt-3.5-turbo", .temperature = 0.7, .top_p = 1.0, .max_tokens = 512};
  SampleParams stage2{.model_name = {}, .temperature = 0.0, .top_p = 1.0, .max_tokens = 16};
  TargetOptions targets;
  BackendConfig backend;
  JudgeConfig judge;
  std::map<std::string, std::filesystem::path> cross_eval;  // dataset name -> release file
  bool hatexplain_offensive_is_hate = true;
  std::optional<std::filesystem::path> cache_dir;
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 0;
  std::size_t concurrency = 8;
  double requests_per_minute = 0;
  RetryPolicy retry;

  std::size_t effective_k() const;
  TaskVocabulary vocabulary() const;

  /// Throws UsageError naming the offending field.
  void validate() const;

  /// Makes every relative path absolute against `base`.
  void resolve_paths(const std::filesystem::path& base);

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
};

/// Reads a config file, applies `overrides` as a JSON merge patch, resolves
/// relative paths against the config file's directory (or the working
/// directory when there is no file), and validates.
RunConfig load_config(const std::optional<std::filesystem::path>& path, const nlohmann::json& overrides = {});

/// Train/val/test records for the configured dataset.
SplitResult load_dataset(const RunConfig& config, LoadStats* stats = nullptr);

/// The client a run uses, built from the backend and cache settings.
std::unique_ptr<LlmClient> make_client(const RunConfig& config);

// Each command returns its manifest, which is also written to
// <output_dir>/manifest.<command>.json. Arguments not in RunConfig come in
// `args`; see README for the keys.
nlohmann::json cmd_ingest(const RunConfig& config);
nlohmann::json cmd_generate(const RunConfig& config);
nlohmann::json cmd_emit_train(const RunConfig& config, const nlohmann::json& args);
nlohmann::json cmd_evaluate(const RunConfig& config, const nlohmann::json& args);
nlohmann::json cmd_cross_eval(const RunConfig& config, const nlohmann::json& args);
nlohmann::json cmd_judge(const RunConfig& config, const nlohmann::json& args);
nlohmann::json cmd_report(const RunConfig& config, const nlohmann::json& args);

nlohmann::json run_command(const RunConfig& config, std::string_view command, const nlohmann::json& args);

/// Output file names under the output directory.
std::filesystem::path training_file_path(const RunConfig& config);
std::filesystem::path audit_file_path(const RunConfig& config);

}  // namespace cotdistill
