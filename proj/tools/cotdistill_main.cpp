// Command-line front end. Everything goes through the C API in cotdistill.h.

#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cotdistill.h"

namespace {

using nlohmann::json;

std::string absolute(const std::string& p) { return std::filesystem::absolute(p).lexically_normal().string(); }

// Flags that mirror RunConfig fields. Only flags the user passed end up in
// the override patch.
struct ConfigFlags {
  std::string config_path;
  std::optional<std::string> dataset_kind, dataset_source, train, val, test, classes, companion;
  std::optional<std::string> variant, teacher_model, cache_dir, output_dir, backend, fixture, base_url, judge_model;
  std::optional<std::size_t> k, concurrency, sample_size;
  std::optional<double> temperature, top_p, rpm, sbic_threshold;
  std::optional<int> max_tokens;
  std::optional<std::uint64_t> seed, mock_seed;
  std::optional<bool> no_instruction, no_dedup;

  void attach(CLI::App& app) {
    app.add_option("-c,--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--dataset-kind", dataset_kind, "sbic | implicit_hate | jsonl");
    app.add_option("--dataset-source", dataset_source, "source of jsonl records (SBIC, ImplicitHate, ...)");
    app.add_option("--train", train, "train split file");
    app.add_option("--val", val, "validation split file");
    app.add_option("--test", test, "test split file");
    app.add_option("--classes", classes, "Implicit Hate class file");
    app.add_option("--companion", companion, "Implicit Hate target/implied statement file");
    app.add_option("--sbic-threshold", sbic_threshold, "mean offensiveness at or above which SBIC posts are hate");
    app.add_option("--variant", variant, "fr | co");
    app.add_option("-k,--k", k, "rationales per post");
    app.add_option("--teacher-model", teacher_model);
    app.add_option("--temperature", temperature, "teacher temperature");
    app.add_option("--top-p", top_p, "teacher top_p");
    app.add_option("--max-tokens", max_tokens, "teacher max_tokens");
    app.add_option("--cache-dir", cache_dir);
    app.add_option("-o,--output-dir", output_dir);
    app.add_option("--seed", seed);
    app.add_option("-j,--concurrency", concurrency, "worker threads and in-flight request bound");
    app.add_option("--requests-per-minute", rpm);
    app.add_option("--backend", backend, "mock | http");
    app.add_option("--mock-fixture", fixture, "scripted replies for the mock backend");
    app.add_option("--mock-seed", mock_seed);
    app.add_option("--base-url", base_url, "chat-completions endpoint prefix (http backend)");
    app.add_option("--judge-model", judge_model);
    app.add_option("--judge-sample-size", sample_size);
    app.add_flag("--no-instruction-prefix{true}", no_instruction, "student input is the bare post");
    app.add_flag("--no-dedup{true}", no_dedup, "keep one class-only example per failed sample");
  }

  json overrides() const {
    json o = json::object();
    auto set = [&](const char* section, const char* key, const auto& value) {
      if (!value) return;
      if (section) {
        o[section][key] = *value;
      } else {
        o[key] = *value;
      }
    };
    auto set_path = [&](const char* section, const char* key, const std::optional<std::string>& value) {
      if (value) set(section, key, std::optional<std::string>(absolute(*value)));
    };
    set("dataset", "kind", dataset_kind);
    set("dataset", "source", dataset_source);
    set_path("dataset", "train", train);
    set_path("dataset", "val", val);
    set_path("dataset", "test", test);
    set_path("dataset", "classes", classes);
    set_path("dataset", "companion", companion);
    set("dataset", "sbic_threshold", sbic_threshold);
    set(nullptr, "variant", variant);
    set(nullptr, "k", k);
    set("teacher", "model", teacher_model);
    set("teacher", "temperature", temperature);
    set("teacher", "top_p", top_p);
    set("teacher", "max_tokens", max_tokens);
    set_path(nullptr, "cache_dir", cache_dir);
    set_path(nullptr, "output_dir", output_dir);
    set(nullptr, "seed", seed);
    set(nullptr, "concurrency", concurrency);
    set(nullptr, "requests_per_minute", rpm);
    set("backend", "kind", backend);
    set_path("backend", "fixture", fixture);
    set("backend", "seed", mock_seed);
    set("backend", "base_url", base_url);
    set("judge", "model", judge_model);
    set("judge", "sample_size", sample_size);
    if (no_instruction) o["targets"]["instruction_prefix"] = !*no_instruction;
    if (no_dedup) o["targets"]["dedup_class_only"] = !*no_dedup;
    return o;
  }
};

json name_path_map(const std::vector<std::string>& items, const char* flag) {
  json out = json::object();
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw CLI::ValidationError(flag, "expected NAME=PATH, got '" + item + "'");
    }
    out[item.substr(0, eq)] = absolute(item.substr(eq + 1));
  }
  return out;
}

void print_summary(const json& manifest) {
  if (manifest.contains("table")) std::fputs(manifest["table"].get<std::string>().c_str(), stdout);
  if (manifest.contains("text")) std::fputs(manifest["text"].get<std::string>().c_str(), stdout);
  for (const char* key : {"counts", "summary", "client"}) {
    if (manifest.contains(key)) std::printf("%s: %s\n", key, manifest[key].dump().c_str());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rationale distillation toolchain for hate speech detection"};
  app.require_subcommand(1);
  app.set_version_flag("--version", cotd_version());
  int verbosity = 0;
  bool print_config = false;
  app.add_flag("-v,--verbose", verbosity, "more logging (repeatable)");
  app.add_flag("--print-config", print_config, "print the resolved config before running");

  ConfigFlags flags;
  json args = json::object();

  auto* ingest = app.add_subcommand("ingest", "load the configured datasets into canonical JSONL");
  auto* generate = app.add_subcommand("generate", "two-stage rationale extraction and training file emission");
  auto* emit = app.add_subcommand("emit-train", "rebuild the training file from an audit file");
  auto* evaluate = app.add_subcommand("evaluate", "score a prediction file against gold records");
  auto* cross = app.add_subcommand("cross-eval", "score predictions on several datasets");
  auto* judge = app.add_subcommand("judge", "LLM-judge grading and pairwise comparison of two methods");
  auto* report = app.add_subcommand("report", "render report files and judge summaries");
  for (auto* sub : {ingest, generate, emit, evaluate, cross, judge, report}) flags.attach(*sub);

  std::string audit, output, predictions, gold, name;
  emit->add_option("--audit", audit, "audit file (default: <output-dir>/audit.<variant>.jsonl)");
  emit->add_option("--out", output, "training file (default: <output-dir>/train.<variant>.jsonl)");

  evaluate->add_option("--predictions", predictions, "{post_id, raw_output} lines")->required();
  evaluate->add_option("--gold", gold, "gold records (default: configured test split)");
  evaluate->add_option("--name", name, "dataset label in the report");
  evaluate->add_option("--out", output, "report file");

  std::vector<std::string> cross_preds, cross_gold;
  cross->add_option("--predictions", cross_preds, "NAME=PATH, repeatable")->required();
  cross->add_option("--gold", cross_gold, "NAME=PATH, repeatable (default: <output-dir>/data/NAME.jsonl)");
  cross->add_option("--out", output, "report file");

  std::string m1_name = "method1", m2_name = "method2", m1_path, m2_path;
  judge->add_option("--method1", m1_path, "predictions of the first method")->required();
  judge->add_option("--method2", m2_path, "predictions of the second method")->required();
  judge->add_option("--method1-name", m1_name);
  judge->add_option("--method2-name", m2_name);
  judge->add_option("--gold", gold, "gold records (default: configured test split)");
  judge->add_option("--out", output, "judge report (summary goes next to it)");

  std::vector<std::string> reports;
  std::string judge_summary;
  report->add_option("--reports", reports, "report files");
  report->add_option("--judge-summary", judge_summary);
  report->add_option("--out", output, "write the rendered text here too");

  try {
    app.parse(argc, argv);
    if (!output.empty()) args["output"] = absolute(output);
    if (!gold.empty()) args["gold"] = absolute(gold);
    if (emit->parsed() && !audit.empty()) args["audit"] = absolute(audit);
    if (evaluate->parsed()) {
      args["predictions"] = absolute(predictions);
      if (!name.empty()) args["name"] = name;
    }
    if (cross->parsed()) {
      args["predictions"] = name_path_map(cross_preds, "--predictions");
      if (!cross_gold.empty()) args["gold"] = name_path_map(cross_gold, "--gold");
    }
    if (judge->parsed()) {
      args["method1"] = {{"name", m1_name}, {"predictions", absolute(m1_path)}};
      args["method2"] = {{"name", m2_name}, {"predictions", absolute(m2_path)}};
    }
    if (report->parsed()) {
      json list = json::array();
      for (const auto& r : reports) list.push_back(absolute(r));
      args["reports"] = list;
      if (!judge_summary.empty()) args["judge_summary"] = absolute(judge_summary);
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : COTD_USAGE;
  }

  cotd_set_log_level(verbosity);
  CLI::App* command = app.get_subcommands().front();

  cotd_context* ctx = nullptr;
  const std::string overrides = flags.overrides().dump();
  cotd_status status = cotd_context_new(flags.config_path.empty() ? nullptr : flags.config_path.c_str(),
                                        overrides.c_str(), &ctx);
  if (status != COTD_OK) {
    std::fprintf(stderr, "error (%s): %s\n", cotd_status_name(status), cotd_last_error());
    return status;
  }
  if (print_config) {
    char* config = nullptr;
    if (cotd_context_config(ctx, &config) == COTD_OK) {
      std::printf("%s\n", config);
      cotd_string_free(config);
    }
  }

  char* manifest = nullptr;
  const std::string args_text = args.dump();
  status = cotd_run(ctx, command->get_name().c_str(), args_text.c_str(), &manifest);
  if (status == COTD_OK) {
    print_summary(json::parse(manifest));
    cotd_string_free(manifest);
  } else {
    std::fprintf(stderr, "error (%s): %s\n", cotd_status_name(status), cotd_last_error());
  }
  cotd_context_free(ctx);
  return status;
}
