#include "cotdistill/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "cotdistill/io.hpp"
#include "cotdistill/metrics.hpp"
#include "cotdistill/prompting.hpp"

namespace cotdistill {
namespace fs = std::filesystem;

namespace {

std::string path_string(const fs::path& p) { return p.generic_string(); }

json optional_path(const std::optional<fs::path>& p) { return p ? json(path_string(*p)) : json(nullptr); }

// Rejects keys the schema does not know, so typos fail loudly.
void check_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw UsageError("config: '" + std::string(where) + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw UsageError("config: unknown key '" + key + "' in " + std::string(where));
    }
  }
}

template <class T>
T get_or(const json& j, const char* key, const T& fallback, std::string_view where) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw UsageError("config: " + std::string(where) + "." + key + " has the wrong type");
  }
}

fs::path get_path(const json& j, const char* key, const fs::path& fallback, std::string_view where) {
  return fs::path(get_or<std::string>(j, key, path_string(fallback), where));
}

std::optional<fs::path> get_optional_path(const json& j, const char* key, const std::optional<fs::path>& fallback,
                                          std::string_view where) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (it->is_null()) return std::nullopt;
  const auto text = get_or<std::string>(j, key, "", where);
  if (text.empty()) return std::nullopt;
  return fs::path(text);
}

json sample_params_json(const SampleParams& p) {
  return json{{"model", p.model_name}, {"temperature", p.temperature}, {"top_p", p.top_p}, {"max_tokens", p.max_tokens}};
}

SampleParams sample_params_from(const json& j, SampleParams base, std::string_view where) {
  check_keys(j, where, {"model", "temperature", "top_p", "max_tokens"});
  base.model_name = get_or(j, "model", base.model_name, where);
  base.temperature = get_or(j, "temperature", base.temperature, where);
  base.top_p = get_or(j, "top_p", base.top_p, where);
  base.max_tokens = get_or(j, "max_tokens", base.max_tokens, where);
  return base;
}

void absolutize(fs::path& p, const fs::path& base) {
  if (!p.empty() && p.is_relative()) p = (base / p).lexically_normal();
}

void absolutize(std::optional<fs::path>& p, const fs::path& base) {
  if (p) absolutize(*p, base);
}

// Runs body(i) for i in [0, n) on up to `workers` threads. The first
// exception stops the remaining work and is rethrown here.
template <class F>
void parallel_for(std::size_t n, std::size_t workers, F&& body) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n || stop.load()) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        stop = true;
      }
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(workers - 1);
  for (std::size_t t = 1; t < workers; ++t) threads.emplace_back(run);
  run();
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

json hash_files(const std::vector<fs::path>& paths) {
  json out = json::object();
  for (const auto& p : paths) {
    if (!p.empty()) out[path_string(p)] = file_sha256(p);
  }
  return out;
}

std::vector<fs::path> dataset_inputs(const RunConfig& config) {
  const auto& d = config.dataset;
  std::vector<fs::path> out;
  if (d.kind == "implicit_hate") {
    out.push_back(d.classes);
    if (d.companion) out.push_back(*d.companion);
  } else {
    for (const auto* p : {&d.train, &d.val, &d.test}) {
      if (!p->empty()) out.push_back(*p);
    }
  }
  return out;
}

json client_counts(const ClientStats& s) {
  return json{{"requests", s.requests},         {"cache_hits", s.cache_hits}, {"backend_calls", s.backend_calls},
              {"network_calls", s.network_calls}, {"retries", s.retries},     {"errors", s.errors},
              {"peak_in_flight", s.peak_in_flight}};
}

json make_manifest(const RunConfig& config, std::string_view command, const std::vector<fs::path>& inputs) {
  return json{{"command", command}, {"config", config.to_json()}, {"inputs", hash_files(inputs)}};
}

void write_manifest(const RunConfig& config, std::string_view command, json& manifest,
                    const std::vector<fs::path>& outputs) {
  manifest["outputs"] = hash_files(outputs);
  write_text_atomic(config.output_dir / ("manifest." + std::string(command) + ".json"), manifest.dump(2) + "\n");
}

void require_file(const fs::path& p, std::string_view what) {
  if (p.empty()) throw UsageError(std::string(what) + " path is not set");
  if (!fs::is_regular_file(p)) throw DataError(std::string(what) + " file not found: '" + path_string(p) + "'");
}

fs::path arg_path(const json& args, const char* key, const fs::path& fallback) {
  auto it = args.find(key);
  if (it == args.end() || it->is_null()) return fallback;
  if (!it->is_string()) throw UsageError(std::string("argument '") + key + "' must be a path string");
  return fs::path(it->get<std::string>());
}

std::map<std::string, fs::path> arg_path_map(const json& args, const char* key) {
  std::map<std::string, fs::path> out;
  auto it = args.find(key);
  if (it == args.end() || it->is_null()) return out;
  if (!it->is_object()) throw UsageError(std::string("argument '") + key + "' must map dataset names to paths");
  for (const auto& [name, value] : it->items()) {
    if (!value.is_string()) throw UsageError(std::string("argument '") + key + "." + name + "' must be a path");
    out.emplace(name, fs::path(value.get<std::string>()));
  }
  return out;
}

// Gold records for evaluation: an explicit file, or the configured test split.
std::vector<PostRecord> load_gold(const RunConfig& config, const fs::path& gold_path,
                                  std::vector<fs::path>& inputs) {
  if (!gold_path.empty()) {
    require_file(gold_path, "gold");
    inputs.push_back(gold_path);
    return read_records(gold_path);
  }
  auto splits = load_dataset(config);
  for (const auto& p : dataset_inputs(config)) inputs.push_back(p);
  return std::move(splits.test);
}

json metrics_json(const Metrics& m) {
  return json{{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall},
              {"f1", m.f1},             {"unknown_count", m.unknown_count}, {"support_pos", m.support_pos},
              {"support_neg", m.support_neg}, {"tp", m.tp}, {"fp", m.fp}, {"fn", m.fn}, {"tn", m.tn},
              {"unknown_neg", m.unknown_neg}};
}

json summary_json(const ScoreSummary& s) {
  return json{{"mean", s.mean}, {"ci_low", s.ci_low}, {"ci_high", s.ci_high}, {"n", s.n}};
}

std::string_view ci_name(CiMethod m) { return m == CiMethod::normal ? "normal" : "bootstrap"; }

CiMethod parse_ci(std::string_view text) {
  if (text == "normal") return CiMethod::normal;
  if (text == "bootstrap") return CiMethod::bootstrap;
  throw UsageError("config: judge.ci must be 'normal' or 'bootstrap'");
}

}  // namespace

SourceDataset DatasetConfig::effective_source() const {
  if (kind == "sbic") return SourceDataset::sbic;
  if (kind == "implicit_hate") return SourceDataset::implicit_hate;
  return source;
}

std::size_t RunConfig::effective_k() const {
  if (k) return *k;
  return dataset.effective_source() == SourceDataset::implicit_hate ? 8 : 4;
}

TaskVocabulary RunConfig::vocabulary() const { return TaskVocabulary::for_dataset(dataset.effective_source()); }

void RunConfig::validate() const {
  if (dataset.kind != "sbic" && dataset.kind != "implicit_hate" && dataset.kind != "jsonl") {
    throw UsageError("config: dataset.kind must be sbic, implicit_hate or jsonl");
  }
  if (dataset.kind == "implicit_hate" && dataset.classes.empty()) {
    throw UsageError("config: dataset.classes is required for implicit_hate");
  }
  SplitSpec{dataset.ratios, seed}.validate();
  if (!(dataset.sbic_threshold >= 0 && dataset.sbic_threshold <= 1)) {
    throw UsageError("config: dataset.sbic_threshold must be in [0, 1]");
  }
  if (k && *k < 1) throw UsageError("config: k must be positive");
  for (const auto& [name, p] : {std::pair{"teacher", &teacher}, std::pair{"stage2", &stage2}}) {
    if (p->max_tokens < 1) throw UsageError(std::string("config: ") + name + ".max_tokens must be at least 1");
    if (p->temperature < 0) throw UsageError(std::string("config: ") + name + ".temperature must be non-negative");
    if (!(p->top_p > 0 && p->top_p <= 1)) throw UsageError(std::string("config: ") + name + ".top_p must be in (0, 1]");
  }
  if (teacher.model_name.empty()) throw UsageError("config: teacher.model is required");
  if (effective_k() > 1 && teacher.temperature <= 0) {
    throw UsageError("config: k > 1 needs teacher.temperature > 0, otherwise every sample is identical");
  }
  if (backend.kind != "mock" && backend.kind != "http") throw UsageError("config: backend.kind must be mock or http");
  if (concurrency < 1) throw UsageError("config: concurrency must be positive");
  if (requests_per_minute < 0) throw UsageError("config: requests_per_minute must be non-negative");
  if (retry.max_attempts < 1) throw UsageError("config: retry.max_attempts must be at least 1");
  if (retry.base_delay.count() < 0 || retry.max_delay < retry.base_delay) {
    throw UsageError("config: retry delays must satisfy 0 <= base_delay_ms <= max_delay_ms");
  }
  if (judge.sample_size < 1) throw UsageError("config: judge.sample_size must be positive");
  if (judge.max_tokens < 1) throw UsageError("config: judge.max_tokens must be at least 1");
  if (output_dir.empty()) throw UsageError("config: output_dir is required");
  for (const auto& [name, p] : cross_eval) {
    const auto source = parse_source_dataset(name);
    if (source != SourceDataset::hatexplain && source != SourceDataset::dynahate) {
      throw UsageError("config: cross_eval keys must be HateXplain or DynaHate, got '" + name + "'");
    }
  }
}

void RunConfig::resolve_paths(const fs::path& base) {
  for (auto* p : {&dataset.train, &dataset.val, &dataset.test, &dataset.classes, &output_dir}) absolutize(*p, base);
  absolutize(dataset.companion, base);
  absolutize(backend.fixture, base);
  absolutize(cache_dir, base);
  for (auto& [name, p] : cross_eval) absolutize(p, base);
}

json RunConfig::to_json() const {
  json cross = json::object();
  for (const auto& [name, p] : cross_eval) cross[name] = path_string(p);
  return json{
      {"dataset",
       {{"kind", dataset.kind},
        {"source", to_string(dataset.source)},
        {"train", path_string(dataset.train)},
        {"val", path_string(dataset.val)},
        {"test", path_string(dataset.test)},
        {"classes", path_string(dataset.classes)},
        {"companion", optional_path(dataset.companion)},
        {"ratios", dataset.ratios},
        {"sbic_threshold", dataset.sbic_threshold}}},
      {"variant", to_string(variant)},
      {"k", k ? json(*k) : json(nullptr)},
      {"teacher", sample_params_json(teacher)},
      {"stage2", sample_params_json(stage2)},
      {"targets",
       {{"instruction_prefix", targets.instruction_prefix}, {"dedup_class_only", targets.dedup_class_only}}},
      {"backend",
       {{"kind", backend.kind},
        {"fixture", optional_path(backend.fixture)},
        {"seed", backend.seed},
        {"base_url", backend.base_url}}},
      {"judge",
       {{"model", judge.model_name},
        {"max_tokens", judge.max_tokens},
        {"sample_size", judge.sample_size},
        {"ci", ci_name(judge.ci)}}},
      {"cross_eval", cross},
      {"hatexplain_offensive_is_hate", hatexplain_offensive_is_hate},
      {"cache_dir", optional_path(cache_dir)},
      {"output_dir", path_string(output_dir)},
      {"seed", seed},
      {"concurrency", concurrency},
      {"requests_per_minute", requests_per_minute},
      {"retry",
       {{"max_attempts", retry.max_attempts},
        {"base_delay_ms", retry.base_delay.count()},
        {"max_delay_ms", retry.max_delay.count()}}},
  };
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  check_keys(j, "config",
             {"dataset", "variant", "k", "teacher", "stage2", "targets", "backend", "judge", "cross_eval",
              "hatexplain_offensive_is_hate", "cache_dir", "output_dir", "seed", "concurrency",
              "requests_per_minute", "retry"});
  if (auto it = j.find("dataset"); it != j.end() && !it->is_null()) {
    const json& d = *it;
    check_keys(d, "dataset", {"kind", "source", "train", "val", "test", "classes", "companion", "ratios",
                              "sbic_threshold"});
    c.dataset.kind = get_or(d, "kind", c.dataset.kind, "dataset");
    c.dataset.source = parse_source_dataset(get_or(d, "source", std::string(to_string(c.dataset.source)), "dataset"));
    c.dataset.train = get_path(d, "train", c.dataset.train, "dataset");
    c.dataset.val = get_path(d, "val", c.dataset.val, "dataset");
    c.dataset.test = get_path(d, "test", c.dataset.test, "dataset");
    c.dataset.classes = get_path(d, "classes", c.dataset.classes, "dataset");
    c.dataset.companion = get_optional_path(d, "companion", c.dataset.companion, "dataset");
    c.dataset.ratios = get_or(d, "ratios", c.dataset.ratios, "dataset");
    c.dataset.sbic_threshold = get_or(d, "sbic_threshold", c.dataset.sbic_threshold, "dataset");
  }
  c.variant = parse_variant(get_or(j, "variant", std::string(to_string(c.variant)), "config"));
  if (auto it = j.find("k"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer() || it->get<std::int64_t>() < 1) throw UsageError("config: k must be a positive integer");
    c.k = it->get<std::size_t>();
  }
  if (auto it = j.find("teacher"); it != j.end() && !it->is_null()) c.teacher = sample_params_from(*it, c.teacher, "teacher");
  if (auto it = j.find("stage2"); it != j.end() && !it->is_null()) c.stage2 = sample_params_from(*it, c.stage2, "stage2");
  if (auto it = j.find("targets"); it != j.end() && !it->is_null()) {
    check_keys(*it, "targets", {"instruction_prefix", "dedup_class_only"});
    c.targets.instruction_prefix = get_or(*it, "instruction_prefix", c.targets.instruction_prefix, "targets");
    c.targets.dedup_class_only = get_or(*it, "dedup_class_only", c.targets.dedup_class_only, "targets");
  }
  if (auto it = j.find("backend"); it != j.end() && !it->is_null()) {
    check_keys(*it, "backend", {"kind", "fixture", "seed", "base_url"});
    c.backend.kind = get_or(*it, "kind", c.backend.kind, "backend");
    c.backend.fixture = get_optional_path(*it, "fixture", c.backend.fixture, "backend");
    c.backend.seed = get_or(*it, "seed", c.backend.seed, "backend");
    c.backend.base_url = get_or(*it, "base_url", c.backend.base_url, "backend");
  }
  if (auto it = j.find("judge"); it != j.end() && !it->is_null()) {
    check_keys(*it, "judge", {"model", "max_tokens", "sample_size", "ci"});
    c.judge.model_name = get_or(*it, "model", c.judge.model_name, "judge");
    c.judge.max_tokens = get_or(*it, "max_tokens", c.judge.max_tokens, "judge");
    c.judge.sample_size = get_or(*it, "sample_size", c.judge.sample_size, "judge");
    c.judge.ci = parse_ci(get_or(*it, "ci", std::string(ci_name(c.judge.ci)), "judge"));
  }
  if (auto it = j.find("cross_eval"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) throw UsageError("config: cross_eval must map dataset names to paths");
    for (const auto& [name, value] : it->items()) {
      if (!value.is_string()) throw UsageError("config: cross_eval." + name + " must be a path");
      c.cross_eval.emplace(name, fs::path(value.get<std::string>()));
    }
  }
  c.hatexplain_offensive_is_hate = get_or(j, "hatexplain_offensive_is_hate", c.hatexplain_offensive_is_hate, "config");
  c.cache_dir = get_optional_path(j, "cache_dir", c.cache_dir, "config");
  c.output_dir = get_path(j, "output_dir", c.output_dir, "config");
  c.seed = get_or(j, "seed", c.seed, "config");
  c.concurrency = get_or(j, "concurrency", c.concurrency, "config");
  c.requests_per_minute = get_or(j, "requests_per_minute", c.requests_per_minute, "config");
  if (auto it = j.find("retry"); it != j.end() && !it->is_null()) {
    check_keys(*it, "retry", {"max_attempts", "base_delay_ms", "max_delay_ms"});
    c.retry.max_attempts = get_or(*it, "max_attempts", c.retry.max_attempts, "retry");
    c.retry.base_delay =
        std::chrono::milliseconds(get_or<std::int64_t>(*it, "base_delay_ms", c.retry.base_delay.count(), "retry"));
    c.retry.max_delay =
        std::chrono::milliseconds(get_or<std::int64_t>(*it, "max_delay_ms", c.retry.max_delay.count(), "retry"));
  }
  return c;
}

RunConfig load_config(const std::optional<fs::path>& path, const json& overrides) {
  json merged = json::object();
  fs::path base = fs::current_path();
  if (path) {
    try {
      merged = json::parse(read_text(*path));
    } catch (const json::parse_error& e) {
      throw UsageError("config '" + path_string(*path) + "' is not valid JSON: " + e.what());
    }
    base = fs::absolute(*path).parent_path();
  }
  if (!overrides.is_null()) {
    if (!overrides.is_object()) throw UsageError("config overrides must be a JSON object");
    merged.merge_patch(overrides);
  }
  RunConfig config = RunConfig::from_json(merged);
  config.resolve_paths(base);
  config.validate();
  return config;
}

SplitResult load_dataset(const RunConfig& config, LoadStats* stats) {
  const auto& d = config.dataset;
  SplitResult out;
  if (d.kind == "implicit_hate") {
    require_file(d.classes, "dataset.classes");
    if (d.companion) require_file(*d.companion, "dataset.companion");
    return load_implicit_hate(d.classes, SplitSpec{d.ratios, config.seed}, d.companion, stats);
  }
  const std::array<std::pair<Split, const fs::path*>, 3> files{
      {{Split::train, &d.train}, {Split::val, &d.val}, {Split::test, &d.test}}};
  for (const auto& [split, p] : files) {
    if (p->empty()) continue;
    require_file(*p, "dataset." + std::string(to_string(split)));
    if (d.kind == "sbic") {
      out[split] = load_sbic(*p, split, SbicOptions{d.sbic_threshold}, stats);
    } else {
      out[split] = read_records(*p);
    }
  }
  return out;
}

std::unique_ptr<LlmClient> make_client(const RunConfig& config) {
  std::shared_ptr<Backend> backend;
  if (config.backend.kind == "mock") {
    json fixture = json::object();
    if (config.backend.fixture) {
      require_file(*config.backend.fixture, "backend.fixture");
      try {
        fixture = json::parse(read_text(*config.backend.fixture));
      } catch (const json::parse_error& e) {
        throw DataError("mock fixture is not valid JSON: " + std::string(e.what()));
      }
    }
    backend = std::make_shared<MockBackend>(config.backend.seed, std::move(fixture));
  } else {
    auto options = HttpBackendOptions::from_environment();
    if (!config.backend.base_url.empty()) options.base_url = config.backend.base_url;
    backend = std::make_shared<HttpBackend>(std::move(options));
  }
  ClientOptions options;
  options.cache_dir = config.cache_dir;
  options.max_in_flight = config.concurrency;
  options.requests_per_minute = config.requests_per_minute;
  options.jitter_seed = config.seed;
  options.retry = config.retry;
  return std::make_unique<LlmClient>(std::move(backend), options);
}

fs::path training_file_path(const RunConfig& config) {
  return config.output_dir / ("train." + std::string(to_string(config.variant)) + ".jsonl");
}

fs::path audit_file_path(const RunConfig& config) {
  return config.output_dir / ("audit." + std::string(to_string(config.variant)) + ".jsonl");
}

json cmd_ingest(const RunConfig& config) {
  LoadStats stats;
  const SplitResult splits = load_dataset(config, &stats);
  std::vector<fs::path> inputs = dataset_inputs(config);
  std::vector<fs::path> outputs;
  json counts = json::object();
  const fs::path data_dir = config.output_dir / "data";
  for (const auto split : {Split::train, Split::val, Split::test}) {
    const fs::path p = data_dir / (std::string(to_string(split)) + ".jsonl");
    write_records(p, splits[split]);
    outputs.push_back(p);
    counts[std::string(to_string(split))] = splits[split].size();
  }
  for (const auto& [name, release] : config.cross_eval) {
    require_file(release, "cross_eval." + name);
    LoadStats cross_stats;
    const auto records = load_cross_eval(release, parse_source_dataset(name),
                                         HateXplainMapping{config.hatexplain_offensive_is_hate}, &cross_stats);
    const fs::path p = data_dir / (name + ".jsonl");
    write_records(p, records);
    inputs.push_back(release);
    outputs.push_back(p);
    counts[name] = records.size();
    counts[name + "_no_majority"] = cross_stats.no_majority;
    counts[name + "_rejected_rows"] = cross_stats.rejected_rows;
  }
  counts["rows"] = stats.rows;
  counts["rejected_empty_post"] = stats.rejected_empty_post;
  counts["rejected_rows"] = stats.rejected_rows;
  counts["merged_duplicates"] = stats.merged_duplicates;
  counts["unmatched_companion_rows"] = stats.unmatched_companion_rows;

  json manifest = make_manifest(config, "ingest", inputs);
  manifest["counts"] = counts;
  write_manifest(config, "ingest", manifest, outputs);
  return manifest;
}

json cmd_generate(const RunConfig& config) {
  const std::vector<PostRecord> posts = load_dataset(config).train;
  if (posts.empty()) throw DataError("the train split has no posts to generate rationales for");
  const TaskVocabulary vocab = config.vocabulary();
  const std::size_t k = config.effective_k();
  auto client = make_client(config);
  ExtractOptions extract;
  extract.teacher = config.teacher;
  extract.stage2 = config.stage2;

  std::vector<std::vector<RationaleSample>> samples(posts.size());
  std::vector<std::vector<TrainingExample>> examples(posts.size());
  parallel_for(posts.size(), config.concurrency, [&](std::size_t i) {
    samples[i] = two_stage_extract(*client, posts[i], config.variant, k, vocab, extract);
    examples[i] = build_examples(posts[i], samples[i], vocab, config.targets);
  });

  std::vector<RationaleSample> all_samples;
  std::vector<TrainingExample> all_examples;
  std::size_t agreements = 0, class_only = 0, failed = 0, fully_failed_posts = 0;
  for (std::size_t i = 0; i < posts.size(); ++i) {
    bool any_agreement = false;
    for (auto& s : samples[i]) {
      if (!s.error.empty()) ++failed;
      all_samples.push_back(std::move(s));
    }
    for (auto& e : examples[i]) {
      if (e.kind == ExampleKind::class_and_rationale) {
        ++agreements;
        any_agreement = true;
      } else {
        ++class_only;
      }
      all_examples.push_back(std::move(e));
    }
    if (!any_agreement) ++fully_failed_posts;
  }

  const fs::path train_path = training_file_path(config);
  const fs::path audit_path = audit_file_path(config);
  const std::size_t lines = emit_training_file(std::move(all_examples), train_path);
  write_audit_file(audit_path, std::move(all_samples));

  std::vector<fs::path> inputs = dataset_inputs(config);
  if (config.backend.fixture) inputs.push_back(*config.backend.fixture);
  json manifest = make_manifest(config, "generate", inputs);
  manifest["counts"] = json{{"posts", posts.size()},
                            {"k", k},
                            {"samples", posts.size() * k},
                            {"agreements", agreements},
                            {"class_and_rationale", agreements},
                            {"class_only", class_only},
                            {"fully_failed_posts", fully_failed_posts},
                            {"training_examples", lines},
                            {"failed_samples", failed}};
  manifest["client"] = client_counts(client->stats());
  write_manifest(config, "generate", manifest, {train_path, audit_path});
  spdlog::info("generate: {} posts, {} class_and_rationale, {} class_only", posts.size(), agreements, class_only);
  if (failed > 0) {
    throw TransportError(TransportErrorKind::retries_exhausted,
                         std::to_string(failed) + " samples failed; outputs were written with error markers");
  }
  return manifest;
}

json cmd_emit_train(const RunConfig& config, const json& args) {
  const fs::path audit_path = arg_path(args, "audit", audit_file_path(config));
  const fs::path out_path = arg_path(args, "output", training_file_path(config));
  require_file(audit_path, "audit");
  const auto samples = read_audit_file(audit_path);
  const std::vector<PostRecord> posts = load_dataset(config).train;
  std::unordered_map<std::string, const PostRecord*> by_id;
  for (const auto& p : posts) by_id.emplace(p.id, &p);

  std::map<std::string, std::vector<RationaleSample>> grouped;
  for (const auto& s : samples) {
    if (!by_id.contains(s.post_id)) throw DataError("audit sample for unknown post '" + s.post_id + "'");
    grouped[s.post_id].push_back(s);
  }
  const TaskVocabulary vocab = config.vocabulary();
  std::vector<TrainingExample> examples;
  std::size_t agreements = 0;
  for (const auto& [id, group] : grouped) {
    for (auto& e : build_examples(*by_id.at(id), group, vocab, config.targets)) {
      if (e.kind == ExampleKind::class_and_rationale) ++agreements;
      examples.push_back(std::move(e));
    }
  }
  const std::size_t total = examples.size();
  emit_training_file(std::move(examples), out_path);

  std::vector<fs::path> inputs = dataset_inputs(config);
  inputs.push_back(audit_path);
  json manifest = make_manifest(config, "emit-train", inputs);
  manifest["counts"] = json{{"posts", grouped.size()},
                            {"samples", samples.size()},
                            {"class_and_rationale", agreements},
                            {"class_only", total - agreements},
                            {"training_examples", total}};
  write_manifest(config, "emit-train", manifest, {out_path});
  return manifest;
}

json cmd_evaluate(const RunConfig& config, const json& args) {
  const fs::path pred_path = arg_path(args, "predictions", {});
  require_file(pred_path, "predictions");
  std::vector<fs::path> inputs{pred_path};
  const auto golds = load_gold(config, arg_path(args, "gold", {}), inputs);
  if (golds.empty()) throw DataError("no gold records to evaluate against");
  const std::string name = args.value("name", std::string(to_string(golds.front().source_dataset)));
  const fs::path out_path = arg_path(args, "output", config.output_dir / ("report." + name + ".jsonl"));

  const auto preds = read_prediction_file(pred_path, config.vocabulary());
  CrossReport report;
  report.rows.push_back({name, compute_metrics(align_by_id(preds, golds), golds)});
  write_jsonl(out_path, report.lines());

  json manifest = make_manifest(config, "evaluate", inputs);
  manifest["metrics"] = json{{name, metrics_json(report.rows.front().metrics)}};
  manifest["table"] = report.render_table();
  write_manifest(config, "evaluate", manifest, {out_path});
  return manifest;
}

json cmd_cross_eval(const RunConfig& config, const json& args) {
  const auto pred_paths = arg_path_map(args, "predictions");
  if (pred_paths.empty()) throw UsageError("cross-eval needs predictions for at least one dataset");
  auto gold_paths = arg_path_map(args, "gold");
  const fs::path out_path = arg_path(args, "output", config.output_dir / "cross_eval.jsonl");

  std::vector<fs::path> inputs;
  std::map<std::string, std::vector<PredictionRecord>> outputs;
  std::map<std::string, std::vector<PostRecord>> golds;
  const TaskVocabulary vocab = config.vocabulary();
  for (const auto& [name, p] : pred_paths) {
    require_file(p, "predictions." + name);
    const fs::path gold = gold_paths.contains(name) ? gold_paths.at(name) : config.output_dir / "data" / (name + ".jsonl");
    require_file(gold, "gold." + name);
    inputs.push_back(p);
    inputs.push_back(gold);
    outputs.emplace(name, read_prediction_file(p, vocab));
    golds.emplace(name, read_records(gold));
  }
  const CrossReport report = cross_report(outputs, golds);
  write_jsonl(out_path, report.lines());

  json manifest = make_manifest(config, "cross-eval", inputs);
  json metrics = json::object();
  for (const auto& row : report.rows) metrics[row.dataset] = metrics_json(row.metrics);
  manifest["metrics"] = metrics;
  manifest["table"] = report.render_table();
  write_manifest(config, "cross-eval", manifest, {out_path});
  return manifest;
}

json cmd_judge(const RunConfig& config, const json& args) {
  struct MethodInput {
    std::string name;
    fs::path predictions;
  };
  auto method_arg = [&](const char* key) {
    auto it = args.find(key);
    if (it == args.end() || !it->is_object()) throw UsageError(std::string("judge needs '") + key + "' {name, predictions}");
    MethodInput m{it->value("name", std::string(key)), arg_path(*it, "predictions", {})};
    require_file(m.predictions, std::string(key) + ".predictions");
    return m;
  };
  const MethodInput m1 = method_arg("method1");
  const MethodInput m2 = method_arg("method2");
  if (m1.name == m2.name) throw UsageError("judge methods need distinct names");

  std::vector<fs::path> inputs{m1.predictions, m2.predictions};
  const auto golds = load_gold(config, arg_path(args, "gold", {}), inputs);
  const TaskVocabulary vocab = config.vocabulary();
  const auto preds1 = align_by_id(read_prediction_file(m1.predictions, vocab), golds);
  const auto preds2 = align_by_id(read_prediction_file(m2.predictions, vocab), golds);
  const std::size_t sample_size = args.value("sample_size", config.judge.sample_size);
  const auto instances = select_judge_instances(golds, {preds1, preds2}, sample_size, config.seed);
  if (instances.empty()) throw DataError("no positive posts that both methods predicted as hate");

  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < golds.size(); ++i) index.emplace(golds[i].id, i);

  struct Outcome {
    std::vector<json> lines;
    std::vector<SingleGrade> grades;
    std::optional<ResolvedComparison> resolved;
    std::size_t transport_errors = 0;
    std::size_t parse_errors = 0;
  };
  std::vector<Outcome> results(instances.size());
  auto client = make_client(config);
  Judge judge(*client, JudgeOptions{config.judge.model_name, config.judge.max_tokens});

  parallel_for(instances.size(), config.concurrency, [&](std::size_t i) {
    const PostRecord& post = instances[i];
    const std::size_t g = index.at(post.id);
    Outcome& out = results[i];
    auto guarded = [&](const json& marker, auto&& body) {
      try {
        body();
      } catch (const TransportError& e) {
        ++out.transport_errors;
        json line = marker;
        line["error"] = e.what();
        out.lines.push_back(std::move(line));
      } catch (const JudgeParseError& e) {
        ++out.parse_errors;
        json line = marker;
        line["error"] = e.what();
        out.lines.push_back(std::move(line));
      }
    };
    for (const auto& [method, pred] : {std::pair{&m1, &preds1[g]}, std::pair{&m2, &preds2[g]}}) {
      guarded(json{{"post_id", post.id}, {"method", method->name}}, [&] {
        const SingleGrade grade = judge.grade_single(post, method->name, pred->raw_output);
        out.grades.push_back(grade);
        out.lines.push_back(json{{"post_id", post.id}, {"method", grade.method}, {"score", grade.score}});
      });
    }
    if (post.targets.empty() || post.implied_statements.empty()) {
      out.lines.push_back(json{{"post_id", post.id}, {"outcome", nullptr}, {"error", "post lacks target or implied statement"}});
      return;
    }
    guarded(json{{"post_id", post.id}, {"outcome", nullptr}}, [&] {
      const auto [original, swapped] = judge.compare_pair(post, preds1[g].raw_output, preds2[g].raw_output);
      const ResolvedComparison resolved = resolve_verdicts(original, swapped);
      out.resolved = resolved;
      const auto name_of = [&](MethodChoice c) {
        return c == MethodChoice::method1 ? m1.name : c == MethodChoice::method2 ? m2.name : std::string("tie");
      };
      out.lines.push_back(json{{"post_id", post.id},
                               {"outcome", name_of(resolved.outcome)},
                               {"original", name_of(original.method_chosen)},
                               {"swapped", name_of(swapped.method_chosen)}});
    });
  });

  std::vector<json> lines;
  std::map<std::string, std::vector<SingleGrade>> grades;
  std::size_t wins1 = 0, wins2 = 0, ties = 0, excluded = 0, transport_errors = 0, parse_errors = 0;
  for (auto& r : results) {
    for (auto& l : r.lines) lines.push_back(std::move(l));
    for (auto& g : r.grades) grades[g.method].push_back(std::move(g));
    transport_errors += r.transport_errors;
    parse_errors += r.parse_errors;
    if (!r.resolved) {
      ++excluded;
      continue;
    }
    switch (r.resolved->outcome) {
      case MethodChoice::method1: ++wins1; break;
      case MethodChoice::method2: ++wins2; break;
      case MethodChoice::tie: ++ties; break;
    }
  }

  json single = json::object();
  for (const auto* m : {&m1, &m2}) {
    single[m->name] = grades.contains(m->name)
                          ? summary_json(aggregate_scores(grades.at(m->name), config.judge.ci, config.seed))
                          : json(nullptr);
  }
  json summary{{"instances", instances.size()},
               {"single", single},
               {"pairwise",
                {{m1.name, {{"wins", wins1}, {"ties", ties}, {"losses", wins2}}},
                 {m2.name, {{"wins", wins2}, {"ties", ties}, {"losses", wins1}}},
                 {"compared", wins1 + wins2 + ties},
                 {"excluded", excluded}}},
               {"errors", {{"transport", transport_errors}, {"parse", parse_errors}}}};

  const fs::path report_path = arg_path(args, "output", config.output_dir / "judge.jsonl");
  fs::path summary_path = report_path;
  summary_path.replace_extension(".summary.json");
  write_jsonl(report_path, lines);
  write_text_atomic(summary_path, summary.dump(2) + "\n");

  if (config.backend.fixture) inputs.push_back(*config.backend.fixture);
  json manifest = make_manifest(config, "judge", inputs);
  manifest["summary"] = summary;
  manifest["client"] = client_counts(client->stats());
  write_manifest(config, "judge", manifest, {report_path, summary_path});
  if (transport_errors > 0) {
    throw TransportError(TransportErrorKind::retries_exhausted,
                         std::to_string(transport_errors) + " judge calls failed; partial results were written");
  }
  if (parse_errors > 0) {
    throw JudgeParseError(std::to_string(parse_errors) + " judge replies had no valid token; see " +
                          path_string(report_path));
  }
  return manifest;
}

json cmd_report(const RunConfig& config, const json& args) {
  std::vector<fs::path> inputs;
  CrossReport report;
  if (auto it = args.find("reports"); it != args.end() && !it->is_null()) {
    if (!it->is_array()) throw UsageError("report: 'reports' must be a list of report files");
    for (const auto& p : *it) {
      const fs::path path(p.get<std::string>());
      require_file(path, "report");
      inputs.push_back(path);
      for (auto& row : read_report_file(path)) report.rows.push_back(std::move(row));
    }
  }
  std::string text;
  if (!report.rows.empty()) text += report.render_table();

  const fs::path judge_path = arg_path(args, "judge_summary", {});
  if (!judge_path.empty()) {
    require_file(judge_path, "judge summary");
    inputs.push_back(judge_path);
    json summary;
    try {
      summary = json::parse(read_text(judge_path));
    } catch (const json::parse_error& e) {
      throw DataError("judge summary is not valid JSON: " + std::string(e.what()));
    }
    if (!text.empty()) text += "\n";
    text += "Single-answer grading (mean, 95% CI)\n";
    char buf[256];
    for (const auto& [method, s] : summary.at("single").items()) {
      if (s.is_null()) {
        std::snprintf(buf, sizeof buf, "  %-20s  no grades\n", method.c_str());
      } else {
        std::snprintf(buf, sizeof buf, "  %-20s  %5.2f  (%5.2f, %5.2f)  n=%zu\n", method.c_str(),
                      s.at("mean").get<double>(), s.at("ci_low").get<double>(), s.at("ci_high").get<double>(),
                      s.at("n").get<std::size_t>());
      }
      text += buf;
    }
    text += "Pairwise comparison (win / tie / loss)\n";
    for (const auto& [method, s] : summary.at("pairwise").items()) {
      if (!s.is_object()) continue;
      std::snprintf(buf, sizeof buf, "  %-20s  %zu / %zu / %zu\n", method.c_str(), s.at("wins").get<std::size_t>(),
                    s.at("ties").get<std::size_t>(), s.at("losses").get<std::size_t>());
      text += buf;
    }
  }
  if (inputs.empty()) throw UsageError("report needs at least one report file or a judge summary");

  std::vector<fs::path> outputs;
  const fs::path out_path = arg_path(args, "output", {});
  if (!out_path.empty()) {
    write_text_atomic(out_path, text);
    outputs.push_back(out_path);
  }
  json manifest = make_manifest(config, "report", inputs);
  manifest["text"] = text;
  write_manifest(config, "report", manifest, outputs);
  return manifest;
}

json run_command(const RunConfig& config, std::string_view command, const json& args) {
  const json a = args.is_null() ? json::object() : args;
  if (!a.is_object()) throw UsageError("command arguments must be a JSON object");
  if (command == "ingest") return cmd_ingest(config);
  if (command == "generate") return cmd_generate(config);
  if (command == "emit-train") return cmd_emit_train(config, a);
  if (command == "evaluate") return cmd_evaluate(config, a);
  if (command == "cross-eval") return cmd_cross_eval(config, a);
  if (command == "judge") return cmd_judge(config, a);
  if (command == "report") return cmd_report(config, a);
  throw UsageError("unknown command '" + std::string(command) + "'");
}

}  // namespace cotdistill
