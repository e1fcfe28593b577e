#include "cotdistill/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <unordered_map>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "cotdistill/csv.hpp"
#include "cotdistill/io.hpp"

namespace cotdistill {
namespace {

std::string stable_id(std::string_view prefix, std::string_view post) {
  return std::string(prefix) + "-" + sha256_hex(post).substr(0, 16);
}

// Annotation cells are either a plain string or a JSON list of strings.
std::vector<std::string> annotation_values(const std::string& cell) {
  const std::string text = trim(cell);
  if (text.empty()) return {};
  if (text.front() == '[') {
    try {
      auto parsed = json::parse(text);
      if (parsed.is_array()) {
        std::vector<std::string> out;
        for (const auto& item : parsed) {
          if (item.is_string()) out.push_back(item.get<std::string>());
        }
        return out;
      }
    } catch (const json::parse_error&) {
    }
  }
  return {text};
}

void require_unique_ids(const std::vector<PostRecord>& records, const std::string& source) {
  std::unordered_set<std::string> seen;
  for (const auto& r : records) {
    if (!seen.insert(r.id).second) throw DataError("duplicate id '" + r.id + "' in '" + source + "'");
  }
}

void finish(std::vector<PostRecord>& records, const std::filesystem::path& path, LoadStats& stats) {
  if (records.empty()) throw DataError("no records parsed from '" + path.string() + "'");
  require_unique_ids(records, path.string());
  stats.records = records.size();
  if (stats.rejected_empty_post > 0 || stats.rejected_rows > 0 || stats.no_majority > 0) {
    spdlog::warn("{}: rejected {} empty posts, {} unlabeled rows, {} posts without majority label",
                 path.string(), stats.rejected_empty_post, stats.rejected_rows, stats.no_majority);
  }
}

std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  // Rejection sampling keeps the draw unbiased and platform independent.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t value;
  do {
    value = rng();
  } while (value >= limit);
  return value % bound;
}

}  // namespace

void SplitSpec::validate() const {
  double sum = 0;
  for (double r : ratios) {
    if (!(r >= 0.0)) throw UsageError("split ratios must be non-negative");
    sum += r;
  }
  if (std::fabs(sum - 1.0) > 1e-9) throw UsageError("split ratios must sum to 1");
}

std::vector<PostRecord>& SplitResult::operator[](Split split) {
  switch (split) {
    case Split::train: return train;
    case Split::val: return val;
    case Split::test: return test;
  }
  return train;
}

const std::vector<PostRecord>& SplitResult::operator[](Split split) const {
  return const_cast<SplitResult&>(*this)[split];
}

void append_unique(std::vector<std::string>& values, std::string_view candidate) {
  std::string value = trim(candidate);
  if (value.empty()) return;
  const std::string key = to_lower_ascii(value);
  for (const auto& existing : values) {
    if (to_lower_ascii(existing) == key) return;
  }
  values.push_back(std::move(value));
}

std::vector<PostRecord> load_sbic(const std::filesystem::path& path, Split split,
                                  const SbicOptions& options, LoadStats* stats_out) {
  LoadStats stats;
  const auto table = DelimitedTable::read(path);
  const auto post_col = table.column("post");
  const auto score_col = table.column("offensiveYN");
  const auto target_col = table.column("targetMinority");
  const auto stereotype_col = table.column("targetStereotype");

  struct Aggregate {
    PostRecord record;
    double score_sum = 0;
    std::size_t annotations = 0;
  };
  std::vector<Aggregate> posts;
  std::unordered_map<std::string, std::size_t> by_text;

  for (const auto& row : table.rows()) {
    ++stats.rows;
    std::string post = trim(row[post_col]);
    if (post.empty()) {
      ++stats.rejected_empty_post;
      continue;
    }
    const std::string score_text = trim(row[score_col]);
    if (score_text.empty()) {
      ++stats.rejected_rows;
      continue;
    }
    double score = 0;
    try {
      std::size_t used = 0;
      score = std::stod(score_text, &used);
      if (used != score_text.size()) throw std::invalid_argument(score_text);
    } catch (const std::exception&) {
      throw DataError("'" + path.string() + "': non-numeric offensiveYN '" + score_text + "'");
    }

    auto [it, inserted] = by_text.try_emplace(post, posts.size());
    if (inserted) {
      Aggregate agg;
      agg.record.id = stable_id("sbic", post);
      agg.record.post = post;
      agg.record.source_dataset = SourceDataset::sbic;
      agg.record.split = split;
      posts.push_back(std::move(agg));
    }
    auto& agg = posts[it->second];
    agg.score_sum += score;
    ++agg.annotations;
    for (const auto& t : annotation_values(row[target_col])) append_unique(agg.record.targets, t);
    for (const auto& s : annotation_values(row[stereotype_col])) {
      append_unique(agg.record.implied_statements, s);
    }
  }

  std::vector<PostRecord> records;
  records.reserve(posts.size());
  for (auto& agg : posts) {
    const double mean = agg.score_sum / static_cast<double>(agg.annotations);
    agg.record.gold_label = mean >= options.threshold ? BinaryLabel::hate : BinaryLabel::not_hate;
    records.push_back(std::move(agg.record));
  }
  finish(records, path, stats);
  if (stats_out) *stats_out = stats;
  return records;
}

SplitResult load_implicit_hate(const std::filesystem::path& path, const SplitSpec& spec,
                               const std::optional<std::filesystem::path>& companion,
                               LoadStats* stats_out) {
  spec.validate();
  LoadStats stats;
  const auto table = DelimitedTable::read(path);
  const auto post_col = table.column("post");
  const auto class_col = table.column("class");

  std::vector<PostRecord> records;
  std::unordered_map<std::string, std::size_t> by_text;
  for (const auto& row : table.rows()) {
    ++stats.rows;
    std::string post = trim(row[post_col]);
    if (post.empty()) {
      ++stats.rejected_empty_post;
      continue;
    }
    const std::string cls = trim(row[class_col]);
    BinaryLabel label;
    if (cls == "implicit_hate" || cls == "explicit_hate") {
      label = BinaryLabel::hate;
    } else if (cls == "not_hate") {
      label = BinaryLabel::not_hate;
    } else {
      throw DataError("'" + path.string() + "': unknown class '" + cls + "'");
    }
    auto [it, inserted] = by_text.try_emplace(post, records.size());
    if (!inserted) {
      if (records[it->second].gold_label != label) {
        throw DataError("'" + path.string() + "': join key collision, post appears with conflicting classes: " +
                        post.substr(0, 80));
      }
      ++stats.merged_duplicates;
      continue;
    }
    PostRecord r;
    r.id = stable_id("ih", post);
    r.post = std::move(post);
    r.gold_label = label;
    r.source_dataset = SourceDataset::implicit_hate;
    records.push_back(std::move(r));
  }

  if (companion) {
    const auto extra = DelimitedTable::read(*companion);
    const auto c_post = extra.column("post");
    const auto c_target = extra.column("target");
    const auto c_implied = extra.column("implied_statement");
    for (const auto& row : extra.rows()) {
      auto it = by_text.find(trim(row[c_post]));
      if (it == by_text.end()) {
        ++stats.unmatched_companion_rows;
        continue;
      }
      auto& r = records[it->second];
      append_unique(r.targets, row[c_target]);
      append_unique(r.implied_statements, row[c_implied]);
    }
  }

  finish(records, path, stats);
  if (stats_out) *stats_out = stats;
  return split_random(std::move(records), spec);
}

namespace {

std::vector<PostRecord> load_dynahate(const std::filesystem::path& path, LoadStats& stats) {
  const auto table = DelimitedTable::read(path);
  const auto text_col = table.column("text");
  const auto label_col = table.column("label");
  const std::optional<std::size_t> id_col =
      table.has_column("acl.id") ? std::optional(table.column("acl.id")) : std::nullopt;

  std::vector<PostRecord> records;
  for (const auto& row : table.rows()) {
    ++stats.rows;
    std::string post = trim(row[text_col]);
    if (post.empty()) {
      ++stats.rejected_empty_post;
      continue;
    }
    const std::string label = trim(row[label_col]);
    PostRecord r;
    if (label == "hate") {
      r.gold_label = BinaryLabel::hate;
    } else if (label == "nothate") {
      r.gold_label = BinaryLabel::not_hate;
    } else {
      throw DataError("'" + path.string() + "': unmappable DynaHate label '" + label + "'");
    }
    r.id = id_col && !trim(row[*id_col]).empty() ? trim(row[*id_col]) : stable_id("dyna", post);
    r.post = std::move(post);
    r.source_dataset = SourceDataset::dynahate;
    r.split = Split::test;
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<PostRecord> load_hatexplain(const std::filesystem::path& path, const HateXplainMapping& mapping,
                                        LoadStats& stats) {
  json doc;
  try {
    doc = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw DataError("'" + path.string() + "': " + e.what());
  }
  std::vector<json> entries;
  if (doc.is_object()) {
    for (auto& [key, value] : doc.items()) {
      if (!value.contains("post_id")) value["post_id"] = key;
      entries.push_back(value);
    }
  } else if (doc.is_array()) {
    entries.assign(doc.begin(), doc.end());
  } else {
    throw DataError("'" + path.string() + "': expected a JSON object or array");
  }

  std::vector<PostRecord> records;
  for (const auto& entry : entries) {
    ++stats.rows;
    std::string post;
    if (entry.contains("post_tokens")) {
      for (const auto& token : entry.at("post_tokens")) {
        if (!post.empty()) post += ' ';
        post += token.get<std::string>();
      }
    } else {
      post = entry.value("post", std::string{});
    }
    post = trim(post);
    if (post.empty()) {
      ++stats.rejected_empty_post;
      continue;
    }
    std::map<std::string, int> votes;
    std::size_t annotators = 0;
    PostRecord r;
    for (const auto& annotator : entry.value("annotators", json::array())) {
      const std::string label = annotator.at("label").get<std::string>();
      if (label != "hatespeech" && label != "offensive" && label != "normal") {
        throw DataError("'" + path.string() + "': unmappable HateXplain label '" + label + "'");
      }
      ++votes[label];
      ++annotators;
      for (const auto& t : annotator.value("target", json::array())) {
        if (t.is_string() && t.get<std::string>() != "None") append_unique(r.targets, t.get<std::string>());
      }
    }
    std::string majority;
    for (const auto& [label, count] : votes) {
      if (2 * static_cast<std::size_t>(count) > annotators) majority = label;
    }
    if (majority.empty()) {
      ++stats.no_majority;
      continue;
    }
    const bool hate = majority == "hatespeech" || (majority == "offensive" && mapping.offensive_is_hate);
    r.gold_label = hate ? BinaryLabel::hate : BinaryLabel::not_hate;
    r.id = entry.value("post_id", stable_id("hx", post));
    r.post = std::move(post);
    r.source_dataset = SourceDataset::hatexplain;
    r.split = Split::test;
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace

std::vector<PostRecord> load_cross_eval(const std::filesystem::path& path, SourceDataset dataset,
                                        const HateXplainMapping& mapping, LoadStats* stats_out) {
  LoadStats stats;
  std::vector<PostRecord> records;
  switch (dataset) {
    case SourceDataset::dynahate: records = load_dynahate(path, stats); break;
    case SourceDataset::hatexplain: records = load_hatexplain(path, mapping, stats); break;
    default: throw UsageError("cross evaluation supports HateXplain and DynaHate only");
  }
  finish(records, path, stats);
  if (stats_out) *stats_out = stats;
  return records;
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(bounded(rng, i));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

SplitResult split_random(std::vector<PostRecord> records, const SplitSpec& spec) {
  spec.validate();
  if (records.empty()) throw DataError("cannot split an empty record list");
  const std::size_t n = records.size();

  // Slices follow descending ratio (ties: train, val, test). Every role but
  // the first gets floor(n * ratio); the first takes the remainder.
  std::array<std::size_t, 3> layout{0, 1, 2};
  std::stable_sort(layout.begin(), layout.end(),
                   [&](std::size_t a, std::size_t b) { return spec.ratios[a] > spec.ratios[b]; });
  std::array<std::size_t, 3> sizes{};
  std::size_t assigned = 0;
  for (std::size_t slot = 1; slot < 3; ++slot) {
    const std::size_t role = layout[slot];
    sizes[role] = static_cast<std::size_t>(std::floor(static_cast<double>(n) * spec.ratios[role] + 1e-9));
    assigned += sizes[role];
  }
  sizes[layout[0]] = n - assigned;

  const auto order = seeded_permutation(n, spec.seed);
  SplitResult result;
  std::size_t cursor = 0;
  for (std::size_t role : layout) {
    const Split split = static_cast<Split>(role);
    auto& bucket = result[split];
    bucket.reserve(sizes[role]);
    for (std::size_t i = 0; i < sizes[role]; ++i) {
      PostRecord r = std::move(records[order[cursor++]]);
      r.split = split;
      bucket.push_back(std::move(r));
    }
  }
  return result;
}

std::vector<PostRecord> read_records(const std::filesystem::path& path) {
  std::vector<PostRecord> out;
  for (const auto& line : read_jsonl(path)) {
    try {
      out.push_back(line.get<PostRecord>());
    } catch (const json::exception& e) {
      throw DataError("'" + path.string() + "': bad record: " + e.what());
    }
  }
  return out;
}

void write_records(const std::filesystem::path& path, const std::vector<PostRecord>& records) {
  std::vector<json> lines;
  lines.reserve(records.size());
  for (const auto& r : records) lines.emplace_back(r);
  write_jsonl(path, lines);
}

}  // namespace cotdistill
