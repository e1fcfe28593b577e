#include "cotdistill/types.hpp"

#include <algorithm>
#include <cctype>

#include <nlohmann/json.hpp>

namespace cotdistill {

std::string_view to_string(BinaryLabel label) {
  return label == BinaryLabel::hate ? "hate" : "not_hate";
}

std::string_view to_string(SourceDataset dataset) {
  switch (dataset) {
    case SourceDataset::sbic: return "SBIC";
    case SourceDataset::implicit_hate: return "ImplicitHate";
    case SourceDataset::hatexplain: return "HateXplain";
    case SourceDataset::dynahate: return "DynaHate";
  }
  return "SBIC";
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

std::string_view to_string(ClassLabel label) {
  switch (label) {
    case ClassLabel::hate: return "hate";
    case ClassLabel::not_hate: return "not_hate";
    case ClassLabel::unknown: return "unknown";
  }
  return "unknown";
}

BinaryLabel parse_binary_label(std::string_view text) {
  if (text == "hate") return BinaryLabel::hate;
  if (text == "not_hate") return BinaryLabel::not_hate;
  throw DataError("unknown label '" + std::string(text) + "'");
}

ClassLabel parse_class_label(std::string_view text) {
  if (text == "unknown") return ClassLabel::unknown;
  return to_class(parse_binary_label(text));
}

SourceDataset parse_source_dataset(std::string_view text) {
  const std::string lower = to_lower_ascii(text);
  if (lower == "sbic") return SourceDataset::sbic;
  if (lower == "implicithate" || lower == "implicit_hate") return SourceDataset::implicit_hate;
  if (lower == "hatexplain") return SourceDataset::hatexplain;
  if (lower == "dynahate") return SourceDataset::dynahate;
  throw UsageError("unknown dataset '" + std::string(text) + "'");
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "val" || text == "dev") return Split::val;
  if (text == "test") return Split::test;
  throw UsageError("unknown split '" + std::string(text) + "'");
}

void to_json(nlohmann::json& j, const PostRecord& r) {
  j = nlohmann::json{{"id", r.id},
                     {"post", r.post},
                     {"gold_label", to_string(r.gold_label)},
                     {"targets", r.targets},
                     {"implied_statements", r.implied_statements},
                     {"source_dataset", to_string(r.source_dataset)},
                     {"split", to_string(r.split)}};
}

void from_json(const nlohmann::json& j, PostRecord& r) {
  r.id = j.at("id").get<std::string>();
  r.post = j.at("post").get<std::string>();
  if (trim(r.post).empty()) throw DataError("record '" + r.id + "' has an empty post");
  r.gold_label = parse_binary_label(j.at("gold_label").get<std::string>());
  r.targets = j.value("targets", std::vector<std::string>{});
  r.implied_statements = j.value("implied_statements", std::vector<std::string>{});
  try {
    r.source_dataset = parse_source_dataset(j.at("source_dataset").get<std::string>());
    r.split = parse_split(j.at("split").get<std::string>());
  } catch (const UsageError& e) {
    throw DataError("record '" + r.id + "': " + e.what());
  }
}

void to_json(nlohmann::json& j, const ParsedClass& c) {
  j = nlohmann::json{{"label", to_string(c.label)}, {"evidence", c.evidence}};
}

void from_json(const nlohmann::json& j, ParsedClass& c) {
  c.label = parse_class_label(j.at("label").get<std::string>());
  c.evidence = j.value("evidence", std::string{});
}

TaskVocabulary TaskVocabulary::offensive() { return {"offensive", "Offensive", "Not offensive"}; }

TaskVocabulary TaskVocabulary::hateful() { return {"hateful", "Hateful", "Not hateful"}; }

TaskVocabulary TaskVocabulary::for_dataset(SourceDataset dataset) {
  return dataset == SourceDataset::implicit_hate ? hateful() : offensive();
}

std::string trim(std::string_view text) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  auto begin = std::find_if_not(text.begin(), text.end(), is_space);
  auto end = std::find_if_not(text.rbegin(), std::string_view::reverse_iterator(begin), is_space).base();
  return std::string(begin, end);
}

std::string to_lower_ascii(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace cotdistill
