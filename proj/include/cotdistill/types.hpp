#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace cotdistill {

// Error categories map one-to-one onto CLI exit codes (see cotdistill.h).
enum class ErrorCategory { usage = 1, data = 2, transport = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorCategory::usage, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

enum class BinaryLabel { hate, not_hate };

enum class SourceDataset { sbic, implicit_hate, hatexplain, dynahate };

enum class Split { train, val, test };

std::string_view to_string(BinaryLabel label);
std::string_view to_string(SourceDataset dataset);
std::string_view to_string(Split split);

BinaryLabel parse_binary_label(std::string_view text);
SourceDataset parse_source_dataset(std::string_view text);
Split parse_split(std::string_view text);

struct PostRecord {
  std::string id;
  std::string post;
  BinaryLabel gold_label = BinaryLabel::not_hate;
  std::vector<std::string> targets;
  std::vector<std::string> implied_statements;
  SourceDataset source_dataset = SourceDataset::sbic;
  Split split = Split::train;

  bool has_annotations() const { return !targets.empty() || !implied_statements.empty(); }

  friend bool operator==(const PostRecord&, const PostRecord&) = default;
};

void to_json(nlohmann::json& j, const PostRecord& r);
void from_json(const nlohmann::json& j, PostRecord& r);

/// Words a task uses when talking about the positive class. SBIC posts are
/// judged for offensiveness, Implicit Hate posts for hatefulness.
struct TaskVocabulary {
  std::string positive_word;          // "offensive"
  std::string positive_label_render;  // "Offensive"
  std::string negative_label_render;  // "Not offensive"

  static TaskVocabulary offensive();
  static TaskVocabulary hateful();
  static TaskVocabulary for_dataset(SourceDataset dataset);

  std::string_view render(BinaryLabel label) const {
    return label == BinaryLabel::hate ? positive_label_render : negative_label_render;
  }

  friend bool operator==(const TaskVocabulary&, const TaskVocabulary&) = default;
};

enum class ClassLabel { hate, not_hate, unknown };

std::string_view to_string(ClassLabel label);
ClassLabel parse_class_label(std::string_view text);

inline ClassLabel to_class(BinaryLabel label) {
  return label == BinaryLabel::hate ? ClassLabel::hate : ClassLabel::not_hate;
}

/// A class read out of free text. `evidence` is the substring that decided it;
/// it is empty exactly when the label is unknown.
struct ParsedClass {
  ClassLabel label = ClassLabel::unknown;
  std::string evidence;

  static ParsedClass unknown() { return {}; }
  bool matches(BinaryLabel gold) const { return label == to_class(gold); }

  friend bool operator==(const ParsedClass&, const ParsedClass&) = default;
};

void to_json(nlohmann::json& j, const ParsedClass& c);
void from_json(const nlohmann::json& j, ParsedClass& c);

// ASCII whitespace trim; posts are otherwise kept byte-for-byte.
std::string trim(std::string_view text);
std::string to_lower_ascii(std::string_view text);

}  // namespace cotdistill
