#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cotdistill/llm_client.hpp"
#include "cotdistill/metrics.hpp"
#include "cotdistill/types.hpp"

namespace cotdistill {

/// A judge reply without a usable rating or verdict token.
class JudgeParseError : public DataError {
 public:
  using DataError::DataError;
};

struct RatingToken {
  int value = 0;
  std::string token;  // e.g. "[[7]]"
};

/// Last "[[<integer>]]" in the reply; must lie in 1..10.
RatingToken parse_rating(std::string_view reply);

struct VerdictToken {
  char letter = 'C';
  std::string token;
};

/// Last single-letter "[[X]]" in the reply; must be A, B or C.
VerdictToken parse_verdict(std::string_view reply);

enum class Presentation { original, swapped };
enum class MethodChoice { method1, method2, tie };

std::string_view to_string(Presentation order);
std::string_view to_string(MethodChoice choice);

/// In the swapped order assistant A shows method 2's answer.
MethodChoice translate_letter(char letter, Presentation order);

struct SingleGrade {
  std::string post_id;
  std::string method;
  int score = 0;
  std::string raw;
  std::string token;
};

struct PairVerdict {
  std::string post_id;
  Presentation order = Presentation::original;
  char raw_letter = 'C';
  MethodChoice method_chosen = MethodChoice::tie;
  std::string raw;
  std::string token;
};

struct ResolvedComparison {
  std::string post_id;
  MethodChoice outcome = MethodChoice::tie;
};

/// Agreement wins; a split decision is a tie; a tie against a pick yields the
/// pick.
ResolvedComparison resolve_verdicts(const PairVerdict& original, const PairVerdict& swapped);

struct JudgeOptions {
  std::string model_name = "gpt-4";
  int max_tokens = 1024;
};

class Judge {
 public:
  Judge(LlmClient& client, JudgeOptions options) : client_(client), options_(std::move(options)) {}

  SingleGrade grade_single(const PostRecord& post, const std::string& method, std::string_view answer);

  /// Two calls: answer1 as assistant A, then answer2 as assistant A.
  std::pair<PairVerdict, PairVerdict> compare_pair(const PostRecord& post, std::string_view answer1,
                                                   std::string_view answer2);

 private:
  std::string ask(const PromptText& prompt, const std::string& post_id, const std::string& route);

  LlmClient& client_;
  JudgeOptions options_;
};

struct ScoreSummary {
  double mean = 0;
  double ci_low = 0;
  double ci_high = 0;
  std::size_t n = 0;
};

enum class CiMethod { normal, bootstrap };

/// Mean with a 95% interval. The normal interval is mean +- 1.96 s / sqrt(n)
/// using the sample standard deviation; n == 1 gives (mean, mean).
ScoreSummary aggregate_scores(const std::vector<SingleGrade>& grades, CiMethod method = CiMethod::normal,
                              std::uint64_t seed = 0, std::size_t resamples = 10000);

ScoreSummary aggregate_values(const std::vector<double>& values, CiMethod method = CiMethod::normal,
                              std::uint64_t seed = 0, std::size_t resamples = 10000);

/// Positive-gold posts that every method predicted as hate, sampled with a
/// seeded shuffle and returned in gold order.
std::vector<PostRecord> select_judge_instances(const std::vector<PostRecord>& golds,
                                               const std::vector<std::vector<PredictionRecord>>& method_preds,
                                               std::size_t sample_size, std::uint64_t seed);

}  // namespace cotdistill
