#include "cotdistill/judge.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <regex>
#include <unordered_map>

#include "cotdistill/dataset.hpp"
#include "cotdistill/prompting.hpp"

namespace cotdistill {
namespace {

std::smatch last_smatch(const std::string& text, const std::regex& re) {
  std::smatch last;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it) last = *it;
  return last;
}

std::string excerpt(std::string_view reply) {
  std::string s(reply.substr(0, 80));
  if (reply.size() > 80) s += "...";
  return s;
}

}  // namespace

RatingToken parse_rating(std::string_view reply) {
  static const std::regex rating_re(R"(\[\[\s*([+-]?\d+)\s*\]\])");
  const std::string text(reply);
  const auto m = last_smatch(text, rating_re);
  if (m.empty()) throw JudgeParseError("no [[rating]] token in judge reply: " + excerpt(reply));
  const std::string digits = m.str(1);
  // Long digit strings would overflow stoi; anything that long is out of range anyway.
  const int value = digits.size() > 3 ? 1000 : std::stoi(digits);
  if (value < 1 || value > 10) throw JudgeParseError("rating " + digits + " outside 1..10");
  return RatingToken{value, m.str(0)};
}

VerdictToken parse_verdict(std::string_view reply) {
  static const std::regex verdict_re(R"(\[\[\s*([A-Za-z])\s*\]\])");
  const std::string text(reply);
  const auto m = last_smatch(text, verdict_re);
  if (m.empty()) throw JudgeParseError("no [[A]]/[[B]]/[[C]] token in judge reply: " + excerpt(reply));
  const char letter = m.str(1)[0];
  if (letter != 'A' && letter != 'B' && letter != 'C') {
    throw JudgeParseError("verdict " + m.str(0) + " is not one of [[A]], [[B]], [[C]]");
  }
  return VerdictToken{letter, m.str(0)};
}

std::string_view to_string(Presentation order) { return order == Presentation::original ? "original" : "swapped"; }

std::string_view to_string(MethodChoice choice) {
  switch (choice) {
    case MethodChoice::method1: return "method1";
    case MethodChoice::method2: return "method2";
    case MethodChoice::tie: return "tie";
  }
  return "tie";
}

MethodChoice translate_letter(char letter, Presentation order) {
  switch (letter) {
    case 'A': return order == Presentation::original ? MethodChoice::method1 : MethodChoice::method2;
    case 'B': return order == Presentation::original ? MethodChoice::method2 : MethodChoice::method1;
    case 'C': return MethodChoice::tie;
  }
  throw JudgeParseError(std::string("unknown verdict letter '") + letter + "'");
}

ResolvedComparison resolve_verdicts(const PairVerdict& original, const PairVerdict& swapped) {
  if (original.order != Presentation::original || swapped.order != Presentation::swapped) {
    throw UsageError("resolve_verdicts needs one original-order and one swapped-order verdict");
  }
  if (original.post_id != swapped.post_id) {
    throw UsageError("verdicts belong to different posts: " + original.post_id + " vs " + swapped.post_id);
  }
  const MethodChoice a = original.method_chosen;
  const MethodChoice b = swapped.method_chosen;
  MethodChoice outcome;
  if (a == b) {
    outcome = a;
  } else if (a == MethodChoice::tie) {
    outcome = b;
  } else if (b == MethodChoice::tie) {
    outcome = a;
  } else {
    outcome = MethodChoice::tie;
  }
  return ResolvedComparison{original.post_id, outcome};
}

std::string Judge::ask(const PromptText& prompt, const std::string& post_id, const std::string& route) {
  CompletionRequest request{prompt, options_.model_name, 0.0, 1.0, options_.max_tokens, 0, RequestMeta{post_id, route}};
  return client_.complete(request).text;
}

SingleGrade Judge::grade_single(const PostRecord& post, const std::string& method, std::string_view answer) {
  SingleGrade grade;
  grade.post_id = post.id;
  grade.method = method;
  grade.raw = ask(render_judge_single(post, answer), post.id, method);
  const auto token = parse_rating(grade.raw);
  grade.score = token.value;
  grade.token = token.token;
  return grade;
}

std::pair<PairVerdict, PairVerdict> Judge::compare_pair(const PostRecord& post, std::string_view answer1,
                                                        std::string_view answer2) {
  auto run = [&](Presentation order, std::string_view a, std::string_view b) {
    PairVerdict v;
    v.post_id = post.id;
    v.order = order;
    v.raw = ask(render_judge_pairwise(post, a, b), post.id, std::string(to_string(order)));
    const auto token = parse_verdict(v.raw);
    v.raw_letter = token.letter;
    v.token = token.token;
    v.method_chosen = translate_letter(token.letter, order);
    return v;
  };
  PairVerdict original = run(Presentation::original, answer1, answer2);
  PairVerdict swapped = run(Presentation::swapped, answer2, answer1);
  return {std::move(original), std::move(swapped)};
}

ScoreSummary aggregate_values(const std::vector<double>& values, CiMethod method, std::uint64_t seed,
                              std::size_t resamples) {
  if (values.empty()) throw UsageError("cannot aggregate an empty score list");
  ScoreSummary s;
  s.n = values.size();
  const double n = static_cast<double>(s.n);
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (s.n == 1) {
    s.ci_low = s.ci_high = s.mean;
    return s;
  }
  if (method == CiMethod::normal) {
    double ss = 0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    const double sd = std::sqrt(ss / (n - 1));
    const double half = 1.96 * sd / std::sqrt(n);
    s.ci_low = s.mean - half;
    s.ci_high = s.mean + half;
    return s;
  }
  std::mt19937_64 rng(seed);
  std::vector<double> means;
  means.reserve(resamples);
  for (std::size_t r = 0; r < resamples; ++r) {
    double sum = 0;
    for (std::size_t i = 0; i < s.n; ++i) sum += values[rng() % s.n];
    means.push_back(sum / n);
  }
  std::sort(means.begin(), means.end());
  auto at = [&](double q) { return means[static_cast<std::size_t>(q * static_cast<double>(means.size() - 1))]; };
  s.ci_low = at(0.025);
  s.ci_high = at(0.975);
  return s;
}

ScoreSummary aggregate_scores(const std::vector<SingleGrade>& grades, CiMethod method, std::uint64_t seed,
                              std::size_t resamples) {
  std::vector<double> values;
  values.reserve(grades.size());
  for (const auto& g : grades) values.push_back(g.score);
  return aggregate_values(values, method, seed, resamples);
}

std::vector<PostRecord> select_judge_instances(const std::vector<PostRecord>& golds,
                                               const std::vector<std::vector<PredictionRecord>>& method_preds,
                                               std::size_t sample_size, std::uint64_t seed) {
  std::vector<std::unordered_map<std::string, ClassLabel>> by_id(method_preds.size());
  for (std::size_t m = 0; m < method_preds.size(); ++m) {
    for (const auto& p : method_preds[m]) by_id[m].emplace(p.post_id, p.parsed_label.label);
  }
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    if (golds[i].gold_label != BinaryLabel::hate) continue;
    const bool all_correct = std::all_of(by_id.begin(), by_id.end(), [&](const auto& preds) {
      auto it = preds.find(golds[i].id);
      return it != preds.end() && it->second == ClassLabel::hate;
    });
    if (all_correct) eligible.push_back(i);
  }
  const auto order = seeded_permutation(eligible.size(), seed);
  std::vector<std::size_t> chosen;
  for (std::size_t i = 0; i < order.size() && i < sample_size; ++i) chosen.push_back(eligible[order[i]]);
  std::sort(chosen.begin(), chosen.end());
  std::vector<PostRecord> out;
  out.reserve(chosen.size());
  for (std::size_t i : chosen) out.push_back(golds[i]);
  return out;
}

}  // namespace cotdistill
