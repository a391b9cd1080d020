#include "vnd/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

namespace vnd {

namespace {

void check_binary(const std::vector<double>& scores, const std::vector<int>& labels,
                  std::size_t* n_pos, std::size_t* n_neg) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("scores and labels must have equal length");
  std::size_t pos = 0, neg = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!std::isfinite(scores[i])) throw std::invalid_argument("non-finite score");
    if (labels[i] == 1) ++pos;
    else if (labels[i] == 0) ++neg;
    else
      throw std::invalid_argument("labels must be 0 or 1");
  }
  if (pos == 0 || neg == 0)
    throw std::runtime_error("need both classes present (got " + std::to_string(pos) +
                             " positives, " + std::to_string(neg) + " negatives)");
  *n_pos = pos;
  *n_neg = neg;
}

}  // namespace

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  std::size_t n_pos = 0, n_neg = 0;
  check_binary(scores, labels, &n_pos, &n_neg);

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Mann-Whitney via average ranks; twice-rank bookkeeping keeps every
  // intermediate an exact integer so the result matches pair counting
  // bit for bit.
  std::int64_t twice_rank_sum_pos = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    // 1-based ranks i+1 .. j share the average (i+1+j)/2
    const std::int64_t twice_avg_rank = static_cast<std::int64_t>(i) + 1 +
                                        static_cast<std::int64_t>(j);
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) twice_rank_sum_pos += twice_avg_rank;
    i = j;
  }
  const std::int64_t p = static_cast<std::int64_t>(n_pos);
  const std::int64_t twice_u = twice_rank_sum_pos - p * (p + 1);
  return static_cast<double>(twice_u) /
         static_cast<double>(2 * p * static_cast<std::int64_t>(n_neg));
}

double select_threshold(const std::vector<double>& scores, const std::vector<int>& labels) {
  std::size_t n_pos = 0, n_neg = 0;
  check_binary(scores, labels, &n_pos, &n_neg);

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  const double inf = std::numeric_limits<double>::infinity();
  double best_threshold = inf;  // predict-all-negative gives J = 0
  double best_j = 0.0;
  std::size_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) ++tp;
      else ++fp;
    }
    const double candidate =
        j < order.size() ? (scores[order[i]] + scores[order[j]]) / 2.0 : -inf;
    const double youden = static_cast<double>(tp) / static_cast<double>(n_pos) -
                          static_cast<double>(fp) / static_cast<double>(n_neg);
    // strict improvement keeps the larger threshold on ties (candidates
    // are visited in descending order)
    if (youden > best_j) {
      best_j = youden;
      best_threshold = candidate;
    }
    i = j;
  }
  return best_threshold;
}

namespace {

std::string normalize_object(const std::string& s) {
  std::size_t begin = 0, end = s.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
  std::string out = s.substr(begin, end - begin);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

int object_baseline(const std::vector<std::string>& narration_objects,
                    const std::vector<std::string>& visible_objects) {
  std::set<std::string> mentioned;
  for (const std::string& s : narration_objects) {
    std::string n = normalize_object(s);
    if (!n.empty()) mentioned.insert(std::move(n));
  }
  if (mentioned.empty()) return 0;  // nothing verifiable
  std::set<std::string> visible;
  for (const std::string& s : visible_objects) {
    std::string n = normalize_object(s);
    if (!n.empty()) visible.insert(std::move(n));
  }
  std::size_t hit = 0;
  for (const std::string& m : mentioned) hit += visible.count(m);
  // at least 60%: 5*hit >= 3*|mentioned| avoids float rounding at the boundary
  return 5 * hit >= 3 * mentioned.size() ? 1 : 0;
}

}  // namespace vnd
