#pragma once

// Paired-sample statistics for comparing two play conditions: summary of
// goal differentials, exact Wilcoxon signed-rank test and Benjamini-Hochberg
// adjustment.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "sharedctl/error.hpp"

namespace sharedctl::stats {

struct PairedSample {
  std::string label;
  double a = 0.0;
  double b = 0.0;
};

using PairedSamples = std::vector<PairedSample>;

enum class SdKind { Sample, Population };  // n - 1 or n denominator

struct ConditionSummary {
  double mean = 0.0;
  double sd = 0.0;
};

struct DifferentialSummary {
  std::size_t n = 0;
  ConditionSummary a;
  ConditionSummary b;
  bool sd_undefined = false;  // n == 1: sd reported as 0
};

inline ConditionSummary summarize(const std::vector<double>& xs, SdKind kind = SdKind::Sample) {
  ConditionSummary s;
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    const auto denom = kind == SdKind::Sample ? xs.size() - 1 : xs.size();
    s.sd = std::sqrt(ss / static_cast<double>(denom));
  }
  return s;
}

inline DifferentialSummary goal_differential(const PairedSamples& samples, SdKind kind = SdKind::Sample) {
  if (samples.empty()) throw DomainError("goal differential summary needs at least one pair");
  std::vector<double> a, b;
  for (const auto& s : samples) {
    a.push_back(s.a);
    b.push_back(s.b);
  }
  return {samples.size(), summarize(a, kind), summarize(b, kind), samples.size() == 1};
}

struct WilcoxonResult {
  double w_plus = 0.0;
  double w_minus = 0.0;
  double statistic = 0.0;  // W+
  double p_value = 1.0;    // two-tailed
  std::size_t n = 0;       // pairs left after dropping zero differences
  bool exact = true;
  bool degenerate = false;  // every difference was zero
};

// Mid-ranks of |d| in ascending order, 1-based.
inline std::vector<double> midranks(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

inline constexpr std::size_t kExactLimit = 20;

// Two-sided p = min(1, 2 * min(P(W+ <= w), P(W+ >= w))) under the null that
// every sign is equally likely. Zero differences are dropped. Up to
// kExactLimit pairs the null distribution is counted exactly over all 2^n
// sign assignments (subset-sum counts on doubled ranks); above it a normal
// approximation with tie and continuity correction is used.
inline WilcoxonResult wilcoxon_signed_rank(const PairedSamples& samples) {
  std::vector<double> diffs;
  for (const auto& s : samples) {
    const double d = s.b - s.a;
    if (d != 0.0) diffs.push_back(d);
  }
  WilcoxonResult r;
  r.n = diffs.size();
  if (diffs.empty()) {
    r.degenerate = true;
    return r;
  }
  std::vector<double> mags(diffs.size());
  std::transform(diffs.begin(), diffs.end(), mags.begin(), [](double d) { return std::abs(d); });
  const auto ranks = midranks(mags);
  for (std::size_t i = 0; i < diffs.size(); ++i) {
    (diffs[i] > 0.0 ? r.w_plus : r.w_minus) += ranks[i];
  }
  r.statistic = r.w_plus;

  if (diffs.size() <= kExactLimit) {
    // Mid-ranks are multiples of 1/2, so doubled ranks are integers.
    std::vector<std::size_t> doubled(ranks.size());
    std::size_t total = 0;
    for (std::size_t i = 0; i < ranks.size(); ++i) {
      doubled[i] = static_cast<std::size_t>(std::llround(ranks[i] * 2.0));
      total += doubled[i];
    }
    std::vector<std::uint64_t> counts(total + 1, 0);
    counts[0] = 1;
    std::size_t reach = 0;
    for (std::size_t d : doubled) {
      for (std::size_t s = reach + 1; s-- > 0;) {
        if (counts[s]) counts[s + d] += counts[s];
      }
      reach += d;
    }
    const auto w2 = static_cast<std::size_t>(std::llround(r.w_plus * 2.0));
    std::uint64_t le = 0, ge = 0;
    for (std::size_t s = 0; s <= total; ++s) {
      if (s <= w2) le += counts[s];
      if (s >= w2) ge += counts[s];
    }
    const double all = std::ldexp(1.0, static_cast<int>(diffs.size()));
    r.p_value = std::min(1.0, 2.0 * static_cast<double>(std::min(le, ge)) / all);
    r.exact = true;
  } else {
    const double n = static_cast<double>(diffs.size());
    const double mean = n * (n + 1.0) / 4.0;
    double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;
    std::vector<double> sorted = mags;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size();) {
      std::size_t j = i;
      while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
      const double t = static_cast<double>(j - i + 1);
      var -= (t * t * t - t) / 48.0;
      i = j + 1;
    }
    const double z = std::max(0.0, std::abs(r.w_plus - mean) - 0.5) / std::sqrt(var);
    r.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
    r.exact = false;
  }
  return r;
}

struct BhResult {
  std::vector<bool> rejected;   // input order
  std::vector<double> adjusted;  // input order
};

inline BhResult bh_adjust(const std::vector<double>& p, double alpha = 0.05) {
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("p-value outside [0, 1]");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha outside (0, 1)");
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return p[i] < p[j]; });

  BhResult r{std::vector<bool>(m, false), std::vector<double>(m, 1.0)};
  std::size_t k = 0;  // number rejected
  for (std::size_t rank = 1; rank <= m; ++rank) {
    if (p[order[rank - 1]] <= static_cast<double>(rank) * alpha / static_cast<double>(m)) k = rank;
  }
  for (std::size_t rank = 1; rank <= k; ++rank) r.rejected[order[rank - 1]] = true;

  double running = 1.0;
  for (std::size_t rank = m; rank >= 1; --rank) {
    const double scaled = static_cast<double>(m) * p[order[rank - 1]] / static_cast<double>(rank);
    running = std::min(running, scaled);
    r.adjusted[order[rank - 1]] = std::min(1.0, running);
  }
  return r;
}

}  // namespace sharedctl::stats
