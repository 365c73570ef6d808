#include "dmia/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "dmia/errors.h"

namespace dmia {

namespace {

struct ClassCounts {
  std::size_t pos = 0;
  std::size_t neg = 0;
};

ClassCounts check_classes(const std::vector<ScoredSample>& samples) {
  ClassCounts c;
  for (const auto& s : samples) {
    require(std::isfinite(s.statistic), "metrics: non-finite statistic");
    (s.positive ? c.pos : c.neg)++;
  }
  require(c.pos > 0 && c.neg > 0, "metrics: both classes must be present");
  return c;
}

std::vector<ScoredSample> sorted_by_statistic(std::vector<ScoredSample> s) {
  std::stable_sort(s.begin(), s.end(), [](const ScoredSample& a, const ScoredSample& b) {
    return a.statistic < b.statistic;
  });
  return s;
}

// Average ranks (1-based) with ties sharing the mean rank.
std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[idx[t]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double auc(const std::vector<ScoredSample>& samples) {
  const ClassCounts c = check_classes(samples);
  std::vector<double> stats;
  stats.reserve(samples.size());
  for (const auto& s : samples) stats.push_back(s.statistic);
  const auto ranks = average_ranks(stats);
  double pos_rank_sum = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].positive) pos_rank_sum += ranks[i];
  }
  const double np = static_cast<double>(c.pos);
  const double nn = static_cast<double>(c.neg);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double asr(const std::vector<ScoredSample>& samples, double threshold) {
  check_classes(samples);
  std::size_t correct = 0;
  for (const auto& s : samples) {
    if ((s.statistic >= threshold) == s.positive) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

BestThreshold best_threshold(const std::vector<ScoredSample>& samples) {
  const ClassCounts c = check_classes(samples);
  const auto s = sorted_by_statistic(samples);
  const double n = static_cast<double>(s.size());
  // Threshold below everything: all predicted positive.
  long correct = static_cast<long>(c.pos);
  BestThreshold best{-std::numeric_limits<double>::infinity(), static_cast<double>(correct) / n};
  for (std::size_t i = 0; i < s.size(); ++i) {
    // Move sample i to the negative side.
    correct += s[i].positive ? -1 : 1;
    if (i + 1 < s.size() && s[i + 1].statistic == s[i].statistic) continue;
    const double thr = (i + 1 < s.size())
                           ? 0.5 * (s[i].statistic + s[i + 1].statistic)
                           : std::numeric_limits<double>::infinity();
    const double acc = static_cast<double>(correct) / n;
    if (acc > best.accuracy) best = BestThreshold{thr, acc};
  }
  return best;
}

double best_asr(const std::vector<ScoredSample>& samples) {
  return best_threshold(samples).accuracy;
}

double tpr_at_fpr(const std::vector<ScoredSample>& samples, double fpr_cap) {
  const ClassCounts c = check_classes(samples);
  require(fpr_cap >= 0.0 && fpr_cap <= 1.0, "tpr_at_fpr: fpr_cap must lie in [0, 1]");
  auto s = sorted_by_statistic(samples);
  std::reverse(s.begin(), s.end());
  std::size_t tp = 0;
  std::size_t fp = 0;
  double best = 0.0;
  // Lower the threshold through each distinct statistic, high to low.
  for (std::size_t i = 0; i < s.size(); ++i) {
    (s[i].positive ? tp : fp)++;
    if (i + 1 < s.size() && s[i + 1].statistic == s[i].statistic) continue;
    const double fpr = static_cast<double>(fp) / static_cast<double>(c.neg);
    if (fpr <= fpr_cap) {
      best = std::max(best, static_cast<double>(tp) / static_cast<double>(c.pos));
    }
  }
  return best;
}

MetricSummary summarize(const std::vector<ScoredSample>& samples) {
  return MetricSummary{best_asr(samples), auc(samples), tpr_at_fpr(samples, 0.05)};
}

Histogram histogram(const std::vector<double>& values, int bins, double lo, double hi) {
  require(bins >= 1 && hi > lo, "histogram: invalid binning");
  Histogram h{lo, hi, std::vector<long>(static_cast<std::size_t>(bins), 0)};
  const double width = (hi - lo) / bins;
  for (double v : values) {
    int b = static_cast<int>(std::floor((v - lo) / width));
    b = std::clamp(b, 0, bins - 1);
    h.counts[static_cast<std::size_t>(b)]++;
  }
  return h;
}

std::string histogram_csv(const Histogram& h) {
  std::ostringstream out;
  out << "bin_lo,bin_hi,count\n";
  const double width = (h.hi - h.lo) / static_cast<double>(h.counts.size());
  char buf[96];
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.6g,%.6g,%ld\n", h.lo + width * static_cast<double>(i),
                  h.lo + width * static_cast<double>(i + 1), h.counts[i]);
    out << buf;
  }
  return out.str();
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, "spearman: need two equal-length series");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace dmia
