#ifndef DMIA_METRICS_H_
#define DMIA_METRICS_H_

#include <string>
#include <vector>

namespace dmia {

// Conventions: a sample is predicted positive when statistic >= threshold;
// AUC counts ties as 1/2.
inline constexpr const char* kMetricConvention =
    "positive iff statistic >= threshold; AUC ties count 1/2; best ASR scans midpoints";

struct ScoredSample {
  double statistic = 0.0;  // higher means more member-like
  bool positive = false;
};

double auc(const std::vector<ScoredSample>& samples);

// Accuracy at a fixed threshold.
double asr(const std::vector<ScoredSample>& samples, double threshold);

struct BestThreshold {
  double threshold = 0.0;
  double accuracy = 0.0;
};
// Scans thresholds at midpoints between consecutive distinct statistics (plus
// both extremes) and returns the most accurate one; ties keep the lowest
// threshold.
BestThreshold best_threshold(const std::vector<ScoredSample>& samples);
double best_asr(const std::vector<ScoredSample>& samples);

// Largest TPR over thresholds whose empirical FPR is <= fpr_cap.
double tpr_at_fpr(const std::vector<ScoredSample>& samples, double fpr_cap);

struct MetricSummary {
  double asr = 0.0;  // best-threshold accuracy
  double auc = 0.0;
  double tpr_at_fpr05 = 0.0;
};
MetricSummary summarize(const std::vector<ScoredSample>& samples);

struct Histogram {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<long> counts;
};
// Fixed-width bins over [lo, hi]; values equal to hi land in the last bin,
// values outside the range are clamped to the end bins.
Histogram histogram(const std::vector<double>& values, int bins, double lo, double hi);

std::string histogram_csv(const Histogram& h);

double spearman(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace dmia

#endif  // DMIA_METRICS_H_
