#ifndef DMIA_BASELINE_H_
#define DMIA_BASELINE_H_

#include <string>
#include <vector>

#include "dmia/matrix.h"
#include "dmia/metrics.h"

namespace dmia {

// Instance-level scores: squared distance to the nearest generated sample.
// Lower means more member-like.
struct InstanceScoreTable {
  std::string model_tag;
  std::vector<double> scores;
  std::vector<bool> is_member;
};

std::vector<double> nearest_sq_distance(const Matrix& queries, const Matrix& generated);

InstanceScoreTable instance_scores(const Matrix& members, const Matrix& nonmembers,
                                   const Matrix& generated, std::string model_tag);

// Uses -score as the membership statistic.
MetricSummary instance_attack_metrics(const InstanceScoreTable& table);

std::string score_table_csv(const InstanceScoreTable& table);

}  // namespace dmia

#endif  // DMIA_BASELINE_H_
