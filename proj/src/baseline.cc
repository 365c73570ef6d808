#include "dmia/baseline.h"

#include <cstdio>
#include <limits>
#include <sstream>

#include "dmia/errors.h"

namespace dmia {

std::vector<double> nearest_sq_distance(const Matrix& queries, const Matrix& generated) {
  require(generated.rows() >= 1, "instance_scores: generated set is empty");
  require(queries.cols() == generated.cols(), "instance_scores: width mismatch");
  std::vector<double> out(static_cast<std::size_t>(queries.rows()),
                          std::numeric_limits<double>::infinity());
  // Blocked so the distance matrix stays small.
  constexpr Index kBlock = 1024;
  for (Index start = 0; start < generated.rows(); start += kBlock) {
    const Index len = std::min(kBlock, generated.rows() - start);
    const Matrix block = generated.middleRows(start, len);
    const Matrix d2 = pairwise_sq_dists(queries, block);
    for (Index i = 0; i < queries.rows(); ++i) {
      out[static_cast<std::size_t>(i)] =
          std::min(out[static_cast<std::size_t>(i)], d2.row(i).minCoeff());
    }
  }
  return out;
}

InstanceScoreTable instance_scores(const Matrix& members, const Matrix& nonmembers,
                                   const Matrix& generated, std::string model_tag) {
  InstanceScoreTable t;
  t.model_tag = std::move(model_tag);
  for (const Matrix* q : {&members, &nonmembers}) {
    if (q->rows() == 0) continue;
    const auto s = nearest_sq_distance(*q, generated);
    t.scores.insert(t.scores.end(), s.begin(), s.end());
    t.is_member.insert(t.is_member.end(), s.size(), q == &members);
  }
  return t;
}

MetricSummary instance_attack_metrics(const InstanceScoreTable& table) {
  std::vector<ScoredSample> samples;
  samples.reserve(table.scores.size());
  for (std::size_t i = 0; i < table.scores.size(); ++i) {
    samples.push_back(ScoredSample{-table.scores[i], table.is_member[i]});
  }
  return summarize(samples);
}

std::string score_table_csv(const InstanceScoreTable& table) {
  std::ostringstream out;
  out << "model,label,score\n";
  char buf[64];
  for (std::size_t i = 0; i < table.scores.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", table.scores[i]);
    out << table.model_tag << ',' << (table.is_member[i] ? "member" : "non-member") << ','
        << buf << '\n';
  }
  return out.str();
}

}  // namespace dmia
