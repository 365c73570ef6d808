#ifndef DMIA_EXPERIMENT_H_
#define DMIA_EXPERIMENT_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dmia/dmia.h"
#include "dmia/metrics.h"
#include "dmia/serialize.h"
#include "dmia/world.h"

namespace dmia {

struct ExperimentConfig {
  WorldSpec world;
  TrainConfig train;
  DetectConfig detect;
  int ensemble_size = 5;
  // Decision threshold; replaced by the calibrated value when
  // calibration_rounds > 0.
  double tau = 0.7;
  int calibration_rounds = 10;
  std::vector<double> ratios = {0.0, 0.3, 0.5, 1.0};
  Index candidate_size = 500;
  // Carved from the world's auxiliary non-member pool, in this order.
  Index nonmember_train_size = 500;
  Index nonmember_detect_size = 1000;
  Index calibration_pool_size = 1000;
  int rounds = 50;
  // Members and non-members each.
  Index baseline_queries = 500;
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
};

ExperimentConfig default_experiment_config(std::uint64_t seed = 0);

// Candidate sizes {500, 200, 60, 30}; non-member training and detection pools
// at 1x and 2x the candidate size.
std::vector<ExperimentConfig> size_sweep_configs(const ExperimentConfig& base);

Json to_json(const ExperimentConfig& c);
ExperimentConfig experiment_config_from_json(const Json& j);

struct KernelSummary {
  int id = 0;
  double epsilon = 0.0;
  double gamma_phi = 0.0;
  double gamma_q = 0.0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

struct CandidateRecord {
  double ratio = 0.0;
  double p_bar = 0.0;
  std::vector<double> p_mem;  // per kernel
  bool decision = false;
};

struct RoundRecord {
  int round = 0;
  CandidateRecord negative;
  std::vector<CandidateRecord> positives;  // one per ratio, config order
};

struct RatioMetrics {
  double ratio = 0.0;
  MetricSummary summary;
  double decision_accuracy = 0.0;  // at the tau actually used
  double mean_p_bar = 0.0;
};

struct RunReport {
  ExperimentConfig config;
  Index train_batch = 0;
  Index detect_batch = 0;
  double tau_used = 0.7;
  std::optional<double> tau_calibrated;
  std::vector<double> calibration_positive;
  std::vector<double> calibration_negative;
  std::vector<KernelSummary> kernels;
  std::vector<RoundRecord> rounds;
  std::vector<RatioMetrics> metrics;
  MetricSummary baseline_teacher;
  MetricSummary baseline_student;
  bool partial = false;
  // "", "contract", "data" or "numerical".
  std::string error_kind;
  std::string error;
  // Kept out of the JSON report so reports stay byte-reproducible.
  double wall_clock_seconds = 0.0;
};

RunReport run_experiment(const ExperimentConfig& cfg);

// Metrics for one ratio recomputed from the per-round records.
RatioMetrics ratio_metrics(const RunReport& report, std::size_t ratio_index);

Json to_json(const RunReport& r);
RunReport run_report_from_json(const Json& j);

// Summary rows "ratio,asr,auc,tpr_at_fpr_0.05,decision_accuracy,mean_p_bar".
std::string metrics_csv(const RunReport& r);
Json histograms_json(const RunReport& r, int bins = 20);

}  // namespace dmia

#endif  // DMIA_EXPERIMENT_H_
