#ifndef DMIA_DMIA_H_
#define DMIA_DMIA_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "dmia/encoder.h"
#include "dmia/kernels.h"
#include "dmia/matrix.h"
#include "dmia/mmd.h"
#include "dmia/rng.h"

namespace dmia {

// Draws `n` samples from the distilled (student) generator.
using Sampler = std::function<Matrix(Index n, RngStream& rng)>;

struct TrainConfig {
  int epochs = 300;  // optimizer steps
  double learning_rate = 1e-3;
  Index batch_size = 128;
  double noise_std = 0.1;
  // Student samples drawn once and split 50/50 into proxy-member and anchor
  // pools.
  Index generated_pool = 2000;
  Index hidden_dim = 32;
  int depth = 3;
  Index out_dim = 16;
  double epsilon = 0.05;
  bool train_epsilon = false;
  // Median heuristic (on initial features / encoded training pool) when unset.
  std::optional<double> gamma_phi;
  std::optional<double> gamma_q;
  double lambda = kDefaultLambda;
  Objective objective = Objective::kDifference;

  void validate() const;
};

struct EpochInfo {
  int epoch = 0;
  double loss = 0.0;
  // Row indices into the generated pool.
  const std::vector<Index>* anchor_rows = nullptr;
  const std::vector<Index>* proxy_rows = nullptr;
};

struct TrainResult {
  DeepKernel kernel;
  // Encoded, noised anchor batch from the last epoch.
  Matrix anchor;
  std::vector<double> loss_history;
  // Loss on one fixed evaluation triple before and after training.
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

// Deep-kernel training: minimizes mmd2_u(anchor, proxy) - mmd2_u(anchor,
// non-member) with Adam, fresh batches and fresh input noise every epoch.
TrainResult train_deep_kernel(const Matrix& d_non, const Sampler& student,
                              const Encoder& encoder, const TrainConfig& cfg, RngStream rng,
                              const std::function<void(const EpochInfo&)>& on_epoch = {});

struct DetectConfig {
  int trials = 100;
  Index batch_size = 128;
  double noise_std = 0.1;
  // Pools up to this many rows get their full gram cached; larger pools
  // evaluate the within-batch gram per trial.
  Index max_cached_rows = 4096;
  int threads = 1;

  void validate() const;
};

struct TrialOutcome {
  double m1 = 0.0;  // candidate vs anchor
  double m2 = 0.0;  // non-member vs anchor
  bool member = false;
};

struct DetectionReport {
  int kernel_id = 0;
  std::vector<std::uint8_t> indicators;
  std::vector<double> m1;
  std::vector<double> m2;
  double p_mem = 0.0;
};

// One Bernoulli trial on already encoded batches.
TrialOutcome compare_batches(const DeepKernel& k, const Matrix& anchor,
                             const Matrix& candidate_batch, const Matrix& nonmember_batch);

// Candidate detection against a fixed non-member pool. The non-member pool is
// noised, encoded and embedded once at construction; each detect() call
// noises the candidate pool once and then redraws both mini-batches in every
// trial.
class Detector {
 public:
  Detector(DeepKernel kernel, Matrix anchor, const Encoder& encoder, const Matrix& d_non,
           DetectConfig cfg, RngStream rng, int kernel_id = 0);

  DetectionReport detect(const Matrix& d_can, RngStream rng) const;

  const DeepKernel& kernel() const { return kernel_; }
  const Matrix& anchor() const { return anchor_.raw; }

  struct Pool {
    Embedded emb;
    Matrix within;            // full gram, empty when the pool is too large
    Matrix anchor_cross;      // k(row, anchor_a)
    Vector anchor_row_sums;   // sum_a k(row, anchor_a)
  };

 private:
  Pool prepare(const Matrix& raw_pool, RngStream& rng) const;
  double trial_mmd(const Pool& pool, const std::vector<Index>& rows) const;

  DeepKernel kernel_;
  Embedded anchor_;
  double anchor_u_ = 0.0;
  Encoder encoder_;
  DetectConfig cfg_;
  Pool non_;
  int kernel_id_;
};

DetectionReport detect_candidate(const Matrix& d_can, const Matrix& d_non,
                                 const Matrix& anchor, const DeepKernel& k,
                                 const Encoder& encoder, const DetectConfig& cfg,
                                 RngStream rng, int kernel_id = 0);

struct EnsembleReport {
  std::vector<DetectionReport> members;
  double p_bar = 0.0;
  double tau = 0.7;
  bool decision = false;
};

// Mean of member p_mem, decision = p_bar >= tau.
EnsembleReport aggregate_ensemble(std::vector<DetectionReport> members, double tau);

// Trains h kernels on independent child streams of `rng` (child key = index).
std::vector<TrainResult> train_ensemble(const Matrix& d_non, const Sampler& student,
                                        const Encoder& encoder, int h,
                                        const TrainConfig& cfg, RngStream rng, int threads = 1);

// Full ensemble: the first half of d_non trains the kernels, the second half
// is the detection reference pool.
EnsembleReport ensemble_detect(const Matrix& d_can, const Matrix& d_non,
                               const Sampler& student, const Encoder& encoder, int h,
                               double tau, const TrainConfig& train_cfg,
                               const DetectConfig& detect_cfg, RngStream rng);

}  // namespace dmia

#endif  // DMIA_DMIA_H_
