#include "dmia/dmia.h"

#include <algorithm>
#include <numeric>

#include "dmia/errors.h"
#include "dmia/parallel.h"

namespace dmia {

void DetectConfig::validate() const {
  require(trials >= 1, "DetectConfig: trials must be >= 1");
  require(batch_size >= 2, "DetectConfig: batch_size must be >= 2");
  require(noise_std >= 0.0, "DetectConfig: noise_std must be >= 0");
}

TrialOutcome compare_batches(const DeepKernel& k, const Matrix& anchor,
                             const Matrix& candidate_batch, const Matrix& nonmember_batch) {
  const Embedded ea = embed(k, anchor);
  const Embedded ec = embed(k, candidate_batch);
  const Embedded en = embed(k, nonmember_batch);
  const Matrix kaa = deep_gram(k, ea, ea);
  TrialOutcome t;
  t.m1 = mmd2_u(deep_gram(k, ec, ec), kaa, deep_gram(k, ec, ea));
  t.m2 = mmd2_u(deep_gram(k, en, en), kaa, deep_gram(k, en, ea));
  t.member = t.m1 < t.m2;
  return t;
}

Detector::Detector(DeepKernel kernel, Matrix anchor, const Encoder& encoder,
                   const Matrix& d_non, DetectConfig cfg, RngStream rng, int kernel_id)
    : kernel_(std::move(kernel)), encoder_(encoder), cfg_(cfg), kernel_id_(kernel_id) {
  kernel_.validate();
  cfg_.validate();
  require(anchor.rows() >= 2, "Detector: anchor needs at least two rows");
  require(anchor.cols() == kernel_.net.in_dim(), "Detector: anchor width mismatch");
  require(encoder_.out_dim() == kernel_.net.in_dim(), "Detector: encoder/kernel width mismatch");
  require(d_non.rows() >= cfg_.batch_size, "Detector: batch size exceeds non-member pool");
  anchor_ = embed(kernel_, anchor);
  const Matrix kaa = deep_gram(kernel_, anchor_, anchor_);
  const double a = static_cast<double>(kaa.rows());
  anchor_u_ = (kaa.sum() - kaa.trace()) / (a * (a - 1.0));
  non_ = prepare(d_non, rng);
}

Detector::Pool Detector::prepare(const Matrix& raw_pool, RngStream& rng) const {
  require(raw_pool.cols() == encoder_.in_dim(), "Detector: pool width != encoder input");
  Matrix noisy = raw_pool + gaussian_noise(raw_pool.rows(), raw_pool.cols(), cfg_.noise_std, rng);
  Pool pool;
  pool.emb = embed(kernel_, encoder_.encode(noisy));
  pool.anchor_cross = deep_gram(kernel_, pool.emb, anchor_);
  pool.anchor_row_sums = pool.anchor_cross.rowwise().sum();
  if (pool.emb.raw.rows() <= cfg_.max_cached_rows) {
    pool.within = deep_gram(kernel_, pool.emb, pool.emb);
  }
  return pool;
}

double Detector::trial_mmd(const Pool& pool, const std::vector<Index>& rows) const {
  const double b = static_cast<double>(rows.size());
  double within = 0.0;
  if (pool.within.size() > 0) {
    // Sorted indices turn the gather into forward walks along each row; four
    // partial sums break the add dependency chain.
    std::vector<Index> sorted = rows;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    double s[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = pool.within.row(sorted[i]).data();
      std::size_t j = i + 1;
      for (; j + 4 <= n; j += 4) {
        s[0] += row[sorted[j]];
        s[1] += row[sorted[j + 1]];
        s[2] += row[sorted[j + 2]];
        s[3] += row[sorted[j + 3]];
      }
      for (; j < n; ++j) s[0] += row[sorted[j]];
    }
    within = 2.0 * ((s[0] + s[1]) + (s[2] + s[3]));
  } else {
    const Embedded batch{take_rows(pool.emb.raw, rows), take_rows(pool.emb.features, rows)};
    const Matrix g = deep_gram(kernel_, batch, batch);
    within = g.sum() - g.trace();
  }
  double cross = 0.0;
  for (Index r : rows) cross += pool.anchor_row_sums(r);
  const Index a_rows = anchor_.raw.rows();
  const double a = static_cast<double>(a_rows);
  if (static_cast<Index>(rows.size()) == a_rows) {
    // Same estimator as mmd2_u for equal sizes: batch row i is paired with
    // anchor row i and that pair is left out.
    for (Index i = 0; i < a_rows; ++i) cross -= pool.anchor_cross(rows[static_cast<std::size_t>(i)], i);
    return (within + a * (a - 1.0) * anchor_u_ - 2.0 * cross) / (b * (b - 1.0));
  }
  return within / (b * (b - 1.0)) + anchor_u_ - 2.0 * cross / (b * a);
}

DetectionReport Detector::detect(const Matrix& d_can, RngStream rng) const {
  require(d_can.rows() >= cfg_.batch_size, "detect: batch size exceeds candidate pool");
  RngStream noise_rng = rng.child(0);
  const Pool cand = prepare(d_can, noise_rng);
  const RngStream trial_root = rng.child(1);

  DetectionReport report;
  report.kernel_id = kernel_id_;
  const auto t_count = static_cast<std::size_t>(cfg_.trials);
  report.indicators.assign(t_count, 0);
  report.m1.assign(t_count, 0.0);
  report.m2.assign(t_count, 0.0);
  parallel_for(t_count, cfg_.threads, [&](std::size_t t) {
    RngStream tr = trial_root.child(t);
    const auto can_rows = sample_indices(cand.emb.raw.rows(), cfg_.batch_size, tr, false);
    const auto non_rows = sample_indices(non_.emb.raw.rows(), cfg_.batch_size, tr, false);
    const double m1 = trial_mmd(cand, can_rows);
    const double m2 = trial_mmd(non_, non_rows);
    report.m1[t] = m1;
    report.m2[t] = m2;
    report.indicators[t] = m1 < m2 ? 1 : 0;
  });
  const double hits = std::accumulate(report.indicators.begin(), report.indicators.end(), 0.0);
  report.p_mem = hits / static_cast<double>(t_count);
  return report;
}

DetectionReport detect_candidate(const Matrix& d_can, const Matrix& d_non,
                                 const Matrix& anchor, const DeepKernel& k,
                                 const Encoder& encoder, const DetectConfig& cfg,
                                 RngStream rng, int kernel_id) {
  const Detector detector(k, anchor, encoder, d_non, cfg, rng.child(0), kernel_id);
  return detector.detect(d_can, rng.child(1));
}

EnsembleReport aggregate_ensemble(std::vector<DetectionReport> members, double tau) {
  require(!members.empty(), "aggregate_ensemble: no member reports");
  require(tau > 0.0 && tau < 1.0, "aggregate_ensemble: tau must lie in (0, 1)");
  EnsembleReport r;
  double sum = 0.0;
  for (const auto& m : members) sum += m.p_mem;
  r.p_bar = sum / static_cast<double>(members.size());
  r.tau = tau;
  r.decision = r.p_bar >= tau;
  r.members = std::move(members);
  return r;
}

EnsembleReport ensemble_detect(const Matrix& d_can, const Matrix& d_non,
                               const Sampler& student, const Encoder& encoder, int h,
                               double tau, const TrainConfig& train_cfg,
                               const DetectConfig& detect_cfg, RngStream rng) {
  require(h >= 1, "ensemble_detect: h must be >= 1");
  const Index half = d_non.rows() / 2;
  const Matrix train_pool = d_non.topRows(half);
  const Matrix detect_pool = d_non.bottomRows(d_non.rows() - half);
  const auto kernels =
      train_ensemble(train_pool, student, encoder, h, train_cfg, rng.child(0), detect_cfg.threads);
  std::vector<DetectionReport> members(kernels.size());
  DetectConfig inner = detect_cfg;
  inner.threads = 1;
  parallel_for(kernels.size(), detect_cfg.threads, [&](std::size_t i) {
    members[i] = detect_candidate(d_can, detect_pool, kernels[i].anchor, kernels[i].kernel,
                                  encoder, inner, rng.child(1, i), static_cast<int>(i));
  });
  return aggregate_ensemble(std::move(members), tau);
}

}  // namespace dmia
