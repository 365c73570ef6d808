#include "dmia/dmia.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dmia/errors.h"
#include "dmia/feature_net.h"
#include "dmia/parallel.h"

namespace dmia {

void TrainConfig::validate() const {
  require(epochs >= 1, "TrainConfig: epochs must be >= 1");
  require(batch_size >= 2, "TrainConfig: batch_size must be >= 2");
  require(noise_std >= 0.0, "TrainConfig: noise_std must be >= 0");
  require(learning_rate >= 0.0 && std::isfinite(learning_rate),
          "TrainConfig: learning_rate must be finite and >= 0");
  require(epsilon >= 0.0 && epsilon <= 1.0, "TrainConfig: epsilon must lie in [0, 1]");
  require(lambda > 0.0, "TrainConfig: lambda must be positive");
  require(depth >= 0 && out_dim > 0 && (depth == 0 || hidden_dim > 0),
          "TrainConfig: invalid network shape");
  require(!gamma_phi || *gamma_phi > 0.0, "TrainConfig: gamma_phi must be positive");
  require(!gamma_q || *gamma_q > 0.0, "TrainConfig: gamma_q must be positive");
}

namespace {

Matrix noisy_encoded(const Matrix& pool, const std::vector<Index>& rows, double sigma,
                     const Encoder& encoder, RngStream& rng) {
  Matrix batch = take_rows(pool, rows);
  batch += gaussian_noise(batch.rows(), batch.cols(), sigma, rng);
  return encoder.encode(batch);
}

}  // namespace

TrainResult train_deep_kernel(const Matrix& d_non, const Sampler& student,
                              const Encoder& encoder, const TrainConfig& cfg, RngStream rng,
                              const std::function<void(const EpochInfo&)>& on_epoch) {
  cfg.validate();
  const Index b = cfg.batch_size;
  require(d_non.rows() >= 2 * b, "train_deep_kernel: non-member pool needs at least 2B rows");
  require(d_non.cols() == encoder.in_dim(), "train_deep_kernel: data width != encoder input");
  require(cfg.generated_pool >= 2 * b,
          "train_deep_kernel: generated pool must hold two disjoint batches");

  RngStream gen_rng = rng.child(1);
  const Matrix generated = student(cfg.generated_pool, gen_rng);
  require(generated.rows() == cfg.generated_pool && generated.cols() == d_non.cols(),
          "train_deep_kernel: student sampler returned the wrong shape");
  // Rows [0, half) are proxy members, [half, n) anchors.
  const Index half = generated.rows() / 2;
  const Matrix proxy_pool = generated.topRows(half);
  const Matrix anchor_pool = generated.bottomRows(generated.rows() - half);

  RngStream init_rng = rng.child(2);
  DeepKernel k;
  k.net = FeatureNet::glorot(
      NetShape{encoder.out_dim(), cfg.hidden_dim, cfg.depth, cfg.out_dim}, init_rng);
  k.epsilon = cfg.epsilon;

  // Fixed evaluation triple for before/after comparison.
  RngStream eval_rng = rng.child(3);
  const Matrix eval_anchor = noisy_encoded(
      anchor_pool, sample_indices(anchor_pool.rows(), b, eval_rng, false), cfg.noise_std,
      encoder, eval_rng);
  const Matrix eval_proxy = noisy_encoded(
      proxy_pool, sample_indices(proxy_pool.rows(), b, eval_rng, false), cfg.noise_std,
      encoder, eval_rng);
  const Matrix eval_non = noisy_encoded(d_non, sample_indices(d_non.rows(), b, eval_rng, false),
                                        cfg.noise_std, encoder, eval_rng);

  const Matrix eval_raw = vstack(vstack(eval_anchor, eval_proxy), eval_non);
  k.gamma_q = cfg.gamma_q ? *cfg.gamma_q : median_distance(eval_raw);
  k.gamma_phi = cfg.gamma_phi ? *cfg.gamma_phi : median_distance(k.net.forward(eval_raw));

  const LossOptions loss_opts{cfg.objective, cfg.lambda};
  TrainResult result;
  result.initial_loss = dmia_loss(k, eval_anchor, eval_proxy, eval_non, loss_opts);

  AdamConfig adam_cfg;
  adam_cfg.learning_rate = cfg.learning_rate;
  AdamState adam = AdamState::for_params(k.net.layers(), adam_cfg);
  ScalarAdam eps_adam;

  RngStream epoch_rng = rng.child(4);
  std::vector<Index> anchor_rows;
  std::vector<Index> proxy_rows;
  std::vector<Index> non_rows;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    RngStream er = epoch_rng.child(static_cast<std::uint64_t>(epoch));
    proxy_rows = sample_indices(proxy_pool.rows(), b, er, false);
    anchor_rows = sample_indices(anchor_pool.rows(), b, er, false);
    non_rows = sample_indices(d_non.rows(), b, er, false);
    const Matrix mem = noisy_encoded(proxy_pool, proxy_rows, cfg.noise_std, encoder, er);
    result.anchor = noisy_encoded(anchor_pool, anchor_rows, cfg.noise_std, encoder, er);
    const Matrix non = noisy_encoded(d_non, non_rows, cfg.noise_std, encoder, er);

    LossAndGrad lg = dmia_loss_and_grad(k, result.anchor, mem, non, loss_opts);
    if (!std::isfinite(lg.loss)) {
      std::ostringstream msg;
      msg << "train_deep_kernel: non-finite loss at epoch " << epoch
          << " (member term " << lg.member_term << ", non-member term " << lg.nonmember_term
          << ")";
      throw NumericalError(msg.str());
    }
    result.loss_history.push_back(lg.loss);
    if (on_epoch) {
      std::vector<Index> anchor_global(anchor_rows);
      for (auto& r : anchor_global) r += half;
      on_epoch(EpochInfo{epoch, lg.loss, &anchor_global, &proxy_rows});
    }
    adam_step(k.net.mutable_layers(), lg.net_grads, adam);
    if (cfg.train_epsilon) {
      k.epsilon = std::clamp(k.epsilon + eps_adam.update(lg.epsilon_grad, adam_cfg), 0.0, 1.0);
    }
  }
  for (const auto& layer : k.net.layers()) {
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) {
      throw NumericalError("train_deep_kernel: parameters diverged");
    }
  }
  result.final_loss = dmia_loss(k, eval_anchor, eval_proxy, eval_non, loss_opts);
  result.kernel = std::move(k);
  return result;
}

std::vector<TrainResult> train_ensemble(const Matrix& d_non, const Sampler& student,
                                        const Encoder& encoder, int h,
                                        const TrainConfig& cfg, RngStream rng, int threads) {
  require(h >= 1, "train_ensemble: h must be >= 1");
  std::vector<TrainResult> out(static_cast<std::size_t>(h));
  parallel_for(out.size(), threads, [&](std::size_t i) {
    out[i] = train_deep_kernel(d_non, student, encoder, cfg, rng.child(i));
  });
  return out;
}

}  // namespace dmia
