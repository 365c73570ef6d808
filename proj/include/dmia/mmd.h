#ifndef DMIA_MMD_H_
#define DMIA_MMD_H_

#include "dmia/feature_net.h"
#include "dmia/kernels.h"
#include "dmia/matrix.h"

namespace dmia {

inline constexpr double kDefaultLambda = 1e-8;

struct MmdEstimate {
  double value = 0.0;     // unbiased MMD^2, may be negative
  double variance = 0.0;  // regularized variance, >= lambda
  Index n = 0;
};

// Unbiased U-statistic for MMD^2. Diagonals of kxx and kyy are excluded.
// With equal sizes the paired cross terms kxy(i, i) are excluded as well, so
// the value equals mmd2_u_from_h(h_matrix(...)). Sizes may differ; both must
// be at least 2.
double mmd2_u(const Matrix& kxx, const Matrix& kyy, const Matrix& kxy);

// H(i, j) = kxx(i, j) + kyy(i, j) - kxy(i, j) - kxy(j, i). Equal sizes only.
Matrix h_matrix(const Matrix& kxx, const Matrix& kyy, const Matrix& kxy);

// (1 / (n (n - 1))) * sum_{i != j} H(i, j).
double mmd2_u_from_h(const Matrix& h);

// (4 / n^3) sum_i (sum_j H_ij)^2 - (4 / n^4) (sum_ij H_ij)^2 + lambda,
// clamped below at lambda.
double variance_reg(const Matrix& h, double lambda = kDefaultLambda);

MmdEstimate estimate_mmd(const Matrix& kxx, const Matrix& kyy, const Matrix& kxy,
                         double lambda = kDefaultLambda);

double normalized_stat(const MmdEstimate& e);

enum class Objective {
  // mmd2_u(anchor, proxy) - mmd2_u(anchor, non-member); minimized.
  kDifference,
  // Same difference with each term divided by its regularized std.
  kNormalizedDifference,
};

struct LossOptions {
  Objective objective = Objective::kDifference;
  double lambda = kDefaultLambda;
};

struct LossAndGrad {
  double loss = 0.0;
  double member_term = 0.0;     // discrepancy anchor vs proxy members
  double nonmember_term = 0.0;  // discrepancy anchor vs non-members
  LayerStack net_grads;
  double epsilon_grad = 0.0;
};

// Training loss and its exact reverse-mode gradient w.r.t. the feature net
// parameters and the mixing weight epsilon. All batches need >= 2 rows; the
// normalized objective additionally needs equal batch sizes.
LossAndGrad dmia_loss_and_grad(const DeepKernel& k, const Matrix& anchor,
                               const Matrix& member_proxy, const Matrix& nonmember,
                               const LossOptions& options = {});

double dmia_loss(const DeepKernel& k, const Matrix& anchor, const Matrix& member_proxy,
                 const Matrix& nonmember, const LossOptions& options = {});

}  // namespace dmia

#endif  // DMIA_MMD_H_
