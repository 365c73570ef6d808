#include <cmath>
#include <vector>

#include "dmia/errors.h"
#include "dmia/kernels.h"
#include "dmia/mmd.h"
#include "dmia/rng.h"
#include "gtest/gtest.h"
#include "oracles.h"

namespace dmia {
namespace {

struct Grams {
  Matrix kxx, kyy, kxy;
};

Grams gaussian_grams(const Matrix& x, const Matrix& y, double gamma) {
  return {gaussian_gram(x, gamma), gaussian_gram(y, gamma), gaussian_gram(x, y, gamma)};
}

Matrix column(std::initializer_list<double> v) {
  Matrix m(static_cast<Index>(v.size()), 1);
  Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

TEST(Mmd2UTest, HandCase) {
  const Grams g = gaussian_grams(column({0, 0}), column({1, 1}), 1.0);
  const double want = 2.0 - 2.0 * std::exp(-0.5);
  EXPECT_NEAR(mmd2_u(g.kxx, g.kyy, g.kxy), want, 1e-12);
  EXPECT_NEAR(want, 0.786938680574733, 1e-12);
}

TEST(Mmd2UTest, MatchesPairEnumerationWithUnequalSizes) {
  RngStream rng(1);
  for (int rep = 0; rep < 10; ++rep) {
    const Matrix x = oracle::random_matrix(7, 3, rng);
    const Matrix y = oracle::random_matrix(5, 3, rng, 1.5);
    const Grams g = gaussian_grams(x, y, 1.1);
    EXPECT_NEAR(mmd2_u(g.kxx, g.kyy, g.kxy), oracle::mmd2_u_loops(g.kxx, g.kyy, g.kxy), 1e-13);
  }
}

TEST(Mmd2UTest, SymmetricUnderSwap) {
  RngStream rng(2);
  const Matrix x = oracle::random_matrix(9, 2, rng);
  const Matrix y = oracle::random_matrix(6, 2, rng);
  const Grams g = gaussian_grams(x, y, 0.9);
  const Matrix kyx = g.kxy.transpose();
  EXPECT_NEAR(mmd2_u(g.kxx, g.kyy, g.kxy), mmd2_u(g.kyy, g.kxx, kyx), 1e-15);
}

TEST(Mmd2UTest, TooFewRowsRejected) {
  const Matrix one = Matrix::Ones(1, 1);
  EXPECT_THROW(mmd2_u(one, Matrix::Ones(2, 2), Matrix::Ones(1, 2)), ContractError);
}

TEST(Mmd2UTest, NullMeanWithinThreeStandardErrors) {
  RngStream rng(3);
  std::vector<double> v;
  for (int t = 0; t < 200; ++t) {
    const Matrix x = oracle::random_matrix(100, 5, rng);
    const Matrix y = oracle::random_matrix(100, 5, rng);
    const Grams g = gaussian_grams(x, y, std::sqrt(5.0));
    v.push_back(mmd2_u(g.kxx, g.kyy, g.kxy));
  }
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= v.size();
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= (v.size() - 1.0);
  EXPECT_LT(std::abs(mean), 3.0 * std::sqrt(var / v.size()));
}

TEST(Mmd2UTest, PositiveUnderMeanGap) {
  RngStream rng(4);
  int positive = 0;
  for (int t = 0; t < 200; ++t) {
    const Matrix x = oracle::random_matrix(100, 5, rng);
    Matrix y = oracle::random_matrix(100, 5, rng);
    y.col(0).array() += 2.0;
    const Grams g = gaussian_grams(x, y, std::sqrt(5.0));
    positive += mmd2_u(g.kxx, g.kyy, g.kxy) > 0.0 ? 1 : 0;
  }
  EXPECT_GE(positive, 198);
}

TEST(Mmd2UTest, UnequalSizesUseFullCrossMean) {
  Matrix kxx = Matrix::Ones(2, 2), kyy = Matrix::Ones(3, 3);
  Matrix kxy = Matrix::Constant(2, 3, 0.5);
  // 1 + 1 - 2 * 0.5
  EXPECT_NEAR(mmd2_u(kxx, kyy, kxy), 1.0, 1e-15);
}

TEST(HMatrixTest, IdenticalSamplesCancel) {
  RngStream rng(5);
  const Matrix x = oracle::random_matrix(6, 2, rng);
  const Grams g = gaussian_grams(x, x, 1.0);
  EXPECT_TRUE(h_matrix(g.kxx, g.kyy, g.kxy).isZero(0.0));
}

TEST(HMatrixTest, HandCaseOffDiagonal) {
  const Grams g = gaussian_grams(column({0, 0}), column({1, 1}), 1.0);
  const Matrix h = h_matrix(g.kxx, g.kyy, g.kxy);
  EXPECT_NEAR(h(0, 1), 2.0 - 2.0 * std::exp(-0.5), 1e-15);
  EXPECT_NEAR(h(1, 0), 2.0 - 2.0 * std::exp(-0.5), 1e-15);
}

TEST(HMatrixTest, UStatisticFromHMatchesDirect) {
  RngStream rng(6);
  for (int rep = 0; rep < 50; ++rep) {
    const Index n = 2 + static_cast<Index>(rng.below(20));
    const Matrix x = oracle::random_matrix(n, 3, rng);
    const Matrix y = oracle::random_matrix(n, 3, rng, 1.3);
    const Grams g = gaussian_grams(x, y, 0.5 + rng.uniform());
    EXPECT_NEAR(mmd2_u_from_h(h_matrix(g.kxx, g.kyy, g.kxy)), mmd2_u(g.kxx, g.kyy, g.kxy), 1e-12);
  }
}

TEST(HMatrixTest, UnequalSizesRejected) {
  EXPECT_THROW(h_matrix(Matrix::Ones(3, 3), Matrix::Ones(2, 2), Matrix::Ones(3, 2)),
               ContractError);
}

TEST(VarianceRegTest, ConstantHGivesLambdaExactly) {
  for (double c : {0.0, 1.0, -0.37, 12.5}) {
    for (double lambda : {1e-8, 0.25}) {
      EXPECT_EQ(variance_reg(Matrix::Constant(7, 7, c), lambda), lambda) << c;
    }
  }
}

TEST(VarianceRegTest, MatchesTripleLoop) {
  RngStream rng(7);
  for (int rep = 0; rep < 10; ++rep) {
    Matrix h = oracle::random_matrix(6, 6, rng);
    h = (h + h.transpose()).eval();
    EXPECT_NEAR(variance_reg(h, 1e-8), oracle::variance_loops(h, 1e-8), 1e-10);
  }
}

TEST(VarianceRegTest, NeverBelowLambda) {
  RngStream rng(8);
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix h = oracle::random_matrix(5, 5, rng);
    EXPECT_GE(variance_reg(h, 0.01), 0.01);
  }
}

TEST(NormalizedStatTest, Arithmetic) {
  EXPECT_EQ(normalized_stat(MmdEstimate{0.0, 0.04, 10}), 0.0);
  EXPECT_NEAR(normalized_stat(MmdEstimate{0.2, 0.04, 10}), 1.0, 1e-15);
}

TEST(NormalizedStatTest, NullRarelyExceedsThree) {
  RngStream rng(9);
  int big = 0;
  const int trials = 500;
  for (int t = 0; t < trials; ++t) {
    const Matrix x = oracle::random_matrix(100, 5, rng);
    const Matrix y = oracle::random_matrix(100, 5, rng);
    const Grams g = gaussian_grams(x, y, std::sqrt(5.0));
    big += std::abs(normalized_stat(estimate_mmd(g.kxx, g.kyy, g.kxy))) > 3.0 ? 1 : 0;
  }
  EXPECT_LT(big, trials * 0.02);
}

// ---------------------------------------------------------------------------
// Training loss and gradient.

DeepKernel loss_kernel(Index in_dim, int depth, double eps, RngStream& rng) {
  DeepKernel k;
  k.net = FeatureNet::glorot(NetShape{in_dim, 6, depth, 3}, rng);
  for (auto& l : k.net.mutable_layers())
    for (Index j = 0; j < l.bias.size(); ++j) l.bias(j) = 0.1 * rng.normal();
  k.epsilon = eps;
  k.gamma_phi = 0.9;
  k.gamma_q = 1.6;
  return k;
}

struct Batches {
  Matrix anchor, proxy, non;
};

Batches random_batches(Index n, Index d, RngStream& rng) {
  Batches b{oracle::random_matrix(n, d, rng), oracle::random_matrix(n, d, rng),
            oracle::random_matrix(n, d, rng)};
  b.proxy.array() += 0.3;
  b.non.col(0).array() -= 0.8;
  return b;
}

// Max relative error of the analytic gradient against central differences
// over every net parameter and epsilon.
double gradient_error(DeepKernel k, const Batches& b, const LossOptions& opts) {
  const double h = 1e-5;
  const LossAndGrad lg = dmia_loss_and_grad(k, b.anchor, b.proxy, b.non, opts);
  auto loss = [&] { return dmia_loss(k, b.anchor, b.proxy, b.non, opts); };
  double worst = 0.0;
  auto probe = [&](double& p, double analytic) {
    const double saved = p;
    p = saved + h;
    const double up = loss();
    p = saved - h;
    const double down = loss();
    p = saved;
    worst = std::max(worst, oracle::rel_err((up - down) / (2 * h), analytic));
  };
  for (std::size_t l = 0; l < k.net.layers().size(); ++l) {
    Layer& layer = k.net.mutable_layers()[l];
    for (Index i = 0; i < layer.weight.rows(); ++i)
      for (Index j = 0; j < layer.weight.cols(); ++j)
        probe(layer.weight(i, j), lg.net_grads[l].weight(i, j));
    for (Index j = 0; j < layer.bias.size(); ++j) probe(layer.bias(j), lg.net_grads[l].bias(j));
  }
  // Central differences need room on both sides of epsilon.
  if (k.epsilon >= h && k.epsilon <= 1.0 - h) probe(k.epsilon, lg.epsilon_grad);
  return worst;
}

TEST(DmiaLossTest, IdenticalProxyAndNonMemberCancel) {
  RngStream rng(10);
  const DeepKernel k = loss_kernel(2, 2, 0.05, rng);
  const Batches b = random_batches(8, 2, rng);
  const LossAndGrad lg = dmia_loss_and_grad(k, b.anchor, b.non, b.non);
  EXPECT_EQ(lg.loss, 0.0);
  // The two terms cancel analytically; the summed gradients cancel up to
  // floating-point reassociation only.
  EXPECT_LE(std::abs(lg.epsilon_grad), 1e-14);
  for (const auto& l : lg.net_grads) {
    EXPECT_LE(l.weight.cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LE(l.bias.cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(DmiaLossTest, LossIsDifferenceOfTerms) {
  RngStream rng(11);
  const DeepKernel k = loss_kernel(2, 1, 0.05, rng);
  const Batches b = random_batches(8, 2, rng);
  const LossAndGrad lg = dmia_loss_and_grad(k, b.anchor, b.proxy, b.non);
  const Matrix kaa = deep_gram(k, b.anchor), kpp = deep_gram(k, b.proxy),
               knn = deep_gram(k, b.non);
  const double member = oracle::mmd2_u_loops(kaa, kpp, deep_gram(k, b.anchor, b.proxy));
  const double non = oracle::mmd2_u_loops(kaa, knn, deep_gram(k, b.anchor, b.non));
  EXPECT_NEAR(lg.member_term, member, 1e-13);
  EXPECT_NEAR(lg.nonmember_term, non, 1e-13);
  EXPECT_NEAR(lg.loss, member - non, 1e-13);
  EXPECT_NEAR(dmia_loss(k, b.anchor, b.proxy, b.non), lg.loss, 1e-15);
}

TEST(DmiaLossTest, FullMixingZeroesNetGradients) {
  RngStream rng(12);
  const DeepKernel k = loss_kernel(2, 3, 1.0, rng);
  const Batches b = random_batches(8, 2, rng);
  const LossAndGrad lg = dmia_loss_and_grad(k, b.anchor, b.proxy, b.non);
  for (const auto& l : lg.net_grads) {
    EXPECT_TRUE(l.weight.isZero(0.0));
    EXPECT_TRUE(l.bias.isZero(0.0));
  }
}

TEST(DmiaLossTest, GradientMatchesFiniteDifferences) {
  for (int depth : {1, 2, 3}) {
    for (double eps : {0.0, 0.05, 0.5}) {
      RngStream rng(100 + 10 * depth + static_cast<int>(eps * 100));
      const DeepKernel k = loss_kernel(2, depth, eps, rng);
      const Batches b = random_batches(8, 2, rng);
      EXPECT_LT(gradient_error(k, b, LossOptions{}), 1e-4) << "depth " << depth << " eps " << eps;
    }
  }
}

TEST(DmiaLossTest, NormalizedObjectiveGradientMatchesFiniteDifferences) {
  for (int depth : {1, 3}) {
    RngStream rng(200 + depth);
    const DeepKernel k = loss_kernel(3, depth, 0.05, rng);
    const Batches b = random_batches(10, 3, rng);
    const LossOptions opts{Objective::kNormalizedDifference, 1e-6};
    EXPECT_LT(gradient_error(k, b, opts), 1e-4) << "depth " << depth;
  }
}

TEST(DmiaLossTest, UnequalBatchesSupportedForDifference) {
  RngStream rng(13);
  const DeepKernel k = loss_kernel(2, 2, 0.05, rng);
  Batches b = random_batches(8, 2, rng);
  b.non = oracle::random_matrix(5, 2, rng);
  EXPECT_LT(gradient_error(k, b, LossOptions{}), 1e-4);
  const LossOptions normalized{Objective::kNormalizedDifference, 1e-8};
  EXPECT_THROW(dmia_loss_and_grad(k, b.anchor, b.proxy, b.non, normalized), ContractError);
}

}  // namespace
}  // namespace dmia
