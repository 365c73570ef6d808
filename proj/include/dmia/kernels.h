#ifndef DMIA_KERNELS_H_
#define DMIA_KERNELS_H_

#include "dmia/feature_net.h"
#include "dmia/matrix.h"

namespace dmia {

// Bandwidth convention used everywhere: k(a, b) = exp(-||a - b||^2 / (2 gamma^2)).
inline constexpr const char* kBandwidthConvention = "exp(-d^2/(2*gamma^2))";

Matrix gaussian_gram(const Matrix& a, const Matrix& b, double gamma);
Matrix gaussian_gram(const Matrix& a, double gamma);

// Gaussian kernel applied to precomputed squared distances.
Matrix gaussian_from_sq_dists(const Matrix& sq_dists, double gamma);

// Median of pairwise Euclidean distances over distinct pairs of (at most
// `max_rows` leading) rows.
double median_distance(const Matrix& x, Index max_rows = 1000);

// k(a, b) = [(1 - epsilon) k_phi(net(a), net(b)) + epsilon] * k_q(a, b)
// with k_phi of bandwidth gamma_phi on learned features and k_q of bandwidth
// gamma_q on the raw inputs.
struct DeepKernel {
  FeatureNet net;
  double epsilon = 0.05;
  double gamma_phi = 1.0;
  double gamma_q = 1.0;

  void validate() const;
};

// Kernel inputs with the feature map already applied.
struct Embedded {
  Matrix raw;
  Matrix features;
};

Embedded embed(const DeepKernel& k, const Matrix& x);

Matrix deep_gram(const DeepKernel& k, const Matrix& a, const Matrix& b);
Matrix deep_gram(const DeepKernel& k, const Matrix& a);

// Gram on already embedded inputs. Passing the same object for `a` and `b`
// yields an exactly symmetric result with unit diagonal.
Matrix deep_gram(const DeepKernel& k, const Embedded& a, const Embedded& b);

// Pieces of a gram needed for reverse-mode differentiation.
struct GramParts {
  Matrix phi;    // k_phi on features
  Matrix q;      // k_q on raw inputs
  Matrix value;  // [(1 - eps) phi + eps] * q
};
GramParts deep_gram_parts(const DeepKernel& k, const Embedded& a, const Embedded& b);

}  // namespace dmia

#endif  // DMIA_KERNELS_H_
