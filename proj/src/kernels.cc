#include "dmia/kernels.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "dmia/errors.h"

namespace dmia {

Matrix gaussian_from_sq_dists(const Matrix& sq_dists, double gamma) {
  require(gamma > 0.0 && std::isfinite(gamma), "gaussian kernel: gamma must be positive");
  const double scale = -1.0 / (2.0 * gamma * gamma);
  return (sq_dists.array() * scale).exp().matrix();
}

Matrix gaussian_gram(const Matrix& a, const Matrix& b, double gamma) {
  if (&a == &b) return gaussian_gram(a, gamma);
  require(gamma > 0.0 && std::isfinite(gamma), "gaussian_gram: gamma must be positive");
  return gaussian_from_sq_dists(pairwise_sq_dists(a, b), gamma);
}

Matrix gaussian_gram(const Matrix& a, double gamma) {
  require(gamma > 0.0 && std::isfinite(gamma), "gaussian_gram: gamma must be positive");
  const Vector na = a.rowwise().squaredNorm();
  Matrix d2 = -2.0 * (a * a.transpose());
  d2.colwise() += na;
  d2.rowwise() += na.transpose();
  Matrix g = gaussian_from_sq_dists(d2.cwiseMax(0.0), gamma);
  // Neither the product nor the vectorized exp is guaranteed to be exactly
  // symmetric; mirror the upper triangle once at the end.
  mirror_upper(g, 1.0);
  return g;
}

double median_distance(const Matrix& x, Index max_rows) {
  const Index n = std::min(x.rows(), max_rows);
  require(n >= 2, "median_distance: need at least two rows");
  const Matrix head = x.topRows(n);
  const Matrix d2 = pairwise_sq_dists(head);
  std::vector<double> vals;
  vals.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) vals.push_back(d2(i, j));
  }
  const auto mid = vals.begin() + static_cast<std::ptrdiff_t>(vals.size() / 2);
  std::nth_element(vals.begin(), mid, vals.end());
  const double med = std::sqrt(*mid);
  require(med > 0.0, "median_distance: degenerate data (median distance is zero)");
  return med;
}

void DeepKernel::validate() const {
  require(epsilon >= 0.0 && epsilon <= 1.0, "DeepKernel: epsilon must lie in [0, 1]");
  require(gamma_phi > 0.0 && std::isfinite(gamma_phi), "DeepKernel: gamma_phi must be positive");
  require(gamma_q > 0.0 && std::isfinite(gamma_q), "DeepKernel: gamma_q must be positive");
}

Embedded embed(const DeepKernel& k, const Matrix& x) {
  return Embedded{x, k.net.forward(x)};
}

GramParts deep_gram_parts(const DeepKernel& k, const Embedded& a, const Embedded& b) {
  k.validate();
  require(a.raw.cols() == b.raw.cols(), "deep_gram: input width mismatch");
  GramParts parts;
  if (&a == &b) {
    parts.phi = gaussian_gram(a.features, k.gamma_phi);
    parts.q = gaussian_gram(a.raw, k.gamma_q);
  } else {
    parts.phi = gaussian_gram(a.features, b.features, k.gamma_phi);
    parts.q = gaussian_gram(a.raw, b.raw, k.gamma_q);
  }
  parts.value =
      (((1.0 - k.epsilon) * parts.phi.array() + k.epsilon) * parts.q.array()).matrix();
  // k(x, x) = [(1 - eps) + eps] * 1; pin it so rounding in (1 - eps) + eps
  // cannot leak into the diagonal.
  if (&a == &b) parts.value.diagonal().setOnes();
  return parts;
}

Matrix deep_gram(const DeepKernel& k, const Embedded& a, const Embedded& b) {
  return deep_gram_parts(k, a, b).value;
}

Matrix deep_gram(const DeepKernel& k, const Matrix& a, const Matrix& b) {
  require(a.cols() == k.net.in_dim() && b.cols() == k.net.in_dim(),
          "deep_gram: input width does not match the feature net");
  const Embedded ea = embed(k, a);
  const Embedded eb = embed(k, b);
  return deep_gram(k, ea, eb);
}

Matrix deep_gram(const DeepKernel& k, const Matrix& a) {
  require(a.cols() == k.net.in_dim(), "deep_gram: input width does not match the feature net");
  const Embedded ea = embed(k, a);
  return deep_gram(k, ea, ea);
}

}  // namespace dmia
