#ifndef DMIA_GMM_H_
#define DMIA_GMM_H_

#include "dmia/matrix.h"

namespace dmia {

class RngStream;

// Mixture of axis-aligned Gaussians.
struct GaussianMixture {
  Vector weights;     // K, sums to 1
  Matrix means;       // K x d
  Matrix variances;   // K x d

  Index components() const { return weights.size(); }
  Index dim() const { return means.cols(); }

  void validate() const;
  Matrix sample(Index n, RngStream& rng) const;
  // Per-row log density.
  Vector log_density(const Matrix& x) const;
  double mean_log_likelihood(const Matrix& x) const;
};

struct EmOptions {
  int max_iterations = 100;
  double tolerance = 1e-6;      // on mean log-likelihood
  double variance_floor = 1e-6;
  int max_restarts = 5;
};

struct EmFit {
  GaussianMixture model;
  int iterations = 0;
  int restarts = 0;
  bool converged = false;
  double mean_log_likelihood = 0.0;
};

// EM with k-means++ seeding. A component that collapses (variance at the
// floor or fewer than two effective points) triggers a restart; after
// max_restarts failed attempts a NumericalError is thrown.
EmFit fit_gmm(const Matrix& x, Index k, const EmOptions& options, RngStream& rng);

}  // namespace dmia

#endif  // DMIA_GMM_H_
