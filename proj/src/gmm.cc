#include "dmia/gmm.h"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "dmia/errors.h"
#include "dmia/rng.h"

namespace dmia {

void GaussianMixture::validate() const {
  const Index k = weights.size();
  require(k >= 1, "GaussianMixture: no components");
  require(means.rows() == k && variances.rows() == k && means.cols() == variances.cols(),
          "GaussianMixture: inconsistent shapes");
  require((weights.array() >= 0.0).all() && std::abs(weights.sum() - 1.0) < 1e-9,
          "GaussianMixture: weights must be a probability vector");
  require((variances.array() > 0.0).all(), "GaussianMixture: variances must be positive");
}

Matrix GaussianMixture::sample(Index n, RngStream& rng) const {
  const Index k = components();
  Matrix out(n, dim());
  for (Index i = 0; i < n; ++i) {
    const double u = rng.uniform();
    Index c = 0;
    double acc = weights(0);
    while (u >= acc && c + 1 < k) acc += weights(++c);
    for (Index j = 0; j < dim(); ++j) {
      out(i, j) = means(c, j) + std::sqrt(variances(c, j)) * rng.normal();
    }
  }
  return out;
}

namespace {

// n x K matrix of log(w_k) + log N(x_i | mu_k, diag(var_k)).
Matrix component_log_joint(const GaussianMixture& g, const Matrix& x) {
  const Index n = x.rows();
  const Index k = g.components();
  const double log2pi = std::log(2.0 * std::numbers::pi);
  Matrix out(n, k);
  for (Index c = 0; c < k; ++c) {
    const RowVector inv_var = g.variances.row(c).cwiseInverse();
    const double log_norm = std::log(g.weights(c)) -
                            0.5 * (static_cast<double>(g.dim()) * log2pi +
                                   g.variances.row(c).array().log().sum());
    for (Index i = 0; i < n; ++i) {
      const double q = ((x.row(i) - g.means.row(c)).array().square() * inv_var.array()).sum();
      out(i, c) = log_norm - 0.5 * q;
    }
  }
  return out;
}

Vector row_logsumexp(const Matrix& m) {
  Vector out(m.rows());
  for (Index i = 0; i < m.rows(); ++i) {
    const double mx = m.row(i).maxCoeff();
    out(i) = std::isfinite(mx) ? mx + std::log((m.row(i).array() - mx).exp().sum()) : mx;
  }
  return out;
}

Matrix kmeanspp_centers(const Matrix& x, Index k, RngStream& rng) {
  const Index n = x.rows();
  Matrix centers(k, x.cols());
  centers.row(0) = x.row(static_cast<Index>(rng.below(static_cast<std::uint64_t>(n))));
  Vector best = (x.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (Index c = 1; c < k; ++c) {
    const double total = best.sum();
    Index pick = n - 1;
    if (total > 0.0) {
      double u = rng.uniform() * total;
      for (Index i = 0; i < n; ++i) {
        u -= best(i);
        if (u < 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
    }
    centers.row(c) = x.row(pick);
    best = best.cwiseMin((x.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }
  return centers;
}

struct Attempt {
  EmFit fit;
  bool degenerate = false;
};

Attempt run_em(const Matrix& x, Index k, const EmOptions& opt, RngStream& rng) {
  const Index n = x.rows();
  const Index d = x.cols();
  Attempt a;
  GaussianMixture& g = a.fit.model;
  g.means = kmeanspp_centers(x, k, rng);
  g.weights = Vector::Constant(k, 1.0 / static_cast<double>(k));
  const RowVector mean = x.colwise().mean();
  const RowVector var =
      ((x.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(n))
          .max(opt.variance_floor);
  g.variances = var.replicate(k, 1);

  double prev = -std::numeric_limits<double>::infinity();
  for (int it = 1; it <= opt.max_iterations; ++it) {
    // E step
    Matrix resp = component_log_joint(g, x);
    const Vector lse = row_logsumexp(resp);
    const double ll = lse.mean();
    if (!std::isfinite(ll)) {
      a.degenerate = true;
      return a;
    }
    a.fit.iterations = it;
    a.fit.mean_log_likelihood = ll;
    if (std::abs(ll - prev) <= opt.tolerance) {
      a.fit.converged = true;
      return a;
    }
    prev = ll;
    resp = (resp.colwise() - lse).array().exp().matrix();

    // M step
    const RowVector nk = resp.colwise().sum();
    for (Index c = 0; c < k; ++c) {
      if (nk(c) < 2.0) {
        a.degenerate = true;
        return a;
      }
      const RowVector mu = (resp.col(c).transpose() * x) / nk(c);
      RowVector v = RowVector::Zero(d);
      for (Index i = 0; i < n; ++i) v += resp(i, c) * (x.row(i) - mu).array().square().matrix();
      v /= nk(c);
      if ((v.array() <= opt.variance_floor).any()) {
        a.degenerate = true;
        return a;
      }
      g.means.row(c) = mu;
      g.variances.row(c) = v;
      g.weights(c) = nk(c) / static_cast<double>(n);
    }
    g.weights /= g.weights.sum();
  }
  return a;
}

}  // namespace

Vector GaussianMixture::log_density(const Matrix& x) const {
  require(x.cols() == dim(), "GaussianMixture::log_density: width mismatch");
  return row_logsumexp(component_log_joint(*this, x));
}

double GaussianMixture::mean_log_likelihood(const Matrix& x) const {
  return log_density(x).mean();
}

EmFit fit_gmm(const Matrix& x, Index k, const EmOptions& options, RngStream& rng) {
  require(k >= 1, "fit_gmm: need at least one component");
  require(x.rows() >= 2 * k, "fit_gmm: too few rows for the requested components");
  require(x.allFinite(), "fit_gmm: non-finite input");
  for (int attempt = 0; attempt <= options.max_restarts; ++attempt) {
    RngStream ar = rng.child(static_cast<std::uint64_t>(attempt));
    Attempt a = run_em(x, k, options, ar);
    if (!a.degenerate && a.fit.converged) {
      a.fit.restarts = attempt;
      return a.fit;
    }
  }
  std::ostringstream msg;
  msg << "fit_gmm: EM failed to converge to a non-degenerate fit after "
      << options.max_restarts << " restarts";
  throw NumericalError(msg.str());
}

}  // namespace dmia
