#include "dmia/encoder.h"

#include <cmath>

#include "dmia/errors.h"
#include "dmia/rng.h"

namespace dmia {

Encoder Encoder::identity(Index dim) {
  require(dim > 0, "Encoder: dimension must be positive");
  Encoder e;
  e.mode_ = Mode::kIdentity;
  e.in_dim_ = dim;
  e.out_dim_ = dim;
  return e;
}

Encoder Encoder::random_projection(Index in_dim, Index out_dim, RngStream& rng) {
  require(in_dim > 0 && out_dim > 0, "Encoder: dimensions must be positive");
  Matrix p(in_dim, out_dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(out_dim));
  for (Index i = 0; i < p.size(); ++i) p.data()[i] = scale * rng.normal();
  return projection(std::move(p));
}

Encoder Encoder::projection(Matrix matrix) {
  require(matrix.rows() > 0 && matrix.cols() > 0 && matrix.allFinite(),
          "Encoder: invalid projection matrix");
  Encoder e;
  e.mode_ = Mode::kProjection;
  e.in_dim_ = matrix.rows();
  e.out_dim_ = matrix.cols();
  e.matrix_ = std::move(matrix);
  return e;
}

Matrix Encoder::encode(const Matrix& x) const {
  require(x.cols() == in_dim_, "Encoder::encode: input width mismatch");
  if (mode_ == Mode::kIdentity) return x;
  return x * (*matrix_);
}

}  // namespace dmia
