#include "dmia/matrix.h"

#include <algorithm>
#include <numeric>

#include "dmia/errors.h"
#include "dmia/rng.h"

namespace dmia {

std::string_view to_string(DataErrorCode code) {
  switch (code) {
    case DataErrorCode::kIo: return "io";
    case DataErrorCode::kMalformedHeader: return "malformed_header";
    case DataErrorCode::kRaggedRow: return "ragged_row";
    case DataErrorCode::kBadNumber: return "bad_number";
    case DataErrorCode::kMagicMismatch: return "magic_mismatch";
    case DataErrorCode::kUnsupportedVersion: return "unsupported_version";
    case DataErrorCode::kTruncated: return "truncated";
    case DataErrorCode::kSchema: return "schema";
  }
  return "unknown";
}

Matrix pairwise_sq_dists(const Matrix& a, const Matrix& b) {
  if (&a == &b) return pairwise_sq_dists(a);
  require(a.cols() == b.cols(), "pairwise_sq_dists: column mismatch");
  const Vector na = a.rowwise().squaredNorm();
  const Vector nb = b.rowwise().squaredNorm();
  Matrix out = -2.0 * (a * b.transpose());
  out.colwise() += na;
  out.rowwise() += nb.transpose();
  return out.cwiseMax(0.0);
}

Matrix pairwise_sq_dists(const Matrix& a) {
  const Vector na = a.rowwise().squaredNorm();
  Matrix out = -2.0 * (a * a.transpose());
  out.colwise() += na;
  out.rowwise() += na.transpose();
  out = out.cwiseMax(0.0);
  mirror_upper(out, 0.0);
  return out;
}

void mirror_upper(Matrix& m, double diag) {
  require(m.rows() == m.cols(), "mirror_upper: matrix must be square");
  // Tiled so both the row-wise reads and the column-wise writes stay in cache.
  constexpr Index kTile = 32;
  const Index n = m.rows();
  for (Index bi = 0; bi < n; bi += kTile) {
    const Index ei = std::min(n, bi + kTile);
    for (Index bj = bi; bj < n; bj += kTile) {
      const Index ej = std::min(n, bj + kTile);
      for (Index i = bi; i < ei; ++i) {
        for (Index j = std::max(bj, i + 1); j < ej; ++j) m(j, i) = m(i, j);
      }
    }
  }
  m.diagonal().setConstant(diag);
}

Matrix gaussian_noise(Index rows, Index cols, double sigma, RngStream& rng) {
  require(sigma >= 0.0, "gaussian_noise: sigma must be nonnegative");
  Matrix out = Matrix::Zero(rows, cols);
  if (sigma == 0.0) return out;
  for (Index i = 0; i < out.size(); ++i) out.data()[i] = sigma * rng.normal();
  return out;
}

std::vector<Index> sample_indices(Index n, Index count, RngStream& rng,
                                  bool replacement) {
  require(count >= 0, "sample_indices: negative count");
  std::vector<Index> out(static_cast<std::size_t>(count));
  if (replacement) {
    require(n > 0 || count == 0, "sample_indices: empty population");
    for (auto& v : out) v = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
    return out;
  }
  require(count <= n, "sample_indices: count exceeds population without replacement");
  // Partial Fisher-Yates.
  std::vector<Index> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), Index{0});
  for (Index i = 0; i < count; ++i) {
    const auto j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n - i)));
    std::swap(pool[i], pool[j]);
    out[i] = pool[i];
  }
  return out;
}

Matrix take_rows(const Matrix& m, std::span<const Index> rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i] >= 0 && rows[i] < m.rows(), "take_rows: index out of range");
    out.row(static_cast<Index>(i)) = m.row(rows[i]);
  }
  return out;
}

Matrix subsample(const Matrix& d, Index count, RngStream& rng, bool replacement) {
  const auto idx = sample_indices(d.rows(), count, rng, replacement);
  return take_rows(d, idx);
}

Matrix vstack(const Matrix& top, const Matrix& bottom) {
  if (top.rows() == 0) return bottom;
  if (bottom.rows() == 0) return top;
  require(top.cols() == bottom.cols(), "vstack: column mismatch");
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace dmia
