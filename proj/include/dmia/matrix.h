#ifndef DMIA_MATRIX_H_
#define DMIA_MATRIX_H_

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

namespace dmia {

class RngStream;

using Index = Eigen::Index;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::RowVectorXd;
using Vector = Eigen::VectorXd;

// out(i, j) = ||a_i - b_j||^2 via ||a||^2 + ||b||^2 - 2 a.b, clamped at zero.
// When `a` and `b` are the same object the result is exactly symmetric with a
// zero diagonal.
Matrix pairwise_sq_dists(const Matrix& a, const Matrix& b);

// Symmetric variant for a single point set.
Matrix pairwise_sq_dists(const Matrix& a);

// Copies the strict upper triangle of a square matrix onto the lower one and
// sets the diagonal to `diag`.
void mirror_upper(Matrix& m, double diag);

// i.i.d. Normal(0, sigma^2) entries.
Matrix gaussian_noise(Index rows, Index cols, double sigma, RngStream& rng);

// `count` row indices drawn uniformly from [0, n).
std::vector<Index> sample_indices(Index n, Index count, RngStream& rng,
                                  bool replacement);

Matrix take_rows(const Matrix& m, std::span<const Index> rows);

Matrix subsample(const Matrix& d, Index count, RngStream& rng, bool replacement);

Matrix vstack(const Matrix& top, const Matrix& bottom);

bool all_finite(const Matrix& m);

}  // namespace dmia

#endif  // DMIA_MATRIX_H_
