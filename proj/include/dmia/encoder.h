#ifndef DMIA_ENCODER_H_
#define DMIA_ENCODER_H_

#include <optional>

#include "dmia/matrix.h"

namespace dmia {

class RngStream;

// Stand-in for the student model's encoder: identity, or a fixed linear
// projection chosen once when the world is built.
class Encoder {
 public:
  enum class Mode { kIdentity, kProjection };

  static Encoder identity(Index dim);
  // Entries i.i.d. Normal(0, 1 / out_dim).
  static Encoder random_projection(Index in_dim, Index out_dim, RngStream& rng);
  static Encoder projection(Matrix matrix);

  Mode mode() const { return mode_; }
  Index in_dim() const { return in_dim_; }
  Index out_dim() const { return out_dim_; }
  // (in_dim x out_dim); absent in identity mode.
  const std::optional<Matrix>& matrix() const { return matrix_; }

  Matrix encode(const Matrix& x) const;

 private:
  Mode mode_ = Mode::kIdentity;
  Index in_dim_ = 0;
  Index out_dim_ = 0;
  std::optional<Matrix> matrix_;
};

}  // namespace dmia

#endif  // DMIA_ENCODER_H_
