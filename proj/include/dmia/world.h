#ifndef DMIA_WORLD_H_
#define DMIA_WORLD_H_

#include <cstdint>

#include "dmia/dmia.h"
#include "dmia/encoder.h"
#include "dmia/gmm.h"
#include "dmia/matrix.h"

namespace dmia {

// Synthetic teacher/student distillation scenario.
struct WorldSpec {
  Index dim = 8;
  Index member_components = 4;
  // Member component means ~ Normal(0, mean_spread^2 I).
  double mean_spread = 2.0;
  // Shared isotropic component standard deviation.
  double cov_scale = 1.0;
  // Every non-member component mean is moved by this distance in a random
  // direction; mixture weights are redrawn.
  double nonmember_shift = 1.0;
  Index teacher_components = 4;
  Index n_member = 4000;
  Index n_teacher_gen = 4000;
  Index student_components = 4;
  Index n_student_gen = 4000;
  // Attacker-side auxiliary non-members.
  Index n_nonmember = 4000;
  // Non-members reserved for building candidate sets.
  Index n_nonmember_holdout = 4000;
  // Fraction of teacher outputs that reproduce a training member (plus
  // jitter of memorization_jitter * cov_scale). Models instance-level
  // memorization in the teacher, which the student cannot inherit.
  double teacher_memorization = 0.5;
  double memorization_jitter = 0.05;
  // 0 keeps the identity encoder; otherwise a fixed random projection.
  Index encoder_dim = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

WorldSpec reference_world_spec(std::uint64_t seed = 0);

class TeacherModel;

// Samples emitted by the teacher. Only TeacherModel can create these, which is
// what keeps member data out of the student fit.
class TeacherOutputs {
 public:
  const Matrix& samples() const { return samples_; }

 private:
  friend class TeacherModel;
  explicit TeacherOutputs(Matrix samples) : samples_(std::move(samples)) {}
  Matrix samples_;
};

class TeacherModel {
 public:
  TeacherModel(GaussianMixture mixture, Matrix memorized, double memorization, double jitter);

  const GaussianMixture& mixture() const { return mixture_; }
  TeacherOutputs generate(Index n, RngStream& rng) const;

 private:
  GaussianMixture mixture_;
  Matrix memorized_;
  double memorization_;
  double jitter_;
};

// Student fit: sees nothing but teacher outputs.
EmFit fit_student(const TeacherOutputs& teacher_outputs, Index components, RngStream& rng);

struct WorldInstance {
  WorldSpec spec;
  GaussianMixture member_distribution;
  GaussianMixture nonmember_distribution;
  Matrix d_mem;
  Matrix d_non;
  Matrix d_non_holdout;
  TeacherModel teacher;
  TeacherOutputs teacher_gen;
  GaussianMixture student;
  Matrix d_student_gen;
  Encoder encoder;

  Sampler student_sampler() const;
};

WorldInstance build_world(const WorldSpec& spec);

// ceil(rho * size) rows from `members`, the rest from `nonmembers`, both
// without replacement, then shuffled.
Matrix make_candidate(const Matrix& members, const Matrix& nonmembers, double rho, Index size,
                      RngStream& rng);
Matrix make_candidate(const WorldInstance& w, double rho, Index size, RngStream& rng);

Index member_count(double rho, Index size);

}  // namespace dmia

#endif  // DMIA_WORLD_H_
