#include "dmia/world.h"

#include <algorithm>
#include <cmath>

#include "dmia/errors.h"
#include "dmia/rng.h"

namespace dmia {

void WorldSpec::validate() const {
  require(dim >= 1, "WorldSpec: dim must be >= 1");
  require(member_components >= 1, "WorldSpec: need at least one member component");
  require(teacher_components >= 1 && student_components >= 1,
          "WorldSpec: K_t and K_s must be >= 1");
  require(cov_scale > 0.0, "WorldSpec: cov_scale must be positive");
  require(mean_spread >= 0.0, "WorldSpec: mean_spread must be >= 0");
  require(nonmember_shift >= 0.5 * cov_scale,
          "WorldSpec: non-member shift must be at least 0.5 * cov_scale");
  require(n_member >= 2 * teacher_components && n_teacher_gen >= 2 * student_components,
          "WorldSpec: sample budgets too small for the mixture fits");
  require(n_student_gen >= 1 && n_nonmember >= 1 && n_nonmember_holdout >= 1,
          "WorldSpec: empty pools");
  require(teacher_memorization >= 0.0 && teacher_memorization <= 1.0,
          "WorldSpec: teacher_memorization must lie in [0, 1]");
  require(memorization_jitter >= 0.0, "WorldSpec: memorization_jitter must be >= 0");
  require(encoder_dim >= 0, "WorldSpec: encoder_dim must be >= 0");
}

WorldSpec reference_world_spec(std::uint64_t seed) {
  WorldSpec s;
  s.seed = seed;
  return s;
}

TeacherModel::TeacherModel(GaussianMixture mixture, Matrix memorized, double memorization,
                           double jitter)
    : mixture_(std::move(mixture)),
      memorized_(std::move(memorized)),
      memorization_(memorization),
      jitter_(jitter) {}

TeacherOutputs TeacherModel::generate(Index n, RngStream& rng) const {
  Matrix out = mixture_.sample(n, rng);
  if (memorization_ > 0.0 && memorized_.rows() > 0) {
    for (Index i = 0; i < n; ++i) {
      if (rng.uniform() >= memorization_) continue;
      const auto src = static_cast<Index>(rng.below(static_cast<std::uint64_t>(memorized_.rows())));
      for (Index j = 0; j < out.cols(); ++j) {
        out(i, j) = memorized_(src, j) + jitter_ * rng.normal();
      }
    }
  }
  return TeacherOutputs(std::move(out));
}

EmFit fit_student(const TeacherOutputs& teacher_outputs, Index components, RngStream& rng) {
  return fit_gmm(teacher_outputs.samples(), components, EmOptions{}, rng);
}

Sampler WorldInstance::student_sampler() const {
  GaussianMixture g = student;
  return [g](Index n, RngStream& rng) { return g.sample(n, rng); };
}

namespace {

Vector random_weights(Index k, RngStream& rng) {
  Vector w(k);
  for (Index i = 0; i < k; ++i) w(i) = 0.5 + rng.uniform();
  return w / w.sum();
}

}  // namespace

WorldInstance build_world(const WorldSpec& spec) {
  spec.validate();
  const RngStream root(spec.seed, 0x776f726c64ULL);  // "world"
  const Index d = spec.dim;
  const Index k = spec.member_components;

  RngStream dist_rng = root.child(1);
  GaussianMixture member;
  member.weights = random_weights(k, dist_rng);
  member.means = Matrix(k, d);
  for (Index i = 0; i < member.means.size(); ++i) {
    member.means.data()[i] = spec.mean_spread * dist_rng.normal();
  }
  member.variances = Matrix::Constant(k, d, spec.cov_scale * spec.cov_scale);

  GaussianMixture nonmember = member;
  nonmember.weights = random_weights(k, dist_rng);
  for (Index c = 0; c < k; ++c) {
    RowVector dir(d);
    for (Index j = 0; j < d; ++j) dir(j) = dist_rng.normal();
    nonmember.means.row(c) += spec.nonmember_shift * dir.normalized();
  }

  RngStream data_rng = root.child(2);
  Matrix d_mem = member.sample(spec.n_member, data_rng);
  Matrix d_non = nonmember.sample(spec.n_nonmember, data_rng);
  Matrix d_hold = nonmember.sample(spec.n_nonmember_holdout, data_rng);

  RngStream teacher_rng = root.child(3);
  EmFit teacher_fit = fit_gmm(d_mem, spec.teacher_components, EmOptions{}, teacher_rng);
  TeacherModel teacher(std::move(teacher_fit.model), d_mem, spec.teacher_memorization,
                       spec.memorization_jitter * spec.cov_scale);
  RngStream gen_rng = root.child(4);
  TeacherOutputs teacher_gen = teacher.generate(spec.n_teacher_gen, gen_rng);

  RngStream student_rng = root.child(5);
  EmFit student_fit = fit_student(teacher_gen, spec.student_components, student_rng);
  RngStream student_gen_rng = root.child(6);
  Matrix d_student = student_fit.model.sample(spec.n_student_gen, student_gen_rng);

  RngStream enc_rng = root.child(7);
  Encoder encoder = spec.encoder_dim == 0
                        ? Encoder::identity(d)
                        : Encoder::random_projection(d, spec.encoder_dim, enc_rng);

  return WorldInstance{spec,
                       std::move(member),
                       std::move(nonmember),
                       std::move(d_mem),
                       std::move(d_non),
                       std::move(d_hold),
                       std::move(teacher),
                       std::move(teacher_gen),
                       std::move(student_fit.model),
                       std::move(d_student),
                       std::move(encoder)};
}

Index member_count(double rho, Index size) {
  require(rho >= 0.0 && rho <= 1.0, "member_count: rho must lie in [0, 1]");
  require(size >= 0, "member_count: negative size");
  // The slack keeps products like 0.3 * 10 = 3.0000000000000004 at 3.
  const double raw = rho * static_cast<double>(size);
  return std::min(size, static_cast<Index>(std::ceil(raw - 1e-9)));
}

Matrix make_candidate(const Matrix& members, const Matrix& nonmembers, double rho, Index size,
                      RngStream& rng) {
  require(size >= 1, "make_candidate: size must be >= 1");
  const Index n_mem = member_count(rho, size);
  const Index n_non = size - n_mem;
  require(n_mem <= members.rows(), "make_candidate: member pool too small");
  require(n_non <= nonmembers.rows(), "make_candidate: non-member pool too small");
  require(n_mem == 0 || n_non == 0 || members.cols() == nonmembers.cols(),
          "make_candidate: pool width mismatch");
  const Matrix mem_part = subsample(members, n_mem, rng, false);
  const Matrix non_part = subsample(nonmembers, n_non, rng, false);
  const Matrix joined = vstack(mem_part, non_part);
  const auto order = sample_indices(size, size, rng, false);
  return take_rows(joined, order);
}

Matrix make_candidate(const WorldInstance& w, double rho, Index size, RngStream& rng) {
  return make_candidate(w.d_mem, w.d_non_holdout, rho, size, rng);
}

}  // namespace dmia
