#include "dmia/mmd.h"

#include <algorithm>
#include <cmath>

#include "dmia/errors.h"

namespace dmia {

namespace {

double offdiag_sum(const Matrix& k) { return k.sum() - k.trace(); }

}  // namespace

double mmd2_u(const Matrix& kxx, const Matrix& kyy, const Matrix& kxy) {
  const Index n = kxx.rows();
  const Index m = kyy.rows();
  require(kxx.cols() == n && kyy.cols() == m, "mmd2_u: kxx and kyy must be square");
  require(kxy.rows() == n && kxy.cols() == m, "mmd2_u: kxy shape mismatch");
  require(n >= 2 && m >= 2, "mmd2_u: each sample set needs at least two points");
  const double dn = static_cast<double>(n);
  const double dm = static_cast<double>(m);
  if (n == m) {
    // Equal sizes: the U-statistic over pairs (i, j), i != j, of the joint
    // kernel H, which also drops the paired cross terms kxy(i, i).
    const double pairs = dn * (dn - 1.0);
    return (offdiag_sum(kxx) + offdiag_sum(kyy) - 2.0 * offdiag_sum(kxy)) / pairs;
  }
  return offdiag_sum(kxx) / (dn * (dn - 1.0)) + offdiag_sum(kyy) / (dm * (dm - 1.0)) -
         2.0 * kxy.sum() / (dn * dm);
}

Matrix h_matrix(const Matrix& kxx, const Matrix& kyy, const Matrix& kxy) {
  const Index n = kxx.rows();
  require(kxx.cols() == n && kyy.rows() == n && kyy.cols() == n && kxy.rows() == n &&
              kxy.cols() == n,
          "h_matrix: all grams must be n x n with equal sample sizes");
  return kxx + kyy - kxy - kxy.transpose();
}

double mmd2_u_from_h(const Matrix& h) {
  const Index n = h.rows();
  require(h.cols() == n && n >= 2, "mmd2_u_from_h: H must be square with n >= 2");
  const double dn = static_cast<double>(n);
  return offdiag_sum(h) / (dn * (dn - 1.0));
}

double variance_reg(const Matrix& h, double lambda) {
  require(lambda > 0.0, "variance_reg: lambda must be positive");
  const Index n = h.rows();
  require(h.cols() == n && n >= 2, "variance_reg: H must be square with n >= 2");
  const double dn = static_cast<double>(n);
  const Vector row_sums = h.rowwise().sum();
  const double total = row_sums.sum();
  const double v = 4.0 / (dn * dn * dn) * row_sums.squaredNorm() -
                   4.0 / (dn * dn * dn * dn) * total * total;
  return std::max(v, 0.0) + lambda;
}

MmdEstimate estimate_mmd(const Matrix& kxx, const Matrix& kyy, const Matrix& kxy,
                         double lambda) {
  const Matrix h = h_matrix(kxx, kyy, kxy);
  return MmdEstimate{mmd2_u(kxx, kyy, kxy), variance_reg(h, lambda), kxx.rows()};
}

double normalized_stat(const MmdEstimate& e) { return e.value / std::sqrt(e.variance); }

namespace {

// dLoss/dK for the three grams of one MMD term (x = anchor side).
struct TermCoefficients {
  Matrix xx;
  Matrix yy;
  Matrix xy;
};

TermCoefficients plain_coefficients(Index n, Index m, double sign) {
  const double dn = static_cast<double>(n);
  const double dm = static_cast<double>(m);
  TermCoefficients c;
  c.xx = Matrix::Constant(n, n, sign / (dn * (dn - 1.0)));
  c.xx.diagonal().setZero();
  c.yy = Matrix::Constant(m, m, sign / (dm * (dm - 1.0)));
  c.yy.diagonal().setZero();
  if (n == m) {
    c.xy = Matrix::Constant(n, m, -2.0 * sign / (dn * (dn - 1.0)));
    c.xy.diagonal().setZero();
  } else {
    c.xy = Matrix::Constant(n, m, -2.0 * sign / (dn * dm));
  }
  return c;
}

// Value and coefficients of mmd / sqrt(var_reg) via the H matrix.
double normalized_term(const Matrix& kxx, const Matrix& kyy, const Matrix& kxy, double lambda,
                       double sign, TermCoefficients* coeffs) {
  const Index n = kxx.rows();
  const double dn = static_cast<double>(n);
  const Matrix h = h_matrix(kxx, kyy, kxy);
  const double mmd = mmd2_u_from_h(h);
  const Vector r = h.rowwise().sum();
  const double total = r.sum();
  const double raw_var =
      4.0 / (dn * dn * dn) * r.squaredNorm() - 4.0 / (dn * dn * dn * dn) * total * total;
  const double var = std::max(raw_var, 0.0) + lambda;
  const double sd = std::sqrt(var);

  Matrix dh = Matrix::Constant(n, n, 1.0 / (dn * (dn - 1.0)) / sd);
  dh.diagonal().setZero();
  if (raw_var > 0.0) {
    const double scale = -mmd / (2.0 * var * sd);
    // d var / d H(i, j) = 8 r_i / n^3 - 8 S / n^4
    Vector dvar_row = (8.0 / (dn * dn * dn)) * r.array() - 8.0 * total / (dn * dn * dn * dn);
    dh.colwise() += scale * dvar_row;
  }
  dh *= sign;
  coeffs->xx = dh;
  coeffs->yy = dh;
  coeffs->xy = -dh - dh.transpose();
  return mmd / sd;
}

// Accumulates d/dfeatures and d/depsilon of sum(coeff .* K(P, Q)).
void backprop_gram(const DeepKernel& k, const GramParts& parts, const Matrix& coeff,
                   const Matrix& fp, const Matrix& fq, Eigen::Ref<Matrix> dfp,
                   Eigen::Ref<Matrix> dfq, double* deps) {
  const double inv_g2 = 1.0 / (k.gamma_phi * k.gamma_phi);
  const Matrix w =
      ((1.0 - k.epsilon) * inv_g2 * coeff.array() * parts.q.array() * parts.phi.array())
          .matrix();
  const Vector row = w.rowwise().sum();
  const RowVector col = w.colwise().sum();
  // d||fp_i - fq_j||^2 contributes -w_ij (fp_i - fq_j) to fp_i and the
  // opposite to fq_j.
  dfp.noalias() += w * fq;
  dfp -= row.asDiagonal() * fp;
  dfq.noalias() += w.transpose() * fp;
  dfq -= col.transpose().asDiagonal() * fq;
  *deps += (coeff.array() * (1.0 - parts.phi.array()) * parts.q.array()).sum();
}

}  // namespace

LossAndGrad dmia_loss_and_grad(const DeepKernel& k, const Matrix& anchor,
                               const Matrix& member_proxy, const Matrix& nonmember,
                               const LossOptions& options) {
  k.validate();
  const Index d = k.net.in_dim();
  require(anchor.cols() == d && member_proxy.cols() == d && nonmember.cols() == d,
          "dmia_loss_and_grad: batch width does not match the kernel input");
  const Index na = anchor.rows();
  const Index nm = member_proxy.rows();
  const Index nn = nonmember.rows();
  require(na >= 2 && nm >= 2 && nn >= 2, "dmia_loss_and_grad: batches need >= 2 rows");
  const bool normalized = options.objective == Objective::kNormalizedDifference;
  if (normalized) {
    require(na == nm && na == nn, "dmia_loss_and_grad: normalized objective needs equal batches");
  }

  Matrix stacked(na + nm + nn, d);
  stacked.topRows(na) = anchor;
  stacked.middleRows(na, nm) = member_proxy;
  stacked.bottomRows(nn) = nonmember;
  const FeatureNet::Trace trace = k.net.forward_trace(stacked);

  const Embedded ea{anchor, trace.output.topRows(na)};
  const Embedded em{member_proxy, trace.output.middleRows(na, nm)};
  const Embedded en{nonmember, trace.output.bottomRows(nn)};

  const GramParts aa = deep_gram_parts(k, ea, ea);
  const GramParts mm = deep_gram_parts(k, em, em);
  const GramParts nnp = deep_gram_parts(k, en, en);
  const GramParts am = deep_gram_parts(k, ea, em);
  const GramParts an = deep_gram_parts(k, ea, en);

  LossAndGrad out;
  TermCoefficients cm;
  TermCoefficients cn;
  if (normalized) {
    out.member_term = normalized_term(aa.value, mm.value, am.value, options.lambda, 1.0, &cm);
    out.nonmember_term =
        normalized_term(aa.value, nnp.value, an.value, options.lambda, -1.0, &cn);
  } else {
    out.member_term = mmd2_u(aa.value, mm.value, am.value);
    out.nonmember_term = mmd2_u(aa.value, nnp.value, an.value);
    cm = plain_coefficients(na, nm, 1.0);
    cn = plain_coefficients(na, nn, -1.0);
  }
  out.loss = out.member_term - out.nonmember_term;

  Matrix dfeat = Matrix::Zero(stacked.rows(), k.net.out_dim());
  auto dfa = dfeat.topRows(na);
  auto dfm = dfeat.middleRows(na, nm);
  auto dfn = dfeat.bottomRows(nn);
  double deps = 0.0;
  const Matrix caa = cm.xx + cn.xx;
  backprop_gram(k, aa, caa, ea.features, ea.features, dfa, dfa, &deps);
  backprop_gram(k, mm, cm.yy, em.features, em.features, dfm, dfm, &deps);
  backprop_gram(k, nnp, cn.yy, en.features, en.features, dfn, dfn, &deps);
  backprop_gram(k, am, cm.xy, ea.features, em.features, dfa, dfm, &deps);
  backprop_gram(k, an, cn.xy, ea.features, en.features, dfa, dfn, &deps);

  out.net_grads = k.net.backward(trace, dfeat).params;
  out.epsilon_grad = deps;
  return out;
}

double dmia_loss(const DeepKernel& k, const Matrix& anchor, const Matrix& member_proxy,
                 const Matrix& nonmember, const LossOptions& options) {
  k.validate();
  const Embedded ea = embed(k, anchor);
  const Embedded em = embed(k, member_proxy);
  const Embedded en = embed(k, nonmember);
  const Matrix kaa = deep_gram(k, ea, ea);
  const Matrix kmm = deep_gram(k, em, em);
  const Matrix knn = deep_gram(k, en, en);
  const Matrix kam = deep_gram(k, ea, em);
  const Matrix kan = deep_gram(k, ea, en);
  if (options.objective == Objective::kNormalizedDifference) {
    return normalized_stat(estimate_mmd(kaa, kmm, kam, options.lambda)) -
           normalized_stat(estimate_mmd(kaa, knn, kan, options.lambda));
  }
  return mmd2_u(kaa, kmm, kam) - mmd2_u(kaa, knn, kan);
}

}  // namespace dmia
