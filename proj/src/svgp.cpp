#include "gpnd/svgp.hpp"

#include <cmath>
#include <numeric>

#include "gpnd/errors.hpp"
#include "gpnd/rng.hpp"

namespace gpnd {

VariationalParams VariationalParams::init(const Dataset& data, Index M, std::uint64_t seed) {
  if (M < 1) throw InvalidInputError("VariationalParams::init: M must be >= 1");
  if (M > data.size()) {
    throw InvalidInputError("VariationalParams::init: M exceeds training size");
  }
  std::vector<Index> idx(static_cast<std::size_t>(data.size()));
  std::iota(idx.begin(), idx.end(), Index{0});
  Rng rng(seed);
  rng.shuffle(idx);

  VariationalParams var;
  var.Z.resize(M, data.dim());
  for (Index i = 0; i < M; ++i) var.Z.row(i) = data.X.row(idx[static_cast<std::size_t>(i)]);
  var.m = Vector::Zero(M);
  var.L = Matrix::Identity(M, M);
  return var;
}

void VariationalParams::validate() const {
  const Index M = num_inducing();
  if (M < 1 || Z.rows() != M || L.rows() != M || L.cols() != M) {
    throw InvalidInputError("VariationalParams: inconsistent shapes");
  }
  for (Index i = 0; i < M; ++i) {
    if (!(L(i, i) > 0.0)) {
      throw InvalidInputError("VariationalParams: L diagonal must be positive");
    }
  }
}

namespace svgp {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

Index tri_size(Index M) { return M * (M + 1) / 2; }

// Factorizations shared by the ELBO, the posterior and their gradients.
struct Workspace {
  double s2 = 0.0, ell = 0.0, c = 0.0;
  Matrix Kmm;               // jitter-free k(Z, Z)
  Eigen::LLT<Matrix> lltJ;  // J = Kmm + jitter I
  Matrix S;
  Vector w;                 // J^-1 (m - c 1)
};

Workspace make_workspace(const KernelParams& kp, const VariationalParams& var) {
  Workspace ws;
  ws.s2 = kp.signal_var();
  ws.ell = kp.lengthscale();
  ws.c = kp.mean_const;
  ws.Kmm = gram(kp, var.Z, var.Z);
  Matrix J = ws.Kmm;
  J.diagonal().array() += kJitter;
  ws.lltJ.compute(J);
  if (ws.lltJ.info() != Eigen::Success) {
    throw NumericalError("svgp: Cholesky of K_MM failed", kp.describe());
  }
  ws.S = var.S();
  Vector centered = var.m;
  centered.array() -= kp.mean_const;
  ws.w = ws.lltJ.solve(centered);
  return ws;
}

// Gradient of sum_i cmu[i]*mu_i + cv[i]*var_i over the packed parameters,
// where mu/var are the sparse predictive moments at the rows of P.
// FJ_extra, when non-null, is an extra symmetric matrix contracted with
// dJ/dtheta (the ELBO routes its KL(q||p) term through it).
void accumulate_contraction(const VariationalParams& var, const Workspace& ws,
                            const Eigen::Ref<const Matrix>& P, const Matrix& Kp,
                            const Matrix& A, const Vector& cmu, const Vector& cv,
                            const Matrix* FJ_extra, bool train_inducing, Vector& g) {
  const Index M = var.num_inducing();
  const Index d = var.Z.cols();

  const Matrix SA = ws.S * A;
  const Matrix B = ws.lltJ.solve(SA);  // b_i = J^-1 S a_i
  const Matrix Acv = A * cv.asDiagonal();

  // q_i = cmu_i w - 2 cv_i a_i + 2 cv_i b_i multiplies dk_i;
  // F is contracted with dJ.
  Matrix Q = ws.w * cmu.transpose();
  Q.noalias() -= 2.0 * Acv;
  Q.noalias() += 2.0 * (B * cv.asDiagonal());

  const Vector Acmu = A * cmu;
  Matrix F = -ws.w * Acmu.transpose();
  F.noalias() += Acv * A.transpose();
  F.noalias() -= 2.0 * Acv * B.transpose();
  Matrix Fs = 0.5 * (F + F.transpose());
  if (FJ_extra != nullptr) Fs += *FJ_extra;

  const double inv_l2 = 1.0 / (ws.ell * ws.ell);
  const Matrix d2_ZP = squared_distances(var.Z, P);
  const Matrix d2_ZZ = squared_distances(var.Z, var.Z);

  // log lengthscale: dk = k .* d^2/l^2 entrywise, likewise for J.
  g(0) += (Q.array() * Kp.array() * d2_ZP.array()).sum() * inv_l2 +
          (Fs.array() * ws.Kmm.array() * d2_ZZ.array()).sum() * inv_l2;
  // log signal variance: dk = k, dJ = Kmm, plus the direct s^2 in Kt_ii.
  g(1) += (Q.array() * Kp.array()).sum() + (Fs.array() * ws.Kmm.array()).sum() +
          ws.s2 * cv.sum();
  // mean_const: d mu_i = 1 - a_i^T 1.
  g(3) += cmu.sum() - Acmu.sum();

  // variational mean
  g.segment(kNumKernelParams, M) += Acmu;

  // S-block: dF/dS = sum_i cv_i a_i a_i^T, chained through S = L L^T.
  {
    const Matrix GS = Acv * A.transpose();
    const Matrix dL = 2.0 * GS * var.L;
    Index k = kNumKernelParams + M;
    for (Index j = 0; j < M; ++j) {
      g(k++) += dL(j, j) * var.L(j, j);  // diagonal is log-parameterized
      for (Index i = j + 1; i < M; ++i) g(k++) += dL(i, j);
    }
  }

  if (train_inducing) {
    const Matrix T = Q.cwiseProduct(Kp);       // M x N
    const Matrix U = Fs.cwiseProduct(ws.Kmm);  // M x M
    Matrix gz = (T * P - T.rowwise().sum().asDiagonal() * var.Z) * inv_l2;
    gz.noalias() += 2.0 * inv_l2 * (U * var.Z - U.rowwise().sum().asDiagonal() * var.Z);
    Index k = kNumKernelParams + M + tri_size(M);
    for (Index a = 0; a < M; ++a) {
      for (Index j = 0; j < d; ++j) g(k++) += gz(a, j);
    }
  }
}

}  // namespace

Index num_params(const VariationalParams& var, bool train_inducing) {
  const Index M = var.num_inducing();
  return kNumKernelParams + M + tri_size(M) + (train_inducing ? M * var.Z.cols() : 0);
}

Vector pack(const KernelParams& kp, const VariationalParams& var, bool train_inducing) {
  const Index M = var.num_inducing();
  Vector p(num_params(var, train_inducing));
  p(0) = kp.log_lengthscale;
  p(1) = kp.log_signal_var;
  p(2) = kp.log_noise_var;
  p(3) = kp.mean_const;
  p.segment(kNumKernelParams, M) = var.m;
  Index k = kNumKernelParams + M;
  for (Index j = 0; j < M; ++j) {
    p(k++) = std::log(var.L(j, j));
    for (Index i = j + 1; i < M; ++i) p(k++) = var.L(i, j);
  }
  if (train_inducing) {
    for (Index a = 0; a < M; ++a) {
      for (Index j = 0; j < var.Z.cols(); ++j) p(k++) = var.Z(a, j);
    }
  }
  return p;
}

void unpack(const Vector& packed, Index input_dim, bool train_inducing,
            KernelParams* kp, VariationalParams* var) {
  kp->log_lengthscale = packed(0);
  kp->log_signal_var = packed(1);
  kp->log_noise_var = packed(2);
  kp->mean_const = packed(3);

  const Index rest = packed.size() - kNumKernelParams;
  Index M = var->num_inducing();
  if (M <= 0 || num_params(*var, train_inducing) != packed.size()) {
    M = 0;
    Index need = 0;
    while (need < rest) {
      ++M;
      need = M + tri_size(M) + (train_inducing ? M * input_dim : 0);
    }
    if (need != rest) throw InvalidInputError("svgp::unpack: size does not match any M");
    var->m = Vector::Zero(M);
    if (var->Z.rows() != M) var->Z = Matrix::Zero(M, input_dim);
  }
  var->m = packed.segment(kNumKernelParams, M);
  var->L = Matrix::Zero(M, M);
  Index k = kNumKernelParams + M;
  for (Index j = 0; j < M; ++j) {
    var->L(j, j) = std::exp(packed(k++));
    for (Index i = j + 1; i < M; ++i) var->L(i, j) = packed(k++);
  }
  if (train_inducing) {
    for (Index a = 0; a < M; ++a) {
      for (Index j = 0; j < input_dim; ++j) var->Z(a, j) = packed(k++);
    }
  }
}

double elbo(const KernelParams& params, const VariationalParams& var,
            const Dataset& data, const std::vector<Index>* batch, Vector* grad,
            bool train_inducing) {
  if (data.size() == 0) throw InvalidInputError("elbo: empty dataset");
  var.validate();
  const Index n = data.size();
  const Index M = var.num_inducing();

  std::vector<Index> full;
  if (batch == nullptr) {
    full.resize(static_cast<std::size_t>(n));
    std::iota(full.begin(), full.end(), Index{0});
    batch = &full;
  }
  if (batch->empty()) throw InvalidInputError("elbo: empty batch");
  for (Index i : *batch) {
    if (i < 0 || i >= n) throw InvalidInputError("elbo: batch index out of range");
  }
  const Index nb = static_cast<Index>(batch->size());
  const double scale = static_cast<double>(n) / static_cast<double>(nb);

  const Workspace ws = make_workspace(params, var);

  Matrix P(nb, data.dim());
  Vector yb(nb);
  for (Index k = 0; k < nb; ++k) {
    P.row(k) = data.X.row((*batch)[static_cast<std::size_t>(k)]);
    yb(k) = data.y((*batch)[static_cast<std::size_t>(k)]);
  }

  const Matrix Kp = gram(params, var.Z, P);  // M x nb
  const Matrix A = ws.lltJ.solve(Kp);
  Vector mu = Kp.transpose() * ws.w;
  mu.array() += ws.c;
  const Vector t = Vector::Constant(nb, ws.s2) -
                   Kp.cwiseProduct(A).colwise().sum().transpose();
  const Matrix SA = ws.S * A;
  const Vector u = A.cwiseProduct(SA).colwise().sum().transpose();
  const Vector v = t + u;

  const double noise = params.noise_var();
  const Vector e = yb - mu;

  const double lik = -0.5 * static_cast<double>(nb) * (kLog2Pi + std::log(noise)) -
                     e.squaredNorm() / (2.0 * noise) - v.sum() / (2.0 * noise);

  // KL(q(u) || p(u)) with p(u) = N(c 1, J).
  const Matrix Jinv = ws.lltJ.solve(Matrix::Identity(M, M));
  const double trJinvS = Jinv.cwiseProduct(ws.S).sum();
  Vector delta = Vector::Constant(M, ws.c) - var.m;
  const double quad = -delta.dot(ws.w);  // delta^T J^-1 delta
  double half_logdetJ = 0.0, half_logdetS = 0.0;
  for (Index i = 0; i < M; ++i) {
    half_logdetJ += std::log(ws.lltJ.matrixLLT()(i, i));
    half_logdetS += std::log(var.L(i, i));
  }
  const double kl = 0.5 * (trJinvS + quad - static_cast<double>(M)) +
                    half_logdetJ - half_logdetS;

  const double value = scale * lik - kl;

  if (grad != nullptr) {
    grad->setZero(num_params(var, train_inducing));

    const Vector cmu = (scale / noise) * e;
    const Vector cv = Vector::Constant(nb, -scale / (2.0 * noise));

    // KL contraction with dJ: tr(W_KL dJ), W_KL = 1/2 (J^-1 - J^-1 S J^-1 - w w^T).
    const Matrix W_KL =
        0.5 * (Jinv - Jinv * ws.S * Jinv - ws.w * ws.w.transpose());
    const Matrix FJ_extra = -W_KL;  // ELBO = lik - KL

    accumulate_contraction(var, ws, P, Kp, A, cmu, cv, &FJ_extra, train_inducing,
                           *grad);

    const double dlik_dnoise =
        -0.5 * static_cast<double>(nb) / noise +
        (e.squaredNorm() + v.sum()) / (2.0 * noise * noise);
    (*grad)(2) += scale * dlik_dnoise * params.noise_var_grad();

    (*grad).segment(kNumKernelParams, M) -= ws.w;  // dKL/dm = w
    (*grad)(3) += ws.w.sum();                      // dKL/dc = -sum(w)

    // dKL/dL = lower(J^-1 L) - diag(1/L_ii); diagonal chained through log.
    const Matrix JinvL = Jinv * var.L;
    Index k = kNumKernelParams + M;
    for (Index j = 0; j < M; ++j) {
      (*grad)(k++) -= (JinvL(j, j) - 1.0 / var.L(j, j)) * var.L(j, j);
      for (Index i = j + 1; i < M; ++i) (*grad)(k++) -= JinvL(i, j);
    }
  }
  return value;
}

PredictiveDistribution svgp_posterior(const KernelParams& params,
                                      const VariationalParams& var,
                                      const Eigen::Ref<const Matrix>& Xstar,
                                      bool add_observation_noise) {
  var.validate();
  if (Xstar.cols() != var.Z.cols()) {
    throw InvalidInputError("svgp_posterior: input dimension mismatch");
  }
  const Index ns = Xstar.rows();
  const Workspace ws = make_workspace(params, var);
  const Matrix Kp = gram(params, var.Z, Xstar);
  const Matrix A = ws.lltJ.solve(Kp);
  const Matrix SA = ws.S * A;

  PredictiveDistribution out;
  out.means = Kp.transpose() * ws.w;
  out.means.array() += ws.c;
  const Vector t = Vector::Constant(ns, ws.s2) -
                   Kp.cwiseProduct(A).colwise().sum().transpose();
  const Vector u = A.cwiseProduct(SA).colwise().sum().transpose();
  out.variances = (t + u).cwiseMax(0.0);
  if (add_observation_noise) out.variances.array() += params.noise_var();
  return out;
}

Vector posterior_param_grad(const KernelParams& params, const VariationalParams& var,
                            const Eigen::Ref<const Matrix>& Xstar, const Vector& cmu,
                            const Vector& cvar, bool train_inducing) {
  var.validate();
  if (cmu.size() != Xstar.rows() || cvar.size() != Xstar.rows()) {
    throw InvalidInputError("posterior_param_grad: coefficient length mismatch");
  }
  const Workspace ws = make_workspace(params, var);
  const Matrix Kp = gram(params, var.Z, Xstar);
  const Matrix A = ws.lltJ.solve(Kp);
  Vector g = Vector::Zero(num_params(var, train_inducing));
  accumulate_contraction(var, ws, Xstar, Kp, A, cmu, cvar, nullptr, train_inducing, g);
  return g;
}

}  // namespace svgp
}  // namespace gpnd
