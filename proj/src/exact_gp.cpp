#include "gpnd/exact_gp.hpp"

#include <cmath>

#include "gpnd/errors.hpp"

namespace gpnd {
namespace exact_gp {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Cholesky of A = K_XX + (sigma^2 + jitter) I.
Eigen::LLT<Matrix> factor_train(const KernelParams& params, const Dataset& data) {
  Matrix A = gram(params, data.X, data.X);
  A.diagonal().array() += params.noise_var() + kJitter;
  Eigen::LLT<Matrix> llt(A);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("exact_gp: Cholesky factorization failed", params.describe());
  }
  return llt;
}

}  // namespace

double marginal_nll(const KernelParams& params, const Dataset& data, Vector* grad) {
  if (data.size() == 0) {
    throw InvalidInputError("marginal_nll: empty dataset");
  }
  const Index n = data.size();
  const auto llt = factor_train(params, data);
  const Vector r = data.y.array() - params.mean_const;
  const Vector alpha = llt.solve(r);

  double logdet = 0.0;
  for (Index i = 0; i < n; ++i) logdet += std::log(llt.matrixLLT()(i, i));
  logdet *= 2.0;

  const double nll = 0.5 * r.dot(alpha) + 0.5 * logdet +
                     0.5 * static_cast<double>(n) * kLog2Pi;

  if (grad != nullptr) {
    grad->resize(kNumKernelParams);
    const Matrix Ainv = llt.solve(Matrix::Identity(n, n));
    const GramGrads gg = gram_grads(params, data.X);

    // d/dtheta = 1/2 tr(A^-1 dA) - 1/2 alpha^T dA alpha  (trace identity)
    auto dir = [&](const Matrix& dA) {
      return 0.5 * (Ainv.cwiseProduct(dA).sum() - alpha.dot(dA * alpha));
    };
    (*grad)(0) = dir(gg.d_log_lengthscale);
    (*grad)(1) = dir(gg.d_log_signal_var);
    (*grad)(2) = 0.5 * params.noise_var_grad() * (Ainv.trace() - alpha.squaredNorm());
    (*grad)(3) = -alpha.sum();
  }
  return nll;
}

PredictiveDistribution posterior(const KernelParams& params, const Dataset& data,
                                 const Eigen::Ref<const Matrix>& Xstar,
                                 bool full_cov, bool add_observation_noise) {
  const Index ns = Xstar.rows();
  PredictiveDistribution out;

  if (data.size() == 0) {
    out.means = Vector::Constant(ns, params.mean_const);
    out.variances = Vector::Constant(ns, params.signal_var());
    if (full_cov) {
      Matrix C = gram(params, Xstar, Xstar);
      C.diagonal() = out.variances;
      out.covariance = std::move(C);
    }
    if (add_observation_noise) {
      out.variances.array() += params.noise_var();
      if (out.covariance) out.covariance->diagonal() = out.variances;
    }
    return out;
  }
  if (data.dim() != Xstar.cols()) {
    throw InvalidInputError("posterior: test input dimension mismatch");
  }

  const auto llt = factor_train(params, data);
  const Vector r = data.y.array() - params.mean_const;
  const Vector alpha = llt.solve(r);
  const Matrix Ks = gram(params, data.X, Xstar);  // n x ns

  out.means = Vector::Constant(ns, params.mean_const) + Ks.transpose() * alpha;

  // W = L^-1 Ks, so Ks^T A^-1 Ks = W^T W.
  Matrix W = Ks;
  llt.matrixL().solveInPlace(W);

  const double s2 = params.signal_var();
  out.variances = (s2 - W.colwise().squaredNorm().transpose().array()).max(0.0);

  if (full_cov) {
    Matrix C = gram(params, Xstar, Xstar) - W.transpose() * W;
    C = 0.5 * (C + C.transpose()).eval();
    C.diagonal() = out.variances;
    out.covariance = std::move(C);
  }
  if (add_observation_noise) {
    out.variances.array() += params.noise_var();
    if (out.covariance) out.covariance->diagonal() = out.variances;
  }
  return out;
}

Vector posterior_param_grad(const KernelParams& params, const Dataset& data,
                            const Eigen::Ref<const Matrix>& Xstar,
                            const Vector& cmu, const Vector& cvar) {
  const Index ns = Xstar.rows();
  if (cmu.size() != ns || cvar.size() != ns) {
    throw InvalidInputError("posterior_param_grad: coefficient length mismatch");
  }
  Vector g = Vector::Zero(kNumKernelParams);
  const double s2 = params.signal_var();

  if (data.size() == 0) {
    // Prior: mean = mean_const, var = s^2.
    g(1) = s2 * cvar.sum();
    g(3) = cmu.sum();
    return g;
  }

  const auto llt = factor_train(params, data);
  const Vector r = data.y.array() - params.mean_const;
  const Vector alpha = llt.solve(r);
  const Matrix Ks = gram(params, data.X, Xstar);       // n x ns
  const Matrix B = llt.solve(Ks);                      // A^-1 Ks
  const GramGrads gg = gram_grads(params, data.X);
  const Matrix& K = gg.d_log_signal_var;               // jitter-free K_XX
  const Matrix& Gl = gg.d_log_lengthscale;

  const double l = params.lengthscale();
  const Matrix dKs_logl =
      (Ks.array() * squared_distances(data.X, Xstar).array() / (l * l)).matrix();

  const Vector Kalpha = K * alpha;
  const Vector Glalpha = Gl * alpha;
  const Matrix KB = K * B;
  const Matrix GlB = Gl * B;

  // log lengthscale
  g(0) = cmu.dot(dKs_logl.transpose() * alpha) - cmu.dot(B.transpose() * Glalpha);
  for (Index i = 0; i < ns; ++i) {
    g(0) += cvar(i) * (-2.0 * dKs_logl.col(i).dot(B.col(i)) + B.col(i).dot(GlB.col(i)));
  }

  // log signal variance
  g(1) = cmu.dot(Ks.transpose() * alpha) - cmu.dot(B.transpose() * Kalpha) + s2 * cvar.sum();
  for (Index i = 0; i < ns; ++i) {
    g(1) += cvar(i) * (-2.0 * Ks.col(i).dot(B.col(i)) + B.col(i).dot(KB.col(i)));
  }

  // log noise variance: dA = sigma^2 I
  const double dnoise = params.noise_var_grad();
  g(2) = -dnoise * cmu.dot(B.transpose() * alpha);
  for (Index i = 0; i < ns; ++i) {
    g(2) += cvar(i) * dnoise * B.col(i).squaredNorm();
  }

  // mean_const: d mean_i = 1 - 1^T B.col(i); variances unaffected.
  g(3) = cmu.sum() - cmu.dot(B.transpose() * Vector::Ones(data.size()));
  return g;
}

}  // namespace exact_gp
}  // namespace gpnd
