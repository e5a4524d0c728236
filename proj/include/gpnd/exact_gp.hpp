#pragma once

#include <optional>

#include "gpnd/data.hpp"
#include "gpnd/kernel.hpp"

namespace gpnd {

// Per-test-point posterior. Variances are latent-function variances unless a
// caller asked for observation noise to be added.
struct PredictiveDistribution {
  Vector means;
  Vector variances;
  std::optional<Matrix> covariance;
};

namespace exact_gp {

// Negative log marginal likelihood
//   NLL = 1/2 r^T A^-1 r + 1/2 log|A| + n/2 log 2pi,  A = K + sigma^2 I,
// with r = y - mean_const * 1. When grad is non-null it receives the
// derivatives over {log l, log s^2, log sigma^2, mean_const}.
double marginal_nll(const KernelParams& params, const Dataset& data,
                    Vector* grad = nullptr);

// Posterior predictive at the rows of Xstar. An empty training set yields the
// prior. add_observation_noise adds sigma^2 to the reported variances (and the
// covariance diagonal) for observation-space density evaluation.
PredictiveDistribution posterior(const KernelParams& params, const Dataset& data,
                                 const Eigen::Ref<const Matrix>& Xstar,
                                 bool full_cov = false,
                                 bool add_observation_noise = false);

// Gradient of sum_i cmu[i] * mean_i + cvar[i] * var_i over the kernel
// parameters, where mean/var are the latent posterior at the rows of Xstar.
// This is the contraction the negative-datapair penalty chains through.
Vector posterior_param_grad(const KernelParams& params, const Dataset& data,
                            const Eigen::Ref<const Matrix>& Xstar,
                            const Vector& cmu, const Vector& cvar);

}  // namespace exact_gp
}  // namespace gpnd
