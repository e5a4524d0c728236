#pragma once

#include <vector>

#include "gpnd/data.hpp"
#include "gpnd/exact_gp.hpp"
#include "gpnd/kernel.hpp"

namespace gpnd {

// Variational state of the sparse backend: inducing locations Z, Gaussian
// q(u) = N(m, S) over the inducing values with S = L L^T. The diagonal of L
// is optimized on the log scale so S stays positive definite.
struct VariationalParams {
  Matrix Z;  // M x d
  Vector m;  // M
  Matrix L;  // M x M lower triangular, diagonal > 0

  Index num_inducing() const { return m.size(); }
  Matrix S() const { return L * L.transpose(); }

  // M inducing locations sampled uniformly without replacement from the
  // training inputs; m = 0, S = I.
  static VariationalParams init(const Dataset& data, Index M, std::uint64_t seed);

  void validate() const;
};

namespace svgp {

// Unconstrained parameter packing used for optimization and gradients:
//   [4 kernel params][m (M)][L lower triangle, column-major, diagonal as log]
//   [Z row-major (M*d), only when train_inducing]
Index num_params(const VariationalParams& var, bool train_inducing);
Vector pack(const KernelParams& kp, const VariationalParams& var, bool train_inducing);
void unpack(const Vector& packed, Index input_dim, bool train_inducing,
            KernelParams* kp, VariationalParams* var);

// Minibatch-rescaled evidence lower bound
//   (n/|B|) * sum_{i in B} { log N(y_i | mu_f(x_i), sigma^2) - var_f(x_i)/(2 sigma^2) }
//   - KL(q(u) || p(u))
// with mu_f / var_f the sparse predictive moments and p(u) = N(mean_const, K_MM).
// batch == nullptr means the full dataset. grad, when non-null, is filled over
// the packed parameter vector.
double elbo(const KernelParams& params, const VariationalParams& var,
            const Dataset& data, const std::vector<Index>* batch = nullptr,
            Vector* grad = nullptr, bool train_inducing = true);

// Sparse predictive distribution (diagonal only).
PredictiveDistribution svgp_posterior(const KernelParams& params,
                                      const VariationalParams& var,
                                      const Eigen::Ref<const Matrix>& Xstar,
                                      bool add_observation_noise = false);

// Gradient of sum_i cmu[i] * mean_i + cvar[i] * var_i at the rows of Xstar
// over the packed parameter vector.
Vector posterior_param_grad(const KernelParams& params, const VariationalParams& var,
                            const Eigen::Ref<const Matrix>& Xstar, const Vector& cmu,
                            const Vector& cvar, bool train_inducing = true);

}  // namespace svgp
}  // namespace gpnd
