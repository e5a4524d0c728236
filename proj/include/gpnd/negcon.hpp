#pragma once

#include <vector>

#include "gpnd/kernel.hpp"

namespace gpnd {

class Model;

// Negative datapairs: inputs to avoid, each wrapped in a Gaussian blob
// N(y_i, sigma_neg^2). sigma_neg is a standard deviation in target units.
struct NegativeSet {
  Matrix X;  // m x d
  Vector y;  // m
  double sigma_neg = 1.0;

  Index size() const { return y.size(); }
  void validate() const;
};

// Floor added to the KL divergence before the log so the penalty stays finite
// when the predictive distribution meets a blob exactly.
inline constexpr double kKlFloor = 1e-10;

// Closed-form KL(N(mu1, sigma1^2) || N(mu2, sigma2^2)); sigmas are standard
// deviations. Direction is fixed: the blob is the reference distribution.
double gaussian_kl(double mu1, double sigma1, double mu2, double sigma2);

// Repulsion penalty sum_i log(KL_i + floor), where KL_i compares the
// backend's latent predictive N(mu*_i, var*_i) at the i-th negative input
// against the blob N(y_i, sigma_neg^2). When grad is non-null it receives the
// derivative over the backend's full parameter vector.
double nd_penalty(const Model& backend, const NegativeSet& neg, Vector* grad = nullptr);

// backend objective - beta * nd_penalty (minimization form). neg may be null
// or empty together with beta = 0; either disables the penalty exactly.
double combined_objective(const Model& backend, const NegativeSet* neg, double beta,
                          const std::vector<Index>* batch = nullptr,
                          Vector* grad = nullptr);

}  // namespace gpnd
