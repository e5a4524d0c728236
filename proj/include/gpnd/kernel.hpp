#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

namespace gpnd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Diagonal jitter applied before every factorization, and the floor for the
// decoded noise variance.
inline constexpr double kJitter = 1e-8;

// RBF kernel hyperparameters plus observation noise and constant prior mean.
// Positive quantities are stored on the log scale so first-order optimizers
// can move freely; decoding through exp keeps them strictly positive.
struct KernelParams {
  double log_lengthscale = 0.0;
  double log_signal_var = 0.0;
  double log_noise_var = -2.0;
  double mean_const = 0.0;

  double lengthscale() const { return std::exp(log_lengthscale); }
  double signal_var() const { return std::exp(log_signal_var); }
  // Clamped at the jitter floor.
  double noise_var() const { return std::max(std::exp(log_noise_var), kJitter); }
  // d noise_var / d log_noise_var; zero while the clamp is active.
  double noise_var_grad() const {
    const double v = std::exp(log_noise_var);
    return v > kJitter ? v : 0.0;
  }

  std::string describe() const;
};

// Number of unconstrained kernel-side parameters
// (log_lengthscale, log_signal_var, log_noise_var, mean_const).
inline constexpr Index kNumKernelParams = 4;

// k(x1, x2) = s^2 * exp(-||x1 - x2||^2 / (2 l^2)).
double rbf_eval(const KernelParams& params, const Eigen::Ref<const Vector>& x1,
                const Eigen::Ref<const Vector>& x2);

// Pairwise squared distances between rows of A (n x d) and B (m x d).
Matrix squared_distances(const Eigen::Ref<const Matrix>& A,
                         const Eigen::Ref<const Matrix>& B);

// Gram matrix of A against B, entry (i,j) = k(A.row(i), B.row(j)).
Matrix gram(const KernelParams& params, const Eigen::Ref<const Matrix>& A,
            const Eigen::Ref<const Matrix>& B);

// Derivatives of gram(params, A, A) with respect to the unconstrained
// parameters. dK/d(log s^2) = K; dK/d(log l) = K .* d^2 / l^2.
struct GramGrads {
  Matrix d_log_lengthscale;
  Matrix d_log_signal_var;
};
GramGrads gram_grads(const KernelParams& params, const Eigen::Ref<const Matrix>& A);

}  // namespace gpnd
