#include "gpnd/kernel.hpp"

#include <cmath>
#include <sstream>

#include "gpnd/errors.hpp"

namespace gpnd {

std::string KernelParams::describe() const {
  std::ostringstream os;
  os << "log_lengthscale=" << log_lengthscale << " log_signal_var=" << log_signal_var
     << " log_noise_var=" << log_noise_var << " mean_const=" << mean_const;
  return os.str();
}

double rbf_eval(const KernelParams& params, const Eigen::Ref<const Vector>& x1,
                const Eigen::Ref<const Vector>& x2) {
  if (x1.size() != x2.size() || x1.size() < 1) {
    throw InvalidInputError("rbf_eval: inputs must share a dimension d >= 1");
  }
  const double l = params.lengthscale();
  const double d2 = (x1 - x2).squaredNorm();
  return params.signal_var() * std::exp(-d2 / (2.0 * l * l));
}

Matrix squared_distances(const Eigen::Ref<const Matrix>& A,
                         const Eigen::Ref<const Matrix>& B) {
  if (A.cols() != B.cols()) {
    throw InvalidInputError("squared_distances: column counts differ");
  }
  Matrix d2(A.rows(), B.rows());
  for (Index i = 0; i < A.rows(); ++i) {
    for (Index j = 0; j < B.rows(); ++j) {
      d2(i, j) = (A.row(i) - B.row(j)).squaredNorm();
    }
  }
  return d2;
}

Matrix gram(const KernelParams& params, const Eigen::Ref<const Matrix>& A,
            const Eigen::Ref<const Matrix>& B) {
  if (A.cols() != B.cols()) {
    throw InvalidInputError("gram: column counts differ");
  }
  const double s2 = params.signal_var();
  const double l = params.lengthscale();
  const double inv = -1.0 / (2.0 * l * l);
  Matrix K(A.rows(), B.rows());
  for (Index i = 0; i < A.rows(); ++i) {
    for (Index j = 0; j < B.rows(); ++j) {
      K(i, j) = s2 * std::exp(inv * (A.row(i) - B.row(j)).squaredNorm());
    }
  }
  return K;
}

GramGrads gram_grads(const KernelParams& params, const Eigen::Ref<const Matrix>& A) {
  const Matrix d2 = squared_distances(A, A);
  const double l = params.lengthscale();
  const double inv = -1.0 / (2.0 * l * l);
  const Matrix K = params.signal_var() * (inv * d2.array()).exp().matrix();
  GramGrads g;
  g.d_log_signal_var = K;
  g.d_log_lengthscale = (K.array() * d2.array() / (l * l)).matrix();
  return g;
}

}  // namespace gpnd
