#include "gpnd/model.hpp"

#include "gpnd/errors.hpp"

namespace gpnd {

Vector ExactGpModel::params() const {
  Vector p(kNumKernelParams);
  p << params_.log_lengthscale, params_.log_signal_var, params_.log_noise_var,
      params_.mean_const;
  return p;
}

void ExactGpModel::set_params(const Vector& p) {
  if (p.size() != kNumKernelParams) {
    throw InvalidInputError("ExactGpModel::set_params: expected 4 parameters");
  }
  params_.log_lengthscale = p(0);
  params_.log_signal_var = p(1);
  params_.log_noise_var = p(2);
  params_.mean_const = p(3);
}

double ExactGpModel::objective(const std::vector<Index>* /*batch*/, Vector* grad) const {
  return exact_gp::marginal_nll(params_, data_, grad);
}

PredictiveDistribution ExactGpModel::predict(const Eigen::Ref<const Matrix>& X,
                                             bool full_cov, bool observation_noise) const {
  return exact_gp::posterior(params_, data_, X, full_cov, observation_noise);
}

Vector ExactGpModel::predict_param_grad(const Eigen::Ref<const Matrix>& X,
                                        const Vector& cmu, const Vector& cvar) const {
  return exact_gp::posterior_param_grad(params_, data_, X, cmu, cvar);
}

double SvgpModel::objective(const std::vector<Index>* batch, Vector* grad) const {
  const double value = svgp::elbo(params_, var_, data_, batch, grad, train_inducing_);
  if (grad != nullptr) *grad = -*grad;
  return -value;
}

PredictiveDistribution SvgpModel::predict(const Eigen::Ref<const Matrix>& X,
                                          bool /*full_cov*/, bool observation_noise) const {
  return svgp::svgp_posterior(params_, var_, X, observation_noise);
}

Vector SvgpModel::predict_param_grad(const Eigen::Ref<const Matrix>& X,
                                     const Vector& cmu, const Vector& cvar) const {
  return svgp::posterior_param_grad(params_, var_, X, cmu, cvar, train_inducing_);
}

}  // namespace gpnd
