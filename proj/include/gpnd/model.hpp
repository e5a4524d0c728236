#pragma once

#include <memory>
#include <vector>

#include "gpnd/data.hpp"
#include "gpnd/exact_gp.hpp"
#include "gpnd/svgp.hpp"

namespace gpnd {

// A regression backend bound to its training data. The trainer and the
// negative-datapair penalty only see this surface, so the exact and sparse
// backends plug into the same alternating loop.
class Model {
public:
  virtual ~Model() = default;

  virtual const char* backend_id() const = 0;
  virtual Index num_params() const = 0;
  virtual Vector params() const = 0;
  virtual void set_params(const Vector& p) = 0;
  virtual const KernelParams& kernel() const = 0;
  virtual const Dataset& train_data() const = 0;

  // Objective to minimize: marginal NLL for the exact backend, negative ELBO
  // for the sparse one. batch is ignored by the exact backend.
  virtual double objective(const std::vector<Index>* batch = nullptr,
                           Vector* grad = nullptr) const = 0;

  virtual PredictiveDistribution predict(const Eigen::Ref<const Matrix>& X,
                                         bool full_cov = false,
                                         bool observation_noise = false) const = 0;

  // Gradient over params() of sum_i cmu[i]*mean_i + cvar[i]*var_i, where
  // mean/var are the latent predictive moments at the rows of X.
  virtual Vector predict_param_grad(const Eigen::Ref<const Matrix>& X,
                                    const Vector& cmu, const Vector& cvar) const = 0;

  virtual std::unique_ptr<Model> clone() const = 0;
};

class ExactGpModel final : public Model {
public:
  ExactGpModel(KernelParams params, Dataset data)
      : params_(params), data_(std::move(data)) {}

  const char* backend_id() const override { return "exact"; }
  Index num_params() const override { return kNumKernelParams; }
  Vector params() const override;
  void set_params(const Vector& p) override;
  const KernelParams& kernel() const override { return params_; }
  const Dataset& train_data() const override { return data_; }

  double objective(const std::vector<Index>* batch, Vector* grad) const override;
  PredictiveDistribution predict(const Eigen::Ref<const Matrix>& X, bool full_cov,
                                 bool observation_noise) const override;
  Vector predict_param_grad(const Eigen::Ref<const Matrix>& X, const Vector& cmu,
                            const Vector& cvar) const override;
  std::unique_ptr<Model> clone() const override {
    return std::make_unique<ExactGpModel>(*this);
  }

private:
  KernelParams params_;
  Dataset data_;
};

class SvgpModel final : public Model {
public:
  SvgpModel(KernelParams params, VariationalParams var, Dataset data,
            bool train_inducing = true)
      : params_(params), var_(std::move(var)), data_(std::move(data)),
        train_inducing_(train_inducing) {}

  const char* backend_id() const override { return "svgp"; }
  Index num_params() const override { return svgp::num_params(var_, train_inducing_); }
  Vector params() const override { return svgp::pack(params_, var_, train_inducing_); }
  void set_params(const Vector& p) override {
    svgp::unpack(p, data_.dim(), train_inducing_, &params_, &var_);
  }
  const KernelParams& kernel() const override { return params_; }
  const VariationalParams& variational() const { return var_; }
  bool train_inducing() const { return train_inducing_; }
  const Dataset& train_data() const override { return data_; }

  double objective(const std::vector<Index>* batch, Vector* grad) const override;
  PredictiveDistribution predict(const Eigen::Ref<const Matrix>& X, bool full_cov,
                                 bool observation_noise) const override;
  Vector predict_param_grad(const Eigen::Ref<const Matrix>& X, const Vector& cmu,
                            const Vector& cvar) const override;
  std::unique_ptr<Model> clone() const override {
    return std::make_unique<SvgpModel>(*this);
  }

private:
  KernelParams params_;
  VariationalParams var_;
  Dataset data_;
  bool train_inducing_;
};

}  // namespace gpnd
