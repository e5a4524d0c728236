#include "gpnd/negcon.hpp"

#include <cmath>

#include "gpnd/errors.hpp"
#include "gpnd/model.hpp"

namespace gpnd {

namespace {
// Latent variance floor inside the penalty so sigma1 stays usable when a
// negative input coincides with dense training data and the posterior
// variance rounds to zero.
constexpr double kVarFloor = 1e-12;
}  // namespace

void NegativeSet::validate() const {
  if (X.rows() != y.size()) {
    throw InvalidInputError("NegativeSet: row count of X must match length of y");
  }
  if (!(sigma_neg > 0.0)) {
    throw InvalidInputError("NegativeSet: sigma_neg must be positive");
  }
  if (!X.allFinite() || !y.allFinite()) {
    throw InvalidInputError("NegativeSet: entries must be finite");
  }
}

double gaussian_kl(double mu1, double sigma1, double mu2, double sigma2) {
  if (!(sigma1 > 0.0) || !(sigma2 > 0.0)) {
    throw InvalidInputError("gaussian_kl: standard deviations must be positive");
  }
  const double d = mu1 - mu2;
  return std::log(sigma2 / sigma1) +
         (sigma1 * sigma1 + d * d) / (2.0 * sigma2 * sigma2) - 0.5;
}

double nd_penalty(const Model& backend, const NegativeSet& neg, Vector* grad) {
  neg.validate();
  if (neg.size() == 0) {
    throw InvalidInputError("nd_penalty: empty negative set");
  }

  const PredictiveDistribution pred = backend.predict(neg.X, false, false);
  const double sn = neg.sigma_neg;
  const double sn2 = sn * sn;

  double penalty = 0.0;
  Vector cmu, cvar;
  if (grad != nullptr) {
    cmu = Vector::Zero(neg.size());
    cvar = Vector::Zero(neg.size());
  }

  for (Index i = 0; i < neg.size(); ++i) {
    const double v = std::max(pred.variances(i), kVarFloor);
    const double sigma1 = std::sqrt(v);
    const double kl = gaussian_kl(pred.means(i), sigma1, neg.y(i), sn);
    penalty += std::log(kl + kKlFloor);
    if (grad != nullptr) {
      const double inv = 1.0 / (kl + kKlFloor);
      // dKL/dmu = (mu - ybar)/sigma_neg^2; dKL/dvar = 1/(2 sn^2) - 1/(2 var)
      cmu(i) = inv * (pred.means(i) - neg.y(i)) / sn2;
      cvar(i) = pred.variances(i) > kVarFloor
                    ? inv * (0.5 / sn2 - 0.5 / v)
                    : 0.0;
    }
  }

  if (grad != nullptr) {
    *grad = backend.predict_param_grad(neg.X, cmu, cvar);
  }
  return penalty;
}

double combined_objective(const Model& backend, const NegativeSet* neg, double beta,
                          const std::vector<Index>* batch, Vector* grad) {
  if (beta < 0.0) throw InvalidInputError("combined_objective: beta must be >= 0");

  double loss = backend.objective(batch, grad);
  const bool use_penalty = beta > 0.0 && neg != nullptr && neg->size() > 0;
  if (use_penalty) {
    Vector pgrad;
    const double p = nd_penalty(backend, *neg, grad != nullptr ? &pgrad : nullptr);
    loss -= beta * p;
    if (grad != nullptr) *grad -= beta * pgrad;
  }
  return loss;
}

}  // namespace gpnd
