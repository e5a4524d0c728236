#include "gpnd/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "gpnd/errors.hpp"
#include "gpnd/rng.hpp"

namespace gpnd {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InvalidInputError("TrainConfig: learning_rate <= 0");
  if (epochs < 1) throw InvalidInputError("TrainConfig: epochs < 1");
  if (beta < 0.0) throw InvalidInputError("TrainConfig: beta < 0");
  if (!(sigma_neg > 0.0)) throw InvalidInputError("TrainConfig: sigma_neg <= 0");
  if (batch_size && *batch_size < 1) throw InvalidInputError("TrainConfig: batch_size < 1");
}

void optimizer_step(Vector& params, AdamState& state, const Vector& grad, double lr) {
  if (state.m.size() != grad.size() || params.size() != grad.size()) {
    throw InvalidInputError("optimizer_step: dimension mismatch");
  }
  if (!grad.allFinite()) {
    throw TrainingError("optimizer_step: non-finite gradient",
                        static_cast<int>(state.t), params);
  }
  state.t += 1;
  state.m = kAdamBeta1 * state.m + (1.0 - kAdamBeta1) * grad;
  state.v = kAdamBeta2 * state.v + (1.0 - kAdamBeta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.t));
  const Vector mhat = state.m / bc1;
  const Vector vhat = state.v / bc2;
  params.array() -= lr * mhat.array() / (vhat.array().sqrt() + kAdamEps);
}

FitReport fit(Model& model, const NegativeSet* neg, const TrainConfig& config) {
  config.validate();
  if (model.train_data().size() == 0) {
    throw InvalidInputError("fit: empty training data");
  }
  const bool want_nd = config.mode == Mode::gp_nd;
  if (want_nd && (neg == nullptr || neg->size() == 0)) {
    throw InvalidInputError("fit: gp_nd mode requires a non-empty negative set");
  }
  // beta = 0 must reproduce the classical trajectory bit for bit, so the
  // penalty step is skipped entirely rather than applied with a zero factor.
  const bool use_penalty = want_nd && config.beta > 0.0;

  const Index n = model.train_data().size();
  Rng rng(config.seed);

  FitReport report;
  report.nll_trace.reserve(static_cast<std::size_t>(config.epochs));
  report.penalty_trace.reserve(static_cast<std::size_t>(config.epochs));
  report.wall_clock_per_epoch.reserve(static_cast<std::size_t>(config.epochs));

  Vector params = model.params();
  AdamState adam = AdamState::zero(params.size());
  Vector grad(params.size());

  double prev_combined = std::numeric_limits<double>::quiet_NaN();
  int flat_run = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();

    // Optional minibatch for the sparse backend's likelihood step.
    std::vector<Index> batch;
    const std::vector<Index>* batch_ptr = nullptr;
    if (config.batch_size && *config.batch_size < n) {
      batch.resize(static_cast<std::size_t>(*config.batch_size));
      for (auto& b : batch) b = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
      batch_ptr = &batch;
    }

    double nll_value = 0.0;
    double penalty_value = 0.0;

    auto run_epoch = [&] {
      if (config.alternation == Alternation::alternating) {
        nll_value = model.objective(batch_ptr, &grad);
        if (!std::isfinite(nll_value)) {
          throw TrainingError("fit: non-finite objective", epoch, params);
        }
        optimizer_step(params, adam, grad, config.learning_rate);
        model.set_params(params);

        if (use_penalty) {
          Vector pgrad;
          penalty_value = nd_penalty(model, *neg, &pgrad);
          if (!std::isfinite(penalty_value)) {
            throw TrainingError("fit: non-finite penalty", epoch, params);
          }
          pgrad *= -config.beta;  // ascend the penalty
          optimizer_step(params, adam, pgrad, config.learning_rate);
          model.set_params(params);
        }
      } else {
        nll_value = combined_objective(model, use_penalty ? neg : nullptr,
                                       use_penalty ? config.beta : 0.0, batch_ptr,
                                       &grad);
        if (!std::isfinite(nll_value)) {
          throw TrainingError("fit: non-finite objective", epoch, params);
        }
        if (use_penalty) {
          // Recover the two components for the traces.
          penalty_value = nd_penalty(model, *neg, nullptr);
          nll_value += config.beta * penalty_value;
        }
        optimizer_step(params, adam, grad, config.learning_rate);
        model.set_params(params);
      }
    };

    try {
      run_epoch();
    } catch (const NumericalError& e) {
      // A factorization falling over mid-run is a divergence from the
      // trainer's point of view.
      throw TrainingError(std::string("fit: diverged (") + e.what() + ")", epoch,
                          params);
    }

    report.nll_trace.push_back(nll_value);
    report.penalty_trace.push_back(penalty_value);

    const double combined = nll_value - config.beta * penalty_value;
    if (std::isfinite(prev_combined)) {
      const double rel = std::abs(combined - prev_combined) /
                         std::max(1.0, std::abs(prev_combined));
      flat_run = rel < kConvergenceTol ? flat_run + 1 : 0;
      if (flat_run >= kConvergencePatience && !report.converged_epoch) {
        report.converged_epoch = epoch;
      }
    }
    prev_combined = combined;

    const auto t1 = std::chrono::steady_clock::now();
    report.wall_clock_per_epoch.push_back(
        std::chrono::duration<double>(t1 - t0).count());

    if (config.early_stop && report.converged_epoch) break;
  }

  report.final_params = params;
  report.final_kernel = model.kernel();
  return report;
}

}  // namespace gpnd
