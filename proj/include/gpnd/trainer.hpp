#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gpnd/kernel.hpp"
#include "gpnd/model.hpp"
#include "gpnd/negcon.hpp"

namespace gpnd {

enum class Mode { classical, gp_nd };
enum class Alternation { alternating, joint };

struct TrainConfig {
  double beta = 0.0;
  double sigma_neg = 1.0;
  double learning_rate = 0.1;
  int epochs = 400;
  std::optional<int> batch_size;  // sparse backend only
  std::uint64_t seed = 0;
  Mode mode = Mode::classical;
  Alternation alternation = Alternation::alternating;
  bool early_stop = false;

  void validate() const;
};

// Relative objective change below which an epoch counts as converged, and the
// number of consecutive such epochs required.
inline constexpr double kConvergenceTol = 1e-6;
inline constexpr int kConvergencePatience = 20;

struct FitReport {
  std::vector<double> nll_trace;      // backend objective per epoch
  std::vector<double> penalty_trace;  // repulsion penalty per epoch (0 when off)
  Vector final_params;                // packed model parameters
  KernelParams final_kernel;
  std::vector<double> wall_clock_per_epoch;  // seconds
  std::optional<int> converged_epoch;
};

// Adam with bias-corrected first/second moments.
inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

struct AdamState {
  Vector m;
  Vector v;
  long t = 0;

  static AdamState zero(Index n) {
    return AdamState{Vector::Zero(n), Vector::Zero(n), 0};
  }
};

// One in-place Adam update. Throws TrainingError on a non-finite gradient.
void optimizer_step(Vector& params, AdamState& state, const Vector& grad, double lr);

// Alternating (or joint) first-order training of the model in place.
// neg must be present exactly when config.mode == gp_nd.
FitReport fit(Model& model, const NegativeSet* neg, const TrainConfig& config);

}  // namespace gpnd
