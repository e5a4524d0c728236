#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "gpnd/data.hpp"
#include "gpnd/negcon.hpp"
#include "gpnd/trainer.hpp"

namespace gpnd {

struct Corridor {
  double lower = -3.0;
  double upper = 3.0;
  double width() const { return upper - lower; }
};

struct SceneConfig {
  int path_shape = 0;        // id of the closed-form path
  Index n_markers = 250;
  Index m_obstacles = 10;
  double noise_std = -1.0;   // < 0 selects the default (5% of corridor width)
  std::uint64_t seed = 0;
};

// Synthetic 2D trajectory: noisy markers along a smooth path through a
// corridor, plus obstacle negatives offset laterally from the path.
struct Scene {
  Dataset markers;           // 1D input (path parameter), target = lateral position
  NegativeSet obstacles;
  std::function<double(double)> ground_truth;
  Corridor corridor;
  SceneConfig config;
};

Scene make_scene(const SceneConfig& config);

// Default obstacle-collision radius in units of sigma_neg.
inline constexpr double kCollisionSigmas = 2.0;

struct AvoidanceReport {
  double min_clearance = 0.0;
  double mean_clearance = 0.0;
  int collisions = 0;
};

// Clearance per obstacle is |predictive mean - obstacle target|; a collision
// is a clearance below k * sigma_neg.
AvoidanceReport evaluate_avoidance(const PredictiveDistribution& pred,
                                   const NegativeSet& neg,
                                   double k = kCollisionSigmas);

struct SceneRunOptions {
  TrainConfig config;        // beta, sigma_neg, lr, epochs, seed
  double holdout_frac = 0.2; // marker fraction held out for RMSE
  std::string backend = "exact";
  Index inducing = 50;       // sparse backend only, capped at train size
};

struct SceneRunResult {
  AvoidanceReport classical_avoidance;
  AvoidanceReport gpnd_avoidance;
  Metrics classical_holdout;
  Metrics gpnd_holdout;
  FitReport classical_fit;
  FitReport gpnd_fit;
  KernelParams classical_kernel;
  KernelParams gpnd_kernel;
  Dataset train_markers;
  Dataset holdout_markers;
  std::unique_ptr<Model> classical_model;
  std::unique_ptr<Model> gpnd_model;
};

// Paired classical vs GP-ND run on the same marker split and seed.
SceneRunResult run_scene_experiment(const Scene& scene, const SceneRunOptions& opts);

struct SweepCell {
  double beta = 0.0;
  double sigma_neg = 0.0;
  double min_clearance = 0.0;
  double mean_clearance = 0.0;
  int collisions = 0;
  double rmse = 0.0;
  double nll = 0.0;
  int epochs_run = 0;
  double seconds = 0.0;
  bool failed = false;
  std::string error;
};

// One GP-ND fit per (beta, sigma_neg) cell, shared seed. A failing cell is
// recorded and the sweep continues. jobs > 1 runs cells concurrently; the
// result order is always by cell index (beta-major).
std::vector<SweepCell> sweep(const Scene& scene, const std::vector<double>& betas,
                             const std::vector<double>& sigmas,
                             const SceneRunOptions& base, int jobs = 1);

void write_sweep_csv(const std::vector<SweepCell>& cells, std::ostream& out);

}  // namespace gpnd
