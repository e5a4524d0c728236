#include "gpnd/scene.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <thread>

#include "gpnd/errors.hpp"
#include "gpnd/format.hpp"
#include "gpnd/rng.hpp"

namespace gpnd {

namespace {

// Characteristic lateral scale used to size obstacle offsets.
double path_width(const Corridor& c) { return c.width() / 40.0; }

std::function<double(double)> path_function(int shape) {
  switch (shape) {
    case 0:
      return [](double x) {
        return 1.2 * std::sin(0.7 * x) + 0.6 * std::sin(4.0 * x + 0.9);
      };
    case 1:
      return [](double x) {
        return 1.5 * std::sin(0.5 * x) + 0.4 * std::cos(2.3 * x);
      };
    default:
      throw InvalidInputError("make_scene: unknown path shape id");
  }
}

constexpr double kXMin = 0.0;
constexpr double kXMax = 30.0;

struct MarkerSplit {
  Dataset train;
  Dataset holdout;
};

MarkerSplit split_markers(const Dataset& markers, double holdout_frac,
                          std::uint64_t seed) {
  const Index n = markers.size();
  Index n_hold = static_cast<Index>(std::floor(holdout_frac * static_cast<double>(n)));
  n_hold = std::max<Index>(1, std::min(n_hold, n - 2));

  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  Rng rng(seed ^ 0x5ce9e5ull);
  rng.shuffle(idx);

  MarkerSplit out;
  const Index n_train = n - n_hold;
  out.train.X.resize(n_train, 1);
  out.train.y.resize(n_train);
  out.holdout.X.resize(n_hold, 1);
  out.holdout.y.resize(n_hold);
  for (Index i = 0; i < n_train; ++i) {
    out.train.X(i, 0) = markers.X(idx[static_cast<std::size_t>(i)], 0);
    out.train.y(i) = markers.y(idx[static_cast<std::size_t>(i)]);
  }
  for (Index i = 0; i < n_hold; ++i) {
    out.holdout.X(i, 0) = markers.X(idx[static_cast<std::size_t>(n_train + i)], 0);
    out.holdout.y(i) = markers.y(idx[static_cast<std::size_t>(n_train + i)]);
  }
  return out;
}

std::unique_ptr<Model> build_model(const SceneRunOptions& opts, const Dataset& train) {
  KernelParams kp;  // defaults: l = 1, s^2 = 1, sigma^2 = e^-2
  if (opts.backend == "exact") {
    return std::make_unique<ExactGpModel>(kp, train);
  }
  if (opts.backend == "svgp") {
    const Index M = std::min(opts.inducing, train.size());
    auto var = VariationalParams::init(train, M, opts.config.seed);
    return std::make_unique<SvgpModel>(kp, std::move(var), train);
  }
  throw InvalidInputError("scene: unknown backend: " + opts.backend);
}

}  // namespace

Scene make_scene(const SceneConfig& config) {
  if (config.n_markers < 2) throw InvalidInputError("make_scene: n_markers < 2");
  if (config.m_obstacles < 0) throw InvalidInputError("make_scene: m_obstacles < 0");

  Scene scene;
  scene.config = config;
  scene.corridor = Corridor{};
  scene.ground_truth = path_function(config.path_shape);

  const double noise = config.noise_std >= 0.0
                           ? config.noise_std
                           : 0.05 * scene.corridor.width();
  Rng rng(config.seed);

  scene.markers.X.resize(config.n_markers, 1);
  scene.markers.y.resize(config.n_markers);
  for (Index i = 0; i < config.n_markers; ++i) {
    const double x = rng.uniform(kXMin, kXMax);
    double y = scene.ground_truth(x) + noise * rng.normal();
    y = std::clamp(y, scene.corridor.lower, scene.corridor.upper);
    scene.markers.X(i, 0) = x;
    scene.markers.y(i) = y;
  }

  const double w = path_width(scene.corridor);
  scene.obstacles.X.resize(config.m_obstacles, 1);
  scene.obstacles.y.resize(config.m_obstacles);
  for (Index i = 0; i < config.m_obstacles; ++i) {
    const double x = rng.uniform(kXMin + 0.5, kXMax - 0.5);
    const double magnitude = rng.uniform(1.0, 3.0) * w;
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    double y = scene.ground_truth(x) + sign * magnitude;
    y = std::clamp(y, scene.corridor.lower, scene.corridor.upper);
    scene.obstacles.X(i, 0) = x;
    scene.obstacles.y(i) = y;
  }
  return scene;
}

AvoidanceReport evaluate_avoidance(const PredictiveDistribution& pred,
                                   const NegativeSet& neg, double k) {
  if (pred.means.size() != neg.size()) {
    throw InvalidInputError("evaluate_avoidance: length mismatch");
  }
  AvoidanceReport rep;
  if (neg.size() == 0) return rep;
  rep.min_clearance = std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (Index i = 0; i < neg.size(); ++i) {
    const double c = std::abs(pred.means(i) - neg.y(i));
    rep.min_clearance = std::min(rep.min_clearance, c);
    sum += c;
    if (c < k * neg.sigma_neg) ++rep.collisions;
  }
  rep.mean_clearance = sum / static_cast<double>(neg.size());
  return rep;
}

SceneRunResult run_scene_experiment(const Scene& scene, const SceneRunOptions& opts) {
  const MarkerSplit split =
      split_markers(scene.markers, opts.holdout_frac, opts.config.seed);

  SceneRunResult res;
  res.train_markers = split.train;
  res.holdout_markers = split.holdout;

  // Classical fit: positives only.
  {
    auto model = build_model(opts, split.train);
    TrainConfig cfg = opts.config;
    cfg.mode = Mode::classical;
    cfg.beta = 0.0;
    res.classical_fit = fit(*model, nullptr, cfg);
    res.classical_kernel = model->kernel();
    const auto at_obstacles = model->predict(scene.obstacles.X, false, false);
    NegativeSet neg = scene.obstacles;
    neg.sigma_neg = opts.config.sigma_neg;
    res.classical_avoidance = evaluate_avoidance(at_obstacles, neg);
    const auto at_holdout = model->predict(split.holdout.X, false, false);
    res.classical_holdout =
        metrics(at_holdout, split.holdout.y, model->kernel().noise_var());
    res.classical_model = std::move(model);
  }

  // GP-ND fit: same init, same seed, repulsion on.
  {
    auto model = build_model(opts, split.train);
    NegativeSet neg = scene.obstacles;
    neg.sigma_neg = opts.config.sigma_neg;
    TrainConfig cfg = opts.config;
    cfg.mode = Mode::gp_nd;
    res.gpnd_fit = fit(*model, &neg, cfg);
    res.gpnd_kernel = model->kernel();
    const auto at_obstacles = model->predict(scene.obstacles.X, false, false);
    res.gpnd_avoidance = evaluate_avoidance(at_obstacles, neg);
    const auto at_holdout = model->predict(split.holdout.X, false, false);
    res.gpnd_holdout =
        metrics(at_holdout, split.holdout.y, model->kernel().noise_var());
    res.gpnd_model = std::move(model);
  }
  return res;
}

std::vector<SweepCell> sweep(const Scene& scene, const std::vector<double>& betas,
                             const std::vector<double>& sigmas,
                             const SceneRunOptions& base, int jobs) {
  if (betas.empty() || sigmas.empty()) {
    throw InvalidInputError("sweep: empty grid");
  }
  const MarkerSplit split =
      split_markers(scene.markers, base.holdout_frac, base.config.seed);

  std::vector<SweepCell> cells(betas.size() * sigmas.size());

  auto run_cell = [&](std::size_t ci) {
    SweepCell& cell = cells[ci];
    cell.beta = betas[ci / sigmas.size()];
    cell.sigma_neg = sigmas[ci % sigmas.size()];
    const auto t0 = std::chrono::steady_clock::now();
    try {
      auto model = build_model(base, split.train);
      NegativeSet neg = scene.obstacles;
      neg.sigma_neg = cell.sigma_neg;
      TrainConfig cfg = base.config;
      cfg.mode = cell.beta > 0.0 ? Mode::gp_nd : Mode::classical;
      cfg.beta = cell.beta;
      cfg.sigma_neg = cell.sigma_neg;
      const FitReport rep = fit(*model, cfg.mode == Mode::gp_nd ? &neg : nullptr, cfg);
      cell.epochs_run = static_cast<int>(rep.nll_trace.size());

      const auto at_obstacles = model->predict(scene.obstacles.X, false, false);
      const auto avoid = evaluate_avoidance(at_obstacles, neg);
      cell.min_clearance = avoid.min_clearance;
      cell.mean_clearance = avoid.mean_clearance;
      cell.collisions = avoid.collisions;

      const auto at_holdout = model->predict(split.holdout.X, false, true);
      const Metrics m = metrics(at_holdout, split.holdout.y, 0.0);
      cell.rmse = m.rmse;
      cell.nll = m.nll;
    } catch (const std::exception& e) {
      cell.failed = true;
      cell.error = e.what();
    }
    const auto t1 = std::chrono::steady_clock::now();
    cell.seconds = std::chrono::duration<double>(t1 - t0).count();
  };

  const std::size_t total = cells.size();
  if (jobs <= 1) {
    for (std::size_t i = 0; i < total; ++i) run_cell(i);
  } else {
    std::atomic<std::size_t> next{0};
    const std::size_t workers = std::min(static_cast<std::size_t>(jobs), total);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < total; i = next.fetch_add(1)) {
          run_cell(i);
        }
      });
    }
    for (auto& th : pool) th.join();
  }
  return cells;
}

void write_sweep_csv(const std::vector<SweepCell>& cells, std::ostream& out) {
  out << "beta,sigma_neg,min_clearance,mean_clearance,collisions,rmse,nll,"
         "epochs_run,seconds\n";
  for (const auto& c : cells) {
    if (c.failed) {
      out << format_double(c.beta) << "," << format_double(c.sigma_neg)
          << ",,,,,," << c.epochs_run << "," << format_double(c.seconds) << "\n";
      continue;
    }
    out << format_double(c.beta) << "," << format_double(c.sigma_neg) << ","
        << format_double(c.min_clearance) << "," << format_double(c.mean_clearance)
        << "," << c.collisions << "," << format_double(c.rmse) << ","
        << format_double(c.nll) << "," << c.epochs_run << ","
        << format_double(c.seconds) << "\n";
  }
}

}  // namespace gpnd
