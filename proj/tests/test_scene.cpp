#include <doctest.h>

#include <cmath>
#include <sstream>

#include "gpnd/errors.hpp"
#include "gpnd/scene.hpp"
#include "testutil.hpp"

using namespace gpnd;

TEST_CASE("make_scene with no obstacles") {
  SceneConfig cfg;
  cfg.n_markers = 20;
  cfg.m_obstacles = 0;
  const Scene s = make_scene(cfg);
  CHECK(s.obstacles.size() == 0);
  CHECK(s.markers.size() == 20);
}

TEST_CASE("make_scene is deterministic under the seed") {
  SceneConfig cfg;
  cfg.seed = 99;
  const Scene a = make_scene(cfg);
  const Scene b = make_scene(cfg);
  CHECK((a.markers.X - b.markers.X).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.markers.y - b.markers.y).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.obstacles.X - b.obstacles.X).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.obstacles.y - b.obstacles.y).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("scene invariants hold across 50 seeds") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    SceneConfig cfg;
    cfg.seed = seed;
    const Scene s = make_scene(cfg);
    CHECK(s.markers.size() == 250);
    CHECK(s.obstacles.size() == 10);
    for (Index i = 0; i < s.markers.size(); ++i) {
      CHECK(s.markers.y(i) >= s.corridor.lower);
      CHECK(s.markers.y(i) <= s.corridor.upper);
    }
    for (Index i = 0; i < s.obstacles.size(); ++i) {
      const double path_value = s.ground_truth(s.obstacles.X(i, 0));
      CHECK(s.obstacles.y(i) != path_value);
      // Lateral offset is at least one path-width (corridor/40).
      CHECK(std::abs(s.obstacles.y(i) - path_value) >=
            s.corridor.width() / 40.0 - 1e-12);
    }
  }
}

TEST_CASE("evaluate_avoidance trivial cases") {
  NegativeSet neg;
  neg.X.resize(3, 1);
  neg.X << 0.0, 1.0, 2.0;
  neg.y.resize(3);
  neg.y << 1.0, -1.0, 0.5;
  neg.sigma_neg = 0.2;

  PredictiveDistribution pred;
  pred.means = neg.y;
  pred.variances = Vector::Zero(3);
  const auto exact_hit = evaluate_avoidance(pred, neg);
  CHECK(exact_hit.min_clearance == 0.0);
  CHECK(exact_hit.collisions == 3);

  pred.means = neg.y.array() + 10.0 * neg.sigma_neg;
  const auto clear = evaluate_avoidance(pred, neg);
  CHECK(clear.collisions == 0);
  CHECK(clear.min_clearance == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("evaluate_avoidance is translation invariant") {
  Rng rng(4);
  NegativeSet neg;
  neg.X.resize(5, 1);
  neg.y.resize(5);
  PredictiveDistribution pred;
  pred.means.resize(5);
  pred.variances = Vector::Zero(5);
  for (Index i = 0; i < 5; ++i) {
    neg.X(i, 0) = rng.uniform(0.0, 10.0);
    neg.y(i) = rng.normal();
    pred.means(i) = rng.normal();
  }
  neg.sigma_neg = 0.4;

  const auto base = evaluate_avoidance(pred, neg);
  NegativeSet shifted = neg;
  shifted.y.array() += 3.7;
  PredictiveDistribution shifted_pred = pred;
  shifted_pred.means.array() += 3.7;
  const auto after = evaluate_avoidance(shifted_pred, shifted);
  CHECK(after.min_clearance == doctest::Approx(base.min_clearance).epsilon(1e-12));
  CHECK(after.mean_clearance == doctest::Approx(base.mean_clearance).epsilon(1e-12));
  CHECK(after.collisions == base.collisions);
}

TEST_CASE("paired run: repulsion beats the classical fit on clearance") {
  SceneConfig sc;
  sc.seed = 0;
  const Scene scene = make_scene(sc);

  SceneRunOptions opts;
  opts.config.beta = 3.0;
  opts.config.sigma_neg = 0.1;
  opts.config.epochs = 100;
  opts.config.seed = 0;

  const SceneRunResult res = run_scene_experiment(scene, opts);
  CHECK(res.gpnd_avoidance.min_clearance > res.classical_avoidance.min_clearance);
  CHECK(res.gpnd_holdout.rmse <= 1.5 * res.classical_holdout.rmse);
}

TEST_CASE("single-cell sweep equals a direct fit and evaluate") {
  SceneConfig sc;
  sc.n_markers = 80;
  sc.m_obstacles = 6;
  sc.seed = 2;
  const Scene scene = make_scene(sc);

  SceneRunOptions opts;
  opts.config.beta = 2.0;
  opts.config.sigma_neg = 0.2;
  opts.config.epochs = 40;
  opts.config.seed = 2;

  const auto cells = sweep(scene, {2.0}, {0.2}, opts);
  REQUIRE(cells.size() == 1);
  CHECK_FALSE(cells[0].failed);

  const SceneRunResult direct = run_scene_experiment(scene, opts);
  CHECK(cells[0].min_clearance ==
        doctest::Approx(direct.gpnd_avoidance.min_clearance).epsilon(1e-12));
  CHECK(cells[0].collisions == direct.gpnd_avoidance.collisions);
}

TEST_CASE("sweep is order-stable and parallel-safe") {
  SceneConfig sc;
  sc.n_markers = 60;
  sc.m_obstacles = 5;
  sc.seed = 3;
  const Scene scene = make_scene(sc);

  SceneRunOptions opts;
  opts.config.epochs = 25;
  opts.config.seed = 3;

  const std::vector<double> betas{3.0, 0.1};
  const std::vector<double> sigmas{3.0, 0.1};
  const auto serial = sweep(scene, betas, sigmas, opts, 1);
  const auto parallel = sweep(scene, betas, sigmas, opts, 4);
  REQUIRE(serial.size() == 4);
  REQUIRE(parallel.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(serial[i].beta == parallel[i].beta);
    CHECK(serial[i].sigma_neg == parallel[i].sigma_neg);
    CHECK(serial[i].min_clearance == parallel[i].min_clearance);
    CHECK(serial[i].rmse == parallel[i].rmse);
  }
}

TEST_CASE("sweep csv has the fixed column header") {
  std::vector<SweepCell> cells(1);
  cells[0].beta = 3.0;
  cells[0].sigma_neg = 0.1;
  std::ostringstream os;
  write_sweep_csv(cells, os);
  const std::string text = os.str();
  CHECK(text.rfind("beta,sigma_neg,min_clearance,mean_clearance,collisions,rmse,"
                   "nll,epochs_run,seconds\n",
                   0) == 0);
}

TEST_CASE("unknown path shape is rejected") {
  SceneConfig cfg;
  cfg.path_shape = 42;
  CHECK_THROWS_AS(make_scene(cfg), InvalidInputError);
}

TEST_CASE("a failing sweep cell is recorded and the sweep continues") {
  SceneConfig sc;
  sc.n_markers = 40;
  sc.m_obstacles = 4;
  sc.seed = 5;
  const Scene scene = make_scene(sc);

  SceneRunOptions opts;
  opts.config.epochs = 10;
  opts.config.seed = 5;

  // sigma_neg = -1 fails TrainConfig validation inside its cell.
  const auto cells = sweep(scene, {2.0}, {-1.0, 0.5}, opts);
  REQUIRE(cells.size() == 2);
  CHECK(cells[0].failed);
  CHECK_FALSE(cells[0].error.empty());
  CHECK_FALSE(cells[1].failed);
  CHECK(cells[1].min_clearance >= 0.0);
}
