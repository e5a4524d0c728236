#include <doctest.h>

#include <cmath>

#include "gpnd/errors.hpp"
#include "gpnd/model.hpp"
#include "gpnd/trainer.hpp"
#include "testutil.hpp"

using namespace gpnd;

namespace {

Dataset sine_dataset(Index n, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  d.X.resize(n, 1);
  d.y.resize(n);
  for (Index i = 0; i < n; ++i) {
    d.X(i, 0) = rng.uniform(0.0, 6.0);
    d.y(i) = std::sin(d.X(i, 0)) + 0.1 * rng.normal();
  }
  return d;
}

}  // namespace

TEST_CASE("optimizer_step leaves parameters unchanged on a zero gradient") {
  Vector p(3);
  p << 1.0, -2.0, 0.5;
  const Vector before = p;
  AdamState st = AdamState::zero(3);
  optimizer_step(p, st, Vector::Zero(3), 0.1);
  CHECK((p - before).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("optimizer_step first update is about lr * sign(grad)") {
  Vector p(2);
  p << 0.0, 0.0;
  AdamState st = AdamState::zero(2);
  Vector g(2);
  g << 3.7, -0.02;
  optimizer_step(p, st, g, 0.1);
  CHECK(p(0) == doctest::Approx(-0.1).epsilon(1e-4));
  CHECK(p(1) == doctest::Approx(0.1).epsilon(1e-3));
}

TEST_CASE("optimizer_step descends x^2 to near zero") {
  Vector x(1);
  x << 1.0;
  AdamState st = AdamState::zero(1);
  for (int i = 0; i < 50; ++i) {
    Vector g(1);
    g << 2.0 * x(0);
    optimizer_step(x, st, g, 0.1);
  }
  CHECK(std::abs(x(0)) < 0.1);
}

TEST_CASE("optimizer_step rejects non-finite gradients") {
  Vector p(1);
  p << 0.0;
  AdamState st = AdamState::zero(1);
  Vector g(1);
  g << std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(optimizer_step(p, st, g, 0.1), TrainingError);
}

TEST_CASE("classical training reduces the NLL on sine data") {
  const Dataset data = sine_dataset(40, 7);
  KernelParams kp;
  ExactGpModel model(kp, data);
  const double initial = model.objective(nullptr, nullptr);

  TrainConfig cfg;
  cfg.mode = Mode::classical;
  cfg.epochs = 400;
  cfg.seed = 7;
  const FitReport rep = fit(model, nullptr, cfg);
  CHECK(rep.nll_trace.size() == 400);
  CHECK(model.objective(nullptr, nullptr) < initial);
  // Quasi-monotone tail: the last 10% of epochs do not trend upward.
  const double late = rep.nll_trace[389];
  CHECK(rep.nll_trace.back() <= late + 1e-3);
}

TEST_CASE("classical mode ignores beta and matches gp_nd with beta 0") {
  const Dataset data = sine_dataset(25, 11);
  NegativeSet neg;
  neg.X.resize(2, 1);
  neg.X << 1.0, 3.0;
  neg.y.resize(2);
  neg.y << 2.0, -2.0;
  neg.sigma_neg = 0.5;

  TrainConfig classical;
  classical.mode = Mode::classical;
  classical.beta = 3.0;  // ignored
  classical.epochs = 50;
  classical.seed = 3;

  TrainConfig nd = classical;
  nd.mode = Mode::gp_nd;
  nd.beta = 0.0;

  KernelParams kp;
  ExactGpModel m1(kp, data), m2(kp, data);
  const FitReport r1 = fit(m1, nullptr, classical);
  const FitReport r2 = fit(m2, &neg, nd);

  REQUIRE(r1.nll_trace.size() == r2.nll_trace.size());
  for (std::size_t i = 0; i < r1.nll_trace.size(); ++i) {
    CHECK(r1.nll_trace[i] == r2.nll_trace[i]);  // bitwise
  }
  CHECK((r1.final_params - r2.final_params).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("repulsion pushes the curve away from on-curve negatives") {
  const Dataset data = sine_dataset(40, 7);
  // Three negatives sitting exactly on the target curve.
  NegativeSet neg;
  neg.X.resize(3, 1);
  neg.X << 1.0, 2.5, 4.0;
  neg.y.resize(3);
  for (Index i = 0; i < 3; ++i) neg.y(i) = std::sin(neg.X(i, 0));
  neg.sigma_neg = 0.1;

  KernelParams kp;
  TrainConfig classical;
  classical.mode = Mode::classical;
  classical.epochs = 400;
  classical.seed = 7;

  ExactGpModel cm(kp, data);
  fit(cm, nullptr, classical);
  const auto classical_pred = cm.predict(neg.X, false, false);

  TrainConfig nd = classical;
  nd.mode = Mode::gp_nd;
  nd.beta = 3.0;
  nd.sigma_neg = 0.1;

  ExactGpModel nm(kp, data);
  fit(nm, &neg, nd);
  const auto nd_pred = nm.predict(neg.X, false, false);

  for (Index i = 0; i < 3; ++i) {
    const double classical_gap = std::abs(classical_pred.means(i) - neg.y(i));
    const double nd_gap = std::abs(nd_pred.means(i) - neg.y(i));
    CHECK(nd_gap > classical_gap);
  }
}

TEST_CASE("training is deterministic given config and seed") {
  const Dataset data = sine_dataset(30, 23);
  NegativeSet neg;
  neg.X.resize(2, 1);
  neg.X << 2.0, 4.0;
  neg.y.resize(2);
  neg.y << 1.5, -1.5;
  neg.sigma_neg = 0.3;

  TrainConfig cfg;
  cfg.mode = Mode::gp_nd;
  cfg.beta = 2.0;
  cfg.sigma_neg = 0.3;
  cfg.epochs = 60;
  cfg.seed = 77;

  KernelParams kp;
  ExactGpModel m1(kp, data), m2(kp, data);
  const FitReport r1 = fit(m1, &neg, cfg);
  const FitReport r2 = fit(m2, &neg, cfg);

  CHECK((r1.final_params - r2.final_params).cwiseAbs().maxCoeff() == 0.0);
  for (std::size_t i = 0; i < r1.nll_trace.size(); ++i) {
    CHECK(r1.nll_trace[i] == r2.nll_trace[i]);
    CHECK(r1.penalty_trace[i] == r2.penalty_trace[i]);
  }
}

TEST_CASE("sparse minibatch training is deterministic and runs") {
  const Dataset data = sine_dataset(60, 29);
  KernelParams kp;
  auto var = VariationalParams::init(data, 8, 5);

  TrainConfig cfg;
  cfg.mode = Mode::classical;
  cfg.epochs = 30;
  cfg.batch_size = 16;
  cfg.seed = 5;

  SvgpModel m1(kp, var, data), m2(kp, var, data);
  const FitReport r1 = fit(m1, nullptr, cfg);
  const FitReport r2 = fit(m2, nullptr, cfg);
  CHECK((r1.final_params - r2.final_params).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("divergent training raises TrainingError with an epoch index") {
  const Dataset data = sine_dataset(10, 31);
  KernelParams kp;
  kp.log_signal_var = 710.0;  // exp overflows: the first objective is non-finite
  ExactGpModel model(kp, data);
  TrainConfig cfg;
  cfg.mode = Mode::classical;
  cfg.epochs = 50;
  try {
    fit(model, nullptr, cfg);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(e.epoch() >= 0);
    CHECK(e.snapshot().size() == kNumKernelParams);
  }
}

TEST_CASE("gp_nd mode requires negatives") {
  const Dataset data = sine_dataset(10, 37);
  KernelParams kp;
  ExactGpModel model(kp, data);
  TrainConfig cfg;
  cfg.mode = Mode::gp_nd;
  cfg.beta = 1.0;
  CHECK_THROWS_AS(fit(model, nullptr, cfg), InvalidInputError);
}

TEST_CASE("early stopping reports a convergence epoch") {
  const Dataset data = sine_dataset(15, 41);
  KernelParams kp;
  ExactGpModel model(kp, data);
  TrainConfig cfg;
  cfg.mode = Mode::classical;
  cfg.epochs = 3000;
  cfg.early_stop = true;
  const FitReport rep = fit(model, nullptr, cfg);
  REQUIRE(rep.converged_epoch.has_value());
  CHECK(rep.nll_trace.size() < 3000);
  CHECK(rep.nll_trace.size() == rep.penalty_trace.size());
  CHECK(rep.nll_trace.size() == rep.wall_clock_per_epoch.size());
}

TEST_CASE("joint mode trains on the combined gradient") {
  const Dataset data = sine_dataset(30, 43);
  NegativeSet neg;
  neg.X.resize(2, 1);
  neg.X << 1.5, 4.5;
  neg.y.resize(2);
  for (Index i = 0; i < 2; ++i) neg.y(i) = std::sin(neg.X(i, 0));
  neg.sigma_neg = 0.2;

  TrainConfig cfg;
  cfg.mode = Mode::gp_nd;
  cfg.beta = 2.0;
  cfg.sigma_neg = 0.2;
  cfg.epochs = 50;
  cfg.seed = 43;
  cfg.alternation = Alternation::joint;

  KernelParams kp;
  ExactGpModel m1(kp, data), m2(kp, data);
  const FitReport r1 = fit(m1, &neg, cfg);
  const FitReport r2 = fit(m2, &neg, cfg);
  CHECK((r1.final_params - r2.final_params).cwiseAbs().maxCoeff() == 0.0);
  CHECK(r1.penalty_trace.back() != 0.0);

  // One optimizer step per epoch: with beta = 0 the joint trajectory is the
  // classical one bit for bit.
  TrainConfig joint0 = cfg;
  joint0.beta = 0.0;
  TrainConfig classical = cfg;
  classical.mode = Mode::classical;
  classical.beta = 0.0;
  classical.alternation = Alternation::alternating;
  ExactGpModel m3(kp, data), m4(kp, data);
  const FitReport r3 = fit(m3, &neg, joint0);
  const FitReport r4 = fit(m4, nullptr, classical);
  CHECK((r3.final_params - r4.final_params).cwiseAbs().maxCoeff() == 0.0);
}
