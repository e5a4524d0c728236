#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "gpnd/cli.hpp"
#include "gpnd/data.hpp"
#include "gpnd/errors.hpp"
#include "gpnd/exact_gp.hpp"
#include "gpnd/negcon.hpp"
#include "testutil.hpp"

using namespace gpnd;
namespace fs = std::filesystem;

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("gpnd_data_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  static int counter;
};
int TempDir::counter = 0;

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream f(p);
  f << content;
}

}  // namespace

TEST_CASE("load_csv basic table") {
  TempDir tmp;
  const fs::path p = tmp.path / "basic.csv";
  write_file(p, "a,b,t\n1,2,3\n4,5,6\n7,8,9\n");
  const auto rep = load_csv(p, "t", true);
  CHECK(rep.data.size() == 3);
  CHECK(rep.data.dim() == 2);
  CHECK(rep.dropped_rows == 0);
  CHECK(rep.data.y(1) == 6.0);
  CHECK(rep.data.X(2, 0) == 7.0);
  REQUIRE(rep.data.feature_names.size() == 2);
  CHECK(rep.data.feature_names[0] == "a");
}

TEST_CASE("load_csv drops malformed rows with a count") {
  TempDir tmp;
  const fs::path p = tmp.path / "mal.csv";
  write_file(p, "1,2,3\nx,5,6\n7,8,9\n");
  const auto rep = load_csv(p, "2", false);
  CHECK(rep.data.size() == 2);
  CHECK(rep.dropped_rows == 1);
}

TEST_CASE("load_csv target by index without header") {
  TempDir tmp;
  const fs::path p = tmp.path / "idx.csv";
  write_file(p, "1,10\n2,20\n");
  const auto rep = load_csv(p, "0", false);
  CHECK(rep.data.y(0) == 1.0);
  CHECK(rep.data.X(0, 0) == 10.0);
}

TEST_CASE("load_csv distinct ingestion errors") {
  TempDir tmp;
  CHECK_THROWS_AS(load_csv(tmp.path / "missing.csv", "t", true), IngestionError);

  const fs::path p1 = tmp.path / "nocol.csv";
  write_file(p1, "a,b\n1,2\n");
  CHECK_THROWS_AS(load_csv(p1, "t", true), IngestionError);

  const fs::path p2 = tmp.path / "norows.csv";
  write_file(p2, "a,b\nx,y\nq,w\n");
  CHECK_THROWS_AS(load_csv(p2, "a", true), IngestionError);
}

TEST_CASE("csv round-trip preserves values") {
  TempDir tmp;
  Rng rng(3);
  Dataset d = testutil::random_dataset(rng, 12, 3);
  const fs::path p = tmp.path / "rt.csv";
  save_csv(d, p, "target");
  const auto rep = load_csv(p, "target", true);
  CHECK((rep.data.X - d.X).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((rep.data.y - d.y).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("split sizes and determinism") {
  Rng rng(5);
  const Dataset d = testutil::random_dataset(rng, 10, 2);
  const auto sp = split_standardize(d, 0.8, 0.1, 17);
  CHECK(sp.train.size() == 8);
  CHECK(sp.valid.size() == 1);
  CHECK(sp.test.size() == 1);

  const auto sp2 = split_standardize(d, 0.8, 0.1, 17);
  CHECK((sp.train.X - sp2.train.X).cwiseAbs().maxCoeff() == 0.0);
  CHECK((sp.test.y - sp2.test.y).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("split is a disjoint partition of the rows") {
  Rng rng(7);
  Dataset d = testutil::random_dataset(rng, 23, 1);
  // Unique values so rows can be tracked through the shuffle.
  for (Index i = 0; i < 23; ++i) d.y(i) = static_cast<double>(i);
  const auto sp = split_standardize(d, 0.6, 0.2, 3);

  std::vector<int> seen(23, 0);
  auto mark = [&](const Dataset& part) {
    const auto& st = *part.standardization;
    for (Index i = 0; i < part.size(); ++i) {
      const double orig = part.y(i) * st.y_std + st.y_mean;
      const auto idx = static_cast<std::size_t>(std::llround(orig));
      REQUIRE(idx < seen.size());
      seen[idx] += 1;
    }
  };
  mark(sp.train);
  mark(sp.valid);
  mark(sp.test);
  for (int c : seen) CHECK(c == 1);
}

TEST_CASE("standardized train targets have mean 0 and std 1") {
  Rng rng(9);
  const Dataset d = testutil::random_dataset(rng, 50, 2);
  const auto sp = split_standardize(d, 0.7, 0.15, 1);
  CHECK(std::abs(sp.train.y.mean()) <= 1e-10);
  const double var = (sp.train.y.array() - sp.train.y.mean()).square().mean();
  CHECK(std::abs(std::sqrt(var) - 1.0) <= 1e-10);
  for (Index j = 0; j < sp.train.dim(); ++j) {
    CHECK(std::abs(sp.train.X.col(j).mean()) <= 1e-10);
  }
}

TEST_CASE("standardize then invert is the identity") {
  Rng rng(11);
  const Dataset d = testutil::random_dataset(rng, 30, 3);
  const Standardization st = fit_standardization(d);
  const Dataset z = standardize_with(d, st);
  for (Index i = 0; i < d.size(); ++i) {
    for (Index j = 0; j < d.dim(); ++j) {
      const double back = z.X(i, j) * st.x_std(j) + st.x_mean(j);
      CHECK(std::abs(back - d.X(i, j)) <= 1e-10);
    }
    CHECK(std::abs(z.y(i) * st.y_std + st.y_mean - d.y(i)) <= 1e-10);
  }
}

TEST_CASE("split rejects empty parts") {
  Rng rng(13);
  const Dataset d = testutil::random_dataset(rng, 5, 1);
  CHECK_THROWS_AS(split_standardize(d, 0.9, 0.05, 0), InvalidInputError);
}

TEST_CASE("shuffle_negatives with two labels is forced") {
  Dataset d;
  d.X.resize(2, 1);
  d.X << 0.0, 1.0;
  d.y.resize(2);
  d.y << 0.0, 1.0;
  const NegativeSet neg = shuffle_negatives(d, 2, 123);
  for (Index k = 0; k < 2; ++k) {
    const double truth = neg.X(k, 0) == 0.0 ? 0.0 : 1.0;
    CHECK(neg.y(k) == 1.0 - truth);
  }
}

TEST_CASE("shuffle_negatives m = 0 yields an empty set") {
  Dataset d;
  d.X.resize(3, 1);
  d.X << 0.0, 1.0, 2.0;
  d.y.resize(3);
  d.y << 0.0, 1.0, 2.0;
  const NegativeSet neg = shuffle_negatives(d, 0, 1);
  CHECK(neg.size() == 0);
}

TEST_CASE("shuffle_negatives rejects constant targets") {
  Dataset d;
  d.X.resize(4, 1);
  d.X << 0.0, 1.0, 2.0, 3.0;
  d.y = Vector::Constant(4, 2.0);
  CHECK_THROWS_AS(shuffle_negatives(d, 2, 1), InvalidInputError);
}

TEST_CASE("shuffle_negatives on a discrete table always violates the truth") {
  const Dataset d = make_synthetic_discrete_table(1599, 4, 0);
  const NegativeSet neg = shuffle_negatives(d, 200, 42);
  REQUIRE(neg.size() == 200);
  // Recover each pair's true label by matching the input row.
  for (Index k = 0; k < neg.size(); ++k) {
    bool found = false;
    for (Index r = 0; r < d.size(); ++r) {
      if ((neg.X.row(k) - d.X.row(r)).norm() == 0.0) {
        CHECK(neg.y(k) != d.y(r));
        found = true;
        break;
      }
    }
    CHECK(found);
  }
}

TEST_CASE("metrics trivial cases") {
  PredictiveDistribution pred;
  pred.means.resize(4);
  pred.means << 1.0, 2.0, 3.0, 4.0;
  pred.variances = Vector::Ones(4);
  Vector truth = pred.means;

  const Metrics m = metrics(pred, truth, 0.0);
  CHECK(m.rmse == 0.0);
  CHECK(m.nll == doctest::Approx(0.5 * kLog2Pi).epsilon(1e-12));

  Vector off = truth.array() + 1.0;
  const Metrics m2 = metrics(pred, off, 0.0);
  CHECK(m2.rmse == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m2.nll == doctest::Approx(0.5 * (1.0 + kLog2Pi)).epsilon(1e-12));
}

TEST_CASE("metrics matches an independent density-sum oracle") {
  Rng rng(17);
  PredictiveDistribution pred;
  pred.means.resize(20);
  pred.variances.resize(20);
  Vector truth(20);
  for (Index i = 0; i < 20; ++i) {
    pred.means(i) = rng.normal();
    pred.variances(i) = rng.uniform(0.1, 2.0);
    truth(i) = rng.normal();
  }
  const double noise = 0.3;

  double nll_acc = 0.0, sse = 0.0;
  for (Index i = 0; i < 20; ++i) {
    const double v = pred.variances(i) + noise;
    const double density = std::exp(-(truth(i) - pred.means(i)) *
                                    (truth(i) - pred.means(i)) / (2.0 * v)) /
                           std::sqrt(2.0 * M_PI * v);
    nll_acc += -std::log(density);
    sse += (truth(i) - pred.means(i)) * (truth(i) - pred.means(i));
  }

  const Metrics m = metrics(pred, truth, noise);
  CHECK(std::abs(m.nll - nll_acc / 20.0) <= 1e-12);
  CHECK(std::abs(m.rmse - std::sqrt(sse / 20.0)) <= 1e-12);
}

TEST_CASE("metrics length mismatch is rejected") {
  PredictiveDistribution pred;
  pred.means = Vector::Zero(3);
  pred.variances = Vector::Ones(3);
  CHECK_THROWS_AS(metrics(pred, Vector::Zero(4), 0.0), InvalidInputError);
}

TEST_CASE("metrics unit conversion") {
  const Metrics std_units{0.9, 0.5};
  const Metrics orig = metrics_in_original_units(std_units, 2.0);
  CHECK(orig.rmse == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(orig.nll == doctest::Approx(0.9 + std::log(2.0)).epsilon(1e-15));
}
