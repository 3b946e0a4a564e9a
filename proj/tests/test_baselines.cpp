#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "chi/baselines.hpp"
#include "chi/synth.hpp"

using namespace chi;
namespace fs = std::filesystem;

namespace {

auto grid_design(Index n, Index cols, std::uint64_t seed = 1) -> Matrix {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<Scalar> u(0.0, 1.0);
  Matrix X(n, cols);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < cols; ++j) X(i, j) = u(rng);
  }
  return X;
}

auto sq_mse(const Vector& a, const Vector& b) -> Scalar {
  return (a - b).squaredNorm() / static_cast<Scalar>(a.size());
}

}  // namespace

TEST_CASE("ols_fit recovers exact linear coefficients") {
  Matrix X = grid_design(20, 2);
  Vector Y = (1.0 + 2.0 * X.col(0).array() - 3.0 * X.col(1).array()).matrix();

  LinearModel model = ols_fit(X, Y);
  REQUIRE(model.beta.size() == 3);
  CHECK(model.beta(0) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(model.beta(1) == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(model.beta(2) == doctest::Approx(-3.0).epsilon(1e-8));
  CHECK(model.dropped.empty());

  Vector pred = ols_predict(model, X);
  CHECK(sq_mse(pred, Y) <= 1e-14);
}

TEST_CASE("ols_fit on constant targets reduces to the intercept") {
  Matrix X = grid_design(12, 3);
  Vector Y = Vector::Constant(12, 0.4);
  LinearModel model = ols_fit(X, Y);
  CHECK(model.beta(0) == doctest::Approx(0.4).epsilon(1e-7));
  for (Index j = 1; j < model.beta.size(); ++j) {
    CHECK(model.beta(j) == doctest::Approx(0.0).epsilon(1e-6));
  }
}

TEST_CASE("ols residuals are orthogonal and the solution is a minimum") {
  Matrix X = grid_design(50, 3, 7);
  Vector Y(50);
  std::mt19937_64 rng(2);
  std::normal_distribution<Scalar> g(0.0, 0.1);
  for (Index i = 0; i < 50; ++i) {
    Y(i) = 0.3 + 0.5 * X(i, 0) - 0.2 * X(i, 1) + 0.1 * X(i, 2) + g(rng);
  }

  LinearModel model = ols_fit(X, Y);
  Vector resid = Y - ols_predict(model, X);
  CHECK(std::abs(resid.mean()) <= 1e-6);
  for (Index j = 0; j < 3; ++j) {
    CHECK(std::abs(resid.dot(X.col(j)) / 50.0) <= 1e-6);
  }

  Scalar best = sq_mse(ols_predict(model, X), Y);
  for (Index k = 0; k < model.beta.size(); ++k) {
    for (Scalar d : {-1e-3, 1e-3}) {
      LinearModel bumped = model;
      bumped.beta(k) += d;
      CHECK(sq_mse(ols_predict(bumped, X), Y) >= best - 1e-12);
    }
  }
}

TEST_CASE("ols drops zero-variance columns") {
  Matrix X = grid_design(15, 3);
  X.col(1).setConstant(0.7);
  Vector Y = (0.2 + 1.5 * X.col(0).array()).matrix();

  LinearModel model = ols_fit(X, Y);
  REQUIRE(model.dropped.size() == 1);
  CHECK(model.dropped[0] == 1);
  CHECK(model.beta(2) == 0.0);  // the dropped slope is pinned, not estimated
  CHECK(model.beta(1) == doctest::Approx(1.5).epsilon(1e-7));
  Vector pred = ols_predict(model, X);
  CHECK(sq_mse(pred, Y) <= 1e-12);
}

TEST_CASE("ols warns when underdetermined and validates inputs") {
  Matrix X = grid_design(3, 5);
  Vector Y = Vector::Ones(3);
  LinearModel model = ols_fit(X, Y);
  CHECK_FALSE(model.warnings.empty());

  Matrix none(0, 2);
  Vector ynone;
  CHECK_THROWS_AS(ols_fit(none, ynone), InputError);
  Vector mis = Vector::Ones(4);
  CHECK_THROWS_AS(ols_fit(X, mis), InputError);
  LinearModel wrong = model;
  Matrix narrow = grid_design(3, 2);
  CHECK_THROWS_AS(ols_predict(wrong, narrow), InputError);
}

TEST_CASE("hinge_fit finds a single-knot kink") {
  Index n = 101;
  Matrix X(n, 1);
  Vector Y(n);
  for (Index i = 0; i < n; ++i) {
    Scalar x = static_cast<Scalar>(i) / static_cast<Scalar>(n - 1);
    X(i, 0) = x;
    Y(i) = 0.1 + 2.0 * std::max(0.0, x - 0.5);
  }

  HingeModel model = hinge_fit(X, Y);
  REQUIRE_FALSE(model.terms.empty());
  // the winning pair sits within one quantile step of the true kink
  bool near = false;
  for (const auto& t : model.terms) near = near || std::abs(t.knot - 0.5) <= 0.11;
  CHECK(near);
  CHECK(model.train_mse.back() <= 1e-4);
  Vector pred = hinge_predict(model, X);
  CHECK(sq_mse(pred, Y) <= 1e-4);
}

TEST_CASE("hinge training error never increases as pairs are added") {
  SynthSpec spec;
  spec.cvs = 4;
  spec.rows = 150;
  spec.noise_sigma = 0.03;
  spec.seed = 31;
  auto [ds, truth] = generate(spec);

  HingeModel model = hinge_fit(ds.values, ds.observed);
  REQUIRE_FALSE(model.train_mse.empty());
  for (size_t k = 1; k < model.train_mse.size(); ++k) {
    CHECK(model.train_mse[k] <= model.train_mse[k - 1] + 1e-12);
  }
  CHECK(static_cast<Index>(model.terms.size()) <= 16);
}

TEST_CASE("hinge matches OLS on purely linear data") {
  Matrix X = grid_design(60, 2, 5);
  Vector Y = (0.25 + 0.5 * X.col(0).array() + 0.25 * X.col(1).array()).matrix();

  LinearModel ols = ols_fit(X, Y);
  HingeModel hinge = hinge_fit(X, Y);
  Scalar ols_mse = sq_mse(ols_predict(ols, X), Y);
  Scalar hinge_mse = sq_mse(hinge_predict(hinge, X), Y);
  CHECK(hinge_mse <= ols_mse + 1e-9);
}

TEST_CASE("hinge input validation") {
  Matrix X = grid_design(10, 2);
  Vector Y = Vector::Ones(10);
  CHECK_THROWS_AS(hinge_fit(X, Y, 0), InputError);
  Vector bad = Vector::Ones(9);
  CHECK_THROWS_AS(hinge_fit(X, bad), InputError);

  HingeModel model = hinge_fit(X, Y);
  Matrix narrow = grid_design(10, 1);
  if (!model.terms.empty()) {
    CHECK_THROWS_AS(hinge_predict(model, narrow), InputError);
  }
}

TEST_CASE("chi_influence measures the reach of each curve") {
  HealthModel model;
  CvCurve live;
  live.cv = "live";
  live.eta = 2.0;
  live.lo = kEpsNorm;
  live.hi = 1.0;
  CvCurve dead;
  dead.cv = "dead";
  dead.inert = true;
  model.curves = {live, dead};

  auto influence = chi_influence(model);
  REQUIRE(influence.size() == 2);
  CHECK(influence[0].first == "live");
  Scalar want = curve_health(live, 1.0) - curve_health(live, kEpsNorm);
  CHECK(influence[0].second == doctest::Approx(want).epsilon(1e-12));
  CHECK(influence[1].second == 0.0);  // inert curves report exactly zero
}

TEST_CASE("compare runs all three methods on one split") {
  SynthSpec spec;
  spec.cvs = 4;
  spec.rows = 120;
  spec.noise_sigma = 0.02;
  spec.seed = 17;
  auto [ds, truth] = generate(spec);

  CompareOptions opts;
  opts.train.max_epochs = 150;
  opts.ratio = 0.8;
  opts.split_seed = 3;
  ComparisonReport report = compare(ds, CvSchema{}, opts);

  REQUIRE(report.rows.size() == 3);
  CHECK(report.rows[0].method == "chi");
  CHECK(report.rows[1].method == "ols");
  CHECK(report.rows[2].method == "hinge");
  CHECK(report.rows[0].split_hash == report.rows[1].split_hash);
  CHECK(report.rows[1].split_hash == report.rows[2].split_hash);
  for (const auto& row : report.rows) {
    CHECK(row.train_mse >= 0.0);
    CHECK(row.test_mse >= 0.0);
    CHECK(row.test_mse < 0.05);
  }
}

TEST_CASE("a dead CV lands in every method's ignored list") {
  // raw data with one constant column; the pipeline marks it degenerate
  ConfigDataset ds;
  ds.columns = {"x", "dead", "y"};
  Index n = 80;
  ds.values.resize(n, 3);
  ds.observed.resize(n);
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<Scalar> u(0.0, 1.0);
  for (Index i = 0; i < n; ++i) {
    Scalar x = u(rng);
    Scalar y = u(rng);
    ds.values(i, 0) = x;
    ds.values(i, 1) = 42.0;
    ds.values(i, 2) = y;
    ds.observed(i) = 0.2 + 0.4 * x + 0.3 * y;
  }
  ds.source_id = "deadcv";

  CompareOptions opts;
  opts.train.max_epochs = 100;
  ComparisonReport report = compare(ds, CvSchema{}, opts);
  for (const auto& row : report.rows) {
    CAPTURE(row.method);
    CHECK(std::find(row.ignored.begin(), row.ignored.end(), "dead") != row.ignored.end());
  }
}

TEST_CASE("write_comparison_csv") {
  ComparisonReport report;
  MethodRow row;
  row.method = "chi";
  row.train_mse = 0.01;
  row.test_mse = 0.02;
  row.variance = 0.001;
  row.ignored = {"a", "b"};
  report.rows.push_back(row);

  auto path = fs::temp_directory_path() / "chi_compare.csv";
  write_comparison_csv(report, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "method,train_mse,test_mse,variance,ignored_cvs");
  std::getline(in, line);
  CHECK(line == "chi,0.010000,0.020000,0.001000,a;b");
}
