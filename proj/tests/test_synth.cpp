#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "chi/model.hpp"
#include "chi/synth.hpp"
#include "chi/training.hpp"

using namespace chi;

TEST_CASE("generate shapes the dataset and truth model together") {
  SynthSpec spec;
  spec.cvs = 5;
  spec.rows = 40;
  spec.seed = 123;
  auto [ds, truth] = generate(spec);

  CHECK(ds.rows() == 40);
  CHECK(ds.cols() == 5);
  CHECK(ds.normalized);
  CHECK(ds.transformed);
  CHECK(ds.columns == std::vector<std::string>{"cv1", "cv2", "cv3", "cv4", "cv5"});
  CHECK(ds.source_id.find("seed=123") != std::string::npos);

  REQUIRE(truth.curves.size() == 5);
  for (size_t m = 0; m < truth.curves.size(); ++m) {
    const CvCurve& c = truth.curves[m];
    CHECK(c.cv == ds.columns[m]);
    CHECK(c.shape == (m % 2 == 0 ? CvShape::Monotonic : CvShape::Unimodal));
    CHECK(c.eta >= 1.0);
    CHECK(c.eta <= 8.0);
    if (c.shape == CvShape::Unimodal) {
      CHECK(c.gamma >= 0.05);
      CHECK(c.gamma <= 0.3);
      CHECK(c.p_mode >= 0.5);
      CHECK(c.p_mode <= 0.9);
    }
  }
  CHECK(truth.weak.empty());
  CHECK(truth.stats.columns == ds.columns);

  for (Index i = 0; i < ds.rows(); ++i) {
    for (Index j = 0; j < ds.cols(); ++j) {
      CHECK(ds.values(i, j) >= kEpsNorm);
      CHECK(ds.values(i, j) <= 1.0);
    }
    CHECK(ds.observed(i) >= kEpsNorm);
    CHECK(ds.observed(i) <= 1.0);
  }
}

TEST_CASE("same seed reproduces everything, new seeds move the draw") {
  SynthSpec spec;
  spec.cvs = 4;
  spec.rows = 30;
  spec.noise_sigma = 0.05;
  spec.seed = 9;

  auto [d1, t1] = generate(spec);
  auto [d2, t2] = generate(spec);
  CHECK(d1.values == d2.values);
  CHECK(d1.observed == d2.observed);
  for (size_t m = 0; m < t1.curves.size(); ++m) {
    CHECK(t1.curves[m].eta == t2.curves[m].eta);
    CHECK(t1.curves[m].gamma == t2.curves[m].gamma);
    CHECK(t1.curves[m].p_mode == t2.curves[m].p_mode);
  }

  spec.seed = 10;
  auto [d3, t3] = generate(spec);
  CHECK(d1.values != d3.values);
  CHECK(t1.curves[0].eta != t3.curves[0].eta);
}

TEST_CASE("zero noise means scoring the truth reproduces O exactly") {
  SynthSpec spec;
  spec.cvs = 6;
  spec.rows = 50;
  spec.noise_sigma = 0.0;
  spec.seed = 42;
  auto [ds, truth] = generate(spec);

  ScoreResult res = score(truth, ds);
  for (Index i = 0; i < ds.rows(); ++i) CHECK(res.H(i) == ds.observed(i));  // bit-exact

  EvalReport report = evaluate_holdout(truth, ds);
  CHECK(report.mse == 0.0);
}

TEST_CASE("noise moves O by roughly sigma") {
  SynthSpec spec;
  spec.cvs = 3;
  spec.rows = 400;
  spec.noise_sigma = 0.05;
  spec.seed = 7;
  auto [ds, truth] = generate(spec);

  EvalReport report = evaluate_holdout(truth, ds);
  CHECK(report.mse > 0.0);
  // clamping at the band edges only shrinks the error
  CHECK(report.mse <= 3.0 * spec.noise_sigma * spec.noise_sigma);
  CHECK(report.mse >= 0.1 * spec.noise_sigma * spec.noise_sigma);
}

TEST_CASE("explicit shape lists are honored") {
  SynthSpec spec;
  spec.cvs = 3;
  spec.rows = 10;
  spec.shapes = {CvShape::Unimodal, CvShape::Unimodal, CvShape::Monotonic};
  auto [ds, truth] = generate(spec);
  CHECK(truth.curves[0].shape == CvShape::Unimodal);
  CHECK(truth.curves[1].shape == CvShape::Unimodal);
  CHECK(truth.curves[2].shape == CvShape::Monotonic);

  spec.shapes = {CvShape::Monotonic};
  CHECK_THROWS_AS(generate(spec), InputError);
}

TEST_CASE("spec validation") {
  SynthSpec spec;
  spec.cvs = 0;
  CHECK_THROWS_AS(generate(spec), InputError);
  spec = {};
  spec.rows = 0;
  CHECK_THROWS_AS(generate(spec), InputError);
  spec = {};
  spec.noise_sigma = -0.1;
  CHECK_THROWS_AS(generate(spec), InputError);
}

TEST_CASE("a single monotonic CV at full value scores 1") {
  SynthSpec spec;
  spec.cvs = 1;
  spec.rows = 5;
  spec.seed = 3;
  auto [ds, truth] = generate(spec);
  REQUIRE(truth.curves.size() == 1);
  CHECK(curve_health(truth.curves[0], 1.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(score_resolved(truth.curves, Vector::Constant(1, 1.0)) == doctest::Approx(1.0).epsilon(1e-12));
}
