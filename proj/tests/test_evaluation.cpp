#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "chi/evaluation.hpp"
#include "chi/synth.hpp"

using namespace chi;
namespace fs = std::filesystem;

namespace {

auto read_all(const fs::path& path) -> std::string {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("split_indices honors the ceiling rule") {
  SplitSpec spec;
  spec.ratio = 0.8;
  spec.seed = 1;
  auto [train, test] = split_indices(10, spec);
  CHECK(train.size() == 8);
  CHECK(test.size() == 2);

  spec.ratio = 0.5;
  auto [t1, t2] = split_indices(2, spec);
  CHECK(t1.size() == 1);
  CHECK(t2.size() == 1);

  spec.ratio = 0.75;
  auto [a, b] = split_indices(7, spec);
  CHECK(a.size() == 6);  // ceil(5.25)
  CHECK(b.size() == 1);
}

TEST_CASE("split_indices partitions deterministically") {
  SplitSpec spec;
  spec.ratio = 0.7;
  spec.seed = 99;
  for (Index n : {5, 23, 100}) {
    auto [train, test] = split_indices(n, spec);
    CHECK(std::is_sorted(train.begin(), train.end()));
    CHECK(std::is_sorted(test.begin(), test.end()));
    std::set<Index> all;
    for (Index i : train) all.insert(i);
    for (Index i : test) all.insert(i);
    CHECK(all.size() == static_cast<size_t>(n));  // disjoint and exhaustive
    CHECK(*all.begin() == 0);
    CHECK(*all.rbegin() == n - 1);

    auto [again_train, again_test] = split_indices(n, spec);
    CHECK(train == again_train);
    CHECK(test == again_test);
  }

  SplitSpec other = spec;
  other.seed = 100;
  auto [t99, _a] = split_indices(100, spec);
  auto [t100, _b] = split_indices(100, other);
  CHECK(t99 != t100);

  SUBCASE("shuffle off slices the head") {
    SplitSpec plain;
    plain.ratio = 0.6;
    plain.shuffle = false;
    auto [head, tail] = split_indices(5, plain);
    CHECK(head == std::vector<Index>{0, 1, 2});
    CHECK(tail == std::vector<Index>{3, 4});
  }

  SUBCASE("bad inputs") {
    SplitSpec bad;
    bad.ratio = 0.0;
    CHECK_THROWS_AS(split_indices(10, bad), InputError);
    bad.ratio = 1.0;
    CHECK_THROWS_AS(split_indices(10, bad), InputError);
    bad.ratio = 0.5;
    CHECK_THROWS_AS(split_indices(1, bad), InputError);
    SplitSpec tight;
    tight.ratio = 0.9;
    CHECK_THROWS_AS(split_indices(2, tight), InputError);  // ceil(1.8) = 2 leaves no test rows
  }
}

TEST_CASE("index_hash separates different row sets") {
  CHECK(index_hash({0, 1, 2}) == index_hash({0, 1, 2}));
  CHECK(index_hash({0, 1, 2}) != index_hash({0, 1, 3}));
  CHECK(index_hash({}) != 0);
}

TEST_CASE("take_rows and split move whole rows") {
  ConfigDataset ds;
  ds.columns = {"a", "b"};
  ds.values.resize(4, 2);
  ds.values << 1, 2, 3, 4, 5, 6, 7, 8;
  ds.observed.resize(4);
  ds.observed << 10, 20, 30, 40;

  ConfigDataset picked = take_rows(ds, {0, 3});
  CHECK(picked.rows() == 2);
  CHECK(picked.values(0, 0) == 1);
  CHECK(picked.values(1, 1) == 8);
  CHECK(picked.observed(1) == 40);

  SplitSpec spec;
  spec.ratio = 0.5;
  spec.seed = 4;
  auto [train, test] = split(ds, spec);
  CHECK(train.rows() == 2);
  CHECK(test.rows() == 2);
  std::set<Scalar> seen;
  for (Index i = 0; i < 2; ++i) {
    seen.insert(train.observed(i));
    seen.insert(test.observed(i));
  }
  CHECK(seen == std::set<Scalar>{10, 20, 30, 40});
}

TEST_CASE("prepare_split freezes the pipeline on the train side") {
  // train rows decide the normalization band; row 0 carries a zero observed
  // metric and must vanish before the split
  ConfigDataset raw;
  raw.columns = {"x"};
  raw.values.resize(5, 1);
  raw.values << 99, 0, 10, 20, 40;
  raw.observed.resize(5);
  raw.observed << 0, 1, 2, 3, 4;
  raw.source_id = "prep";

  CvSchema schema;
  CvSpec x;
  x.name = "x";
  schema.cvs.push_back(x);

  SplitSpec spec;
  spec.ratio = 0.75;
  spec.seed = 2;
  PreparedSplit prep = prepare_split(raw, schema, spec);

  CHECK(prep.train.rows() == 3);  // ceil(0.75 * 4)
  CHECK(prep.test.rows() == 1);
  CHECK(prep.train.normalized);
  CHECK(prep.test.normalized);
  CHECK(prep.train_hash != prep.test_hash);

  // stats come from the train rows alone
  std::set<Scalar> train_vals;
  for (Index i = 0; i < prep.train.rows(); ++i) {
    train_vals.insert(prep.stats.denormalize_value(0, prep.train.values(i, 0)));
  }
  Scalar lo = *train_vals.begin();
  Scalar hi = *train_vals.rbegin();
  CHECK(prep.stats.cvs[0].raw_min == doctest::Approx(lo));
  CHECK(prep.stats.cvs[0].raw_max == doctest::Approx(hi));

  // every normalized value stays in the band even on the test side
  for (Index i = 0; i < prep.test.rows(); ++i) {
    CHECK(prep.test.values(i, 0) >= kEpsNorm);
    CHECK(prep.test.values(i, 0) <= 1.0);
  }

  SUBCASE("pre-normalized data only splits") {
    SynthSpec sspec;
    sspec.cvs = 2;
    sspec.rows = 20;
    sspec.seed = 5;
    auto [ds, truth] = generate(sspec);
    PreparedSplit p2 = prepare_split(ds, CvSchema{}, spec);
    CHECK(p2.train.rows() == 15);
    CHECK(p2.stats.cvs[0].raw_min == kEpsNorm);
    CHECK(p2.stats.cvs[0].raw_max == 1.0);
    // values pass through untouched
    CHECK(p2.train.values(0, 0) >= kEpsNorm);
  }
}

TEST_CASE("run_experiment fits clean synthetic data to near zero error") {
  SynthSpec sspec;
  sspec.cvs = 3;
  sspec.rows = 120;
  sspec.seed = 11;
  auto [ds, truth] = generate(sspec);

  TrainOptions topts;
  topts.max_epochs = 300;
  SplitSpec split_spec;
  split_spec.ratio = 0.8;
  split_spec.seed = 11;

  ExperimentResult result = run_experiment(ds, CvSchema{}, topts, split_spec);
  CHECK(result.report.n_train == 96);
  CHECK(result.report.n_test == 24);
  CHECK(result.report.eval.mse <= 1e-3);
  CHECK(result.report.runtime_ms > 0.0);
  CHECK(result.model.curves.size() == 3);
  CHECK(result.trace.mse.size() == static_cast<size_t>(result.model.meta.epochs));

  SUBCASE("same arguments, same result") {
    ExperimentResult again = run_experiment(ds, CvSchema{}, topts, split_spec);
    CHECK(again.report.eval.mse == result.report.eval.mse);
    CHECK(again.model.meta.final_mse == result.model.meta.final_mse);
    for (size_t m = 0; m < again.model.curves.size(); ++m) {
      CHECK(again.model.curves[m].eta == result.model.curves[m].eta);
    }
  }
}

TEST_CASE("artifact filenames") {
  CHECK(report_filename("data", 0.8, 7) == "data_0.8_7.report.csv");
  CHECK(report_filename("data", 0.75, 0) == "data_0.75_0.report.csv");
  CHECK(curve_filename("data", "cv3") == "data_cv3.curve.csv");
}

TEST_CASE("write_experiment_report matches the eval numbers") {
  ExperimentReport report;
  report.eval.H.resize(2);
  report.eval.H << 0.5, 0.8;
  report.eval.O.resize(2);
  report.eval.O << 0.6, 0.6;
  report.eval.mse = 0.025;
  report.eval.variance = 0.0001;
  report.n_train = 8;
  report.n_test = 2;
  report.runtime_ms = 12.5;

  auto path = fs::temp_directory_path() / "chi_experiment.csv";
  write_experiment_report(report, path);
  std::string text = read_all(path);
  CHECK(text.find("row,H,O,residual\n") == 0);
  CHECK(text.find("0,0.500000,0.600000,-0.100000\n") != std::string::npos);
  CHECK(text.find("1,0.800000,0.600000,0.200000\n") != std::string::npos);
  CHECK(text.find("mse=0.025000 variance=0.000100 n_train=8 n_test=2 runtime_ms=12.500000") !=
        std::string::npos);
}

TEST_CASE("emit_artifacts drops the full file set") {
  SynthSpec sspec;
  sspec.cvs = 2;
  sspec.rows = 40;
  sspec.seed = 21;
  auto [ds, truth] = generate(sspec);

  TrainOptions topts;
  topts.max_epochs = 50;
  SplitSpec split_spec;
  ExperimentResult result = run_experiment(ds, CvSchema{}, topts, split_spec);

  auto dir = fs::temp_directory_path() / "chi_artifacts";
  fs::remove_all(dir);
  ArtifactPaths paths = emit_artifacts(result, "unit", 0.8, 0, dir, 31, true);
  CHECK(fs::exists(paths.report));
  CHECK(fs::exists(paths.model));
  CHECK(fs::exists(paths.trace));
  REQUIRE(paths.curves.size() == 2);
  for (const auto& p : paths.curves) {
    CHECK(fs::exists(p));
    fs::path svg = p;
    svg.replace_extension(".svg");
    CHECK(fs::exists(svg));
    std::string body = read_all(svg);
    CHECK(body.find("<svg") != std::string::npos);
  }
  CHECK(paths.report.filename().string() == "unit_0.8_0.report.csv");

  // the model file round-trips
  HealthModel back = load_model(paths.model);
  CHECK(back.curves.size() == 2);

  // curve CSV: header plus at least 31 samples
  std::string curve_text = read_all(paths.curves[0]);
  CHECK(curve_text.find("cv,p_norm,h\n") == 0);
  CHECK(std::count(curve_text.begin(), curve_text.end(), '\n') >= 32);
}
