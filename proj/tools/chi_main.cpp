#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "chi/baselines.hpp"
#include "chi/dataset.hpp"
#include "chi/evaluation.hpp"
#include "chi/model.hpp"
#include "chi/schema.hpp"
#include "chi/synth.hpp"
#include "chi/training.hpp"
#include "chi/types.hpp"

namespace {

using namespace chi;
namespace fs = std::filesystem;

struct Args {
  std::string data;
  std::string schema;
  std::string model;
  std::string out;
  std::string target;
  Scalar ratio = 0.8;
  std::uint64_t seed = 0;
  Index seeds = 5;
  Index epochs = 500;
  Scalar alpha = 0.5;
  std::string objective = "plain";
  Scalar target_mse = 0.0;
  bool has_target_mse = false;
  std::vector<std::string> sets;
  Index cvs = 6;
  Index rows = 200;
  Scalar noise = 0.0;
  bool svg = false;
  bool verbose = false;
};

auto out_dir(const Args& a) -> fs::path {
  if (!a.out.empty()) return a.out;
  if (const char* env = std::getenv("CHI_OUT_DIR"); env != nullptr && *env != '\0') return env;
  return ".";
}

auto load_data(const Args& a) -> ConfigDataset {
  if (a.data.empty()) throw InputError("--data is required");
  CsvOptions opts;
  opts.target = a.target;
  return load_csv(a.data, opts);
}

auto load_schema_or_default(const Args& a) -> CvSchema {
  if (a.schema.empty()) {
    std::cerr << "warning: no schema given; CVs default to dominant, monotonic\n";
    return {};
  }
  return load_schema(a.schema);
}

auto train_options(const Args& a) -> TrainOptions {
  TrainOptions opts;
  opts.alpha = a.alpha;
  opts.max_epochs = a.epochs;
  opts.objective = objective_from_name(a.objective);
  opts.seed = a.seed;
  if (a.has_target_mse) opts.target_mse = a.target_mse;
  return opts;
}

struct Prepared {
  ConfigDataset norm;
  NormStats stats;
};

// Whole-dataset pipeline (no split): clean, fill, transform, normalize.
auto prepare_full(const ConfigDataset& raw, const CvSchema& schema) -> Prepared {
  if (raw.normalized) return {raw, identity_stats(raw)};
  ConfigDataset clean = drop_zero_observed(raw);
  auto fills = column_fill_values(clean, FillStrategy::Median);
  auto tags = schema.transforms_for(clean.columns);
  ConfigDataset transformed = apply_transform(fill_missing(clean, fills), tags);
  NormStats stats = fit_stats(transformed, tags, fills);
  return {normalize(transformed, stats), stats};
}

void print_findings(const std::vector<Finding>& findings) {
  for (const auto& f : findings) std::cerr << severity_name(f.severity) << ": " << f.message << "\n";
}

auto cmd_validate(const Args& a) -> int {
  ConfigDataset ds = load_data(a);
  CvSchema schema = a.schema.empty() ? CvSchema{} : load_schema(a.schema);
  auto findings = validate_schema(schema, ds);
  print_findings(findings);
  bool hard = false;
  for (const auto& f : findings) hard = hard || f.severity == Severity::Error;
  if (hard) return 2;
  std::cout << "ok: " << ds.rows() << " rows, " << ds.cols() << " CVs";
  if (ds.dropped_missing_observed > 0) {
    std::cout << " (" << ds.dropped_missing_observed << " rows without observed dropped)";
  }
  std::cout << "\n";
  return 0;
}

auto cmd_reduce(const Args& a) -> int {
  ConfigDataset raw = load_data(a);
  CvSchema schema = a.schema.empty() ? CvSchema{} : load_schema(a.schema);
  Prepared prep = prepare_full(raw, schema);
  ReductionReport report = pca_rank(prep.norm);
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
  for (const auto& e : report.entries) {
    std::cout << "cv=" << e.cv << " score=" << fmt6(e.score) << " rank=" << e.rank
              << " recommendation=" << e.recommendation << "\n";
  }
  fs::path dir = out_dir(a);
  fs::create_directories(dir);
  fs::path path = dir / (raw.source_id + "_reduction.csv");
  write_reduction_csv(report, path);
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

auto cmd_train(const Args& a) -> int {
  ConfigDataset raw = load_data(a);
  CvSchema schema = load_schema_or_default(a);
  std::vector<Finding> findings;
  CvSchema effective = effective_schema(schema, raw, &findings);
  print_findings(findings);

  Prepared prep = prepare_full(raw, effective);
  auto [model, trace] = fit(prep.norm, effective, train_options(a), &prep.stats);

  fs::path dir = out_dir(a);
  fs::create_directories(dir);
  fs::path model_path = a.model.empty() ? dir / (raw.source_id + ".model.json") : fs::path(a.model);
  save_model(model, model_path);
  fs::path trace_path = dir / (raw.source_id + ".trace.csv");
  write_trace_csv(trace, trace_path);
  for (const auto& curve : model.curves) {
    fs::path curve_path = dir / curve_filename(raw.source_id, curve.cv);
    write_curve_csv(curve, 101, curve_path);
    if (a.svg) {
      fs::path svg_path = curve_path;
      svg_path.replace_extension(".svg");
      write_curve_svg(curve, 101, svg_path);
    }
  }
  std::cout << "epochs=" << model.meta.epochs << " final_mse=" << fmt6(model.meta.final_mse)
            << " model=" << model_path.string() << "\n";
  return 0;
}

auto peek_columns(const std::string& path) -> std::vector<std::string> {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open dataset file: " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cols.push_back(cell);
    return cols;
  }
  return {};
}

auto cmd_score(const Args& a) -> int {
  if (a.model.empty()) throw InputError("--model is required");
  HealthModel model = load_model(a.model);

  ConfigDataset ds;
  bool single = !a.sets.empty();
  if (single) {
    ds.columns = model.stats.columns;
    ds.values.resize(1, static_cast<Index>(ds.columns.size()));
    for (Index j = 0; j < ds.cols(); ++j) ds.values(0, j) = model.stats.cvs[static_cast<size_t>(j)].fill;
    ds.observed = Vector::Constant(1, std::numeric_limits<Scalar>::quiet_NaN());
    ds.source_id = "set";
    for (const auto& kv : a.sets) {
      auto eq = kv.find('=');
      if (eq == std::string::npos) throw InputError("--set expects name=value, got '" + kv + "'");
      std::string name = kv.substr(0, eq);
      Index j = ds.column_index(name);
      if (j < 0) throw InputError("--set names unknown CV '" + name + "'");
      try {
        ds.values(0, j) = std::stod(kv.substr(eq + 1));
      } catch (const std::exception&) {
        throw InputError("--set value for '" + name + "' is not numeric");
      }
    }
  } else if (!a.data.empty()) {
    CsvOptions opts;
    opts.target = a.target;
    if (a.target.empty()) {
      auto header = peek_columns(a.data);
      // data without a target column: every header name is a model CV
      if (!header.empty() && model.stats.column(header.back()) >= 0) opts.no_target = true;
    }
    ds = load_csv(a.data, opts);
  } else {
    throw InputError("score needs --data or at least one --set");
  }

  ScoreResult result = score(model, ds);
  if (single) {
    std::cout << "H=" << fmt6(result.H(0)) << "\n";
    for (size_t m = 0; m < result.cvs.size(); ++m) {
      std::cout << "h[" << result.cvs[m] << "]=" << fmt6(result.h(0, static_cast<Index>(m))) << "\n";
    }
    return 0;
  }

  fs::path dir = out_dir(a);
  fs::create_directories(dir);
  fs::path path = dir / (ds.source_id + "_scored.csv");
  std::ofstream out(path);
  if (!out) throw InputError("cannot write scored file: " + path.string());
  out << "row,H";
  for (const auto& cv : result.cvs) out << ",h_" << cv;
  out << "\n";
  for (Index i = 0; i < result.H.size(); ++i) {
    out << i << "," << fmt6(result.H(i));
    for (Index m = 0; m < result.h.cols(); ++m) out << "," << fmt6(result.h(i, m));
    out << "\n";
  }
  std::cout << "scored " << result.H.size() << " rows\n";
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

auto cmd_eval(const Args& a) -> int {
  if (a.seeds < 1) throw InputError("--seeds must be at least 1");
  ConfigDataset raw = load_data(a);
  CvSchema schema = load_schema_or_default(a);
  fs::path dir = out_dir(a);
  fs::create_directories(dir);

  struct Run {
    std::uint64_t seed;
    ExperimentResult result;
  };
  std::vector<Run> runs;
  for (Index k = 0; k < a.seeds; ++k) {
    std::uint64_t seed = a.seed + static_cast<std::uint64_t>(k);
    TrainOptions topts = train_options(a);
    topts.seed = seed;
    SplitSpec sspec;
    sspec.ratio = a.ratio;
    sspec.seed = seed;
    ExperimentResult res = run_experiment(raw, schema, topts, sspec);
    fs::path path = dir / report_filename(raw.source_id, a.ratio, seed);
    write_experiment_report(res.report, path);
    std::cout << "seed=" << seed << " mse=" << fmt6(res.report.eval.mse)
              << " variance=" << fmt6(res.report.eval.variance) << "\n";
    runs.push_back({seed, std::move(res)});
  }

  std::vector<size_t> order(runs.size());
  for (size_t i = 0; i < runs.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&runs](size_t x, size_t y) {
    return runs[x].result.report.eval.mse < runs[y].result.report.eval.mse;
  });
  const Run& median = runs[order[(runs.size() - 1) / 2]];
  std::cout << "median seed=" << median.seed << " mse=" << fmt6(median.result.report.eval.mse)
            << " variance=" << fmt6(median.result.report.eval.variance)
            << " n_train=" << median.result.report.n_train
            << " n_test=" << median.result.report.n_test << "\n";
  return 0;
}

auto cmd_compare(const Args& a) -> int {
  ConfigDataset raw = load_data(a);
  CvSchema schema = load_schema_or_default(a);
  CompareOptions copts;
  copts.train = train_options(a);
  copts.ratio = a.ratio;
  copts.split_seed = a.seed;
  ComparisonReport report = compare(raw, schema, copts);

  for (const auto& row : report.rows) {
    std::cout << "method=" << row.method << " train_mse=" << fmt6(row.train_mse)
              << " test_mse=" << fmt6(row.test_mse) << " variance=" << fmt6(row.variance)
              << " ignored=";
    for (size_t i = 0; i < row.ignored.size(); ++i) {
      if (i > 0) std::cout << ";";
      std::cout << row.ignored[i];
    }
    std::cout << "\n";
  }
  fs::path dir = out_dir(a);
  fs::create_directories(dir);
  fs::path path = dir / (raw.source_id + "_compare.csv");
  write_comparison_csv(report, path);
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

auto cmd_synth(const Args& a) -> int {
  SynthSpec spec;
  spec.cvs = a.cvs;
  spec.rows = a.rows;
  spec.noise_sigma = a.noise;
  spec.seed = a.seed;
  auto [ds, truth] = generate(spec);

  fs::path dir = out_dir(a);
  fs::create_directories(dir);
  fs::path data_path = dir / "synth.csv";
  fs::path truth_path = dir / "synth.truth.json";
  write_csv(ds, data_path);
  save_model(truth, truth_path);
  std::cout << "wrote " << data_path.string() << "\n";
  std::cout << "wrote " << truth_path.string() << "\n";
  return 0;
}

}  // namespace

auto main(int argc, char** argv) -> int {
  CLI::App app{"chi: configuration health index toolkit"};
  app.require_subcommand(1);
  Args a;

  auto add_common = [&a](CLI::App* sub) {
    sub->add_option("--data", a.data, "dataset CSV");
    sub->add_option("--schema", a.schema, "schema JSON");
    sub->add_option("--out", a.out, "output directory (default: CHI_OUT_DIR or .)");
    sub->add_option("--target", a.target, "observed column name (default: last column)");
    sub->add_flag("-v,--verbose", a.verbose, "chatty diagnostics");
  };
  auto add_train_opts = [&a](CLI::App* sub) -> CLI::Option* {
    sub->add_option("--epochs", a.epochs, "training epochs");
    sub->add_option("--alpha", a.alpha, "learning rate");
    sub->add_option("--objective", a.objective, "plain|log")
        ->check(CLI::IsMember({"plain", "log"}));
    sub->add_option("--seed", a.seed, "random seed");
    return sub->add_option("--target-mse", a.target_mse, "early-stop MSE");
  };

  auto* validate = app.add_subcommand("validate", "check a dataset against a schema");
  add_common(validate);

  auto* reduce = app.add_subcommand("reduce", "advisory PCA importance ranking");
  add_common(reduce);

  auto* train = app.add_subcommand("train", "fit health curves on a dataset");
  add_common(train);
  auto* train_tm = add_train_opts(train);
  train->add_option("--model", a.model, "model output path");
  train->add_flag("--svg", a.svg, "emit curve SVGs next to the CSVs");

  auto* score = app.add_subcommand("score", "score configurations with a trained model");
  add_common(score);
  score->add_option("--model", a.model, "model file")->required();
  score->add_option("--set", a.sets, "single-row CV override, name=value (repeatable)");

  auto* eval = app.add_subcommand("eval", "split/train/test experiments over several seeds");
  add_common(eval);
  auto* eval_tm = add_train_opts(eval);
  eval->add_option("--ratio", a.ratio, "train fraction");
  eval->add_option("--seeds", a.seeds, "number of consecutive seeds");

  auto* cmp = app.add_subcommand("compare", "CHI vs OLS vs hinge baselines on one split");
  add_common(cmp);
  auto* cmp_tm = add_train_opts(cmp);
  cmp->add_option("--ratio", a.ratio, "train fraction");

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset + truth model");
  add_common(synth);
  synth->add_option("--cvs", a.cvs, "CV count");
  synth->add_option("--rows", a.rows, "row count");
  synth->add_option("--noise", a.noise, "Gaussian noise sigma on observed");
  synth->add_option("--seed", a.seed, "random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  a.has_target_mse = (train_tm->count() > 0) || (eval_tm->count() > 0) || (cmp_tm->count() > 0);

  try {
    if (validate->parsed()) return cmd_validate(a);
    if (reduce->parsed()) return cmd_reduce(a);
    if (train->parsed()) return cmd_train(a);
    if (score->parsed()) return cmd_score(a);
    if (eval->parsed()) return cmd_eval(a);
    if (cmp->parsed()) return cmd_compare(a);
    if (synth->parsed()) return cmd_synth(a);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
