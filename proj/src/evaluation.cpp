#include "chi/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

namespace chi {

auto split_indices(Index n, const SplitSpec& spec)
    -> std::pair<std::vector<Index>, std::vector<Index>> {
  if (!(spec.ratio > 0.0 && spec.ratio < 1.0)) {
    throw InputError("split ratio must lie strictly between 0 and 1");
  }
  if (n < 2) throw InputError("cannot split fewer than 2 rows");

  std::vector<Index> order(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  if (spec.shuffle) {
    std::mt19937_64 rng(spec.seed);
    for (Index i = n - 1; i > 0; --i) {
      auto j = static_cast<Index>(rng() % static_cast<std::uint64_t>(i + 1));
      std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
    }
  }

  auto n_train = static_cast<Index>(std::ceil(spec.ratio * static_cast<Scalar>(n)));
  if (n_train < 1 || n_train >= n) {
    throw InputError("split ratio " + std::to_string(spec.ratio) + " leaves an empty side for " +
                     std::to_string(n) + " rows");
  }
  std::vector<Index> train(order.begin(), order.begin() + n_train);
  std::vector<Index> test(order.begin() + n_train, order.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {std::move(train), std::move(test)};
}

auto take_rows(const ConfigDataset& ds, const std::vector<Index>& rows) -> ConfigDataset {
  ConfigDataset out = ds;
  out.values.resize(static_cast<Index>(rows.size()), ds.cols());
  out.observed.resize(static_cast<Index>(rows.size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    out.values.row(static_cast<Index>(i)) = ds.values.row(rows[i]);
    out.observed(static_cast<Index>(i)) = ds.observed(rows[i]);
  }
  return out;
}

auto split(const ConfigDataset& ds, const SplitSpec& spec)
    -> std::pair<ConfigDataset, ConfigDataset> {
  auto [train_idx, test_idx] = split_indices(ds.rows(), spec);
  return {take_rows(ds, train_idx), take_rows(ds, test_idx)};
}

auto index_hash(const std::vector<Index>& rows) -> std::uint64_t {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a over the index sequence
  for (Index i : rows) {
    h ^= static_cast<std::uint64_t>(i);
    h *= 1099511628211ull;
  }
  return h;
}

auto prepare_split(const ConfigDataset& raw, const CvSchema& schema, const SplitSpec& spec)
    -> PreparedSplit {
  ConfigDataset clean = raw.normalized ? raw : drop_zero_observed(raw);
  auto [train_idx, test_idx] = split_indices(clean.rows(), spec);

  PreparedSplit out;
  out.train_hash = index_hash(train_idx);
  out.test_hash = index_hash(test_idx);

  ConfigDataset train = take_rows(clean, train_idx);
  ConfigDataset test = take_rows(clean, test_idx);
  if (clean.normalized) {
    out.stats = identity_stats(clean);
    out.train = std::move(train);
    out.test = std::move(test);
    return out;
  }

  auto fills = column_fill_values(train, FillStrategy::Median);
  auto tags = schema.transforms_for(clean.columns);
  train = apply_transform(fill_missing(train, fills), tags);
  test = apply_transform(fill_missing(test, fills), tags);
  out.stats = fit_stats(train, tags, fills);
  out.train = normalize(train, out.stats);
  out.test = normalize(test, out.stats);
  return out;
}

auto run_experiment(const ConfigDataset& raw, const CvSchema& schema,
                    const TrainOptions& train_opts, const SplitSpec& split_spec)
    -> ExperimentResult {
  auto t0 = std::chrono::steady_clock::now();
  CvSchema effective = effective_schema(schema, raw);
  PreparedSplit ps = prepare_split(raw, effective, split_spec);

  ExperimentResult result;
  auto [model, trace] = fit(ps.train, effective, train_opts, &ps.stats);
  result.model = std::move(model);
  result.trace = std::move(trace);
  result.report.eval = evaluate_holdout(result.model, ps.test, train_opts.objective);
  result.report.n_train = ps.train.rows();
  result.report.n_test = ps.test.rows();
  result.report.runtime_ms =
      std::chrono::duration<Scalar, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

namespace {

auto ratio_label(Scalar ratio) -> std::string {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", ratio);
  return buf;
}

}  // namespace

auto report_filename(const std::string& dataset, Scalar ratio, std::uint64_t seed) -> std::string {
  return dataset + "_" + ratio_label(ratio) + "_" + std::to_string(seed) + ".report.csv";
}

auto curve_filename(const std::string& dataset, const std::string& cv) -> std::string {
  return dataset + "_" + cv + ".curve.csv";
}

void write_experiment_report(const ExperimentReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write report file: " + path.string());
  out << "row,H,O,residual\n";
  const EvalReport& ev = report.eval;
  for (Index n = 0; n < ev.H.size(); ++n) {
    Scalar resid = ev.objective == Objective::Plain
                       ? ev.H(n) - ev.O(n)
                       : std::log(ev.H(n)) - std::log(ev.O(n));
    out << n << "," << fmt6(ev.H(n)) << "," << fmt6(ev.O(n)) << "," << fmt6(resid) << "\n";
  }
  out << "mse=" << fmt6(ev.mse) << " variance=" << fmt6(ev.variance)
      << " n_train=" << report.n_train << " n_test=" << report.n_test
      << " runtime_ms=" << fmt6(report.runtime_ms) << "\n";
}

auto emit_artifacts(const ExperimentResult& result, const std::string& dataset, Scalar ratio,
                    std::uint64_t seed, const std::filesystem::path& out_dir, Index curve_points,
                    bool svg) -> ArtifactPaths {
  std::filesystem::create_directories(out_dir);
  ArtifactPaths paths;
  std::string stem = dataset + "_" + ratio_label(ratio) + "_" + std::to_string(seed);

  paths.report = out_dir / report_filename(dataset, ratio, seed);
  write_experiment_report(result.report, paths.report);

  paths.model = out_dir / (stem + ".model.json");
  save_model(result.model, paths.model);

  paths.trace = out_dir / (stem + ".trace.csv");
  write_trace_csv(result.trace, paths.trace);

  for (const auto& curve : result.model.curves) {
    auto curve_path = out_dir / curve_filename(dataset, curve.cv);
    write_curve_csv(curve, curve_points, curve_path);
    paths.curves.push_back(curve_path);
    if (svg) {
      auto svg_path = curve_path;
      svg_path.replace_extension(".svg");
      write_curve_svg(curve, curve_points, svg_path);
    }
  }
  return paths;
}

void write_curve_svg(const CvCurve& curve, Index n_points, const std::filesystem::path& path) {
  const int width = 480;
  const int height = 320;
  const int margin = 40;
  auto x_px = [&](Scalar p) { return margin + p * (width - 2 * margin); };
  auto y_px = [&](Scalar h) { return height - margin - h * (height - 2 * margin); };

  std::ofstream out(path);
  if (!out) throw InputError("cannot write SVG file: " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "  <line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\"" << width - margin
      << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
  out << "  <line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
      << height - margin << "\" stroke=\"black\"/>\n";
  out << "  <polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
  for (const auto& [p, h] : curve_samples(curve, n_points)) {
    out << fmt6(x_px(p)) << "," << fmt6(y_px(h)) << " ";
  }
  out << "\"/>\n";
  out << "  <text x=\"" << width / 2 << "\" y=\"" << height - 10
      << "\" text-anchor=\"middle\" font-size=\"12\">" << curve.cv << " (normalized)</text>\n";
  out << "  <text x=\"15\" y=\"" << height / 2
      << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 15 " << height / 2
      << ")\">h</text>\n";
  out << "</svg>\n";
}

}  // namespace chi
