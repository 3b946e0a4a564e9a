#include "chi/baselines.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace chi {

namespace {

constexpr Scalar kJitter = 1e-8;
constexpr Scalar kIgnoreThreshold = 1e-6;

// Least squares over an explicit design matrix (first column expected 1s).
auto solve_normal(const Matrix& A, const Vector& Y) -> Vector {
  Matrix gram = A.transpose() * A;
  gram.diagonal().array() += kJitter;
  Vector beta = gram.ldlt().solve(A.transpose() * Y);
  if (!beta.allFinite()) throw TrainingError("least squares solve failed: singular system");
  return beta;
}

auto hinge_value(Scalar x, Scalar knot, int sign) -> Scalar {
  return sign > 0 ? std::max(0.0, x - knot) : std::max(0.0, knot - x);
}

// Deduplicated knots at the 0.1..0.9 quantiles of one column.
auto quantile_knots(const Matrix& X, Index col) -> std::vector<Scalar> {
  const Index n = X.rows();
  std::vector<Scalar> sorted(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) sorted[static_cast<size_t>(i)] = X(i, col);
  std::sort(sorted.begin(), sorted.end());
  std::vector<Scalar> knots;
  for (int q = 1; q <= 9; ++q) {
    Scalar pos = 0.1 * q * static_cast<Scalar>(n - 1);
    auto lo = static_cast<Index>(pos);
    Scalar frac = pos - static_cast<Scalar>(lo);
    Scalar k = lo + 1 < n
                   ? sorted[static_cast<size_t>(lo)] * (1.0 - frac) +
                         sorted[static_cast<size_t>(lo + 1)] * frac
                   : sorted[static_cast<size_t>(lo)];
    if (knots.empty() || k != knots.back()) knots.push_back(k);
  }
  return knots;
}

auto squared_error_mean(const Vector& pred, const Vector& obs) -> Scalar {
  return (pred - obs).squaredNorm() / static_cast<Scalar>(obs.size());
}

// (mse, population variance of squared residuals) for one prediction vector.
auto residual_stats(const Vector& pred, const Vector& obs) -> std::pair<Scalar, Scalar> {
  const Index n = obs.size();
  Scalar m = squared_error_mean(pred, obs);
  Scalar var = 0.0;
  for (Index i = 0; i < n; ++i) {
    Scalar q = (pred(i) - obs(i)) * (pred(i) - obs(i));
    var += (q - m) * (q - m);
  }
  return {m, var / static_cast<Scalar>(n)};
}

}  // namespace

auto ols_fit(const Matrix& X, const Vector& Y) -> LinearModel {
  const Index n = X.rows();
  const Index l = X.cols();
  if (n < 1) throw InputError("ols_fit: empty dataset");
  if (Y.size() != n) throw InputError("ols_fit: row count mismatch");

  LinearModel model;
  if (n < l + 1) {
    model.warnings.push_back("fewer rows (" + std::to_string(n) + ") than coefficients (" +
                             std::to_string(l + 1) + "); fit is underdetermined");
  }

  std::vector<Index> kept;
  for (Index j = 0; j < l; ++j) {
    if (X.col(j).minCoeff() == X.col(j).maxCoeff()) {
      model.dropped.push_back(j);
    } else {
      kept.push_back(j);
    }
  }

  Matrix A(n, static_cast<Index>(kept.size()) + 1);
  A.col(0).setOnes();
  for (size_t k = 0; k < kept.size(); ++k) A.col(static_cast<Index>(k) + 1) = X.col(kept[k]);
  Vector sol = solve_normal(A, Y);

  model.beta = Vector::Zero(l + 1);
  model.beta(0) = sol(0);
  for (size_t k = 0; k < kept.size(); ++k) model.beta(kept[k] + 1) = sol(static_cast<Index>(k) + 1);
  return model;
}

auto ols_predict(const LinearModel& model, const Matrix& X) -> Vector {
  if (X.cols() + 1 != model.beta.size()) throw InputError("ols_predict: column count mismatch");
  return Vector::Constant(X.rows(), model.beta(0)) + X * model.beta.tail(X.cols());
}

auto hinge_fit(const Matrix& X, const Vector& Y, Index max_terms, Scalar min_improvement)
    -> HingeModel {
  if (max_terms < 1) throw InputError("hinge_fit: max_terms must be at least 1");
  const Index n = X.rows();
  const Index l = X.cols();
  if (n < 1) throw InputError("hinge_fit: empty dataset");
  if (Y.size() != n) throw InputError("hinge_fit: row count mismatch");

  HingeModel model;
  model.intercept = Y.mean();
  Scalar current_mse = (Y.array() - model.intercept).square().mean();

  std::vector<std::vector<Scalar>> knots(static_cast<size_t>(l));
  for (Index j = 0; j < l; ++j) {
    if (X.col(j).minCoeff() < X.col(j).maxCoeff()) {
      knots[static_cast<size_t>(j)] = quantile_knots(X, j);
    }
  }

  Matrix basis(n, 0);
  while (static_cast<Index>(model.terms.size()) + 2 <= max_terms) {
    Scalar best_mse = std::numeric_limits<Scalar>::infinity();
    Index best_cv = -1;
    Scalar best_knot = 0.0;
    Vector best_beta;

    Matrix trial(n, basis.cols() + 3);
    trial.col(0).setOnes();
    trial.middleCols(1, basis.cols()) = basis;
    for (Index j = 0; j < l; ++j) {
      for (Scalar knot : knots[static_cast<size_t>(j)]) {
        for (Index i = 0; i < n; ++i) {
          trial(i, basis.cols() + 1) = hinge_value(X(i, j), knot, 1);
          trial(i, basis.cols() + 2) = hinge_value(X(i, j), knot, -1);
        }
        Vector beta = solve_normal(trial, Y);
        Scalar cand_mse = squared_error_mean(trial * beta, Y);
        if (cand_mse < best_mse) {
          best_mse = cand_mse;
          best_cv = j;
          best_knot = knot;
          best_beta = beta;
        }
      }
    }

    if (best_cv < 0 || current_mse - best_mse < min_improvement) break;

    Matrix grown(n, basis.cols() + 2);
    grown.leftCols(basis.cols()) = basis;
    for (Index i = 0; i < n; ++i) {
      grown(i, basis.cols()) = hinge_value(X(i, best_cv), best_knot, 1);
      grown(i, basis.cols() + 1) = hinge_value(X(i, best_cv), best_knot, -1);
    }
    basis = std::move(grown);

    model.terms.push_back({best_cv, best_knot, 1, 0.0});
    model.terms.push_back({best_cv, best_knot, -1, 0.0});
    model.intercept = best_beta(0);
    for (size_t t = 0; t < model.terms.size(); ++t) {
      model.terms[t].coef = best_beta(static_cast<Index>(t) + 1);
    }
    current_mse = best_mse;
    model.train_mse.push_back(current_mse);
  }
  return model;
}

auto hinge_predict(const HingeModel& model, const Matrix& X) -> Vector {
  Vector out = Vector::Constant(X.rows(), model.intercept);
  for (const auto& term : model.terms) {
    if (term.cv >= X.cols()) throw InputError("hinge_predict: column count mismatch");
    for (Index i = 0; i < X.rows(); ++i) {
      out(i) += term.coef * hinge_value(X(i, term.cv), term.knot, term.sign);
    }
  }
  return out;
}

auto chi_influence(const HealthModel& model) -> std::vector<std::pair<std::string, Scalar>> {
  std::vector<std::pair<std::string, Scalar>> out;
  out.reserve(model.curves.size());
  for (const auto& c : model.curves) {
    out.emplace_back(c.cv, curve_health(c, 1.0) - curve_health(c, kEpsNorm));
  }
  return out;
}

auto compare(const ConfigDataset& ds, const CvSchema& schema, const CompareOptions& opts)
    -> ComparisonReport {
  CvSchema effective = effective_schema(schema, ds);
  SplitSpec split_spec;
  split_spec.ratio = opts.ratio;
  split_spec.seed = opts.split_seed;
  PreparedSplit ps = prepare_split(ds, effective, split_spec);
  std::uint64_t split_hash = ps.train_hash ^ (ps.test_hash * 0x9E3779B97F4A7C15ull);

  ComparisonReport report;

  {
    auto [model, trace] = fit(ps.train, effective, opts.train, &ps.stats);
    EvalReport on_train = evaluate_holdout(model, ps.train, opts.train.objective);
    EvalReport on_test = evaluate_holdout(model, ps.test, opts.train.objective);
    MethodRow row{"chi", on_train.mse, on_test.mse, on_test.variance, {}, split_hash};
    std::vector<std::string> modeled;
    for (const auto& [cv, influence] : chi_influence(model)) {
      modeled.push_back(cv);
      if (std::abs(influence) < kIgnoreThreshold) row.ignored.push_back(cv);
    }
    for (const auto& col : ds.columns) {  // CVs the schema keeps out of the model
      if (std::find(modeled.begin(), modeled.end(), col) == modeled.end()) {
        row.ignored.push_back(col);
      }
    }
    report.rows.push_back(std::move(row));
  }

  {
    LinearModel lin = ols_fit(ps.train.values, ps.train.observed);
    auto [train_mse, train_var] = residual_stats(ols_predict(lin, ps.train.values), ps.train.observed);
    auto [test_mse, test_var] = residual_stats(ols_predict(lin, ps.test.values), ps.test.observed);
    static_cast<void>(train_var);
    MethodRow row{"ols", train_mse, test_mse, test_var, {}, split_hash};
    for (Index j = 0; j < ds.cols(); ++j) {
      if (std::abs(lin.beta(j + 1)) < kIgnoreThreshold) {
        row.ignored.push_back(ds.columns[static_cast<size_t>(j)]);
      }
    }
    report.rows.push_back(std::move(row));
  }

  {
    HingeModel hm = hinge_fit(ps.train.values, ps.train.observed, opts.max_terms,
                              opts.min_improvement);
    auto [train_mse, train_var] = residual_stats(hinge_predict(hm, ps.train.values), ps.train.observed);
    auto [test_mse, test_var] = residual_stats(hinge_predict(hm, ps.test.values), ps.test.observed);
    static_cast<void>(train_var);
    MethodRow row{"hinge", train_mse, test_mse, test_var, {}, split_hash};
    for (Index j = 0; j < ds.cols(); ++j) {
      Scalar influence = 0.0;
      for (const auto& term : hm.terms) {
        if (term.cv == j) influence += std::abs(term.coef);
      }
      if (influence < kIgnoreThreshold) row.ignored.push_back(ds.columns[static_cast<size_t>(j)]);
    }
    report.rows.push_back(std::move(row));
  }

  for (const auto& row : report.rows) {
    if (row.split_hash != split_hash) throw TrainingError("compare: split hash mismatch");
  }
  return report;
}

void write_comparison_csv(const ComparisonReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write comparison file: " + path.string());
  out << "method,train_mse,test_mse,variance,ignored_cvs\n";
  for (const auto& row : report.rows) {
    out << row.method << "," << fmt6(row.train_mse) << "," << fmt6(row.test_mse) << ","
        << fmt6(row.variance) << ",";
    for (size_t i = 0; i < row.ignored.size(); ++i) {
      if (i > 0) out << ";";
      out << row.ignored[i];
    }
    out << "\n";
  }
}

}  // namespace chi
