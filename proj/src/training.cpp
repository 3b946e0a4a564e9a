#include "chi/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>

namespace chi {

namespace {

constexpr Index kModeRefreshEvery = 25;
constexpr Index kDivergenceLimit = 10;

auto count_active(const std::vector<CvCurve>& curves) -> Index {
  Index n = 0;
  for (const auto& c : curves) {
    if (!c.inert) ++n;
  }
  return n;
}

auto residual(Scalar H, Scalar O, Objective obj) -> Scalar {
  return obj == Objective::Plain ? H - O : std::log(H) - std::log(O);
}

auto squared_residual(Scalar H, Scalar O, Objective obj) -> Scalar {
  Scalar r = residual(H, O, obj);
  return r * r;
}

// d(residual^2)/dH without the factor 2.
auto residual_slope(Scalar H, Scalar O, Objective obj) -> Scalar {
  return obj == Objective::Plain ? H - O : (std::log(H) - std::log(O)) / H;
}

// Forward pass for one row; when g is set, adds the chain products
// 2*scale*(dMSE term)*(H/(L h_m))*leak*dh/dparam into it. Returns H.
auto row_pass(const Vector& row, Scalar O, const std::vector<CvCurve>& curves,
              const ModelLayout& layout, const Vector& offsets, Objective obj, Scalar scale,
              Index active, Index row_index, Vector* g, Vector& hrow) -> Scalar {
  Vector resolved = resolve_dependents(row, layout, offsets);
  Scalar H = score_resolved(curves, resolved, &hrow);
  if (g == nullptr) return H;

  const Index P = static_cast<Index>(curves.size());
  Scalar dmse = 2.0 * scale * residual_slope(H, O, obj);
  for (Index m = 0; m < P; ++m) {
    const CvCurve& c = curves[static_cast<size_t>(m)];
    if (c.inert) continue;
    Scalar p = resolved(m);
    Scalar raw = curve_health_raw(c, p);
    Scalar leak = raw < kEpsHealth ? kLeakSlope : 1.0;
    Scalar chain = dmse * H / (static_cast<Scalar>(active) * hrow(m)) * leak;
    Scalar ge = chain * curve_grad_eta(c, p);
    Scalar gg = chain * curve_grad_gamma(c, p);
    if (std::isnan(ge) || std::isnan(gg)) {
      throw TrainingError("NaN gradient at row " + std::to_string(row_index) + ", CV '" + c.cv +
                          "'");
    }
    (*g)(m) += ge;
    (*g)(P + m) += gg;

    const LayoutEntry& e = layout.entries[static_cast<size_t>(m)];
    if (e.weak_slot >= 0) {
      Scalar fval = e.a * row(e.parent_column) + e.b;
      Scalar pred = fval * (1.0 + offsets(e.weak_slot));
      if (pred > kEpsNorm && pred < 1.0) {  // clamped predictions take no gradient
        Scalar gr = chain * curve_slope(c, p) * fval;
        if (std::isnan(gr)) {
          throw TrainingError("NaN gradient at row " + std::to_string(row_index) + ", CV '" +
                              c.cv + "'");
        }
        (*g)(2 * P + e.weak_slot) += gr;
      }
    }
  }
  return H;
}

// Training MSE; fills the batch gradient as a side effect when g is set.
auto forward_stats(const Matrix& values, const Vector& observed,
                   const std::vector<CvCurve>& curves, const ModelLayout& layout,
                   const Vector& offsets, Objective obj, Vector* g) -> Scalar {
  const Index N = values.rows();
  if (observed.size() != N) throw InputError("row count mismatch between values and observed");
  if (N < 1) throw InputError("empty dataset");
  Index active = count_active(curves);
  Scalar scale = 1.0 / static_cast<Scalar>(N);
  Scalar sum = 0.0;
  Vector hrow;
  for (Index n = 0; n < N; ++n) {
    Scalar H = row_pass(values.row(n).transpose(), observed(n), curves, layout, offsets, obj,
                        scale, active, n, g, hrow);
    sum += squared_residual(H, observed(n), obj);
  }
  return sum / static_cast<Scalar>(N);
}

void clamp_all(std::vector<CvCurve>& curves, const ModelLayout& layout, Vector& offsets,
               const TrainOptions& opts) {
  for (auto& c : curves) {
    c.eta = std::clamp(c.eta, opts.eta_lo, opts.eta_hi);
    c.gamma = std::clamp(c.gamma, 0.0, opts.gamma_hi);
  }
  for (const auto& e : layout.entries) {
    if (e.weak_slot >= 0) offsets(e.weak_slot) = std::clamp(offsets(e.weak_slot), -e.radius, e.radius);
  }
}

// Grid refresh of every unimodal CV's p_mode, holding everything else fixed.
// Per-row log sums are cached so each candidate costs one column, not a full
// forward pass. Ties keep the current mode (the current value goes first).
void refresh_modes(const Matrix& values, const Vector& observed, std::vector<CvCurve>& curves,
                   const ModelLayout& layout, const Vector& offsets, const TrainOptions& opts) {
  const Index N = values.rows();
  const Index P = static_cast<Index>(curves.size());
  const Index active = count_active(curves);
  bool any = false;
  for (const auto& c : curves) any = any || (c.shape == CvShape::Unimodal && !c.inert);
  if (!any || active == 0) return;

  Matrix resolved(N, P);
  for (Index n = 0; n < N; ++n) {
    resolved.row(n) = resolve_dependents(values.row(n).transpose(), layout, offsets).transpose();
  }
  Matrix lnh = Matrix::Zero(N, P);
  Vector total = Vector::Zero(N);
  for (Index m = 0; m < P; ++m) {
    if (curves[static_cast<size_t>(m)].inert) continue;
    for (Index n = 0; n < N; ++n) {
      lnh(n, m) = std::log(curve_health(curves[static_cast<size_t>(m)], resolved(n, m)));
      total(n) += lnh(n, m);
    }
  }

  for (Index m = 0; m < P; ++m) {
    CvCurve& c = curves[static_cast<size_t>(m)];
    if (c.shape != CvShape::Unimodal || c.inert) continue;

    std::vector<Scalar> modes{c.p_mode};
    for (Index i = 1; i <= opts.mode_grid; ++i) {
      modes.push_back(c.lo + (c.hi - c.lo) * static_cast<Scalar>(i) /
                                 static_cast<Scalar>(opts.mode_grid + 1));
    }
    // All three shape knobs are coupled: judged at the old eta/gamma, the
    // true mode often loses to the incumbent and the curve locks in place.
    // Scan coarse eta and gamma grids alongside the mode candidates; other
    // curves are frozen in the cached log sums, so the scan objective is the
    // exact epoch MSE and a strict-improvement commit never raises it.
    // Gradient descent refines the winning triple between refreshes.
    std::vector<Scalar> gammas{c.gamma};
    for (Scalar g = 0.05; g < opts.gamma_hi; g += 0.15) gammas.push_back(g);
    std::vector<Scalar> etas{c.eta};
    for (Scalar e = 0.5; e <= 16.0; e *= 2.0) {
      if (e >= opts.eta_lo && e <= opts.eta_hi) etas.push_back(e);
    }

    auto trial_mse = [&](const CvCurve& trial) {
      Scalar sum = 0.0;
      for (Index n = 0; n < N; ++n) {
        Scalar ln_new = std::log(curve_health(trial, resolved(n, m)));
        Scalar H = std::exp((total(n) - lnh(n, m) + ln_new) / static_cast<Scalar>(active));
        sum += squared_residual(H, observed(n), opts.objective);
      }
      return sum / static_cast<Scalar>(N);
    };

    CvCurve best = c;
    Scalar best_mse = trial_mse(c);
    const Scalar incumbent_mse = best_mse;

    // A row's residual depends on eta only on the rising side of the mode and
    // on gamma only on the falling side, so one pass over the rows yields
    // per-axis partial sums and every (eta, gamma) pair follows by addition.
    // The incumbent leads both axis lists, so degenerate ties (e.g. no rows
    // past the candidate mode) keep the current values.
    auto scan = [&](const std::vector<Scalar>& mode_list) {
      std::vector<Scalar> rise(etas.size());
      std::vector<Scalar> fall(gammas.size());
      for (Scalar cand : mode_list) {
        std::fill(rise.begin(), rise.end(), 0.0);
        std::fill(fall.begin(), fall.end(), 0.0);
        CvCurve trial = c;
        trial.p_mode = cand;
        for (Index n = 0; n < N; ++n) {
          const Scalar p = resolved(n, m);
          const Scalar rest = total(n) - lnh(n, m);
          auto residual = [&](Scalar h) {
            Scalar H = std::exp((rest + std::log(h)) / static_cast<Scalar>(active));
            return squared_residual(H, observed(n), opts.objective);
          };
          if (p <= cand) {
            for (std::size_t e = 0; e < etas.size(); ++e) {
              trial.eta = etas[e];
              rise[e] += residual(curve_health(trial, p));
            }
          } else {
            for (std::size_t g = 0; g < gammas.size(); ++g) {
              trial.gamma = gammas[g];
              fall[g] += residual(curve_health(trial, p));
            }
          }
        }
        for (std::size_t e = 0; e < etas.size(); ++e) {
          for (std::size_t g = 0; g < gammas.size(); ++g) {
            Scalar cand_mse = (rise[e] + fall[g]) / static_cast<Scalar>(N);
            if (cand_mse < best_mse) {
              best_mse = cand_mse;
              best = c;
              best.p_mode = cand;
              best.eta = etas[e];
              best.gamma = gammas[g];
            }
          }
        }
      }
    };
    scan(modes);

    // second pass at quarter-step resolution around the coarse winner; the
    // coarse grid alone leaves the mode pinned up to half a step off
    const Scalar step = (c.hi - c.lo) / static_cast<Scalar>(opts.mode_grid + 1);
    std::vector<Scalar> fine;
    for (int k = -4; k <= 4; ++k) {
      if (k == 0) continue;
      Scalar cand = best.p_mode + static_cast<Scalar>(k) * step / 4.0;
      if (cand > c.lo && cand < c.hi) fine.push_back(cand);
    }
    scan(fine);

    if (best_mse < incumbent_mse) {
      c = best;
      for (Index n = 0; n < N; ++n) {
        Scalar ln_new = std::log(curve_health(c, resolved(n, m)));
        total(n) += ln_new - lnh(n, m);
        lnh(n, m) = ln_new;
      }
    }
  }
}

}  // namespace

auto objective_name(Objective o) -> std::string {
  return o == Objective::Log ? "log" : "plain";
}

auto objective_from_name(const std::string& name) -> Objective {
  if (name == "plain") return Objective::Plain;
  if (name == "log") return Objective::Log;
  throw InputError("unknown objective '" + name + "' (expected plain or log)");
}

auto mse(const Vector& H, const Vector& O, Objective objective) -> Scalar {
  if (H.size() != O.size()) throw InputError("mse: H and O lengths differ");
  if (H.size() < 1) throw InputError("mse: empty vectors");
  Scalar sum = 0.0;
  for (Index n = 0; n < H.size(); ++n) sum += squared_residual(H(n), O(n), objective);
  return sum / static_cast<Scalar>(H.size());
}

auto pack_params(const std::vector<CvCurve>& curves, const ModelLayout& layout,
                 const Vector& offsets) -> Vector {
  const Index P = static_cast<Index>(curves.size());
  Vector out(2 * P + layout.weak_count);
  for (Index m = 0; m < P; ++m) {
    out(m) = curves[static_cast<size_t>(m)].eta;
    out(P + m) = curves[static_cast<size_t>(m)].gamma;
  }
  for (Index k = 0; k < layout.weak_count; ++k) out(2 * P + k) = offsets(k);
  return out;
}

auto training_mse(const Matrix& values, const Vector& observed,
                  const std::vector<CvCurve>& curves, const ModelLayout& layout,
                  const Vector& offsets, Objective objective) -> Scalar {
  return forward_stats(values, observed, curves, layout, offsets, objective, nullptr);
}

auto grad_params(const Matrix& values, const Vector& observed,
                 const std::vector<CvCurve>& curves, const ModelLayout& layout,
                 const Vector& offsets, Objective objective) -> Vector {
  Vector g = Vector::Zero(2 * static_cast<Index>(curves.size()) + layout.weak_count);
  forward_stats(values, observed, curves, layout, offsets, objective, &g);
  return g;
}

auto fit(const ConfigDataset& ds, const CvSchema& schema, const TrainOptions& opts,
         const NormStats* stats_in) -> std::pair<HealthModel, TrainTrace> {
  auto t0 = std::chrono::steady_clock::now();
  if (!(opts.alpha > 0.0)) throw InputError("alpha must be positive");
  if (opts.max_epochs < 1) throw InputError("max_epochs must be at least 1");
  if (opts.mode_grid < 3) throw InputError("mode_grid must be at least 3");
  if (!ds.normalized) {
    throw InputError("fit expects normalized data; run the preparation pipeline first");
  }
  if (ds.rows() < 1) throw InputError("fit: empty dataset");

  NormStats stats = stats_in != nullptr ? *stats_in : identity_stats(ds);
  if (stats.columns != ds.columns) {
    throw InputError("normalization stats do not match dataset columns");
  }
  ModelLayout layout = build_layout(schema, stats);

  std::vector<CvCurve> curves;
  curves.reserve(layout.entries.size());
  for (const auto& e : layout.entries) {
    CvCurve c;
    c.cv = e.name;
    c.shape = e.shape;
    c.lo = e.lo;
    c.hi = e.hi;
    c.inert = e.degenerate;
    c.p_mode = 0.5 * (e.lo + e.hi);
    curves.push_back(std::move(c));
  }
  Vector offsets = Vector::Zero(layout.weak_count);

  const Index P = layout.size();
  const Index N = ds.rows();
  const Index active = count_active(curves);

  TrainTrace trace;
  trace.mse.reserve(static_cast<size_t>(opts.max_epochs));
  trace.max_grad.reserve(static_cast<size_t>(opts.max_epochs));

  Scalar initial_mse =
      training_mse(ds.values, ds.observed, curves, layout, offsets, opts.objective);
  std::vector<CvCurve> best_curves = curves;
  Vector best_offsets = offsets;
  Scalar best_mse = initial_mse;

  Vector g(2 * P + layout.weak_count);
  Vector hrow;
  Index diverge_streak = 0;
  Index epochs_run = 0;

  for (Index epoch = 1; epoch <= opts.max_epochs; ++epoch) {
    for (Index n = 0; n < N; ++n) {
      g.setZero();
      row_pass(ds.values.row(n).transpose(), ds.observed(n), curves, layout, offsets,
               opts.objective, 1.0, active, n, &g, hrow);
      for (Index m = 0; m < P; ++m) {
        curves[static_cast<size_t>(m)].eta -= opts.alpha * g(m);
        curves[static_cast<size_t>(m)].gamma -= opts.alpha * g(P + m);
      }
      for (Index k = 0; k < layout.weak_count; ++k) offsets(k) -= opts.alpha * g(2 * P + k);
      clamp_all(curves, layout, offsets, opts);
    }

    // refresh once right after the first epoch, before eta/gamma can
    // compensate for a badly placed mode, then on the regular cadence
    if (epoch == 1 || epoch % kModeRefreshEvery == 0) {
      refresh_modes(ds.values, ds.observed, curves, layout, offsets, opts);
    }

    g.setZero();
    Scalar epoch_mse =
        forward_stats(ds.values, ds.observed, curves, layout, offsets, opts.objective, &g);
    trace.mse.push_back(epoch_mse);
    trace.max_grad.push_back(g.cwiseAbs().maxCoeff());
    ++epochs_run;

    if (epoch_mse < best_mse) {
      best_mse = epoch_mse;
      best_curves = curves;
      best_offsets = offsets;
    }
    if (opts.target_mse && epoch_mse <= *opts.target_mse) break;
    if (epoch_mse > 10.0 * initial_mse) {
      if (++diverge_streak >= kDivergenceLimit) {
        throw TrainingError(
            "training diverged: MSE stayed above 10x the initial value for 10 consecutive "
            "epochs; try a smaller learning rate alpha");
      }
    } else {
      diverge_streak = 0;
    }
  }

  HealthModel model;
  model.curves = best_curves;
  for (const auto& e : layout.entries) {
    if (e.weak_slot < 0) continue;
    WeakLink w;
    w.cv = e.name;
    w.parent = stats.columns[static_cast<size_t>(e.parent_column)];
    w.a = e.a;
    w.b = e.b;
    w.radius = e.radius;
    w.r = best_offsets(e.weak_slot);
    model.weak.push_back(std::move(w));
  }
  model.stats = stats;
  model.meta.epochs = epochs_run;
  model.meta.final_mse = best_mse;
  model.meta.seed = opts.seed;

  trace.params = pack_params(best_curves, layout, best_offsets);
  trace.duration_seconds =
      std::chrono::duration<Scalar>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(model), std::move(trace)};
}

auto evaluate_holdout(const HealthModel& model, const ConfigDataset& test, Objective objective)
    -> EvalReport {
  if (test.rows() < 1) throw InputError("evaluate: empty test split");
  ScoreResult scored = score(model, test);

  EvalReport report;
  report.objective = objective;
  report.H = scored.H;
  report.O = test.observed;
  const Index N = test.rows();
  Scalar sum = 0.0;
  for (Index n = 0; n < N; ++n) sum += squared_residual(report.H(n), report.O(n), objective);
  report.mse = sum / static_cast<Scalar>(N);
  Scalar var = 0.0;
  for (Index n = 0; n < N; ++n) {
    Scalar q = squared_residual(report.H(n), report.O(n), objective);
    var += (q - report.mse) * (q - report.mse);
  }
  report.variance = var / static_cast<Scalar>(N);
  return report;
}

void write_trace_csv(const TrainTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write trace file: " + path.string());
  out << "epoch,mse,max_grad\n";
  for (size_t i = 0; i < trace.mse.size(); ++i) {
    out << (i + 1) << "," << fmt6(trace.mse[i]) << "," << fmt6(trace.max_grad[i]) << "\n";
  }
}

void write_eval_report(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write eval report: " + path.string());
  out << "row,H,O,residual\n";
  for (Index n = 0; n < report.H.size(); ++n) {
    out << n << "," << fmt6(report.H(n)) << "," << fmt6(report.O(n)) << ","
        << fmt6(residual(report.H(n), report.O(n), report.objective)) << "\n";
  }
  out << "mse=" << fmt6(report.mse) << " variance=" << fmt6(report.variance) << "\n";
}

}  // namespace chi
