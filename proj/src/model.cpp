#include "chi/model.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>

namespace chi {

using nlohmann::json;

namespace {

auto clamp01(Scalar x) -> Scalar { return std::clamp(x, 0.0, 1.0); }

void check_inputs(const CvCurve& c, Scalar p) {
  if (std::isnan(p) || std::isnan(c.eta) || std::isnan(c.gamma) || std::isnan(c.p_mode)) {
    throw InputError("health: NaN input for CV '" + c.cv + "'");
  }
  if (p < -1e-9 || p > 1.0 + 1e-9) {
    throw InputError("health: normalized value " + std::to_string(p) + " outside [0,1] for CV '" +
                     c.cv + "'");
  }
}

}  // namespace

auto curve_health_raw(const CvCurve& c, Scalar p) -> Scalar {
  check_inputs(c, p);
  if (c.inert || !(c.hi > c.lo)) return 1.0;
  if (c.shape == CvShape::Monotonic) {
    return rising_health(clamp01((p - c.lo) / (c.hi - c.lo)), c.eta);
  }
  if (p <= c.p_mode) {
    Scalar denom = c.p_mode - c.lo;
    Scalar s = denom > 0.0 ? clamp01((p - c.lo) / denom) : 1.0;
    return rising_health(s, c.eta);
  }
  Scalar denom = c.hi - c.p_mode;
  Scalar s = denom > 0.0 ? clamp01((p - c.p_mode) / denom) : 1.0;
  return 1.0 - c.gamma * s;
}

auto curve_health(const CvCurve& c, Scalar p) -> Scalar {
  return std::max(kEpsHealth, curve_health_raw(c, p));
}

auto curve_grad_eta(const CvCurve& c, Scalar p) -> Scalar {
  check_inputs(c, p);
  if (c.inert || !(c.hi > c.lo)) return 0.0;
  if (c.shape == CvShape::Monotonic) {
    return rising_grad_eta(clamp01((p - c.lo) / (c.hi - c.lo)), c.eta);
  }
  if (p > c.p_mode) return 0.0;
  Scalar denom = c.p_mode - c.lo;
  Scalar s = denom > 0.0 ? clamp01((p - c.lo) / denom) : 1.0;
  return rising_grad_eta(s, c.eta);
}

auto curve_grad_gamma(const CvCurve& c, Scalar p) -> Scalar {
  check_inputs(c, p);
  if (c.inert || !(c.hi > c.lo)) return 0.0;
  if (c.shape != CvShape::Unimodal || p <= c.p_mode) return 0.0;
  Scalar denom = c.hi - c.p_mode;
  Scalar s = denom > 0.0 ? clamp01((p - c.p_mode) / denom) : 1.0;
  return -s;
}

auto curve_slope(const CvCurve& c, Scalar p) -> Scalar {
  check_inputs(c, p);
  if (c.inert || !(c.hi > c.lo)) return 0.0;
  if (c.shape == CvShape::Monotonic) {
    Scalar s = (p - c.lo) / (c.hi - c.lo);
    if (s < 0.0 || s > 1.0) return 0.0;
    return rising_slope(s, c.eta) / (c.hi - c.lo);
  }
  if (p <= c.p_mode) {
    Scalar denom = c.p_mode - c.lo;
    if (denom <= 0.0) return 0.0;
    Scalar s = (p - c.lo) / denom;
    if (s < 0.0) return 0.0;
    return rising_slope(s, c.eta) / denom;
  }
  Scalar denom = c.hi - c.p_mode;
  if (denom <= 0.0) return 0.0;
  Scalar s = (p - c.p_mode) / denom;
  if (s > 1.0) return 0.0;
  return -c.gamma / denom;
}

auto aggregate(const Vector& h) -> Scalar {
  if (h.size() < 1) throw InputError("aggregate: empty health vector");
  Scalar sum = 0.0;
  for (Index i = 0; i < h.size(); ++i) {
    if (!(h(i) > 0.0)) throw InputError("aggregate: non-positive health value");
    sum += std::log(h(i));
  }
  return std::exp(sum / static_cast<Scalar>(h.size()));
}

auto curve_samples(const CvCurve& c, Index n_points)
    -> std::vector<std::pair<Scalar, Scalar>> {
  if (n_points < 2) throw InputError("curve_samples: need at least 2 points");
  std::vector<Scalar> ps;
  ps.reserve(static_cast<size_t>(n_points) + 1);
  for (Index i = 0; i < n_points; ++i) {
    ps.push_back(static_cast<Scalar>(i) / static_cast<Scalar>(n_points - 1));
  }
  if (c.shape == CvShape::Unimodal &&
      std::find(ps.begin(), ps.end(), c.p_mode) == ps.end()) {
    ps.insert(std::upper_bound(ps.begin(), ps.end(), c.p_mode), c.p_mode);
  }
  std::vector<std::pair<Scalar, Scalar>> out;
  out.reserve(ps.size());
  for (Scalar p : ps) out.emplace_back(p, curve_health(c, p));
  return out;
}

void write_curve_csv(const CvCurve& c, Index n_points, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write curve file: " + path.string());
  out << "cv,p_norm,h\n";
  for (const auto& [p, h] : curve_samples(c, n_points)) {
    out << c.cv << "," << fmt6(p) << "," << fmt6(h) << "\n";
  }
}

auto score_resolved(const std::vector<CvCurve>& curves, const Vector& resolved,
                    Vector* h_out) -> Scalar {
  if (resolved.size() != static_cast<Index>(curves.size())) {
    throw InputError("score: resolved value count does not match the curve count");
  }
  if (h_out != nullptr) h_out->resize(resolved.size());
  Scalar sum = 0.0;
  Index active = 0;
  for (size_t i = 0; i < curves.size(); ++i) {
    Scalar hv = curve_health(curves[i], resolved(static_cast<Index>(i)));
    if (h_out != nullptr) (*h_out)(static_cast<Index>(i)) = hv;
    if (!curves[i].inert) {
      sum += std::log(hv);
      ++active;
    }
  }
  return active > 0 ? std::exp(sum / static_cast<Scalar>(active)) : 1.0;
}

auto bind_layout(const HealthModel& model, const std::vector<std::string>& columns) -> ModelLayout {
  auto index_of = [&columns](const std::string& name) -> Index {
    auto it = std::find(columns.begin(), columns.end(), name);
    return it == columns.end() ? -1 : static_cast<Index>(it - columns.begin());
  };
  ModelLayout layout;
  for (const auto& c : model.curves) {
    LayoutEntry e;
    e.name = c.cv;
    e.shape = c.shape;
    e.lo = c.lo;
    e.hi = c.hi;
    e.degenerate = c.inert;
    e.column = index_of(c.cv);
    const WeakLink* link = nullptr;
    for (const auto& w : model.weak) {
      if (w.cv == c.cv) {
        link = &w;
        break;
      }
    }
    if (link != nullptr) {
      e.role = CvRole::Weak;
      e.parent_column = index_of(link->parent);
      if (e.parent_column < 0) {
        throw InputError("score: parent column '" + link->parent + "' is missing from the data");
      }
      e.a = link->a;
      e.b = link->b;
      e.radius = link->radius;
      e.weak_slot = layout.weak_count++;
    } else if (e.column < 0) {
      throw InputError("score: column '" + c.cv + "' required by the model is missing");
    }
    layout.entries.push_back(std::move(e));
  }
  return layout;
}

auto weak_offset_vector(const HealthModel& model) -> Vector {
  Vector r(static_cast<Index>(model.weak.size()));
  for (size_t k = 0; k < model.weak.size(); ++k) r(static_cast<Index>(k)) = model.weak[k].r;
  return r;
}

auto score(const HealthModel& model, const ConfigDataset& ds) -> ScoreResult {
  ConfigDataset norm;
  if (ds.normalized) {
    norm = ds;
  } else {
    NormStats sub;
    sub.observed_min = model.stats.observed_min;
    sub.observed_max = model.stats.observed_max;
    sub.observed_degenerate = model.stats.observed_degenerate;
    sub.eps = model.stats.eps;
    std::vector<Scalar> fills;
    std::vector<Transform> tags;
    for (const auto& name : ds.columns) {
      Index k = model.stats.column(name);
      if (k < 0) throw InputError("score: column '" + name + "' is unknown to the model");
      sub.columns.push_back(name);
      sub.cvs.push_back(model.stats.cvs[static_cast<size_t>(k)]);
      fills.push_back(sub.cvs.back().fill);
      tags.push_back(sub.cvs.back().transform);
    }
    norm = normalize(apply_transform(fill_missing(ds, fills), tags), sub);
  }

  ModelLayout layout = bind_layout(model, norm.columns);
  Vector offsets = weak_offset_vector(model);

  ScoreResult out;
  out.H.resize(norm.rows());
  out.h.resize(norm.rows(), static_cast<Index>(model.curves.size()));
  out.cvs.reserve(model.curves.size());
  for (const auto& c : model.curves) out.cvs.push_back(c.cv);
  Vector hrow;
  for (Index i = 0; i < norm.rows(); ++i) {
    Vector resolved = resolve_dependents(norm.values.row(i).transpose(), layout, offsets);
    out.H(i) = score_resolved(model.curves, resolved, &hrow);
    out.h.row(i) = hrow.transpose();
  }
  return out;
}

namespace {

auto require(const json& j, const char* key, const std::string& where) -> const json& {
  if (!j.contains(key)) throw InputError("model file missing key '" + std::string(key) + "' in " + where);
  return j.at(key);
}

}  // namespace

void save_model(const HealthModel& model, const std::filesystem::path& path) {
  json j;
  j["version"] = "chi-model/1";

  json stats;
  stats["eps"] = model.stats.eps;
  stats["observed"] = {{"min", model.stats.observed_min},
                       {"max", model.stats.observed_max},
                       {"degenerate", model.stats.observed_degenerate}};
  stats["columns"] = json::array();
  for (size_t j2 = 0; j2 < model.stats.columns.size(); ++j2) {
    const auto& cs = model.stats.cvs[j2];
    stats["columns"].push_back({{"name", model.stats.columns[j2]},
                                {"min", cs.raw_min},
                                {"max", cs.raw_max},
                                {"transform", transform_name(cs.transform)},
                                {"fill", cs.fill},
                                {"degenerate", cs.degenerate}});
  }
  j["norm_stats"] = std::move(stats);

  j["curves"] = json::array();
  for (const auto& c : model.curves) {
    j["curves"].push_back({{"cv", c.cv},
                           {"shape", shape_name(c.shape)},
                           {"eta", c.eta},
                           {"gamma", c.gamma},
                           {"p_mode", c.p_mode},
                           {"lo", c.lo},
                           {"hi", c.hi},
                           {"inert", c.inert}});
  }

  j["weak_offsets"] = json::array();
  for (const auto& w : model.weak) {
    j["weak_offsets"].push_back({{"cv", w.cv},
                                 {"parent", w.parent},
                                 {"a", w.a},
                                 {"b", w.b},
                                 {"R", w.radius},
                                 {"r", w.r}});
  }

  j["meta"] = {{"epochs", model.meta.epochs},
               {"final_mse", model.meta.final_mse},
               {"seed", model.meta.seed}};

  std::ofstream out(path);
  if (!out) throw InputError("cannot write model file: " + path.string());
  out << j.dump(2) << "\n";
}

auto load_model(const std::filesystem::path& path) -> HealthModel {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open model file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InputError("model parse error in " + path.string() + ": " + e.what());
  }

  auto version = require(j, "version", "root").get<std::string>();
  if (version != "chi-model/1") {
    throw InputError("unsupported model version '" + version + "' (expected chi-model/1)");
  }

  HealthModel model;
  const json& stats = require(j, "norm_stats", "root");
  model.stats.eps = require(stats, "eps", "norm_stats").get<Scalar>();
  const json& obs = require(stats, "observed", "norm_stats");
  model.stats.observed_min = require(obs, "min", "norm_stats.observed").get<Scalar>();
  model.stats.observed_max = require(obs, "max", "norm_stats.observed").get<Scalar>();
  model.stats.observed_degenerate =
      require(obs, "degenerate", "norm_stats.observed").get<bool>();
  for (const auto& col : require(stats, "columns", "norm_stats")) {
    model.stats.columns.push_back(require(col, "name", "norm_stats.columns").get<std::string>());
    ColumnStats cs;
    cs.raw_min = require(col, "min", "norm_stats.columns").get<Scalar>();
    cs.raw_max = require(col, "max", "norm_stats.columns").get<Scalar>();
    cs.transform =
        transform_from_name(require(col, "transform", "norm_stats.columns").get<std::string>());
    cs.fill = require(col, "fill", "norm_stats.columns").get<Scalar>();
    cs.degenerate = require(col, "degenerate", "norm_stats.columns").get<bool>();
    model.stats.cvs.push_back(cs);
  }

  for (const auto& item : require(j, "curves", "root")) {
    CvCurve c;
    c.cv = require(item, "cv", "curves").get<std::string>();
    c.shape = shape_from_name(require(item, "shape", "curves").get<std::string>());
    c.eta = require(item, "eta", "curves").get<Scalar>();
    c.gamma = require(item, "gamma", "curves").get<Scalar>();
    c.p_mode = require(item, "p_mode", "curves").get<Scalar>();
    if (item.contains("lo")) c.lo = item["lo"].get<Scalar>();
    if (item.contains("hi")) c.hi = item["hi"].get<Scalar>();
    if (item.contains("inert")) c.inert = item["inert"].get<bool>();
    model.curves.push_back(std::move(c));
  }

  for (const auto& item : require(j, "weak_offsets", "root")) {
    WeakLink w;
    w.cv = require(item, "cv", "weak_offsets").get<std::string>();
    w.parent = require(item, "parent", "weak_offsets").get<std::string>();
    w.a = require(item, "a", "weak_offsets").get<Scalar>();
    w.b = require(item, "b", "weak_offsets").get<Scalar>();
    w.radius = require(item, "R", "weak_offsets").get<Scalar>();
    w.r = require(item, "r", "weak_offsets").get<Scalar>();
    model.weak.push_back(std::move(w));
  }

  const json& meta = require(j, "meta", "root");
  model.meta.epochs = require(meta, "epochs", "meta").get<Index>();
  model.meta.final_mse = require(meta, "final_mse", "meta").get<Scalar>();
  model.meta.seed = require(meta, "seed", "meta").get<std::uint64_t>();
  return model;
}

}  // namespace chi
