#pragma once

// Configuration-driven runs: schema, presets, single solves, convergence
// studies, PML sweeps and diagnostic dumps. Shared by the CLI and the
// acceptance binary.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "helmfd/assembly.hpp"
#include "helmfd/boundary.hpp"
#include "helmfd/mesh.hpp"
#include "helmfd/verify.hpp"

namespace helmfd {

using json = nlohmann::json;

struct ScattererConfig {
  std::string kind = "circle";  // circle | flower | disks | quartic
  double radius = 1.0;
  double a = 1.0, b = 0.5;
  int m = 8;
  std::vector<Point2> centers;
  int symmetry = 1;
  double c = 0.5;
};

struct SourceConfig {
  std::string id = "none";  // none | plane_wave_bump
  double amplitude = 1.0;
  double angle = 0.0;
  double radius = 1.0;  // support radius of the bump
};

struct BoundaryConfig {
  std::string id = "zero";  // zero | plane_wave | modal_series
  double angle = 0.0;
  int J = 60;
};

struct PmlConfig {
  double r_star = 3.0;
  double r_max = 4.0;
  double kappa_d = 0.0;  // > 0: r_max = r_star + kappa_d / kappa
  double t = 1.0;
  std::map<double, double> t_by_kappa;

  double t_for(double kappa) const {
    for (auto& [k, v] : t_by_kappa)
      if (std::abs(k - kappa) <= 1e-12 * kappa) return v;
    return t;
  }
  double r_max_for(double kappa) const { return kappa_d > 0.0 ? r_star + kappa_d / kappa : r_max; }
};

struct MeshConfig {
  Coords coords = Coords::Stretched;
  int N = 0;
  std::vector<int> N_list;
  Refinement refinement = Refinement::None;
  std::vector<AnnularRegion> regions;
  double anchor = 0.0;  // 0: scatterer radius (centred circle only)
  int quantum = 1;      // in units of the reference lattice for studies
  bool pml_coarsening = true;
  std::optional<bool> scatterer_on_grid;
};

struct MethodConfig {
  int order = 0;  // 0: largest supported
  bool pollution = true;
  double gate = 0.15;
  DeltaPolicy delta;
};

struct ReferenceConfig {
  std::string kind = "none";  // none | series | grid
  int N = 0;
};

struct SweepConfig {
  std::vector<double> kappa;
  std::vector<double> kappa_d;
  double kappa_h = 0.5;
  int n_multiple = 16;
};

struct OutputConfig {
  std::string dir = "out";
  bool dumps = false;
  bool field = true;
};

struct ExperimentConfig {
  std::string name = "run";
  double kappa = 1.0;
  ScattererConfig scatterer;
  SourceConfig source;
  BoundaryConfig boundary;
  PmlConfig pml;
  MeshConfig mesh;
  MethodConfig method;
  ReferenceConfig reference;
  SweepConfig sweep;
  OutputConfig outputs;
  bool pollution_pairing = false;
};

// ---------------------------------------------------------------- parsing

namespace detail {

[[noreturn]] inline void config_error(const std::string& path, const std::string& msg) {
  throw Error(ErrorCode::Config, path + ": " + msg);
}

inline const json* member(const json& j, const std::string& key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

template <class T>
T take(const json& j, const std::string& path, const std::string& key, T def) {
  const json* v = member(j, key);
  if (!v) return def;
  try {
    return v->get<T>();
  } catch (const json::exception&) {
    config_error(path + "." + key, "wrong type");
  }
}

inline void known_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
  if (!j.is_object()) config_error(path, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (auto k : keys) ok = ok || it.key() == k;
    if (!ok) config_error(path + "." + it.key(), "unknown field");
  }
}

inline json section(const json& j, const std::string& key) {
  const json* v = member(j, key);
  return v ? *v : json::object();
}

}  // namespace detail

inline ExperimentConfig parse_config(const json& j) {
  using detail::config_error;
  using detail::take;
  ExperimentConfig c;
  detail::known_keys(j, "config", {"name", "problem", "pml", "mesh", "method", "reference", "sweep", "outputs", "study"});
  c.name = take<std::string>(j, "config", "name", c.name);

  const json pj = detail::section(j, "problem");
  detail::known_keys(pj, "problem", {"kappa", "scatterer", "source", "boundary"});
  c.kappa = take<double>(pj, "problem", "kappa", c.kappa);
  if (!(c.kappa > 0.0)) config_error("problem.kappa", "must be positive");

  const json sj = detail::section(pj, "scatterer");
  detail::known_keys(sj, "problem.scatterer", {"kind", "radius", "a", "b", "m", "centers", "symmetry", "c"});
  auto& sc = c.scatterer;
  sc.kind = take<std::string>(sj, "problem.scatterer", "kind", sc.kind);
  sc.radius = take<double>(sj, "problem.scatterer", "radius", sc.radius);
  sc.a = take<double>(sj, "problem.scatterer", "a", sc.a);
  sc.b = take<double>(sj, "problem.scatterer", "b", sc.b);
  sc.m = take<int>(sj, "problem.scatterer", "m", sc.m);
  sc.symmetry = take<int>(sj, "problem.scatterer", "symmetry", sc.symmetry);
  sc.c = take<double>(sj, "problem.scatterer", "c", sc.c);
  if (auto* cs = detail::member(sj, "centers")) {
    if (!cs->is_array()) config_error("problem.scatterer.centers", "expected an array of [x, y]");
    for (std::size_t k = 0; k < cs->size(); ++k) {
      const json& e = (*cs)[k];
      if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
        config_error("problem.scatterer.centers[" + std::to_string(k) + "]", "expected [x, y]");
      sc.centers.push_back({e[0].get<double>(), e[1].get<double>()});
    }
  }
  if (sc.kind != "circle" && sc.kind != "flower" && sc.kind != "disks" && sc.kind != "quartic")
    config_error("problem.scatterer.kind", "unknown kind '" + sc.kind + "'");
  if (sc.kind == "circle" && !(sc.radius > 0.0)) config_error("problem.scatterer.radius", "must be positive");
  if (sc.kind == "disks" && (sc.centers.empty() || !(sc.radius > 0.0)))
    config_error("problem.scatterer.centers", "disk union needs centres and a positive radius");

  const json fj = detail::section(pj, "source");
  detail::known_keys(fj, "problem.source", {"id", "amplitude", "angle", "radius"});
  c.source.id = take<std::string>(fj, "problem.source", "id", c.source.id);
  c.source.amplitude = take<double>(fj, "problem.source", "amplitude", c.source.amplitude);
  c.source.angle = take<double>(fj, "problem.source", "angle", c.source.angle);
  c.source.radius = take<double>(fj, "problem.source", "radius", c.source.radius);
  if (c.source.id != "none" && c.source.id != "plane_wave_bump")
    config_error("problem.source.id", "unknown source '" + c.source.id + "'");

  const json gj = detail::section(pj, "boundary");
  detail::known_keys(gj, "problem.boundary", {"id", "angle", "J"});
  c.boundary.id = take<std::string>(gj, "problem.boundary", "id", c.boundary.id);
  c.boundary.angle = take<double>(gj, "problem.boundary", "angle", c.boundary.angle);
  c.boundary.J = take<int>(gj, "problem.boundary", "J", c.boundary.J);
  if (c.boundary.id != "zero" && c.boundary.id != "plane_wave" && c.boundary.id != "modal_series")
    config_error("problem.boundary.id", "unknown boundary data '" + c.boundary.id + "'");
  if (c.boundary.id == "modal_series" && (sc.kind != "circle" || std::abs(sc.radius - 1.0) > 0.0))
    config_error("problem.boundary.id", "modal series data is defined on the unit circle");

  const json mj = detail::section(j, "pml");
  detail::known_keys(mj, "pml", {"kind", "r_star", "r_max", "kappa_d", "t", "t_by_kappa"});
  const std::string pk = take<std::string>(mj, "pml", "kind", "auto");
  if (pk != "auto") config_error("pml.kind", "only the automatic LinearS / QuadraticR transforms are configurable");
  c.pml.r_star = take<double>(mj, "pml", "r_star", c.pml.r_star);
  c.pml.r_max = take<double>(mj, "pml", "r_max", c.pml.r_max);
  c.pml.kappa_d = take<double>(mj, "pml", "kappa_d", c.pml.kappa_d);
  c.pml.t = take<double>(mj, "pml", "t", c.pml.t);
  if (auto* tk = detail::member(mj, "t_by_kappa")) {
    if (!tk->is_object()) config_error("pml.t_by_kappa", "expected an object keyed by kappa");
    for (auto it = tk->begin(); it != tk->end(); ++it) {
      double k = 0.0;
      try {
        k = std::stod(it.key());
      } catch (...) {
        config_error("pml.t_by_kappa." + it.key(), "key must be a number");
      }
      if (!it->is_number()) config_error("pml.t_by_kappa." + it.key(), "expected a number");
      c.pml.t_by_kappa[k] = it->get<double>();
    }
  }
  auto check_t = [&](double t, const std::string& path) {
    if (!(t > 0.0 && t <= 1.0)) config_error(path, "must lie in (0, 1]");
  };
  check_t(c.pml.t, "pml.t");
  for (auto& [k, t] : c.pml.t_by_kappa) check_t(t, "pml.t_by_kappa");
  if (!(c.pml.r_star > 0.0)) config_error("pml.r_star", "must be positive");
  if (c.pml.kappa_d <= 0.0 && !(c.pml.r_max > c.pml.r_star)) config_error("pml.r_max", "must exceed pml.r_star");

  const json gj2 = detail::section(j, "mesh");
  detail::known_keys(gj2, "mesh", {"coords", "N", "N_list", "refinement", "regions", "anchor", "quantum",
                                   "pml_coarsening", "scatterer_on_grid"});
  const std::string co = take<std::string>(gj2, "mesh", "coords", "stretched");
  if (co == "stretched") c.mesh.coords = Coords::Stretched;
  else if (co == "regular") c.mesh.coords = Coords::Regular;
  else config_error("mesh.coords", "expected 'regular' or 'stretched'");
  c.mesh.N = take<int>(gj2, "mesh", "N", 0);
  c.mesh.N_list = take<std::vector<int>>(gj2, "mesh", "N_list", {});
  try {
    c.mesh.refinement = refinement_from_string(take<std::string>(gj2, "mesh", "refinement", "none"));
  } catch (const Error&) {
    config_error("mesh.refinement", "expected none, uniform_dyadic or adaptive_near");
  }
  if (auto* rg = detail::member(gj2, "regions")) {
    if (!rg->is_array()) config_error("mesh.regions", "expected an array");
    for (std::size_t k = 0; k < rg->size(); ++k) {
      const std::string path = "mesh.regions[" + std::to_string(k) + "]";
      const json& e = (*rg)[k];
      detail::known_keys(e, path, {"r_lo", "r_hi", "max_level"});
      AnnularRegion r{take<double>(e, path, "r_lo", 0.0), take<double>(e, path, "r_hi", 0.0),
                      take<int>(e, path, "max_level", 0)};
      if (!(r.r_hi > r.r_lo) || r.max_level < 0) config_error(path, "needs r_hi > r_lo and max_level >= 0");
      c.mesh.regions.push_back(r);
    }
  }
  c.mesh.anchor = take<double>(gj2, "mesh", "anchor", 0.0);
  c.mesh.quantum = take<int>(gj2, "mesh", "quantum", 1);
  c.mesh.pml_coarsening = take<bool>(gj2, "mesh", "pml_coarsening", true);
  if (detail::member(gj2, "scatterer_on_grid")) c.mesh.scatterer_on_grid = take<bool>(gj2, "mesh", "scatterer_on_grid", true);
  if (c.mesh.quantum < 1) config_error("mesh.quantum", "must be >= 1");
  if (c.mesh.refinement == Refinement::AdaptiveNear && c.mesh.regions.empty())
    config_error("mesh.regions", "adaptive_near refinement needs at least one region");
  if (c.mesh.N != 0 && c.mesh.N < 8) config_error("mesh.N", "needs at least 8 theta nodes");
  for (std::size_t k = 1; k < c.mesh.N_list.size(); ++k)
    if (c.mesh.N_list[k] <= c.mesh.N_list[k - 1]) config_error("mesh.N_list", "must be strictly increasing");
  auto check_even = [&](int n, const std::string& path) {
    if (c.mesh.refinement != Refinement::None && c.mesh.coords == Coords::Stretched && n % 2 != 0)
      config_error(path, "must be even for dyadic refinement");
  };
  if (c.mesh.N) check_even(c.mesh.N, "mesh.N");
  for (int n : c.mesh.N_list) check_even(n, "mesh.N_list");
  if (sc.kind != "circle" && c.mesh.anchor <= 0.0)
    config_error("mesh.anchor", "required for non-circular scatterers");

  const json xj = detail::section(j, "method");
  detail::known_keys(xj, "method", {"order", "pollution", "gate", "delta_factor", "delta_floor"});
  c.method.order = take<int>(xj, "method", "order", 0);
  c.method.pollution = take<bool>(xj, "method", "pollution", true);
  c.method.gate = take<double>(xj, "method", "gate", c.method.gate);
  c.method.delta.factor = take<double>(xj, "method", "delta_factor", c.method.delta.factor);
  c.method.delta.floor = take<double>(xj, "method", "delta_floor", c.method.delta.floor);
  const int Mmax = c.mesh.coords == Coords::Stretched ? 6 : 4;
  if (c.method.order != 0 && c.method.order != Mmax)
    config_error("method.order", "this mesh supports order " + std::to_string(Mmax) + " only");
  if (c.method.delta.factor < 0.0 || c.method.delta.floor < 0.0) config_error("method", "delta policy values must be >= 0");

  const json rj = detail::section(j, "reference");
  detail::known_keys(rj, "reference", {"kind", "N"});
  c.reference.kind = take<std::string>(rj, "reference", "kind", "none");
  c.reference.N = take<int>(rj, "reference", "N", 0);
  if (c.reference.kind != "none" && c.reference.kind != "series" && c.reference.kind != "grid")
    config_error("reference.kind", "expected none, series or grid");
  if (c.reference.kind == "series" && c.boundary.id != "modal_series")
    config_error("reference.kind", "series reference needs modal_series boundary data");
  if (c.reference.kind == "series" && c.source.id != "none")
    config_error("reference.kind", "series reference needs a zero source");
  if (c.reference.kind == "grid") {
    if (c.reference.N <= 0) config_error("reference.N", "required for a grid reference");
    for (int n : c.mesh.N_list)
      if (c.reference.N % n != 0) config_error("reference.N", "must be divisible by every entry of mesh.N_list");
    if (c.mesh.N && c.reference.N % c.mesh.N != 0) config_error("reference.N", "must be divisible by mesh.N");
  }

  const json wj = detail::section(j, "sweep");
  detail::known_keys(wj, "sweep", {"kappa", "kappa_d", "kappa_h", "n_multiple"});
  c.sweep.kappa = take<std::vector<double>>(wj, "sweep", "kappa", {});
  c.sweep.kappa_d = take<std::vector<double>>(wj, "sweep", "kappa_d", {});
  c.sweep.kappa_h = take<double>(wj, "sweep", "kappa_h", c.sweep.kappa_h);
  c.sweep.n_multiple = take<int>(wj, "sweep", "n_multiple", c.sweep.n_multiple);
  if (!(c.sweep.kappa_h > 0.0)) config_error("sweep.kappa_h", "must be positive");
  if (c.sweep.n_multiple < 1) config_error("sweep.n_multiple", "must be >= 1");

  const json oj = detail::section(j, "outputs");
  detail::known_keys(oj, "outputs", {"dir", "dumps", "field"});
  c.outputs.dir = take<std::string>(oj, "outputs", "dir", c.outputs.dir);
  c.outputs.dumps = take<bool>(oj, "outputs", "dumps", false);
  c.outputs.field = take<bool>(oj, "outputs", "field", true);

  const json tj = detail::section(j, "study");
  detail::known_keys(tj, "study", {"pollution_pairing"});
  c.pollution_pairing = take<bool>(tj, "study", "pollution_pairing", false);

  // source support must stay inside the interface and clear of the mesh anchor
  if (c.source.id != "none") {
    if (!(c.source.radius > 0.0)) config_error("problem.source.radius", "must be positive");
    if (c.source.radius > c.pml.r_star) config_error("problem.source.radius", "support must lie inside pml.r_star");
  }
  if (sc.kind == "quartic")
    config_error("problem.scatterer.kind", "quartic scatterers do not contain the origin; the polar mesh needs 0 in D");
  return c;
}

/// Fully resolved configuration.
inline json to_json(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  json centers = json::array();
  for (auto& p : c.scatterer.centers) centers.push_back({p[0], p[1]});
  j["problem"] = {{"kappa", c.kappa},
                  {"scatterer",
                   {{"kind", c.scatterer.kind},
                    {"radius", c.scatterer.radius},
                    {"a", c.scatterer.a},
                    {"b", c.scatterer.b},
                    {"m", c.scatterer.m},
                    {"centers", centers},
                    {"symmetry", c.scatterer.symmetry}}},
                  {"source",
                   {{"id", c.source.id},
                    {"amplitude", c.source.amplitude},
                    {"angle", c.source.angle},
                    {"radius", c.source.radius}}},
                  {"boundary", {{"id", c.boundary.id}, {"angle", c.boundary.angle}, {"J", c.boundary.J}}}};
  json tk = json::object();
  for (auto& [k, t] : c.pml.t_by_kappa) {
    std::ostringstream os;
    os << k;
    tk[os.str()] = t;
  }
  j["pml"] = {{"kind", "auto"},
              {"r_star", c.pml.r_star},
              {"r_max", c.pml.r_max},
              {"kappa_d", c.pml.kappa_d},
              {"t", c.pml.t},
              {"t_by_kappa", tk}};
  json regions = json::array();
  for (auto& r : c.mesh.regions) regions.push_back({{"r_lo", r.r_lo}, {"r_hi", r.r_hi}, {"max_level", r.max_level}});
  j["mesh"] = {{"coords", c.mesh.coords == Coords::Stretched ? "stretched" : "regular"},
               {"N", c.mesh.N},
               {"N_list", c.mesh.N_list},
               {"refinement", to_string(c.mesh.refinement)},
               {"regions", regions},
               {"anchor", c.mesh.anchor},
               {"quantum", c.mesh.quantum},
               {"pml_coarsening", c.mesh.pml_coarsening}};
  if (c.mesh.scatterer_on_grid) j["mesh"]["scatterer_on_grid"] = *c.mesh.scatterer_on_grid;
  j["method"] = {{"order", c.method.order},
                 {"pollution", c.method.pollution},
                 {"gate", c.method.gate},
                 {"delta_factor", c.method.delta.factor},
                 {"delta_floor", c.method.delta.floor}};
  j["reference"] = {{"kind", c.reference.kind}, {"N", c.reference.N}};
  j["sweep"] = {{"kappa", c.sweep.kappa},
                {"kappa_d", c.sweep.kappa_d},
                {"kappa_h", c.sweep.kappa_h},
                {"n_multiple", c.sweep.n_multiple}};
  j["outputs"] = {{"dir", c.outputs.dir}, {"dumps", c.outputs.dumps}, {"field", c.outputs.field}};
  j["study"] = {{"pollution_pairing", c.pollution_pairing}};
  return j;
}

// ---------------------------------------------------------------- presets

inline std::vector<std::string> preset_names() {
  return {"ex1-regular", "ex1-stretched", "ex1-refined", "ex2", "ex2-k20-kd20", "ex2-k5-kd20",
          "ex3a", "ex3b", "ex3c", "zero"};
}

inline json preset(const std::string& name) {
  const double rs1 = std::exp(0.5 * M_PI);
  const json ex1_problem = {{"kappa", 20.0},
                            {"scatterer", {{"kind", "circle"}, {"radius", 1.0}}},
                            {"source", {{"id", "plane_wave_bump"}, {"amplitude", 20.0}, {"angle", M_PI / 3}, {"radius", 4.0}}},
                            {"boundary", {{"id", "plane_wave"}, {"angle", 0.0}}}};
  const json ex1_pml = {{"r_star", rs1}, {"r_max", 1.25 * rs1}, {"t", 0.5}};
  const json ex1_study = {{"N_list", {288, 384, 576, 768, 1152}}, {"pml_coarsening", false}};
  const json ex2_t = {{"5", 1.0}, {"20", 0.5}, {"50", 0.25}, {"100", 0.25}};
  auto ex2_single = [&](double kappa, int N) {
    return json{{"name", name},
                {"problem",
                 {{"kappa", kappa},
                  {"scatterer", {{"kind", "circle"}, {"radius", 1.0}}},
                  {"boundary", {{"id", "modal_series"}, {"J", 60}}}}},
                {"pml", {{"r_star", 3.0}, {"kappa_d", 20.0}, {"t_by_kappa", ex2_t}}},
                {"mesh", {{"coords", "stretched"}, {"N", N}, {"refinement", "uniform_dyadic"}}},
                {"reference", {{"kind", "series"}}}};
  };
  auto ex3 = [&](json scatterer) {
    return json{{"name", name},
                {"problem",
                 {{"kappa", 20.0}, {"scatterer", scatterer}, {"boundary", {{"id", "plane_wave"}, {"angle", 0.0}}}}},
                {"pml", {{"r_star", 3.0}, {"r_max", 4.0}, {"t", 0.5}}},
                {"mesh",
                 {{"coords", "stretched"},
                  {"N", 576},
                  {"N_list", {192, 288, 384, 576, 768, 1152}},
                  {"refinement", "adaptive_near"},
                  {"regions", {{{"r_lo", 0.49}, {"r_hi", 1.6}, {"max_level", 0}}}},
                  {"anchor", 0.49},
                  {"quantum", 24},
                  {"scatterer_on_grid", false}}},
                {"reference", {{"kind", "grid"}, {"N", 2304}}}};
  };
  if (name == "ex1-regular" || name == "ex1-stretched" || name == "ex1-refined") {
    json mesh = ex1_study;
    mesh["coords"] = name == "ex1-regular" ? "regular" : "stretched";
    mesh["refinement"] = name == "ex1-refined" ? "uniform_dyadic" : "none";
    mesh["quantum"] = name == "ex1-refined" ? 96 : 24;
    mesh["N"] = 576;
    return {{"name", name},
            {"problem", ex1_problem},
            {"pml", ex1_pml},
            {"mesh", mesh},
            {"reference", {{"kind", "grid"}, {"N", 2304}}},
            {"study", {{"pollution_pairing", true}}}};
  }
  if (name == "ex2") {
    json j = ex2_single(20.0, 752);
    j["sweep"] = {{"kappa", {5.0, 20.0}}, {"kappa_d", {3.0, 5.0, 10.0, 20.0, 30.0, 50.0}}, {"kappa_h", 0.5}, {"n_multiple", 16}};
    return j;
  }
  if (name == "ex2-k20-kd20") return ex2_single(20.0, 752);
  if (name == "ex2-k5-kd20") return ex2_single(5.0, 192);
  if (name == "ex3a") return ex3({{"kind", "flower"}, {"a", 1.0}, {"b", 0.5}, {"m", 8}});
  if (name == "ex3b") {
    json c = json::array({{0.0, 0.0}});
    for (int k = 0; k < 4; ++k) {
      const double phi = M_PI / 4 + k * M_PI / 2;
      c.push_back({std::sin(phi), std::cos(phi)});
    }
    return ex3({{"kind", "disks"}, {"centers", c}, {"radius", 0.5}, {"symmetry", 4}});
  }
  if (name == "ex3c") return ex3({{"kind", "quartic"}, {"c", 0.5}});
  if (name == "zero")
    return {{"name", name},
            {"problem", {{"kappa", 5.0}, {"scatterer", {{"kind", "circle"}, {"radius", 1.0}}}}},
            {"pml", {{"r_star", 3.0}, {"r_max", 4.0}}},
            {"mesh", {{"coords", "stretched"}, {"N", 64}, {"refinement", "uniform_dyadic"}}}};
  throw Error(ErrorCode::Config, "--preset: unknown preset '" + name + "'");
}

// ---------------------------------------------------------------- problem data

inline ScattererGeometry make_geometry(const ScattererConfig& s) {
  if (s.kind == "circle") return make_circle(s.radius);
  if (s.kind == "flower") return make_polar_curve(s.a, s.b, s.m);
  if (s.kind == "disks") return make_disk_union(s.centers, s.radius, s.symmetry);
  return make_implicit_quartic(s.c);
}

/// A exp(i kappa r cos(phi - theta)) 1_{r < R} exp(r^2 / (r^2 - R^2)).
inline SourceFn make_source(const SourceConfig& s, double kappa) {
  if (s.id == "none") return {};
  const double A = s.amplitude, R2 = s.radius * s.radius, c = std::cos(s.angle), sn = std::sin(s.angle);
  return [=](const Jet2& x, const Jet2& y) {
    const Jet2 r2 = x * x + y * y;
    if (!(r2.value().real() < R2)) return Jet2(x.order());
    return A * exp((x * c + y * sn) * cplx(0.0, kappa)) * exp(r2 / (r2 - R2));
  };
}

inline BoundaryFn make_boundary_data(const BoundaryConfig& b, double kappa) {
  if (b.id == "zero") return {};
  if (b.id == "plane_wave") {
    const double c = std::cos(b.angle), s = std::sin(b.angle);
    return [=](double x, double y) { return std::polar(1.0, kappa * (x * c + y * s)); };
  }
  const SeriesSolution ser = modal_series(kappa, b.J);
  return [ser](double x, double y) { return series_trace(ser, std::atan2(y, x)); };
}

// ---------------------------------------------------------------- runs

struct RunOutput {
  int N = 0;
  bool pollution = true;
  Mesh mesh;
  PdeModel pde;
  LatticeRotation rot;
  std::vector<BoundaryStencil> boundary_stencils;
  std::vector<Stencil> grid_stencils;
  std::vector<std::tuple<int, int>> grid_keys;  // (row, factor) of each grid stencil
  std::vector<cplx> v;
  SolveReport report;
  double seconds = 0.0;
};

/// Options handed to the mesh builder for theta count N. The quantum is given
/// on the reference lattice and scaled down so that study meshes stay nested.
inline MeshOptions mesh_options(const ExperimentConfig& c, int N, int N_ref) {
  MeshOptions o;
  o.refinement = c.mesh.refinement;
  o.regions = c.mesh.regions;
  o.pml_coarsening = c.mesh.pml_coarsening;
  if (N_ref > 0 && N_ref != N) {
    if (N_ref % N != 0) throw Error(ErrorCode::Config, "reference.N: must be divisible by " + std::to_string(N));
    const int m = N_ref / N;
    if (c.mesh.quantum % m != 0 && c.mesh.quantum > 1)
      throw Error(ErrorCode::Config, "mesh.quantum: not divisible by the refinement ratio " + std::to_string(m));
    o.quantum = std::max(1, c.mesh.quantum / m);
  } else {
    o.quantum = c.mesh.quantum;
  }
  const bool circle = c.scatterer.kind == "circle";
  o.scatterer_on_grid = c.mesh.scatterer_on_grid.value_or(circle && (c.mesh.anchor <= 0.0 || c.mesh.anchor == c.scatterer.radius));
  return o;
}

inline Mesh build_mesh(const ExperimentConfig& c, int N, int N_ref = 0) {
  const MeshOptions o = mesh_options(c, N, N_ref);
  const double anchor = c.mesh.anchor > 0.0 ? c.mesh.anchor : c.scatterer.radius;
  const double rm = c.pml.r_max_for(c.kappa);
  return c.mesh.coords == Coords::Stretched ? build_stretched(c.pml.r_star, rm, N, anchor, o)
                                            : build_regular_polar(c.pml.r_star, rm, N, anchor, o);
}

inline RunOutput run_single(const ExperimentConfig& c, int N, bool pollution, int N_ref = 0) {
  const auto t0 = std::chrono::steady_clock::now();
  RunOutput out;
  out.N = N;
  out.pollution = pollution;
  out.mesh = build_mesh(c, N, N_ref);
  Mesh& m = out.mesh;
  const ScattererGeometry geom = make_geometry(c.scatterer);
  out.rot = lattice_rotation(m, geom);
  const auto near = detect_boundary_nodes(m, geom, out.rot);
  out.pde = pde_for_mesh(m, c.kappa, c.pml.t_for(c.kappa));
  spdlog::info("{}: N={} nodes={} unknowns={} near-boundary={} sectors={}", c.name, N, m.size(), m.unknowns(),
               near.size(), out.rot.copies);

  std::unordered_map<int, BoundaryStencil> bs;
  for (int id : near)
    if (m.nodes[std::size_t(id)].j < out.rot.period) {
      BoundaryStencil b = boundary_stencil(m, geom, id, c.kappa, c.method.delta);
      spdlog::debug("boundary stencil node {} points {} delta {:.2e} min_eig {:.2e}", id, b.coeffs.size(), b.delta,
                    b.min_eig);
      out.boundary_stencils.push_back(b);
      bs.emplace(id, std::move(b));
    }
  MinimizeOptions mo;
  mo.pollution = pollution;
  mo.gate = c.method.gate;
  mo.delta = c.method.delta;
  StencilBank bank(m, out.pde, mo);
  Problem prob{c.kappa, make_source(c.source, c.kappa), make_boundary_data(c.boundary, c.kappa)};
  Assembly a = assemble(m, out.pde, prob, bank, bs, out.rot);
  for (auto& [key, s] : bank.all()) {
    out.grid_keys.emplace_back(std::get<0>(key), std::get<1>(key));
    out.grid_stencils.push_back(s);
  }
  SolutionField sol = solve(a);
  out.v = std::move(sol.v);
  out.report = sol.report;
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  spdlog::info("{}: N={} residual {:.2e} in {:.2f}s", c.name, N, out.report.residual, out.seconds);
  return out;
}

inline json mesh_summary(const Mesh& m, double kappa) {
  json counts = json::object();
  for (auto cls : {NodeClass::Interior, NodeClass::Interface, NodeClass::DanglingS, NodeClass::Auxiliary,
                   NodeClass::NearBoundary, NodeClass::DirichletScatterer, NodeClass::DirichletOuter})
    counts[to_string(cls)] = m.count(cls);
  return {{"n_theta", m.n_theta},
          {"h", m.h},
          {"kappa_h", kappa * m.h},
          {"r_star", m.r_star()},
          {"r_max", m.r_max()},
          {"kappa_d", kappa * (m.r_max() - m.r_star())},
          {"nodes", m.size()},
          {"unknowns", m.unknowns()},
          {"classes", counts},
          {"transitions", m.transitions}};
}

inline json run_summary(const ExperimentConfig& c, const RunOutput& r) {
  json s = mesh_summary(r.mesh, c.kappa);
  s["N"] = r.N;
  s["pollution"] = r.pollution;
  s["residual"] = r.report.residual;
  s["residual_ok"] = r.report.residual_ok;
  s["blocks"] = r.report.blocks;
  s["block_size"] = r.report.block_size;
  s["alpha"] = r.pde.transform.stretched()
                   ? json{{"re", r.pde.transform.alpha_s.real()}, {"im", r.pde.transform.alpha_s.imag()}}
                   : json(r.pde.transform.alpha1);
  s["t"] = r.pde.transform.t;
  double vmax = 0.0;
  for (auto& x : r.v) vmax = std::max(vmax, std::abs(x));
  s["max_abs_v"] = vmax;
  return s;
}

// ---------------------------------------------------------------- outputs

inline void write_stencils_csv(const RunOutput& r, std::ostream& os) {
  os.precision(17);
  os << "type,row,factor,node,kind,q,h,minimized,delta,modes,objective,min_eig,distance,n_points,coeffs\n";
  for (std::size_t k = 0; k < r.grid_stencils.size(); ++k) {
    const Stencil& s = r.grid_stencils[k];
    os << "grid," << std::get<0>(r.grid_keys[k]) << ',' << std::get<1>(r.grid_keys[k]) << ",," << to_string(s.kind)
       << ',' << s.q << ',' << s.h << ',' << int(s.minimized) << ',' << s.delta << ',' << s.modes << ','
       << s.objective << ',' << s.min_eig << ",," << s.coeffs.size() << ',';
    for (std::size_t p = 0; p < s.coeffs.size(); ++p)
      os << (p ? " " : "") << s.coeffs[p].real() << (s.coeffs[p].imag() < 0 ? "" : "+") << s.coeffs[p].imag() << 'i';
    os << '\n';
  }
  for (auto& b : r.boundary_stencils) {
    const auto& n = r.mesh.nodes[std::size_t(b.center)];
    os << "boundary," << n.i << ',' << n.factor << ',' << b.center << ",boundary," << r.mesh.q(b.center) << ','
       << b.h << ",1," << b.delta << ',' << b.modes << ',' << b.objective << ',' << b.min_eig << ',' << b.distance
       << ',' << b.coeffs.size() << ',';
    for (std::size_t p = 0; p < b.coeffs.size(); ++p)
      os << (p ? " " : "") << b.coeffs[p].real() << (b.coeffs[p].imag() < 0 ? "" : "+") << b.coeffs[p].imag() << 'i';
    os << '\n';
  }
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream os(p);
  if (!os) throw Error(ErrorCode::Io, "cannot write " + p.string());
  return os;
}

inline void write_json(const std::filesystem::path& p, const json& j) {
  auto os = open_out(p);
  os << j.dump(2) << '\n';
}

/// Stencil dumps, Gram eigenvalue log and residuals of a run.
inline void write_diagnostics(const std::filesystem::path& dir, const ExperimentConfig& c, const RunOutput& r) {
  {
    auto os = open_out(dir / "stencils.csv");
    write_stencils_csv(r, os);
  }
  {
    auto os = open_out(dir / "gram_eigenvalues.csv");
    os.precision(6);
    os << "type,row,node,delta,min_eig\n";
    for (std::size_t k = 0; k < r.grid_stencils.size(); ++k)
      if (r.grid_stencils[k].minimized)
        os << "grid," << std::get<0>(r.grid_keys[k]) << ",," << r.grid_stencils[k].delta << ','
           << r.grid_stencils[k].min_eig << '\n';
    for (auto& b : r.boundary_stencils)
      os << "boundary," << r.mesh.nodes[std::size_t(b.center)].i << ',' << b.center << ',' << b.delta << ','
         << b.min_eig << '\n';
  }
  json s = run_summary(c, r);
  s["config"] = to_json(c);
  write_json(dir / "residuals.json", s);
}

// ---------------------------------------------------------------- drivers

/// Runs fn(k) for k < n on up to `threads` workers.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t k = 0; k < n; ++k) fn(k);
    return;
  }
  std::mutex mu;
  std::size_t next = 0;
  std::exception_ptr err;
  auto worker = [&] {
    for (;;) {
      std::size_t k;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (next >= n || err) return;
        k = next++;
      }
      try {
        fn(k);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!err) err = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < std::min<int>(threads, int(n)); ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

inline std::vector<double> abs_errors(const Mesh& m, const std::vector<cplx>& v, const std::vector<cplx>& exact) {
  std::vector<double> e(m.size(), -1.0);
  for (std::size_t k = 0; k < m.size(); ++k)
    if (!is_dirichlet(m.nodes[k].cls)) e[k] = std::abs(v[k] - exact[k]);
  return e;
}

inline std::vector<double> abs_errors(const Mesh& m, const std::vector<cplx>& v, const Mesh& ref,
                                      const std::vector<cplx>& vref) {
  std::vector<double> e(m.size(), -1.0);
  for (std::size_t k = 0; k < m.size(); ++k) {
    if (is_dirichlet(m.nodes[k].cls)) continue;
    const int r = matching_node(m, int(k), ref);
    if (r >= 0 && !is_dirichlet(ref.nodes[std::size_t(r)].cls)) e[k] = std::abs(v[k] - vref[std::size_t(r)]);
  }
  return e;
}

struct RunResult {
  RunOutput out;
  std::optional<ErrorNorms> err;
  json summary;
};

/// Single solve with optional comparison against the configured reference.
inline RunResult run_experiment(const ExperimentConfig& c, const std::filesystem::path& dir, bool write = true) {
  const int N = c.mesh.N ? c.mesh.N : (c.mesh.N_list.empty() ? 0 : c.mesh.N_list.back());
  if (N <= 0) throw Error(ErrorCode::Config, "mesh.N: required");
  const int N_ref = c.reference.kind == "grid" ? c.reference.N : 0;
  RunResult rr;
  rr.out = run_single(c, N, c.method.pollution, N_ref);
  rr.summary = run_summary(c, rr.out);
  std::vector<double> ae;
  if (c.reference.kind == "series") {
    const auto exact = series_on_mesh(modal_series(c.kappa, c.boundary.J), rr.out.mesh, rr.out.pde);
    rr.err = error_norms(rr.out.mesh, rr.out.v, exact);
    ae = abs_errors(rr.out.mesh, rr.out.v, exact);
  } else if (c.reference.kind == "grid") {
    RunOutput ref = run_single(c, c.reference.N, c.method.pollution, N_ref);
    rr.err = error_norms(rr.out.mesh, rr.out.v, ref.mesh, ref.v);
    ae = abs_errors(rr.out.mesh, rr.out.v, ref.mesh, ref.v);
    rr.summary["reference"] = mesh_summary(ref.mesh, c.kappa);
  }
  if (rr.err)
    rr.summary["errors"] = {{"linf", rr.err->linf}, {"l2", rr.err->l2}, {"compared", rr.err->compared},
                            {"unmatched", rr.err->unmatched}};
  rr.summary["seconds"] = rr.out.seconds;
  rr.summary["config"] = to_json(c);
  if (write) {
    write_json(dir / "summary.json", rr.summary);
    if (c.outputs.field) {
      auto os = open_out(dir / "solution.csv");
      write_field_csv(rr.out.mesh, rr.out.v, ae, os);
    }
    if (c.outputs.dumps) {
      auto os = open_out(dir / "stencils.csv");
      write_stencils_csv(rr.out, os);
    }
  }
  return rr;
}

struct StudyResult {
  std::vector<StudyRow> rows;
  std::vector<ErrorNorms> errors, generic_errors;
  std::vector<RunOutput> runs;  // without field data of the reference
  json summary;
};

/// Errors and orders over mesh.N_list against a grid reference at reference.N.
inline StudyResult convergence_study(const ExperimentConfig& c, const std::filesystem::path& dir, int threads = 1,
                                     bool write = true) {
  if (c.reference.kind != "grid") throw Error(ErrorCode::Config, "reference.kind: convergence study needs 'grid'");
  if (c.mesh.N_list.size() < 2) throw Error(ErrorCode::Config, "mesh.N_list: needs at least two meshes");
  const int Nr = c.reference.N;
  spdlog::info("{}: reference solve at N={}", c.name, Nr);
  RunOutput ref = run_single(c, Nr, c.method.pollution, Nr);
  StudyResult st;
  const std::size_t n = c.mesh.N_list.size();
  st.runs.resize(n);
  st.errors.resize(n);
  std::vector<RunOutput> generic(c.pollution_pairing ? n : 0);
  st.generic_errors.resize(generic.size());
  const std::size_t jobs = n + generic.size();
  parallel_for(jobs, threads, [&](std::size_t k) {
    if (k < n) {
      st.runs[k] = run_single(c, c.mesh.N_list[k], c.method.pollution, Nr);
      st.errors[k] = error_norms(st.runs[k].mesh, st.runs[k].v, ref.mesh, ref.v);
    } else {
      const std::size_t g = k - n;
      generic[g] = run_single(c, c.mesh.N_list[g], false, Nr);
      st.generic_errors[g] = error_norms(generic[g].mesh, generic[g].v, ref.mesh, ref.v);
    }
  });
  // coarse meshes first
  for (std::size_t idx = 0; idx < n; ++idx) {
    const Mesh& m = st.runs[idx].mesh;
    StudyRow r;
    r.h = m.h;
    r.kappa_h = c.kappa * m.h;
    r.n_nodes = m.size();
    r.err_linf = st.errors[idx].linf;
    r.err_l2 = st.errors[idx].l2;
    if (c.pollution_pairing) r.R = pollution_reduction(st.errors[idx].linf, st.generic_errors[idx].linf);
    if (idx > 0) {
      const StudyRow& p = st.rows.back();
      r.order_linf = std::log(p.err_linf / r.err_linf) / std::log(p.h / r.h);
      r.order_l2 = std::log(p.err_l2 / r.err_l2) / std::log(p.h / r.h);
    }
    st.rows.push_back(r);
  }
  json rows = json::array();
  for (std::size_t idx = 0; idx < n; ++idx) {
    json e = {{"N", c.mesh.N_list[idx]},
              {"kappa_h", st.rows[idx].kappa_h},
              {"err_linf", st.rows[idx].err_linf},
              {"err_l2", st.rows[idx].err_l2},
              {"unmatched", st.errors[idx].unmatched},
              {"residual", st.runs[idx].report.residual}};
    if (c.pollution_pairing) e["err_linf_generic"] = st.generic_errors[idx].linf;
    rows.push_back(e);
  }
  st.summary = {{"reference", mesh_summary(ref.mesh, c.kappa)},
                {"rows", rows},
                {"mesh", mesh_summary(st.runs[n - 1].mesh, c.kappa)},
                {"config", to_json(c)}};
  if (write) {
    auto os = open_out(dir / "convergence.csv");
    write_study_csv(st.rows, os);
    write_json(dir / "summary.json", st.summary);
  }
  return st;
}

struct SweepCell {
  double kappa = 0.0, kappa_d = 0.0;
  int N = 0;
  ErrorNorms err;
  json summary;
};

/// Theta count giving kappa h close to the target, rounded to a multiple of n_multiple.
inline int sweep_theta_count(const ExperimentConfig& c, double kappa) {
  const double n = 2.0 * M_PI * c.pml.r_star * kappa / c.sweep.kappa_h;
  const int q = c.sweep.n_multiple;
  return std::max(q, int(std::lround(n / q)) * q);
}

/// Errors against the series solution over the (kappa, kappa d) grid.
inline std::vector<SweepCell> pml_sweep(const ExperimentConfig& c, const std::filesystem::path& dir, int threads = 1,
                                        bool write = true) {
  if (c.sweep.kappa.empty() || c.sweep.kappa_d.empty())
    throw Error(ErrorCode::Config, "sweep: kappa and kappa_d lists must be nonempty");
  if (c.boundary.id != "modal_series") throw Error(ErrorCode::Config, "problem.boundary.id: sweep needs modal_series");
  std::vector<SweepCell> cells;
  for (double k : c.sweep.kappa)
    for (double kd : c.sweep.kappa_d) cells.push_back({k, kd, 0, {}, {}});
  parallel_for(cells.size(), threads, [&](std::size_t i) {
    SweepCell& cell = cells[i];
    ExperimentConfig cc = c;
    cc.kappa = cell.kappa;
    cc.pml.kappa_d = cell.kappa_d;
    cell.N = sweep_theta_count(c, cell.kappa);
    cc.mesh.N = cell.N;
    RunOutput r = run_single(cc, cell.N, cc.method.pollution);
    const auto exact = series_on_mesh(modal_series(cc.kappa, cc.boundary.J), r.mesh, r.pde);
    cell.err = error_norms(r.mesh, r.v, exact);
    cell.summary = run_summary(cc, r);
    cell.summary["err_linf"] = cell.err.linf;
    cell.summary["kappa_d_target"] = cell.kappa_d;
    if (write && c.outputs.dumps) {
      std::ostringstream name;
      name << "k" << cell.kappa << "_kd" << cell.kappa_d;
      write_diagnostics(dir / "cells" / name.str(), cc, r);
    }
  });
  if (write) {
    auto os = open_out(dir / "pml_sweep.csv");
    os.precision(10);
    os << "kappa,kappa_d_target,n_theta,kappa_h,r_star,r_max,kappa_d,n_nodes,err_linf,err_l2\n";
    for (auto& cell : cells)
      os << cell.kappa << ',' << cell.kappa_d << ',' << cell.N << ',' << cell.summary["kappa_h"].get<double>() << ','
         << cell.summary["r_star"].get<double>() << ',' << cell.summary["r_max"].get<double>() << ','
         << cell.summary["kappa_d"].get<double>() << ',' << cell.summary["nodes"].get<std::size_t>() << ','
         << cell.err.linf << ',' << cell.err.l2 << '\n';
    json s = json::array();
    for (auto& cell : cells) s.push_back(cell.summary);
    write_json(dir / "summary.json", {{"cells", s}, {"config", to_json(c)}});
  }
  return cells;
}

}  // namespace helmfd
