#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "helmfd/experiment.hpp"

namespace fs = std::filesystem;
using namespace helmfd;

namespace {

struct Common {
  std::string config_path;
  std::string preset_name;
  std::string out;
  std::string pollution;
  int threads = 1;
};

ExperimentConfig load(const Common& o) {
  json j;
  if (!o.config_path.empty() && !o.preset_name.empty())
    throw Error(ErrorCode::Config, "--config and --preset are mutually exclusive");
  if (!o.preset_name.empty()) {
    j = preset(o.preset_name);
  } else if (!o.config_path.empty()) {
    std::ifstream is(o.config_path);
    if (!is) throw Error(ErrorCode::Io, "cannot read " + o.config_path);
    try {
      j = json::parse(is);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::Config, o.config_path + ": " + e.what());
    }
  } else {
    throw Error(ErrorCode::Config, "one of --config or --preset is required");
  }
  ExperimentConfig c = parse_config(j);
  if (!o.pollution.empty()) c.method.pollution = o.pollution == "on";
  if (!o.out.empty()) c.outputs.dir = o.out;
  return c;
}

void add_common(CLI::App* sub, Common& o) {
  sub->add_option("--config", o.config_path, "JSON configuration file");
  sub->add_option("--preset", o.preset_name, "built-in configuration")
      ->check(CLI::IsMember(preset_names()));
  sub->add_option("--out", o.out, "output directory");
  sub->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
  sub->add_option("--pollution", o.pollution, "pollution minimisation")->check(CLI::IsMember({"on", "off"}));
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("helmholtz_fd");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* lv = std::getenv("HELMHOLTZ_FD_LOG")) spdlog::set_level(spdlog::level::from_str(lv));
}

int selfcheck() {
  // zero data must give the zero field, and the kappa = 5 series problem must converge
  ExperimentConfig z = parse_config(preset("zero"));
  RunOutput r = run_single(z, z.mesh.N, true);
  double vmax = 0.0;
  for (auto& x : r.v) vmax = std::max(vmax, std::abs(x));
  const bool zero_ok = vmax == 0.0;
  std::cout << (zero_ok ? "PASS" : "FAIL") << " zero data gives zero field (max |v| = " << vmax << ")\n";

  json j = preset("ex2-k5-kd20");
  j["mesh"]["N"] = 96;
  ExperimentConfig c = parse_config(j);
  RunResult rr = run_experiment(c, {}, false);
  const bool acc_ok = rr.err && rr.err->linf < 1e-3 && rr.out.report.residual_ok;
  std::cout << (acc_ok ? "PASS" : "FAIL") << " series problem kappa=5 N=96 error " << rr.err->linf << " residual "
            << rr.out.report.residual << "\n";
  return zero_ok && acc_ok ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Exterior Helmholtz solver with compact high-order finite differences and a circular PML"};
  app.require_subcommand(1);
  Common o;
  auto* run = app.add_subcommand("run", "single solve");
  auto* study = app.add_subcommand("convergence-study", "errors and orders against a fine reference");
  auto* sweep = app.add_subcommand("pml-sweep", "errors over PML thickness and wavenumber");
  auto* dmesh = app.add_subcommand("dump-mesh", "write nodes and classes");
  auto* dsten = app.add_subcommand("dump-stencil", "write every stencil used by a run");
  auto* check = app.add_subcommand("selfcheck", "quick internal consistency checks");
  for (auto* s : {run, study, sweep, dmesh, dsten}) add_common(s, o);
  int N_override = 0;
  dmesh->add_option("--N", N_override, "theta count");
  dsten->add_option("--N", N_override, "theta count");
  CLI11_PARSE(app, argc, argv);

  try {
    if (check->parsed()) return selfcheck();
    ExperimentConfig c = load(o);
    const fs::path dir = c.outputs.dir;
    if (run->parsed()) {
      RunResult rr = run_experiment(c, dir);
      if (rr.err) std::cout << "err_linf " << rr.err->linf << " err_l2 " << rr.err->l2 << "\n";
      std::cout << "residual " << rr.out.report.residual << "\nwrote " << (dir / "summary.json").string() << "\n";
      return rr.out.report.residual_ok ? 0 : 3;
    }
    if (study->parsed()) {
      StudyResult st = convergence_study(c, dir, o.threads);
      write_study_csv(st.rows, std::cout);
      return 0;
    }
    if (sweep->parsed()) {
      auto cells = pml_sweep(c, dir, o.threads);
      for (auto& cell : cells)
        std::cout << "kappa " << cell.kappa << " kappa_d " << cell.kappa_d << " N " << cell.N << " err " << cell.err.linf
                  << "\n";
      return 0;
    }
    const int N = N_override ? N_override : (c.mesh.N ? c.mesh.N : c.mesh.N_list.empty() ? 0 : c.mesh.N_list.back());
    if (N <= 0) throw Error(ErrorCode::Config, "mesh.N: required");
    const int N_ref = c.reference.kind == "grid" ? c.reference.N : 0;
    if (dmesh->parsed()) {
      Mesh m = build_mesh(c, N, N_ref);
      const ScattererGeometry g = make_geometry(c.scatterer);
      detect_boundary_nodes(m, g, lattice_rotation(m, g));
      auto os = open_out(dir / "mesh.csv");
      write_mesh_csv(m, os);
      write_json(dir / "mesh.json", mesh_summary(m, c.kappa));
      std::cout << "nodes " << m.size() << "\nwrote " << (dir / "mesh.csv").string() << "\n";
      return 0;
    }
    if (dsten->parsed()) {
      RunOutput r = run_single(c, N, c.method.pollution, N_ref);
      write_diagnostics(dir, c, r);
      std::cout << "grid stencils " << r.grid_stencils.size() << " boundary stencils " << r.boundary_stencils.size()
                << "\nwrote " << (dir / "stencils.csv").string() << "\n";
      return 0;
    }
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return e.is_config() ? 2 : 3;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 3;
  }
  return 0;
}
