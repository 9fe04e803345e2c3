#include <gtest/gtest.h>

#include "helmfd/experiment.hpp"

using namespace helmfd;

namespace {

std::string config_error(const json& j) {
  try {
    parse_config(j);
  } catch (const Error& e) {
    EXPECT_TRUE(e.is_config());
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, PresetsParse) {
  for (auto& name : preset_names()) {
    if (name == "ex3c") continue;
    EXPECT_NO_THROW(parse_config(preset(name))) << name;
  }
  EXPECT_NE(config_error(preset("ex3c")).find("problem.scatterer.kind"), std::string::npos);
  EXPECT_THROW(preset("nope"), Error);
}

TEST(Config, ErrorsNameTheField) {
  json j = preset("ex2-k20-kd20");
  j["mesh"]["coords"] = "cartesian";
  EXPECT_NE(config_error(j).find("mesh.coords"), std::string::npos);

  j = preset("ex2-k20-kd20");
  j["pml"]["t"] = 1.5;
  EXPECT_NE(config_error(j).find("pml.t"), std::string::npos);

  j = preset("ex3a");
  j["mesh"]["regions"][0]["max_lvl"] = 1;
  EXPECT_NE(config_error(j).find("mesh.regions[0].max_lvl"), std::string::npos);

  j = preset("ex1-regular");
  j["problem"]["source"]["radius"] = 10.0;
  EXPECT_NE(config_error(j).find("problem.source.radius"), std::string::npos);

  j = preset("ex1-refined");
  j["mesh"]["N_list"] = {289, 578};
  j["reference"]["N"] = 1156;
  EXPECT_NE(config_error(j).find("even"), std::string::npos);

  j = preset("ex1-regular");
  j["reference"]["N"] = 2000;
  EXPECT_NE(config_error(j).find("reference.N"), std::string::npos);

  j = preset("ex2");
  j["problem"]["kappa"] = "twenty";
  EXPECT_NE(config_error(j).find("problem.kappa"), std::string::npos);
}

TEST(Config, ResolvedConfigRoundTrip) {
  for (auto& name : {"ex1-refined", "ex2", "ex3b"}) {
    const ExperimentConfig c = parse_config(preset(name));
    const json j = to_json(c);
    EXPECT_EQ(to_json(parse_config(j)), j) << name;
  }
}

TEST(Config, ThetaCountAndTuning) {
  const ExperimentConfig c = parse_config(preset("ex2"));
  EXPECT_EQ(sweep_theta_count(c, 5.0), 192);
  EXPECT_EQ(sweep_theta_count(c, 20.0), 752);
  EXPECT_EQ(sweep_theta_count(c, 50.0), 1888);
  EXPECT_EQ(c.pml.t_for(20.0), 0.5);
  EXPECT_EQ(c.pml.t_for(5.0), 1.0);
  EXPECT_DOUBLE_EQ(c.pml.r_max_for(20.0), 4.0);
}

TEST(Config, StudyMeshesNest) {
  const ExperimentConfig c = parse_config(preset("ex1-stretched"));
  const Mesh ref = build_mesh(c, 2304, 2304);
  for (int n : c.mesh.N_list) {
    const Mesh m = build_mesh(c, n, 2304);
    EXPECT_EQ(m.i_star * (2304 / n), ref.i_star) << n;
    EXPECT_EQ(m.i_max * (2304 / n), ref.i_max) << n;
  }
}

TEST(Sources, BumpHasCompactSupport) {
  SourceConfig s;
  s.id = "plane_wave_bump";
  s.amplitude = 20.0;
  s.angle = M_PI / 3;
  s.radius = 4.0;
  const SourceFn f = make_source(s, 20.0);
  const Jet2 out = f(Jet2::variable_x(3, 4.5), Jet2::variable_y(3, 0.0));
  EXPECT_TRUE(out.is_zero());
  const double x = 1.2, y = -0.7, r2 = x * x + y * y;
  const Jet2 in = f(Jet2::variable_x(2, x), Jet2::variable_y(2, y));
  const cplx expect = 20.0 * std::polar(1.0, 20.0 * (x * 0.5 + y * std::sqrt(3.0) / 2)) * std::exp(r2 / (r2 - 16.0));
  EXPECT_LT(std::abs(in.value() - expect), 1e-13 * std::abs(expect));
  // d/dx by central differences
  const double h = 1e-5;
  auto val = [&](double a) { return f(Jet2::variable_x(0, a), Jet2::variable_y(0, y)).value(); };
  EXPECT_LT(std::abs(in.partial(1, 0) - (val(x + h) - val(x - h)) / (2 * h)), 1e-5 * std::abs(in.partial(1, 0)));
}

TEST(Runs, SeriesRunAgainstExact) {
  json j = preset("ex2-k5-kd20");
  j["mesh"]["N"] = 96;
  const RunResult r = run_experiment(parse_config(j), {}, false);
  ASSERT_TRUE(r.err.has_value());
  EXPECT_LT(r.err->linf, 2e-4);
  EXPECT_TRUE(r.out.report.residual_ok);
  EXPECT_EQ(r.summary["config"]["pml"]["kappa_d"], 20.0);
  EXPECT_GT(r.summary["r_max"].get<double>(), r.summary["r_star"].get<double>());
}

TEST(Runs, ParallelForCoversAllAndRethrows) {
  std::vector<int> hit(50, 0);
  parallel_for(hit.size(), 4, [&](std::size_t k) { hit[k] += 1; });
  for (int h : hit) EXPECT_EQ(h, 1);
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t k) {
                 if (k == 7) throw Error(ErrorCode::SingularSystem, "x");
               }),
               Error);
}
