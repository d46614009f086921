#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "spreaddiv/config.hpp"
#include "spreaddiv/csv.hpp"
#include "spreaddiv/experiments.hpp"

using namespace spreaddiv;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("fmt17: round-trips doubles and uses a dot separator") {
  for (double v : {1.0, -0.1, 3.141592653589793, 1e-17, 123456789.123456789}) {
    const std::string s = fmt17(v);
    CHECK(std::strtod(s.c_str(), nullptr) == v);
    CHECK(s.find(',') == std::string::npos);
  }
}

TEST_CASE("config: minimal spec fills defaults") {
  const ExperimentSpec spec = parse_config("[experiment]\nname=fig2c\n");
  CHECK(spec.name == "fig2c");
  CHECK(spec.seed == 0);
  CHECK(spec.out_dir.empty());
  CHECK(spec.params.empty());
  CHECK(spec.param_double("sigma2", 0.5) == 0.5);
}

TEST_CASE("config: serialize then parse round-trips") {
  ExperimentSpec spec;
  spec.name = "fig4a";
  spec.seed = 1234;
  spec.out_dir = "results/fig4a";
  spec.params = {{"gammas", "0,0.1"}, {"iters", "25"}};
  const ExperimentSpec back = parse_config(serialize_config(spec));
  CHECK(back == spec);
}

TEST_CASE("config: errors name the key and line") {
  CHECK_THROWS_WITH_AS(parse_config("[experiment]\nname=a\nname=b\n"),
                       doctest::Contains("line 3"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("[experiment]\nname=a\nbogus=1\n"),
                       doctest::Contains("unknown key 'bogus'"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("[params]\nx=1\n"), doctest::Contains("missing required"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("[experiment]\nname=a\n[params]\nk=1\nk=2\n"),
                       doctest::Contains("duplicate key 'k'"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("[mystery]\n"), doctest::Contains("unknown section"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("name=a\n"), doctest::Contains("outside any section"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("[experiment]\nname=a\nseed=xyz\n"),
                       doctest::Contains("seed"), ConfigError);
}

TEST_CASE("config: typed parameter access rejects non-numeric values") {
  ExperimentSpec spec = parse_config("[experiment]\nname=a\n[params]\nsigma2=soup\n");
  CHECK_THROWS_AS(spec.param_double("sigma2", 1.0), ConfigError);
  CHECK(spec.param("sigma2", "") == "soup");
}

TEST_CASE("experiment: unknown names and unknown parameter keys are rejected") {
  ExperimentSpec spec;
  spec.name = "nope";
  CHECK_THROWS_AS(build_experiment_results(spec), ConfigError);
  spec.name = "fig2c";
  spec.params = {{"bogus", "1"}};
  CHECK_THROWS_AS(build_experiment_results(spec), ConfigError);
}

TEST_CASE("experiment fig2c: squared-distance column with the minimum at zero") {
  ExperimentSpec spec;
  spec.name = "fig2c";
  spec.seed = 3;
  const CsvWriter csv = build_experiment_results(spec);
  REQUIRE(csv.header() == std::vector<std::string>{"mu_q", "spread_kl"});
  const std::string text = csv.to_string();
  std::stringstream ss(text);
  std::string line;
  std::getline(ss, line);  // header
  double best_mu = 1e9, best_kl = 1e300;
  while (std::getline(ss, line)) {
    const std::size_t comma = line.find(',');
    const double mu = std::strtod(line.substr(0, comma).c_str(), nullptr);
    const double kl = std::strtod(line.substr(comma + 1).c_str(), nullptr);
    CHECK(kl == doctest::Approx(mu * mu).epsilon(1e-12));
    if (kl < best_kl) {
      best_kl = kl;
      best_mu = mu;
    }
  }
  CHECK(std::fabs(best_mu) < 1e-9);
}

TEST_CASE("experiment subspace: trace drives the alignment to zero") {
  ExperimentSpec spec;
  spec.name = "subspace";
  spec.seed = 5;
  const CsvWriter csv = build_experiment_results(spec);
  const std::string text = csv.to_string();
  const std::size_t last_nl = text.find_last_of('\n', text.size() - 2);
  const std::string last = text.substr(last_nl + 1);
  std::stringstream ss(last);
  std::string step, kl, dot;
  std::getline(ss, step, ',');
  std::getline(ss, kl, ',');
  std::getline(ss, dot, ',');
  CHECK(std::fabs(std::strtod(dot.c_str(), nullptr)) <= 1e-4);
}

TEST_CASE("experiment schemas are stable") {
  ExperimentSpec spec;
  spec.seed = 1;
  spec.name = "subspace";
  CHECK(build_experiment_results(spec).header() ==
        std::vector<std::string>{"step", "kl", "dot_with_v"});
  spec.name = "j1-demo";
  spec.params = {{"n_grid", "10,50"}};
  CHECK(build_experiment_results(spec).header() ==
        std::vector<std::string>{"n_y", "mu_hat", "sigma2_hat", "loglik_per_sample"});
  spec.name = "toy2d";
  spec.params = {{"mode", "fixed"}, {"n", "200"}, {"epochs", "50"}};
  CHECK(build_experiment_results(spec).header() ==
        std::vector<std::string>{"mode", "mean0_x", "mean0_y", "mean1_x", "mean1_y",
                                 "var0_axis2", "var1_axis2", "diverged"});
}

TEST_CASE("experiment j1-demo: bounded log-likelihood at every sample count") {
  ExperimentSpec spec;
  spec.name = "j1-demo";
  spec.seed = 7;
  spec.params = {{"n_grid", "10,100,1000"}};
  const CsvWriter csv = build_experiment_results(spec);
  std::stringstream ss(csv.to_string());
  std::string line;
  std::getline(ss, line);
  int rows = 0;
  while (std::getline(ss, line)) {
    ++rows;
    const std::size_t last_comma = line.find_last_of(',');
    const double loglik = std::strtod(line.substr(last_comma + 1).c_str(), nullptr);
    CHECK(std::isfinite(loglik));
  }
  CHECK(rows == 3);
}

TEST_CASE("experiment toy2d: fixed-mode summary row") {
  ExperimentSpec spec;
  spec.name = "toy2d";
  spec.seed = 2;
  spec.params = {{"mode", "fixed"}, {"n", "500"}, {"epochs", "400"}};
  const CsvWriter csv = build_experiment_results(spec);
  const std::string text = csv.to_string();
  CHECK(text.find("fixed") != std::string::npos);
  CHECK(text.substr(text.size() - 2) == "0\n");  // diverged = 0
}

TEST_CASE("run_experiment: byte-identical results.csv for identical specs") {
  const std::filesystem::path dir1 = std::filesystem::temp_directory_path() / "sd_exp_a";
  const std::filesystem::path dir2 = std::filesystem::temp_directory_path() / "sd_exp_b";
  std::filesystem::remove_all(dir1);
  std::filesystem::remove_all(dir2);

  ExperimentSpec spec;
  spec.name = "fig2c";
  spec.seed = 11;
  spec.params = {{"grid_points", "31"}};
  spec.out_dir = dir1.string();
  run_experiment(spec);
  spec.out_dir = dir2.string();
  run_experiment(spec);

  CHECK(slurp((dir1 / "results.csv").string()) == slurp((dir2 / "results.csv").string()));
  const std::string meta = slurp((dir1 / "meta.txt").string());
  CHECK(meta.find("version=") != std::string::npos);
  CHECK(meta.find("name=fig2c") != std::string::npos);
  CHECK(meta.find("seed=11") != std::string::npos);
  std::filesystem::remove_all(dir1);
  std::filesystem::remove_all(dir2);
}

TEST_CASE("run_experiment: ica grids at smoke scale have the documented schema") {
  ExperimentSpec spec;
  spec.name = "fig4a";
  spec.seed = 1;
  spec.params = {{"x_dim", "4"},  {"z_dim", "2"}, {"n", "120"},          {"iters", "3"},
                 {"sz", "40"},    {"seeds", "1"}, {"gammas", "0,0.2"}};
  const CsvWriter csv = build_experiment_results(spec);
  CHECK(csv.header() == std::vector<std::string>{"gamma", "algo", "seed", "rel_error"});
  std::stringstream ss(csv.to_string());
  std::string line;
  int rows = -1;
  while (std::getline(ss, line)) ++rows;
  CHECK(rows == 4);  // 2 gammas x 2 algos x 1 seed

  ExperimentSpec spec_b;
  spec_b.name = "fig4b";
  spec_b.seed = 1;
  spec_b.params = {{"x_dim", "4"}, {"z_dim", "2"}, {"n_grid", "100,200"}, {"iters", "3"},
                   {"sz", "40"},   {"seeds", "1"}, {"gamma", "0.2"}};
  const CsvWriter csv_b = build_experiment_results(spec_b);
  CHECK(csv_b.header() == std::vector<std::string>{"n", "algo", "seed", "rel_error"});
}

TEST_CASE("read_csv_matrix: parses rows and rejects ragged input") {
  const std::filesystem::path p = std::filesystem::temp_directory_path() / "sd_csv_test.csv";
  {
    std::ofstream f(p);
    f << "1.0,2.0\n3.5,-4.5\n";
  }
  const CsvMatrix m = read_csv_matrix(p.string());
  CHECK(m.rows == 2);
  CHECK(m.cols == 2);
  CHECK(m.values[3] == -4.5);
  {
    std::ofstream f(p);
    f << "1.0,2.0\n3.5\n";
  }
  CHECK_THROWS_AS(read_csv_matrix(p.string()), std::runtime_error);
  std::filesystem::remove(p);
}
