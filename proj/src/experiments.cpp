#include "spreaddiv/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

#include "spreaddiv/divergence.hpp"
#include "spreaddiv/ica.hpp"
#include "spreaddiv/ppca.hpp"
#include "spreaddiv/rng.hpp"
#include "spreaddiv/toy2d.hpp"

namespace spreaddiv {

namespace {

std::vector<double> parse_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::strtod(item.c_str(), nullptr));
  }
  if (out.empty()) throw ConfigError("expected a comma-separated list, got '" + csv + "'");
  return out;
}

void check_param_keys(const ExperimentSpec& spec, const std::set<std::string>& known) {
  for (const auto& kv : spec.params)
    if (!known.count(kv.first))
      throw ConfigError("experiment '" + spec.name + "': unknown parameter '" + kv.first + "'");
}

DenseMatrix random_sign_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  DenseMatrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = rng.uniform() < 0.5 ? -1.0 : 1.0;
  return m;
}

CsvWriter run_fig2c(const ExperimentSpec& spec) {
  check_param_keys(spec, {"sigma2", "grid_min", "grid_max", "grid_points"});
  const double sigma2 = spec.param_double("sigma2", 0.5);
  const double lo = spec.param_double("grid_min", -3.0);
  const double hi = spec.param_double("grid_max", 3.0);
  const long points = spec.param_long("grid_points", 121);
  CsvWriter csv({"mu_q", "spread_kl"});
  const Vec mu_p = {0.0};
  for (long i = 0; i < points; ++i) {
    const double mu_q =
        lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    const Vec mq = {mu_q};
    csv.add_row({fmt17(mu_q), fmt17(gaussian_spread_kl(mu_p, mq, sigma2))});
  }
  return csv;
}

CsvWriter run_ica_grid(const ExperimentSpec& spec, bool sweep_gamma) {
  std::set<std::string> known = {"x_dim", "z_dim", "iters", "sy", "sz", "seeds", "sigma",
                                 "threads"};
  if (sweep_gamma) {
    known.insert("gammas");
    known.insert("n");
  } else {
    known.insert("gamma");
    known.insert("n_grid");
  }
  check_param_keys(spec, known);
  const std::size_t x_dim = static_cast<std::size_t>(spec.param_long("x_dim", 10));
  const std::size_t z_dim = static_cast<std::size_t>(spec.param_long("z_dim", 5));
  IcaEmConfig cfg;
  cfg.s_y = static_cast<std::size_t>(spec.param_long("sy", 1));
  cfg.s_z = static_cast<std::size_t>(spec.param_long("sz", 1000));
  cfg.iterations = static_cast<int>(spec.param_long("iters", 150));
  cfg.sigma = spec.param_double("sigma", -1.0);
  cfg.threads = static_cast<int>(spec.param_long("threads", 0));
  const long seeds = spec.param_long("seeds", 3);

  std::vector<double> gammas, n_values;
  if (sweep_gamma) {
    gammas = parse_list(spec.param("gammas", "0,0.05,0.1,0.2,0.4"));
    n_values = {static_cast<double>(spec.param_long("n", 2000))};
  } else {
    gammas = {spec.param_double("gamma", 0.2)};
    n_values = parse_list(spec.param("n_grid", "250,500,1000,2000"));
  }

  CsvWriter csv(sweep_gamma
                    ? std::vector<std::string>{"gamma", "algo", "seed", "rel_error"}
                    : std::vector<std::string>{"n", "algo", "seed", "rel_error"});
  for (double gamma : gammas) {
    for (double n_raw : n_values) {
      const std::size_t n = static_cast<std::size_t>(n_raw);
      for (long s = 0; s < seeds; ++s) {
        Rng truth_rng = Rng(spec.seed).fork(0xa7, static_cast<std::uint64_t>(s));
        const DenseMatrix a_true = random_sign_matrix(x_dim, z_dim, truth_rng);
        const IcaDataset data =
            generate_ica_data(a_true, n, gamma, spec.seed + 1000 + static_cast<std::uint64_t>(s));
        for (IcaAlgo algo : {IcaAlgo::Spread, IcaAlgo::Standard}) {
          IcaEmConfig run_cfg = cfg;
          run_cfg.seed = spec.seed + 31 * static_cast<std::uint64_t>(s);
          const IcaRunResult result = run_spread_em(data, z_dim, gamma, run_cfg, algo);
          const char* name = algo == IcaAlgo::Spread ? "spread" : "standard";
          csv.add_row({fmt17(sweep_gamma ? gamma : static_cast<double>(n)), name,
                       std::to_string(s), fmt17(result.error_trace.back())});
        }
      }
    }
  }
  return csv;
}

CsvWriter run_subspace(const ExperimentSpec& spec) {
  check_param_keys(spec, {"sigma2", "steps", "lr"});
  const double sigma2 = spec.param_double("sigma2", 0.1);
  const int steps = static_cast<int>(spec.param_long("steps", 2000));
  const double lr = spec.param_double("lr", 0.05);

  DenseMatrix loading(2, 1);
  loading(0, 0) = 1.0;
  Rng rng(spec.seed);
  const double angle = rng.uniform_in(0.2, 1.3);
  SubspacePair pair({0.0, 0.0}, {0.0, 1.0}, loading, loading, sigma2,
                    {std::cos(angle), std::sin(angle)});
  const NoiseDirectionResult result = optimize_noise_direction(pair, steps, lr);

  CsvWriter csv({"step", "kl", "dot_with_v"});
  for (const auto& pt : result.trace)
    csv.add_row({std::to_string(pt.step), fmt17(pt.kl), fmt17(pt.dot_with_v)});
  return csv;
}

CsvWriter run_toy2d(const ExperimentSpec& spec) {
  check_param_keys(spec, {"mode", "n", "sigma_f", "fixed_var", "epochs", "copies", "lr"});
  Toy2dSpec toy;
  toy.n = static_cast<std::size_t>(spec.param_long("n", 2000));
  toy.seed = spec.seed;
  Toy2dConfig cfg;
  const std::string mode = spec.param("mode", "spread");
  if (mode == "plain")
    cfg.mode = Toy2dMode::PlainLearnedVar;
  else if (mode == "fixed")
    cfg.mode = Toy2dMode::FixedVar;
  else if (mode == "spread")
    cfg.mode = Toy2dMode::Spread;
  else
    throw ConfigError("toy2d: unknown mode '" + mode + "'");
  cfg.spread_sigma = spec.param_double("sigma_f", 0.3);
  cfg.fixed_var = spec.param_double("fixed_var", 0.01);
  cfg.epochs = static_cast<int>(spec.param_long("epochs", 1200));
  cfg.spread_copies = static_cast<std::size_t>(spec.param_long("copies", 128));
  cfg.lr = spec.param_double("lr", 0.05);

  const Toy2dResult r = toy2d_experiment(toy, cfg);
  CsvWriter csv({"mode", "mean0_x", "mean0_y", "mean1_x", "mean1_y", "var0_axis2", "var1_axis2",
                 "diverged"});
  csv.add_row({mode, fmt17(r.means[0][0]), fmt17(r.means[0][1]), fmt17(r.means[1][0]),
               fmt17(r.means[1][1]), fmt17(r.variances[0][1]), fmt17(r.variances[1][1]),
               r.diverged ? "1" : "0"});
  return csv;
}

CsvWriter run_j1_demo(const ExperimentSpec& spec) {
  check_param_keys(spec, {"x", "sigma_f2", "n_grid"});
  const double x = spec.param_double("x", 1.0);
  const double sigma_f2 = spec.param_double("sigma_f2", 1.0);
  const std::vector<double> grid = parse_list(spec.param("n_grid", "10,100,1000,10000,100000"));
  CsvWriter csv({"n_y", "mu_hat", "sigma2_hat", "loglik_per_sample"});
  for (double n_raw : grid) {
    const auto demo =
        spread_bounded_likelihood_demo(x, sigma_f2, static_cast<std::size_t>(n_raw), spec.seed);
    csv.add_row({std::to_string(static_cast<long>(n_raw)), fmt17(demo.mu_hat),
                 fmt17(demo.sigma2_hat), fmt17(demo.loglik_per_sample)});
  }
  return csv;
}

}  // namespace

std::vector<std::string> experiment_names() {
  return {"fig2c", "fig4a", "fig4b", "subspace", "toy2d", "j1-demo"};
}

CsvWriter build_experiment_results(const ExperimentSpec& spec) {
  if (spec.name == "fig2c") return run_fig2c(spec);
  if (spec.name == "fig4a") return run_ica_grid(spec, true);
  if (spec.name == "fig4b") return run_ica_grid(spec, false);
  if (spec.name == "subspace") return run_subspace(spec);
  if (spec.name == "toy2d") return run_toy2d(spec);
  if (spec.name == "j1-demo") return run_j1_demo(spec);
  throw ConfigError("unknown experiment '" + spec.name + "'");
}

void run_experiment(const ExperimentSpec& spec) {
  if (spec.out_dir.empty()) throw ConfigError("run_experiment: missing output directory");
  const CsvWriter csv = build_experiment_results(spec);
  std::filesystem::create_directories(spec.out_dir);
  csv.write_file(spec.out_dir + "/results.csv");
  std::ofstream meta(spec.out_dir + "/meta.txt", std::ios::binary);
  if (!meta) throw std::runtime_error("run_experiment: cannot write meta.txt");
  meta << "version=" << kLibraryVersion << "\n\n" << serialize_config(spec);
}

}  // namespace spreaddiv
