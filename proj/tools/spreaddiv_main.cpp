#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "spreaddiv/csv.hpp"
#include "spreaddiv/divergence.hpp"
#include "spreaddiv/dvae.hpp"
#include "spreaddiv/experiments.hpp"
#include "spreaddiv/ica.hpp"
#include "spreaddiv/linalg.hpp"
#include "spreaddiv/noise.hpp"
#include "spreaddiv/ppca.hpp"
#include "spreaddiv/toy2d.hpp"

namespace sd = spreaddiv;

namespace {

std::uint64_t default_seed() {
  if (const char* env = std::getenv("SPREADDIV_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0') return v;
    std::cerr << "warning: ignoring malformed SPREADDIV_SEED='" << env << "'\n";
  }
  return 0;
}

std::vector<double> parse_numbers(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::strtod(item.c_str(), nullptr));
  }
  return out;
}

void print_matrix_csv(const sd::DenseMatrix& m, std::ostream& os) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) os << ',';
      os << sd::fmt17(m(r, c));
    }
    os << '\n';
  }
}

int cmd_check_kernel(const std::string& family, double scale) {
  const sd::KernelFamily fam =
      family == "laplace" ? sd::KernelFamily::Laplace : sd::KernelFamily::Gaussian;
  const sd::StationaryKernel kernel(fam, scale);
  std::vector<double> grid;
  for (double w = 0.0; w <= 8.0; w += 0.5) grid.push_back(w);
  const sd::ValidityReport report = sd::check_stationary_validity(kernel, grid);
  std::cout << "family=" << family << "\n";
  std::cout << "scale=" << sd::fmt17(scale) << "\n";
  std::cout << "positive_density=" << (report.positive_density ? "true" : "false") << "\n";
  const char* cond = report.ft_condition == sd::FtCondition::Nonvanishing ? "nonvanishing"
                     : report.ft_condition == sd::FtCondition::CountableZeros ? "countable_zeros"
                                                                              : "fails";
  std::cout << "ft_condition=" << cond << "\n";
  double min_value = report.transform_values.front();
  for (std::size_t i = 0; i < report.omega_grid.size(); ++i) {
    std::cout << "ft@" << sd::fmt17(report.omega_grid[i]) << "="
              << sd::fmt17(report.transform_values[i]) << "\n";
    min_value = std::min(min_value, report.transform_values[i]);
  }
  std::cout << "ft_min_on_grid=" << sd::fmt17(min_value) << "\n";
  std::cout << "valid=" << (report.positive_density &&
                                    report.ft_condition != sd::FtCondition::Fails
                                ? "true"
                                : "false")
            << "\n";
  return 0;
}

int cmd_divergence(const std::string& kind_name, const std::string& p_csv,
                   const std::string& q_csv, const std::string& spread_file) {
  const sd::FDivergenceKind kind =
      kind_name == "tv" ? sd::FDivergenceKind::TotalVariation : sd::FDivergenceKind::KL;
  const sd::DiscreteDist p(parse_numbers(p_csv));
  const sd::DiscreteDist q(parse_numbers(q_csv));
  if (spread_file.empty()) {
    const auto value = sd::f_divergence(kind, p, q);
    std::cout << "defined=" << (value.has_value() ? "true" : "false") << "\n";
    if (value) std::cout << "value=" << sd::fmt17(*value) << "\n";
    return 0;
  }
  const sd::CsvMatrix raw = sd::read_csv_matrix(spread_file);
  const sd::DiscreteSpreadMatrix spread(sd::DenseMatrix(raw.rows, raw.cols, raw.values));
  const auto result = sd::spread_f_divergence_discrete(kind, p, q, spread);
  std::cout << "injective=" << (result.injective ? "true" : "false") << "\n";
  std::cout << "support_complete=" << (result.support_complete ? "true" : "false") << "\n";
  std::cout << "defined=" << (result.value.has_value() ? "true" : "false") << "\n";
  if (result.value) std::cout << "value=" << sd::fmt17(*result.value) << "\n";
  const sd::DpiResult dpi = sd::dpi_check(kind, p, q, spread);
  std::cout << "dpi_before="
            << (dpi.before.has_value() ? sd::fmt17(*dpi.before) : std::string("undefined"))
            << "\n";
  std::cout << "dpi_after=" << sd::fmt17(dpi.after) << "\n";
  std::cout << "dpi_holds=" << (dpi.holds ? "true" : "false") << "\n";
  return 0;
}

int cmd_subspace(std::uint64_t seed, double sigma2, int steps, double lr) {
  sd::ExperimentSpec spec;
  spec.name = "subspace";
  spec.seed = seed;
  spec.params = {{"sigma2", sd::fmt17(sigma2)},
                 {"steps", std::to_string(steps)},
                 {"lr", sd::fmt17(lr)}};
  std::cout << sd::build_experiment_results(spec).to_string();
  return 0;
}

int cmd_ica(std::size_t x_dim, std::size_t z_dim, std::size_t n, double gamma,
            const std::string& sigma, std::size_t sy, std::size_t sz, int iters,
            std::uint64_t seed, const std::string& algo) {
  sd::Rng truth_rng = sd::Rng(seed).fork(0xa7, 0);
  sd::DenseMatrix a_true(x_dim, z_dim);
  for (std::size_t i = 0; i < x_dim; ++i)
    for (std::size_t j = 0; j < z_dim; ++j) a_true(i, j) = truth_rng.uniform() < 0.5 ? -1.0 : 1.0;
  const sd::IcaDataset data = sd::generate_ica_data(a_true, n, gamma, seed + 1000);

  sd::IcaEmConfig cfg;
  cfg.sigma = sigma == "auto" ? -1.0 : std::strtod(sigma.c_str(), nullptr);
  cfg.s_y = sy;
  cfg.s_z = sz;
  cfg.iterations = iters;
  cfg.seed = seed;
  const sd::IcaAlgo which = algo == "standard" ? sd::IcaAlgo::Standard : sd::IcaAlgo::Spread;
  const sd::IcaRunResult result = sd::run_spread_em(data, z_dim, gamma, cfg, which);

  std::cout << "iter,rel_error\n";
  for (std::size_t i = 0; i < result.error_trace.size(); ++i)
    std::cout << i << ',' << sd::fmt17(result.error_trace[i]) << '\n';
  std::cout << "# A_est\n";
  print_matrix_csv(result.a_est, std::cout);
  return result.aborted ? 1 : 0;
}

int cmd_pca(std::size_t z_dim, double sigma2, const std::string& input, bool demo_j1,
            std::uint64_t seed) {
  if (demo_j1) {
    const auto demo = sd::spread_bounded_likelihood_demo(1.0, 1.0, 10000, seed);
    std::cout << "mu_hat=" << sd::fmt17(demo.mu_hat) << "\n";
    std::cout << "sigma2_hat=" << sd::fmt17(demo.sigma2_hat) << "\n";
    std::cout << "loglik_per_sample=" << sd::fmt17(demo.loglik_per_sample) << "\n";
    return 0;
  }
  const sd::CsvMatrix raw = sd::read_csv_matrix(input);
  const sd::PpcaModel model =
      sd::fit_spread_pca(sd::DenseMatrix(raw.rows, raw.cols, raw.values), z_dim, sigma2);
  print_matrix_csv(model.loading, std::cout);
  return 0;
}

std::vector<sd::Vec> load_dataset(const std::string& name, std::size_t n, std::uint64_t seed) {
  if (name == "linear1d") {
    sd::Rng rng = sd::Rng(seed).fork(0xda7a, 0);
    std::vector<sd::Vec> data;
    data.reserve(n);
    for (std::size_t i = 0; i < n; ++i) data.push_back({2.0 * rng.normal()});
    return data;
  }
  const sd::CsvMatrix raw = sd::read_csv_matrix(name);
  std::vector<sd::Vec> data;
  data.reserve(raw.rows);
  for (std::size_t r = 0; r < raw.rows; ++r)
    data.emplace_back(raw.values.begin() + r * raw.cols, raw.values.begin() + (r + 1) * raw.cols);
  return data;
}

int cmd_dvae(const std::string& spread, double sigma, double b, std::size_t rank, double lip_c,
             const std::string& schedule, int epochs, std::uint64_t seed,
             const std::string& dataset, std::size_t n, std::size_t z_dim, double lr,
             double lr_spread, std::size_t batch) {
  sd::SpreadConfig cfg;
  if (spread == "gaussian")
    cfg.family = sd::SpreadFamily::Gaussian;
  else if (spread == "laplace")
    cfg.family = sd::SpreadFamily::Laplace;
  else if (spread == "lowrank")
    cfg.family = sd::SpreadFamily::LowRank;
  else if (spread == "meantransform")
    cfg.family = sd::SpreadFamily::MeanTransform;
  else
    throw CLI::ValidationError("--spread", "unknown spread family '" + spread + "'");
  cfg.sigma = sigma;
  cfg.b = b;
  cfg.sigma2 = sigma * sigma;
  cfg.rank = rank;
  cfg.lipschitz_c = lip_c;

  const std::vector<sd::Vec> data = load_dataset(dataset, n, seed);
  const std::size_t x_dim = data.front().size();

  sd::TrainConfig train;
  train.epochs = epochs;
  train.seed = seed;
  train.lr_model = lr;
  train.lr_spread = lr_spread;
  train.batch = batch;
  if (std::sscanf(schedule.c_str(), "%d:%d", &train.model_steps, &train.spread_steps) != 2)
    throw CLI::ValidationError("--schedule", "expected M:S, got '" + schedule + "'");

  const std::vector<std::size_t> hidden = {16, 16};
  sd::DVaeModel model = sd::make_dvae(x_dim, z_dim, hidden, hidden, cfg, seed);
  if (!model.spread_learnable()) train.spread_steps = 0;
  const sd::TrainResult result = sd::train_dvae(data, model, train);

  std::cout << "epoch,neg_bound\n";
  for (std::size_t e = 0; e < result.loss_trace.size(); ++e)
    std::cout << e << ',' << sd::fmt17(result.loss_trace[e]) << '\n';
  std::cout << "# parameters: tensor,row,col,value\n";
  for (std::size_t t = 0; t < model.params.count(); ++t) {
    const sd::Tensor& tensor = model.params.at(static_cast<int>(t));
    const std::size_t cols = tensor.cols == 0 ? 1 : tensor.cols;
    for (std::size_t i = 0; i < tensor.size(); ++i)
      std::cout << tensor.name << ',' << i / cols << ',' << i % cols << ','
                << sd::fmt17(tensor.value[i]) << '\n';
  }
  if (result.aborted) {
    std::cerr << "training aborted at epoch " << result.abort_epoch << " (non-finite loss)\n";
    return 1;
  }
  return 0;
}

int cmd_toy2d(const std::string& mode, std::size_t n, double sigma_f, int epochs,
              std::uint64_t seed) {
  sd::Toy2dSpec spec;
  spec.n = n;
  spec.seed = seed;
  sd::Toy2dConfig cfg;
  cfg.mode = mode == "plain"   ? sd::Toy2dMode::PlainLearnedVar
             : mode == "fixed" ? sd::Toy2dMode::FixedVar
                               : sd::Toy2dMode::Spread;
  cfg.spread_sigma = sigma_f;
  cfg.epochs = epochs;
  const sd::Toy2dResult result = sd::toy2d_experiment(spec, cfg);
  std::cout << "mode=" << mode << "\n";
  for (int c = 0; c < 2; ++c) {
    std::cout << "mean" << c << "_axis1=" << sd::fmt17(result.means[c][0]) << "\n";
    std::cout << "mean" << c << "_axis2=" << sd::fmt17(result.means[c][1]) << "\n";
    std::cout << "var" << c << "_axis1=" << sd::fmt17(result.variances[c][0]) << "\n";
    std::cout << "var" << c << "_axis2=" << sd::fmt17(result.variances[c][1]) << "\n";
  }
  std::cout << "diverged=" << (result.diverged ? "true" : "false") << "\n";
  std::cout << "epochs_run=" << result.loss_trace.size() << "\n";
  std::cout << "final_neg_loglik="
            << sd::fmt17(result.loss_trace.empty() ? 0.0 : result.loss_trace.back()) << "\n";
  return 0;
}

int cmd_experiment(const std::string& name, const std::string& config_path,
                   const std::string& out_dir, bool out_given, std::uint64_t seed,
                   bool seed_given) {
  sd::ExperimentSpec spec;
  if (!config_path.empty()) {
    std::ifstream f(config_path);
    if (!f) {
      std::cerr << "error: cannot open config " << config_path << "\n";
      return 1;
    }
    std::stringstream buf;
    buf << f.rdbuf();
    spec = sd::parse_config(buf.str());
    if (seed_given) spec.seed = seed;
    if (out_given || spec.out_dir.empty()) spec.out_dir = out_dir;
  } else {
    spec.name = name;
    spec.seed = seed;
    spec.out_dir = out_dir;
  }
  sd::run_experiment(spec);
  std::cout << "wrote " << spec.out_dir << "/results.csv\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spreaddiv: spread divergences, spread-EM ICA, spread PCA and "
               "deterministic-decoder VAE training at desk scale"};
  app.require_subcommand(1);
  const std::uint64_t env_seed = default_seed();

  // check-kernel
  auto* check = app.add_subcommand("check-kernel", "validity report for a stationary kernel");
  std::string family = "gaussian";
  double scale = 1.0;
  check->add_option("--family", family, "gaussian|laplace")
      ->check(CLI::IsMember({"gaussian", "laplace"}));
  check->add_option("--scale", scale, "kernel scale (sigma or b)")->required();

  // divergence
  auto* div = app.add_subcommand("divergence", "discrete f-divergences and spread variants");
  std::string kind = "kl", p_csv, q_csv, spread_file;
  div->add_option("--kind", kind, "kl|tv")->check(CLI::IsMember({"kl", "tv"}));
  div->add_option("--p", p_csv, "probabilities, comma separated")->required();
  div->add_option("--q", q_csv, "probabilities, comma separated")->required();
  div->add_option("--spread-file", spread_file, "column-stochastic P as CSV");

  // subspace-noise
  auto* subspace = app.add_subcommand("subspace-noise", "optimal noise direction trace");
  std::uint64_t sub_seed = env_seed;
  double sub_sigma2 = 0.1, sub_lr = 0.05;
  int sub_steps = 2000;
  subspace->add_option("--seed", sub_seed);
  subspace->add_option("--sigma2", sub_sigma2);
  subspace->add_option("--steps", sub_steps);
  subspace->add_option("--lr", sub_lr);

  // ica
  auto* ica = app.add_subcommand("ica", "spread-EM for deterministic linear ICA");
  std::size_t x_dim = 10, z_dim = 5, n = 2000, sy = 1, sz = 1000;
  double gamma = 0.0;
  std::string sigma = "auto", algo = "spread";
  int iters = 500;
  std::uint64_t ica_seed = env_seed;
  ica->add_option("--x-dim", x_dim);
  ica->add_option("--z-dim", z_dim);
  ica->add_option("--n", n);
  ica->add_option("--gamma", gamma);
  ica->add_option("--sigma", sigma, "auto or a positive value");
  ica->add_option("--sy", sy);
  ica->add_option("--sz", sz);
  ica->add_option("--iters", iters);
  ica->add_option("--seed", ica_seed);
  ica->add_option("--algo", algo)->check(CLI::IsMember({"spread", "standard"}));

  // pca
  auto* pca = app.add_subcommand("pca", "deterministic PCA through the spread route");
  std::size_t pca_z = 1;
  double pca_sigma2 = 1.0;
  std::string pca_input;
  bool demo_j1 = false;
  std::uint64_t pca_seed = env_seed;
  pca->add_option("--z-dim", pca_z);
  pca->add_option("--sigma2", pca_sigma2);
  pca->add_option("--input", pca_input, "data CSV, one row per observation");
  pca->add_flag("--demo-j1", demo_j1, "bounded spread likelihood demonstration");
  pca->add_option("--seed", pca_seed);

  // dvae
  auto* dvae = app.add_subcommand("dvae", "train a deterministic-decoder VAE by spread MLE");
  std::string spread = "gaussian", schedule = "1:0", dataset = "linear1d";
  double dv_sigma = 0.5, dv_b = 0.5, dv_lip = 0.9, dv_lr = 0.02, dv_lr_spread = 0.005;
  std::size_t dv_rank = 1, dv_n = 512, dv_z = 1, dv_batch = 32;
  int dv_epochs = 50;
  std::uint64_t dv_seed = env_seed;
  dvae->add_option("--spread", spread, "gaussian|laplace|lowrank|meantransform")
      ->check(CLI::IsMember({"gaussian", "laplace", "lowrank", "meantransform"}));
  dvae->add_option("--sigma", dv_sigma);
  dvae->add_option("--b", dv_b);
  dvae->add_option("--rank", dv_rank);
  dvae->add_option("--lipschitz-c", dv_lip);
  dvae->add_option("--schedule", schedule, "model:spread alternation counts, e.g. 10:2");
  dvae->add_option("--epochs", dv_epochs);
  dvae->add_option("--seed", dv_seed);
  dvae->add_option("--dataset", dataset, "builtin 'linear1d' or a CSV path");
  dvae->add_option("--n", dv_n, "builtin dataset size");
  dvae->add_option("--z-dim", dv_z);
  dvae->add_option("--lr", dv_lr);
  dvae->add_option("--lr-spread", dv_lr_spread);
  dvae->add_option("--batch", dv_batch);

  // toy2d
  auto* toy = app.add_subcommand("toy2d", "partially implicit 2-D toy model");
  std::string toy_mode = "spread";
  std::size_t toy_n = 2000;
  double toy_sigma_f = 0.3;
  int toy_epochs = 1200;
  std::uint64_t toy_seed = env_seed;
  toy->add_option("--mode", toy_mode)->check(CLI::IsMember({"plain", "fixed", "spread"}));
  toy->add_option("--n", toy_n);
  toy->add_option("--sigma-f", toy_sigma_f);
  toy->add_option("--epochs", toy_epochs);
  toy->add_option("--seed", toy_seed);

  // experiment
  auto* exp = app.add_subcommand("experiment", "run a canned experiment, write results.csv");
  std::string exp_name, exp_config, exp_out = "results";
  std::uint64_t exp_seed = env_seed;
  auto* name_opt = exp->add_option("--name", exp_name, "fig2c|fig4a|fig4b|subspace|toy2d|j1-demo");
  exp->add_option("--config", exp_config, "config file (key=value with sections)");
  auto* out_opt = exp->add_option("--out", exp_out, "output directory");
  auto* seed_opt = exp->add_option("--seed", exp_seed);
  name_opt->excludes("--config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*check) return cmd_check_kernel(family, scale);
    if (*div) return cmd_divergence(kind, p_csv, q_csv, spread_file);
    if (*subspace) return cmd_subspace(sub_seed, sub_sigma2, sub_steps, sub_lr);
    if (*ica)
      return cmd_ica(x_dim, z_dim, n, gamma, sigma, sy, sz, iters, ica_seed, algo);
    if (*pca) return cmd_pca(pca_z, pca_sigma2, pca_input, demo_j1, pca_seed);
    if (*dvae)
      return cmd_dvae(spread, dv_sigma, dv_b, dv_rank, dv_lip, schedule, dv_epochs, dv_seed,
                      dataset, dv_n, dv_z, dv_lr, dv_lr_spread, dv_batch);
    if (*toy) return cmd_toy2d(toy_mode, toy_n, toy_sigma_f, toy_epochs, toy_seed);
    if (*exp) {
      if (exp_name.empty() && exp_config.empty()) {
        std::cerr << "error: experiment needs --name or --config\n";
        return 2;
      }
      return cmd_experiment(exp_name, exp_config, exp_out, !out_opt->empty(), exp_seed,
                            !seed_opt->empty());
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
