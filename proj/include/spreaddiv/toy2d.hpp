#pragma once

#include <array>
#include <cstdint>

#include "spreaddiv/matrix.hpp"

namespace spreaddiv {

/// Two-point mixture in 2-D: z ~ Bernoulli(0.5), axis 1 ~ N(z, 0.1^2 scaled
/// by component_std), axis 2 identically 0.
struct Toy2dSpec {
  std::size_t n = 2000;
  double component_std = 0.1;
  std::uint64_t seed = 0;
};

enum class Toy2dMode { PlainLearnedVar, FixedVar, Spread };

struct Toy2dConfig {
  Toy2dMode mode = Toy2dMode::Spread;
  double spread_sigma = 0.3;   // sigma_f for Spread mode
  double fixed_var = 0.01;     // observation variance for FixedVar mode
  std::size_t spread_copies = 128;  // spread samples drawn per datum
  int epochs = 1200;
  double lr = 0.05;  // initial ascent step (adapted by backtracking)
  // Per-sample mean log-likelihood that declares a blow-up. The collapsing
  // variance contributes at most -log(denormal-min)/2 ~ 372 before it
  // underflows, so the threshold sits below that hard float64 ceiling while
  // staying two orders of magnitude above any converged value.
  double blowup_threshold = 300.0;
};

struct Toy2dResult {
  // Component means and learned per-axis variances, component index first.
  std::array<std::array<double, 2>, 2> means{};
  std::array<std::array<double, 2>, 2> variances{};
  std::vector<double> loss_trace;  // per-epoch negative mean log-likelihood
  bool diverged = false;
  int diverged_epoch = -1;
};

std::vector<Vec> generate_toy2d_data(const Toy2dSpec& spec);

/// Exact binary-latent marginalisation (no inference network): the two
/// component terms are summed in closed form and the marginal likelihood is
/// ascended by monotone full-batch gradient steps with a backtracking step
/// size. PlainLearnedVar runs on the raw data and blows up (its likelihood is
/// unbounded as the axis-2 variance collapses); FixedVar pins the observation
/// variance; Spread draws spread_copies noisy replicates per datum once and
/// learns variances through v + sigma_f^2.
Toy2dResult toy2d_experiment(const Toy2dSpec& spec, const Toy2dConfig& cfg);

}  // namespace spreaddiv
