#pragma once

#include <cstdint>

#include "spreaddiv/mlp.hpp"
#include "spreaddiv/noise.hpp"
#include "spreaddiv/rng.hpp"
#include "spreaddiv/tape.hpp"

namespace spreaddiv {

enum class SpreadFamily { Gaussian, Laplace, LowRank, MeanTransform };

struct SpreadConfig {
  SpreadFamily family = SpreadFamily::Gaussian;
  double sigma = 0.5;       // Gaussian / mean-transform base std
  double b = 0.5;           // Laplace scale
  double sigma2 = 0.25;     // low-rank fixed variance
  std::size_t rank = 1;     // low-rank R
  double lipschitz_c = 0.9; // mean-transform cap
};

/// Deterministic-decoder latent variable model trained by spread MLE: a
/// generator MLP z -> x, a Gaussian recognition model with separate mean and
/// log-variance MLPs, a standard normal prior, and a spread noise channel
/// whose learnable parameters (if any) live in the same parameter store.
struct DVaeModel {
  std::size_t x_dim = 0, z_dim = 0;
  ParamStore params;
  MlpLayout gen, enc_mu, enc_logvar;
  SpreadConfig spread;
  int spread_u = -1;                 // low-rank factor tensor (D x R)
  int spread_w = -1, spread_b = -1;  // mean-transform residual layer

  std::vector<int> model_tensor_ids() const;   // theta and phi
  std::vector<int> spread_tensor_ids() const;  // psi / U
  bool spread_learnable() const;
};

DVaeModel make_dvae(std::size_t x_dim, std::size_t z_dim, std::span<const std::size_t> gen_hidden,
                    std::span<const std::size_t> enc_hidden, const SpreadConfig& spread,
                    std::uint64_t seed, double init_scale = 0.3);

/// Noise draws consumed by one bound evaluation; eps_x is standard normal
/// (unit Laplace for the Laplace family), eps_z drives the reparameterised
/// posterior sample, z_low the low-rank factor.
struct ElboDraws {
  Vec eps_x;
  Vec eps_z;
  Vec z_low;
};

ElboDraws draw_elbo_noise(const DVaeModel& model, Rng& rng);

/// Fixed isotropic Gaussian spread. The naive form reconstructs the spread
/// sample y = x + sigma eps_x; the variance-reduced form reconstructs x
/// itself plus the exact X/2 correction, which has the same expectation over
/// eps_x but lower variance. Entropy and prior terms are shared.
TapeValue elbo_fixed_gaussian_core(Tape& tape, const DVaeModel& model, const TapeBinding& bind,
                                   std::span<const double> x, const ElboDraws& draws,
                                   bool variance_reduced);
TapeValue elbo_fixed_gaussian(Tape& tape, const DVaeModel& model, const TapeBinding& bind,
                              std::span<const double> x, Rng& rng, bool variance_reduced);

TapeValue elbo_laplace_core(Tape& tape, const DVaeModel& model, const TapeBinding& bind,
                            std::span<const double> x, const ElboDraws& draws);
TapeValue elbo_laplace(Tape& tape, const DVaeModel& model, const TapeBinding& bind,
                       std::span<const double> x, Rng& rng);

/// Learned low-rank covariance spread: y = x + U z_low + sigma eps_x is built
/// on the tape through U, and the reconstruction uses the Woodbury inverse
/// and log-determinant, factorising only the R x R block.
TapeValue elbo_lowrank_core(Tape& tape, const DVaeModel& model, const TapeBinding& bind,
                            std::span<const double> x, const ElboDraws& draws);
TapeValue elbo_lowrank(Tape& tape, const DVaeModel& model, const TapeBinding& bind,
                       std::span<const double> x, Rng& rng);

/// Learned injective mean transform f(v) = v + tanh(W v + b): residuals are
/// measured in the transformed space, f(x) - f(g(h(x + sigma eps_x, eps))).
TapeValue elbo_mean_transform_core(Tape& tape, const DVaeModel& model, const TapeBinding& bind,
                                   std::span<const double> x, const ElboDraws& draws);
TapeValue elbo_mean_transform(Tape& tape, const DVaeModel& model, const TapeBinding& bind,
                              std::span<const double> x, Rng& rng);

/// Dispatch on the model's spread family.
TapeValue elbo_core(Tape& tape, const DVaeModel& model, const TapeBinding& bind,
                    std::span<const double> x, const ElboDraws& draws, bool variance_reduced);

struct TrainConfig {
  double lr_model = 0.02;
  double lr_spread = 0.005;
  std::size_t batch = 32;
  int epochs = 100;
  int model_steps = 1;   // alternation cycle: model updates ...
  int spread_steps = 0;  // ... then psi updates
  int eps_samples = 1;   // bound draws per datum
  std::uint64_t seed = 0;
  // The reduced-variance reconstruction drops a cross term whose expectation
  // is only approximately zero for a trained model, so training defaults to
  // the unbiased naive bound; flip this on to train against the reduced form.
  bool variance_reduced = false;
  // Optional Adam mode. Reference full-scale settings: model rate 5e-4,
  // low-rank covariance rate 5e-5, mean-transform rate 1e-5, interleaving
  // 10 model epochs with 2 covariance epochs (schedule 10:2).
  bool adam = false;
};

struct TrainResult {
  std::vector<double> loss_trace;  // per-epoch mean negative bound
  bool aborted = false;            // hit a non-finite loss; params restored
  int abort_epoch = -1;
};

/// Alternating min-max training: (theta, phi) steps ascend the bound, psi
/// steps descend it (ascending the estimated divergence), with fresh noise
/// drawn for every step and spectral renormalisation after each psi update.
TrainResult train_dvae(std::span<const Vec> data, DVaeModel& model, const TrainConfig& cfg);

}  // namespace spreaddiv
