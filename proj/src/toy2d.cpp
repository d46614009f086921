#include "spreaddiv/toy2d.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "spreaddiv/rng.hpp"

namespace spreaddiv {

namespace {
constexpr double kLogTwoPi = 1.8378770664093454836;
constexpr double kLogHalf = -0.69314718055994530942;

struct Params {
  double mean[2][2];
  double rawstd[2][2];
};

struct Objective {
  const Vec* axis1;
  const Vec* axis2;
  bool learn_var;
  double var_shift;  // sigma_f^2 in spread mode
  double fixed_var;

  // Exact two-component marginal mean log-likelihood; responsibilities give
  // the gradient in closed form. Everything is computed with standardised
  // residuals r / std so the plain mode can drive a variance through hundreds
  // of decades without var^2 under- or overflowing.
  double evaluate(const Params& p, Params* grad) const {
    const std::size_t k = axis1->size();
    double std_dev[2][2], inv_std[2][2], logv[2][2];
    for (int c = 0; c < 2; ++c)
      for (int a = 0; a < 2; ++a) {
        if (learn_var && var_shift == 0.0) {
          std_dev[c][a] = std::fabs(p.rawstd[c][a]);
          logv[c][a] = 2.0 * std::log(std_dev[c][a]);
        } else {
          const double var =
              learn_var ? p.rawstd[c][a] * p.rawstd[c][a] + var_shift : fixed_var;
          std_dev[c][a] = std::sqrt(var);
          logv[c][a] = std::log(var);
        }
        inv_std[c][a] = 1.0 / std_dev[c][a];
      }
    if (grad != nullptr) *grad = Params{{{0, 0}, {0, 0}}, {{0, 0}, {0, 0}}};

    double total = 0.0;
    for (std::size_t n = 0; n < k; ++n) {
      const double x[2] = {(*axis1)[n], (*axis2)[n]};
      double ll[2], t[2][2];
      for (int c = 0; c < 2; ++c) {
        double acc = 0.0;
        for (int a = 0; a < 2; ++a) {
          t[c][a] = (x[a] - p.mean[c][a]) * inv_std[c][a];
          acc += t[c][a] * t[c][a] + logv[c][a] + kLogTwoPi;
        }
        ll[c] = -0.5 * acc;
      }
      const double hi = std::max(ll[0], ll[1]);
      const double lse = hi + std::log1p(std::exp(std::min(ll[0], ll[1]) - hi));
      total += lse;
      if (grad != nullptr) {
        for (int c = 0; c < 2; ++c) {
          const double resp = std::exp(ll[c] - lse);
          for (int a = 0; a < 2; ++a) {
            grad->mean[c][a] += resp * t[c][a] * inv_std[c][a];
            if (learn_var) {
              // d ll / d s = (t^2 - 1) * s / var; with var = s^2 + shift the
              // factor s / var equals s * inv_std^2.
              const double s_over_var =
                  p.rawstd[c][a] * inv_std[c][a] * inv_std[c][a];
              grad->rawstd[c][a] += resp * (t[c][a] * t[c][a] - 1.0) * s_over_var;
            }
          }
        }
      }
    }
    const double inv_k = 1.0 / static_cast<double>(k);
    if (grad != nullptr)
      for (int c = 0; c < 2; ++c)
        for (int a = 0; a < 2; ++a) {
          grad->mean[c][a] *= inv_k;
          grad->rawstd[c][a] *= inv_k;
        }
    return total * inv_k + kLogHalf;
  }
};

}  // namespace

std::vector<Vec> generate_toy2d_data(const Toy2dSpec& spec) {
  if (spec.n == 0) throw std::invalid_argument("generate_toy2d_data: n must be positive");
  Rng rng(spec.seed);
  std::vector<Vec> data;
  data.reserve(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const double z = rng.uniform() < 0.5 ? 0.0 : 1.0;
    data.push_back({z + spec.component_std * rng.normal(), 0.0});
  }
  return data;
}

Toy2dResult toy2d_experiment(const Toy2dSpec& spec, const Toy2dConfig& cfg) {
  const std::vector<Vec> raw = generate_toy2d_data(spec);

  // Spread mode trains on a once-drawn bank of noisy replicates per datum;
  // the other modes use the raw data.
  Vec axis1, axis2;
  if (cfg.mode == Toy2dMode::Spread) {
    if (cfg.spread_copies == 0)
      throw std::invalid_argument("toy2d_experiment: spread_copies must be positive");
    Rng rng = Rng(spec.seed).fork(0x5fead, 1);
    axis1.reserve(raw.size() * cfg.spread_copies);
    axis2.reserve(raw.size() * cfg.spread_copies);
    for (const Vec& x : raw)
      for (std::size_t s = 0; s < cfg.spread_copies; ++s) {
        axis1.push_back(x[0] + cfg.spread_sigma * rng.normal());
        axis2.push_back(x[1] + cfg.spread_sigma * rng.normal());
      }
  } else {
    for (const Vec& x : raw) {
      axis1.push_back(x[0]);
      axis2.push_back(x[1]);
    }
  }

  Objective objective{&axis1, &axis2, cfg.mode != Toy2dMode::FixedVar,
                      cfg.mode == Toy2dMode::Spread ? cfg.spread_sigma * cfg.spread_sigma : 0.0,
                      cfg.fixed_var};

  // Initial means straddle the two clusters along axis 1.
  Vec sorted = axis1;
  std::sort(sorted.begin(), sorted.end());
  Params p{{{sorted[sorted.size() / 4], 0.1}, {sorted[(3 * sorted.size()) / 4], 0.1}},
           {{0.3, 0.3}, {0.3, 0.3}}};

  // Monotone ascent with a backtracking step: accepted steps never decrease
  // the objective, so the plain mode follows its unbounded likelihood until
  // the divergence check fires.
  Toy2dResult out;
  double step = cfg.lr;
  double value = objective.evaluate(p, nullptr);
  int flat_epochs = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    out.loss_trace.push_back(-value);
    if (!std::isfinite(value) || value > cfg.blowup_threshold) {
      out.diverged = true;
      out.diverged_epoch = epoch;
      break;
    }
    Params grad;
    objective.evaluate(p, &grad);
    // Normalised ascent direction (overflow-safe): the step length then
    // tracks the parameter scale rather than its square, which matters when
    // the plain mode drives a variance through hundreds of decades.
    double max_g = 0.0;
    for (int c = 0; c < 2; ++c)
      for (int a = 0; a < 2; ++a)
        max_g = std::max({max_g, std::fabs(grad.mean[c][a]), std::fabs(grad.rawstd[c][a])});
    if (max_g == 0.0) break;
    double norm_sq = 0.0;
    for (int c = 0; c < 2; ++c)
      for (int a = 0; a < 2; ++a) {
        grad.mean[c][a] /= max_g;
        grad.rawstd[c][a] /= max_g;
        norm_sq += grad.mean[c][a] * grad.mean[c][a] + grad.rawstd[c][a] * grad.rawstd[c][a];
      }
    const double inv_norm = 1.0 / std::sqrt(norm_sq);
    for (int c = 0; c < 2; ++c)
      for (int a = 0; a < 2; ++a) {
        grad.mean[c][a] *= inv_norm;
        grad.rawstd[c][a] *= inv_norm;
      }
    bool accepted = false;
    const double prev = value;
    for (int attempt = 0; attempt < 2000 && !accepted && step > 1e-300; ++attempt) {
      Params cand = p;
      for (int c = 0; c < 2; ++c)
        for (int a = 0; a < 2; ++a) {
          cand.mean[c][a] += step * grad.mean[c][a];
          cand.rawstd[c][a] += step * grad.rawstd[c][a];
        }
      const double cand_value = objective.evaluate(cand, nullptr);
      if (!std::isnan(cand_value) && cand_value >= value) {
        p = cand;
        value = cand_value;
        step *= 1.7;
        accepted = true;
      } else {
        step *= 0.5;
      }
    }
    if (!accepted) break;  // stationary at float resolution
    flat_epochs = value - prev <= 1e-13 * (1.0 + std::fabs(value)) ? flat_epochs + 1 : 0;
    if (flat_epochs >= 3) break;
  }

  // Report components ordered by axis-1 mean.
  const int lo = p.mean[0][0] <= p.mean[1][0] ? 0 : 1;
  for (int c = 0; c < 2; ++c) {
    const int src = c == 0 ? lo : 1 - lo;
    for (int a = 0; a < 2; ++a) {
      out.means[c][a] = p.mean[src][a];
      out.variances[c][a] = objective.learn_var
                                ? p.rawstd[src][a] * p.rawstd[src][a]
                                : cfg.fixed_var;
    }
  }
  return out;
}

}  // namespace spreaddiv
