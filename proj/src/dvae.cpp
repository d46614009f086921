#include "spreaddiv/dvae.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace spreaddiv {

namespace {
constexpr double kLogTwoPi = 1.8378770664093454836;
}

std::vector<int> DVaeModel::model_tensor_ids() const {
  std::vector<int> ids;
  for (const MlpLayout* net : {&gen, &enc_mu, &enc_logvar}) {
    ids.insert(ids.end(), net->weights.begin(), net->weights.end());
    ids.insert(ids.end(), net->biases.begin(), net->biases.end());
  }
  return ids;
}

std::vector<int> DVaeModel::spread_tensor_ids() const {
  std::vector<int> ids;
  if (spread_u >= 0) ids.push_back(spread_u);
  if (spread_w >= 0) ids.push_back(spread_w);
  if (spread_b >= 0) ids.push_back(spread_b);
  return ids;
}

bool DVaeModel::spread_learnable() const {
  return spread_u >= 0 || spread_w >= 0;
}

DVaeModel make_dvae(std::size_t x_dim, std::size_t z_dim, std::span<const std::size_t> gen_hidden,
                    std::span<const std::size_t> enc_hidden, const SpreadConfig& spread,
                    std::uint64_t seed, double init_scale) {
  DVaeModel m;
  m.x_dim = x_dim;
  m.z_dim = z_dim;
  m.spread = spread;
  Rng rng(seed);
  m.gen = add_mlp(m.params, "gen", z_dim, x_dim, gen_hidden, rng, init_scale);
  m.enc_mu = add_mlp(m.params, "enc_mu", x_dim, z_dim, enc_hidden, rng, init_scale);
  m.enc_logvar = add_mlp(m.params, "enc_logvar", x_dim, z_dim, enc_hidden, rng, init_scale);
  if (spread.family == SpreadFamily::LowRank) {
    if (spread.rank == 0 || spread.rank > x_dim)
      throw std::invalid_argument("make_dvae: low-rank spread needs 1 <= rank <= x_dim");
    m.spread_u = m.params.add("spread.u", x_dim, spread.rank, Vec(x_dim * spread.rank, 0.0));
  } else if (spread.family == SpreadFamily::MeanTransform) {
    Vec w_init(x_dim * x_dim);
    for (double& v : w_init) v = rng.uniform_in(-0.3, 0.3);
    const DenseMatrix w_norm =
        spectral_normalize(DenseMatrix(x_dim, x_dim, std::move(w_init)), spread.lipschitz_c);
    m.spread_w = m.params.add("spread.w", x_dim, x_dim, w_norm.entries());
    m.spread_b = m.params.add("spread.b", x_dim, 0, Vec(x_dim, 0.0));
  }
  return m;
}

ElboDraws draw_elbo_noise(const DVaeModel& model, Rng& rng) {
  ElboDraws d;
  d.eps_x.resize(model.x_dim);
  if (model.spread.family == SpreadFamily::Laplace) {
    for (double& v : d.eps_x) v = rng.laplace(1.0);
  } else {
    rng.fill_normal(d.eps_x);
  }
  d.eps_z.resize(model.z_dim);
  rng.fill_normal(d.eps_z);
  if (model.spread.family == SpreadFamily::LowRank) {
    d.z_low.resize(model.spread.rank);
    rng.fill_normal(d.z_low);
  }
  return d;
}

namespace {

struct Posterior {
  TapeValue z;
  TapeValue entropy;
  TapeValue log_prior;
};

// Encode y, sample z = mu + exp(lv/2) * eps, and assemble the Gaussian
// entropy and standard normal prior terms.
Posterior encode(Tape& tape, const DVaeModel& model, const TapeBinding& bind, TapeValue y_enc,
                 const ElboDraws& draws) {
  const TapeValue mu = mlp_forward(tape, bind, model.enc_mu, y_enc);
  const TapeValue lv = mlp_forward(tape, bind, model.enc_logvar, y_enc);
  const TapeValue eps = tape.constant(draws.eps_z);
  const TapeValue std_dev = tape.exp(tape.scale(lv, 0.5));
  Posterior p{tape.add(mu, tape.mul(std_dev, eps)), {}, {}};
  const double z_dim = static_cast<double>(model.z_dim);
  p.entropy = tape.add_const(tape.scale(tape.sum(lv), 0.5), 0.5 * z_dim * (1.0 + kLogTwoPi));
  p.log_prior =
      tape.add_const(tape.scale(tape.sum(tape.square(p.z)), -0.5), -0.5 * z_dim * kLogTwoPi);
  return p;
}

Vec shifted(std::span<const double> x, std::span<const double> noise, double scale) {
  Vec y(x.begin(), x.end());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += scale * noise[i];
  return y;
}

}  // namespace

TapeValue elbo_fixed_gaussian_core(Tape& tape, const DVaeModel& model, const TapeBinding& bind,
                                   std::span<const double> x, const ElboDraws& draws,
                                   bool variance_reduced) {
  if (model.spread.family != SpreadFamily::Gaussian) {
    if (variance_reduced)
      throw std::invalid_argument(
          "elbo_fixed_gaussian: variance-reduced form requires Gaussian spread "
          "(the cross-term cancellation is Gaussian-specific)");
    throw std::invalid_argument("elbo_fixed_gaussian: model spread is not fixed Gaussian");
  }
  const double sigma = model.spread.sigma;
  const double s2 = sigma * sigma;
  const double x_dim = static_cast<double>(model.x_dim);
  const Vec y = shifted(x, draws.eps_x, sigma);
  const TapeValue y_enc = tape.constant(y);
  const Posterior post = encode(tape, model, bind, y_enc, draws);
  const TapeValue g = mlp_forward(tape, bind, model.gen, post.z);

  TapeValue recon{};
  if (variance_reduced) {
    const TapeValue residual = tape.sub(tape.constant(x), g);
    recon = tape.add_const(tape.scale(tape.sum(tape.square(residual)), -0.5 / s2),
                           -0.5 * x_dim - 0.5 * x_dim * (std::log(s2) + kLogTwoPi));
  } else {
    const TapeValue residual = tape.sub(y_enc, g);
    recon = tape.add_const(tape.scale(tape.sum(tape.square(residual)), -0.5 / s2),
                           -0.5 * x_dim * (std::log(s2) + kLogTwoPi));
  }
  return tape.add(tape.add(post.entropy, post.log_prior), recon);
}

TapeValue elbo_fixed_gaussian(Tape& tape, const DVaeModel& model, const TapeBinding& bind,
                              std::span<const double> x, Rng& rng, bool variance_reduced) {
  const ElboDraws draws = draw_elbo_noise(model, rng);
  return elbo_fixed_gaussian_core(tape, model, bind, x, draws, variance_reduced);
}

TapeValue elbo_laplace_core(Tape& tape, const DVaeModel& model, const TapeBinding& bind,
                            std::span<const double> x, const ElboDraws& draws) {
  if (model.spread.family != SpreadFamily::Laplace)
    throw std::invalid_argument("elbo_laplace: model spread is not Laplace");
  const double b = model.spread.b;
  const double x_dim = static_cast<double>(model.x_dim);
  const Vec y = shifted(x, draws.eps_x, b);
  const TapeValue y_enc = tape.constant(y);
  const Posterior post = encode(tape, model, bind, y_enc, draws);
  const TapeValue g = mlp_forward(tape, bind, model.gen, post.z);
  const TapeValue residual = tape.sub(y_enc, g);
  const TapeValue recon = tape.add_const(tape.scale(tape.sum(tape.abs(residual)), -1.0 / b),
                                         -x_dim * std::log(2.0 * b));
  return tape.add(tape.add(post.entropy, post.log_prior), recon);
}

TapeValue elbo_laplace(Tape& tape, const DVaeModel& model, const TapeBinding& bind,
                       std::span<const double> x, Rng& rng) {
  const ElboDraws draws = draw_elbo_noise(model, rng);
  return elbo_laplace_core(tape, model, bind, x, draws);
}

TapeValue elbo_lowrank_core(Tape& tape, const DVaeModel& model, const TapeBinding& bind,
                            std::span<const double> x, const ElboDraws& draws) {
  if (model.spread.family != SpreadFamily::LowRank || model.spread_u < 0)
    throw std::invalid_argument("elbo_lowrank: model spread is not low-rank Gaussian");
  const double s2 = model.spread.sigma2;
  const double x_dim = static_cast<double>(model.x_dim);
  const TapeValue u = bind[model.spread_u];

  // y = x + U z_low + sigma eps_x, differentiable through U.
  const Vec base = shifted(x, draws.eps_x, std::sqrt(s2));
  const TapeValue y = tape.affine(u, tape.constant(draws.z_low), tape.constant(base));

  const Posterior post = encode(tape, model, bind, y, draws);
  const TapeValue g = mlp_forward(tape, bind, model.gen, post.z);
  const TapeValue residual = tape.sub(y, g);

  // r^T Sigma^{-1} r = |r|^2/s2 - t^T M^{-1} t / s2^2 with t = U^T r and
  // M = I + U^T U / s2; log det Sigma = log det M + D log s2.
  const TapeValue t = tape.matvec_t(u, residual);
  const TapeValue m = tape.add_scaled_identity(tape.scale(tape.gram(u), 1.0 / s2), 1.0);
  const TapeValue quad =
      tape.add(tape.scale(tape.dot(residual, residual), 1.0 / s2),
               tape.scale(tape.dot(t, tape.solve_sym(m, t)), -1.0 / (s2 * s2)));
  const TapeValue logdet = tape.add_const(tape.logdet_sym(m), x_dim * std::log(s2));
  const TapeValue recon =
      tape.scale(tape.add_const(tape.add(quad, logdet), x_dim * kLogTwoPi), -0.5);
  return tape.add(tape.add(post.entropy, post.log_prior), recon);
}

TapeValue elbo_lowrank(Tape& tape, const DVaeModel& model, const TapeBinding& bind,
                       std::span<const double> x, Rng& rng) {
  const ElboDraws draws = draw_elbo_noise(model, rng);
  return elbo_lowrank_core(tape, model, bind, x, draws);
}

namespace {

TapeValue mean_transform_forward(Tape& tape, const DVaeModel& model, const TapeBinding& bind,
                                 TapeValue v) {
  const TapeValue g = tape.tanh(tape.affine(bind[model.spread_w], v, bind[model.spread_b]));
  return tape.add(v, g);
}

}  // namespace

TapeValue elbo_mean_transform_core(Tape& tape, const DVaeModel& model, const TapeBinding& bind,
                                   std::span<const double> x, const ElboDraws& draws) {
  if (model.spread.family != SpreadFamily::MeanTransform || model.spread_w < 0)
    throw std::invalid_argument("elbo_mean_transform: model spread is not a mean transform");
  const double sigma = model.spread.sigma;
  const double s2 = sigma * sigma;
  const double x_dim = static_cast<double>(model.x_dim);
  const Vec y = shifted(x, draws.eps_x, sigma);
  const TapeValue y_enc = tape.constant(y);
  const Posterior post = encode(tape, model, bind, y_enc, draws);
  const TapeValue g = mlp_forward(tape, bind, model.gen, post.z);

  const TapeValue fx = mean_transform_forward(tape, model, bind, tape.constant(x));
  const TapeValue fg = mean_transform_forward(tape, model, bind, g);
  const TapeValue recon =
      tape.add_const(tape.scale(tape.sum(tape.square(tape.sub(fx, fg))), -0.5 / s2),
                     -0.5 * x_dim - 0.5 * x_dim * (std::log(s2) + kLogTwoPi));
  return tape.add(tape.add(post.entropy, post.log_prior), recon);
}

TapeValue elbo_mean_transform(Tape& tape, const DVaeModel& model, const TapeBinding& bind,
                              std::span<const double> x, Rng& rng) {
  const ElboDraws draws = draw_elbo_noise(model, rng);
  return elbo_mean_transform_core(tape, model, bind, x, draws);
}

TapeValue elbo_core(Tape& tape, const DVaeModel& model, const TapeBinding& bind,
                    std::span<const double> x, const ElboDraws& draws, bool variance_reduced) {
  switch (model.spread.family) {
    case SpreadFamily::Gaussian:
      return elbo_fixed_gaussian_core(tape, model, bind, x, draws, variance_reduced);
    case SpreadFamily::Laplace:
      if (variance_reduced)
        throw std::invalid_argument(
            "elbo: variance-reduced form requires Gaussian spread "
            "(the cross-term cancellation is Gaussian-specific)");
      return elbo_laplace_core(tape, model, bind, x, draws);
    case SpreadFamily::LowRank:
      return elbo_lowrank_core(tape, model, bind, x, draws);
    case SpreadFamily::MeanTransform:
      return elbo_mean_transform_core(tape, model, bind, x, draws);
  }
  throw std::logic_error("elbo_core: unknown spread family");
}

namespace {

struct AdamState {
  Vec m, v;
  long t = 0;
};

void apply_update(ParamStore& params, const TapeBinding& bind, std::span<const int> ids,
                  double lr, double direction, bool adam, AdamState& state,
                  std::span<const std::size_t> offsets) {
  if (adam) ++state.t;
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  for (int id : ids) {
    Tensor& t = params.at(id);
    const Vec& g = bind[id].grad();
    const std::size_t off = offsets[static_cast<std::size_t>(id)];
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double grad = direction * g[i];
      if (adam) {
        double& m = state.m[off + i];
        double& v = state.v[off + i];
        m = beta1 * m + (1.0 - beta1) * grad;
        v = beta2 * v + (1.0 - beta2) * grad * grad;
        const double mh = m / (1.0 - std::pow(beta1, static_cast<double>(state.t)));
        const double vh = v / (1.0 - std::pow(beta2, static_cast<double>(state.t)));
        t.value[i] += lr * mh / (std::sqrt(vh) + eps);
      } else {
        t.value[i] += lr * grad;
      }
    }
  }
}

}  // namespace

TrainResult train_dvae(std::span<const Vec> data, DVaeModel& model, const TrainConfig& cfg) {
  if (data.empty()) throw std::invalid_argument("train_dvae: empty dataset");
  if (cfg.batch == 0 || cfg.eps_samples < 1)
    throw std::invalid_argument("train_dvae: counts must be positive");
  if (cfg.model_steps < 1) throw std::invalid_argument("train_dvae: model_steps must be >= 1");
  if (cfg.spread_steps < 0) throw std::invalid_argument("train_dvae: spread_steps must be >= 0");
  if (cfg.spread_steps > 0 && !model.spread_learnable())
    throw std::invalid_argument("train_dvae: spread_steps > 0 but the spread has no parameters");
  if (cfg.variance_reduced && model.spread.family == SpreadFamily::Laplace)
    throw std::invalid_argument("train_dvae: variance-reduced bound needs Gaussian spread");

  std::vector<std::size_t> tensor_offsets(model.params.count());
  {
    std::size_t off = 0;
    for (std::size_t i = 0; i < model.params.count(); ++i) {
      tensor_offsets[i] = off;
      off += model.params.at(static_cast<int>(i)).size();
    }
  }
  const std::vector<int> model_ids = model.model_tensor_ids();
  const std::vector<int> spread_ids = model.spread_tensor_ids();
  AdamState adam_model, adam_spread;
  if (cfg.adam) {
    adam_model.m.assign(model.params.total_params(), 0.0);
    adam_model.v.assign(model.params.total_params(), 0.0);
    adam_spread = adam_model;
  }

  Rng rng(cfg.seed);
  TrainResult out;
  Vec last_good = model.params.snapshot();
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  const int cycle = cfg.model_steps + cfg.spread_steps;
  int pos = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Deterministic Fisher-Yates reshuffle each epoch.
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng.next_u64() % i);
      std::swap(order[i - 1], order[j]);
    }
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < data.size(); start += cfg.batch) {
      const std::size_t stop = std::min(start + cfg.batch, data.size());
      const bool spread_turn = cfg.spread_steps > 0 && pos >= cfg.model_steps;
      pos = (pos + 1) % std::max(cycle, 1);

      Tape tape;
      const TapeBinding bind = bind_params(tape, model.params);
      TapeValue acc = tape.constant_scalar(0.0);
      for (std::size_t i = start; i < stop; ++i) {
        for (int rep = 0; rep < cfg.eps_samples; ++rep) {
          const ElboDraws draws = draw_elbo_noise(model, rng);
          acc = tape.add(acc, elbo_core(tape, model, bind, data[order[i]], draws,
                                        cfg.variance_reduced));
        }
      }
      const double count = static_cast<double>((stop - start) * cfg.eps_samples);
      const TapeValue mean_bound = tape.scale(acc, 1.0 / count);
      const double loss = -mean_bound.scalar();
      if (!std::isfinite(loss)) {
        model.params.restore(last_good);
        out.aborted = true;
        out.abort_epoch = epoch;
        return out;
      }
      tape.backward(mean_bound);
      if (spread_turn) {
        apply_update(model.params, bind, spread_ids, cfg.lr_spread, -1.0, cfg.adam, adam_spread,
                     tensor_offsets);
        if (model.spread.family == SpreadFamily::MeanTransform) {
          Tensor& w = model.params.at(model.spread_w);
          const DenseMatrix renorm = spectral_normalize(
              DenseMatrix(w.rows, w.cols, w.value), model.spread.lipschitz_c);
          w.value = renorm.entries();
        }
      } else {
        apply_update(model.params, bind, model_ids, cfg.lr_model, 1.0, cfg.adam, adam_model,
                     tensor_offsets);
      }
      epoch_loss += loss;
      ++batches;
    }
    out.loss_trace.push_back(epoch_loss / static_cast<double>(batches));
    last_good = model.params.snapshot();
  }
  return out;
}

}  // namespace spreaddiv
