#include "spreaddiv/ica.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "spreaddiv/linalg.hpp"

namespace spreaddiv {

namespace {

constexpr double kSqrt2 = 1.4142135623730950488;

void require_full_column_rank(const DenseMatrix& a, const char* who) {
  const EighResult eig = eigh_sym(a.ata());
  if (eig.eigenvalues.back() <= 1e-10)
    throw std::invalid_argument(std::string(who) + ": mixing matrix is rank deficient");
}

}  // namespace

IcaModel::IcaModel(DenseMatrix a, double gamma_in) : mixing(std::move(a)), gamma(gamma_in) {
  if (mixing.rows() < mixing.cols())
    throw std::invalid_argument("IcaModel: requires X >= Z");
  if (gamma < 0.0) throw std::invalid_argument("IcaModel: gamma must be >= 0");
  require_full_column_rank(mixing, "IcaModel");
}

IcaDataset generate_ica_data(const DenseMatrix& a_true, std::size_t n, double gamma,
                             std::uint64_t seed) {
  IcaDataset data;
  data.a_true = a_true;
  data.x.reserve(n);
  Rng rng(seed);
  const std::size_t z_dim = a_true.cols();
  Vec z(z_dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < z_dim; ++j) z[j] = rng.laplace(kIcaLaplaceScale);
    Vec x = a_true.matvec(z);
    if (gamma > 0.0)
      for (double& v : x) v += gamma * rng.normal();
    data.x.push_back(std::move(x));
  }
  return data;
}

double auto_spread_sigma(const DenseMatrix& a) {
  const DenseMatrix aat = a.aat();
  double mean = 0.0;
  for (double v : aat.entries()) mean += v;
  mean /= static_cast<double>(aat.entries().size());
  return std::max(0.001, 2.5 * std::sqrt(std::max(mean, 0.0)));
}

DenseMatrix standard_em_step(const DenseMatrix& a_k, const IcaDataset& data, double gamma) {
  const std::size_t x_dim = a_k.rows();
  const std::size_t z_dim = a_k.cols();
  if (data.dim() != x_dim) throw std::invalid_argument("standard_em_step: dimension mismatch");
  require_full_column_rank(a_k, "standard_em_step");
  const std::size_t n = data.size();
  const DenseMatrix ata = a_k.ata();

  // Posterior moments under a standard normal prior; exact at any gamma and
  // the deterministic least-squares limit at gamma = 0.
  DenseMatrix post_cov(z_dim, z_dim);
  DenseMatrix proj(z_dim, z_dim);  // maps A^T x to the posterior mean
  if (gamma > 0.0) {
    DenseMatrix m = ata.scaled(1.0 / (gamma * gamma));
    for (std::size_t i = 0; i < z_dim; ++i) m(i, i) += 1.0;
    const DenseMatrix minv = inverse_spd(m);
    post_cov = minv;
    proj = minv.scaled(1.0 / (gamma * gamma));
  } else {
    proj = inverse_spd(ata);
  }

  DenseMatrix xz(x_dim, z_dim);
  DenseMatrix zz = post_cov;
  for (const Vec& x : data.x) {
    const Vec t = a_k.matvec_t(x);
    const Vec mu = proj.matvec(t);
    for (std::size_t r = 0; r < x_dim; ++r)
      for (std::size_t c = 0; c < z_dim; ++c) xz(r, c) += x[r] * mu[c] / static_cast<double>(n);
    for (std::size_t r = 0; r < z_dim; ++r)
      for (std::size_t c = 0; c < z_dim; ++c) zz(r, c) += mu[r] * mu[c] / static_cast<double>(n);
  }

  // A_{k+1} = <xz^T> <zz^T>^{-1}, solved row by row.
  DenseMatrix next(x_dim, z_dim);
  for (std::size_t r = 0; r < x_dim; ++r) {
    Vec row(z_dim);
    for (std::size_t c = 0; c < z_dim; ++c) row[c] = xz(r, c);
    const Vec sol = solve_lu(zz, row);
    for (std::size_t c = 0; c < z_dim; ++c) next(r, c) = sol[c];
  }
  return next;
}

SpreadPosterior spread_posterior_params(const DenseMatrix& a, double gamma, double sigma,
                                        std::span<const double> y) {
  if (y.size() != a.rows())
    throw std::invalid_argument("spread_posterior_params: dimension mismatch");
  require_full_column_rank(a, "spread_posterior_params");
  const DenseMatrix ata_inv = inverse_spd(a.ata());
  SpreadPosterior out{ata_inv.matvec(a.matvec_t(y)),
                      ata_inv.scaled(gamma * gamma + sigma * sigma)};
  return out;
}

namespace {

struct StepAccum {
  Vec yz;  // X*Z
  Vec zz;  // Z*Z, upper triangle filled
};

}  // namespace

DenseMatrix spread_em_step(const DenseMatrix& a_k, const IcaDataset& data, double gamma,
                           const IcaEmConfig& cfg, std::uint64_t iteration) {
  const std::size_t x_dim = a_k.rows();
  const std::size_t z_dim = a_k.cols();
  if (data.dim() != x_dim) throw std::invalid_argument("spread_em_step: dimension mismatch");
  if (cfg.s_y < 1 || cfg.s_z < 1)
    throw std::invalid_argument("spread_em_step: sample counts must be >= 1");
  require_full_column_rank(a_k, "spread_em_step");

  const double sigma = cfg.sigma < 0.0 ? auto_spread_sigma(a_k) : cfg.sigma;
  const double s2 = gamma * gamma + sigma * sigma;
  const std::size_t n = data.size();
  const std::size_t s_y = cfg.s_y;
  const std::size_t s_z = cfg.s_z;

  const DenseMatrix ata = a_k.ata();
  const DenseMatrix ata_inv = inverse_spd(ata);
  const DenseMatrix chol_l = cholesky(ata);
  // proposal z = mu + scatter * xi with scatter = sqrt(s2) * L^{-T} (upper triangular)
  DenseMatrix scatter(z_dim, z_dim);
  if (s2 > 0.0) {
    Vec e(z_dim, 0.0);
    const double root = std::sqrt(s2);
    for (std::size_t c = 0; c < z_dim; ++c) {
      e.assign(z_dim, 0.0);
      e[c] = 1.0;
      const Vec col = solve_upper_t(chol_l, e);
      for (std::size_t r = 0; r < z_dim; ++r) scatter(r, c) = root * col[r];
    }
  }

  const std::size_t chunk_size = 64;
  const std::size_t n_chunks = (n + chunk_size - 1) / chunk_size;
  std::vector<StepAccum> acc(n_chunks);
  const Rng base(cfg.seed);

  auto process_chunk = [&](std::size_t chunk, Vec& zbuf, Vec& logw, Vec& work) {
    // Separate streams for the spread draws and the proposal draws, so runs
    // that differ only in s_z share the same y samples at a given seed.
    Rng rng_y = base.fork(iteration + 1, 2 * chunk);
    Rng rng = base.fork(iteration + 1, 2 * chunk + 1);
    StepAccum& slot = acc[chunk];
    slot.yz.assign(x_dim * z_dim, 0.0);
    slot.zz.assign(z_dim * z_dim, 0.0);
    Vec& y = work;
    const std::size_t lo = chunk * chunk_size;
    const std::size_t hi = std::min(lo + chunk_size, n);
    Vec t(z_dim), mu(z_dim), xi(z_dim), sz(z_dim), szz(z_dim * z_dim);
    for (std::size_t idx = lo; idx < hi; ++idx) {
      const Vec& x = data.x[idx];
      for (std::size_t rep = 0; rep < s_y; ++rep) {
        y.assign(x.begin(), x.end());
        if (sigma > 0.0)
          for (double& v : y) v += sigma * rng_y.normal();
        // mu = (A^T A)^{-1} A^T y
        for (std::size_t c = 0; c < z_dim; ++c) t[c] = 0.0;
        for (std::size_t r = 0; r < x_dim; ++r) {
          const double yr = y[r];
          const double* arow = a_k.data() + r * z_dim;
          for (std::size_t c = 0; c < z_dim; ++c) t[c] += arow[c] * yr;
        }
        for (std::size_t r = 0; r < z_dim; ++r) {
          double m = 0.0;
          const double* irow = ata_inv.data() + r * z_dim;
          for (std::size_t c = 0; c < z_dim; ++c) m += irow[c] * t[c];
          mu[r] = m;
        }

        sz.assign(z_dim, 0.0);
        szz.assign(z_dim * z_dim, 0.0);
        if (s2 == 0.0) {
          // Degenerate posterior: a point mass at mu, weights uniform.
          for (std::size_t i = 0; i < z_dim; ++i) {
            sz[i] = mu[i];
            for (std::size_t j = i; j < z_dim; ++j) szz[i * z_dim + j] = mu[i] * mu[j];
          }
        } else {
          double max_lw = -std::numeric_limits<double>::infinity();
          for (std::size_t s = 0; s < s_z; ++s) {
            for (std::size_t j = 0; j < z_dim; ++j) xi[j] = rng.normal();
            double lw = 0.0;
            double* zrow = zbuf.data() + s * z_dim;
            for (std::size_t i = 0; i < z_dim; ++i) {
              double zi = mu[i];
              const double* srow = scatter.data() + i * z_dim;
              for (std::size_t j = i; j < z_dim; ++j) zi += srow[j] * xi[j];
              zrow[i] = zi;
              lw -= kSqrt2 * std::fabs(zi);
            }
            logw[s] = lw;
            if (lw > max_lw) max_lw = lw;
          }
          double wsum = 0.0;
          for (std::size_t s = 0; s < s_z; ++s) {
            const double w = std::exp(logw[s] - max_lw);
            wsum += w;
            const double* zrow = zbuf.data() + s * z_dim;
            for (std::size_t i = 0; i < z_dim; ++i) {
              const double wzi = w * zrow[i];
              sz[i] += wzi;
              double* srow = szz.data() + i * z_dim;
              for (std::size_t j = i; j < z_dim; ++j) srow[j] += wzi * zrow[j];
            }
          }
          const double inv = 1.0 / wsum;
          for (double& v : sz) v *= inv;
          for (double& v : szz) v *= inv;
        }
        for (std::size_t i = 0; i < z_dim * z_dim; ++i) slot.zz[i] += szz[i];
        for (std::size_t r = 0; r < x_dim; ++r) {
          const double yr = y[r];
          double* orow = slot.yz.data() + r * z_dim;
          for (std::size_t i = 0; i < z_dim; ++i) orow[i] += yr * sz[i];
        }
      }
    }
  };

  unsigned hw = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads)
                                : std::max(1u, std::thread::hardware_concurrency());
  hw = std::min<unsigned>(hw, static_cast<unsigned>(n_chunks));
  if (hw <= 1) {
    Vec zbuf(s_z * z_dim), logw(s_z), work(x_dim);
    for (std::size_t c = 0; c < n_chunks; ++c) process_chunk(c, zbuf, logw, work);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(hw);
    for (unsigned w = 0; w < hw; ++w) {
      pool.emplace_back([&]() {
        Vec zbuf(s_z * z_dim), logw(s_z), work(x_dim);
        for (;;) {
          const std::size_t c = next.fetch_add(1);
          if (c >= n_chunks) break;
          process_chunk(c, zbuf, logw, work);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  // Deterministic reduction in chunk order.
  const double norm = 1.0 / static_cast<double>(n * s_y);
  DenseMatrix yz(x_dim, z_dim);
  DenseMatrix zz(z_dim, z_dim);
  for (const StepAccum& slot : acc) {
    for (std::size_t i = 0; i < x_dim * z_dim; ++i) yz.data()[i] += slot.yz[i];
    for (std::size_t i = 0; i < z_dim; ++i)
      for (std::size_t j = i; j < z_dim; ++j) zz(i, j) += slot.zz[i * z_dim + j];
  }
  for (std::size_t i = 0; i < x_dim * z_dim; ++i) yz.data()[i] *= norm;
  for (std::size_t i = 0; i < z_dim; ++i)
    for (std::size_t j = i; j < z_dim; ++j) {
      zz(i, j) *= norm;
      zz(j, i) = zz(i, j);
    }

  DenseMatrix next_a(x_dim, z_dim);
  for (std::size_t r = 0; r < x_dim; ++r) {
    Vec row(z_dim);
    for (std::size_t c = 0; c < z_dim; ++c) row[c] = yz(r, c);
    const Vec sol = solve_lu(zz, row);
    for (std::size_t c = 0; c < z_dim; ++c) next_a(r, c) = sol[c];
  }
  return next_a;
}

double aligned_relative_error(const DenseMatrix& a_est, const DenseMatrix& a_true) {
  if (a_est.rows() != a_true.rows() || a_est.cols() != a_true.cols())
    throw std::invalid_argument("aligned_relative_error: shape mismatch");
  const std::size_t x_dim = a_true.rows();
  const std::size_t z_dim = a_true.cols();

  // Greedy assignment of estimated columns to true columns by |cosine|.
  std::vector<bool> est_used(z_dim, false), true_used(z_dim, false);
  std::vector<std::size_t> match(z_dim, 0);
  std::vector<double> sign(z_dim, 1.0);
  for (std::size_t pick = 0; pick < z_dim; ++pick) {
    double best = -1.0;
    std::size_t best_t = 0, best_e = 0;
    double best_sign = 1.0;
    for (std::size_t tcol = 0; tcol < z_dim; ++tcol) {
      if (true_used[tcol]) continue;
      for (std::size_t ecol = 0; ecol < z_dim; ++ecol) {
        if (est_used[ecol]) continue;
        double num = 0.0, nt = 0.0, ne = 0.0;
        for (std::size_t r = 0; r < x_dim; ++r) {
          num += a_true(r, tcol) * a_est(r, ecol);
          nt += a_true(r, tcol) * a_true(r, tcol);
          ne += a_est(r, ecol) * a_est(r, ecol);
        }
        const double denom = std::sqrt(std::max(nt * ne, 1e-300));
        const double cosine = std::fabs(num) / denom;
        if (cosine > best) {
          best = cosine;
          best_t = tcol;
          best_e = ecol;
          best_sign = num >= 0.0 ? 1.0 : -1.0;
        }
      }
    }
    true_used[best_t] = true;
    est_used[best_e] = true;
    match[best_t] = best_e;
    sign[best_t] = best_sign;
  }

  double err = 0.0;
  for (std::size_t tcol = 0; tcol < z_dim; ++tcol)
    for (std::size_t r = 0; r < x_dim; ++r) {
      const double truth = a_true(r, tcol);
      const double est = sign[tcol] * a_est(r, match[tcol]);
      err += std::fabs(est - truth) / std::max(std::fabs(truth), 1e-12);
    }
  return err / static_cast<double>(x_dim * z_dim);
}

IcaRunResult run_spread_em(const IcaDataset& data, std::size_t z_dim, double gamma,
                           const IcaEmConfig& cfg, IcaAlgo algo) {
  if (data.size() == 0) throw std::invalid_argument("run_spread_em: empty dataset");
  const std::size_t x_dim = data.dim();
  Rng init_rng = Rng(cfg.seed).fork(0x1c4, 0xffffffffULL);
  DenseMatrix a(x_dim, z_dim);
  for (std::size_t i = 0; i < x_dim; ++i)
    for (std::size_t j = 0; j < z_dim; ++j) a(i, j) = init_rng.uniform_in(-1.0, 1.0);

  IcaRunResult out{a, {}, false};
  IcaEmConfig step_cfg = cfg;
  if (algo == IcaAlgo::Standard) step_cfg.sigma = 0.0;

  auto record = [&](const DenseMatrix& current) {
    if (data.a_true.has_value())
      out.error_trace.push_back(aligned_relative_error(current, *data.a_true));
  };
  record(a);
  for (int it = 0; it < cfg.iterations; ++it) {
    a = spread_em_step(a, data, gamma, step_cfg, static_cast<std::uint64_t>(it));
    record(a);
    if (!out.error_trace.empty() && out.error_trace.back() > 1e3) {
      out.aborted = true;
      break;
    }
  }
  out.a_est = a;
  return out;
}

}  // namespace spreaddiv
