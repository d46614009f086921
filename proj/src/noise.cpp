#include "spreaddiv/noise.hpp"

#include <cmath>

#include "spreaddiv/errors.hpp"
#include "spreaddiv/linalg.hpp"

namespace spreaddiv {

namespace {
constexpr double kLogTwoPi = 1.8378770664093454836;
constexpr double kHalfLogTwoOverPi = -0.22579135264472741;  // log(sqrt(2/pi))
}  // namespace

StationaryKernel::StationaryKernel(KernelFamily f, double s) : family(f), scale(s) {
  if (!(scale > 0.0)) throw std::invalid_argument("StationaryKernel: scale must be > 0");
}

double StationaryKernel::log_density_1d(double r) const {
  if (family == KernelFamily::Gaussian)
    return -0.5 * (r * r / (scale * scale) + std::log(scale * scale) + kLogTwoPi);
  return -std::log(2.0 * scale) - std::fabs(r) / scale;
}

double StationaryKernel::log_density(std::span<const double> y,
                                     std::span<const double> x) const {
  if (y.size() != x.size())
    throw std::invalid_argument("StationaryKernel::log_density: dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += log_density_1d(y[i] - x[i]);
  return acc;
}

double StationaryKernel::sample_1d(Rng& rng) const {
  if (family == KernelFamily::Gaussian) return scale * rng.normal();
  return rng.laplace(scale);
}

double StationaryKernel::fourier_transform(double omega) const {
  if (family == KernelFamily::Gaussian)
    return std::exp(-0.5 * scale * scale * omega * omega);
  const double binv = 1.0 / scale;
  return std::exp(kHalfLogTwoOverPi) * binv / (binv * binv + omega * omega);
}

ValidityReport check_stationary_validity(const StationaryKernel& k,
                                         std::span<const double> omega_grid) {
  ValidityReport report;
  report.positive_density = true;  // both families are positive densities
  report.ft_condition = FtCondition::Nonvanishing;
  report.omega_grid.assign(omega_grid.begin(), omega_grid.end());
  report.transform_values.reserve(omega_grid.size());
  for (double w : omega_grid) report.transform_values.push_back(k.fourier_transform(w));
  return report;
}

LowRankGaussianNoise::LowRankGaussianNoise(std::size_t d, double s2, DenseMatrix u_in)
    : dim(d), sigma2(s2), u(std::move(u_in)) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("LowRankGaussianNoise: sigma2 must be > 0");
  if (u.rows() != dim) throw std::invalid_argument("LowRankGaussianNoise: U has wrong row count");
  if (u.cols() > dim) throw std::invalid_argument("LowRankGaussianNoise: R must be <= D");
}

DenseMatrix LowRankGaussianNoise::dense_covariance() const {
  DenseMatrix cov = u.aat();
  for (std::size_t i = 0; i < dim; ++i) cov(i, i) += sigma2;
  return cov;
}

double lowrank_logpdf(const LowRankGaussianNoise& n, std::span<const double> y,
                      std::span<const double> x) {
  if (y.size() != n.dim || x.size() != n.dim)
    throw std::invalid_argument("lowrank_logpdf: dimension mismatch");
  const std::size_t d = n.dim;
  const std::size_t r = n.u.cols();
  const Vec res = sub(y, x);

  // M = I_R + U^T U / sigma^2; quad = |res|^2/s2 - (U^T res)^T M^{-1} (U^T res) / s2^2
  double quad = dot(res, res) / n.sigma2;
  double logdet = static_cast<double>(d) * std::log(n.sigma2);
  if (r > 0) {
    DenseMatrix m = n.u.ata().scaled(1.0 / n.sigma2);
    for (std::size_t i = 0; i < r; ++i) m(i, i) += 1.0;
    const Vec t = n.u.matvec_t(res);
    const DenseMatrix l = cholesky(m);
    const Vec w = solve_lower(l, t);
    double inner = 0.0;
    for (double v : w) inner += v * v;
    quad -= inner / (n.sigma2 * n.sigma2);
    for (std::size_t i = 0; i < r; ++i) logdet += 2.0 * std::log(l(i, i));
  }
  return -0.5 * (quad + logdet + static_cast<double>(d) * kLogTwoPi);
}

Vec lowrank_sample(const LowRankGaussianNoise& n, std::span<const double> x, Rng& rng) {
  if (x.size() != n.dim) throw std::invalid_argument("lowrank_sample: dimension mismatch");
  Vec z(n.u.cols());
  rng.fill_normal(z);
  Vec y = n.u.matvec(z);
  const double sigma = std::sqrt(n.sigma2);
  for (std::size_t i = 0; i < n.dim; ++i) y[i] += x[i] + sigma * rng.normal();
  return y;
}

double spectral_norm(const DenseMatrix& m) {
  if (m.max_abs() == 0.0) return 0.0;
  const std::size_t cols = m.cols();
  // Deterministic start vector; 100 iterations or relative change < 1e-9.
  Vec v(cols);
  for (std::size_t i = 0; i < cols; ++i) v[i] = 1.0 + 1e-3 * static_cast<double>(i % 7);
  double nv = norm2(v);
  for (double& x : v) x /= nv;
  double sigma = 0.0;
  for (int it = 0; it < 100; ++it) {
    Vec w = m.matvec_t(m.matvec(v));
    const double nw = norm2(w);
    if (nw == 0.0) return 0.0;
    for (double& x : w) x /= nw;
    const double next = std::sqrt(nw);
    v = std::move(w);
    if (it > 0 && std::fabs(next - sigma) <= 1e-9 * std::max(next, 1e-300)) {
      sigma = next;
      break;
    }
    sigma = next;
  }
  return sigma;
}

DenseMatrix spectral_normalize(const DenseMatrix& weights, double c) {
  if (!(c > 0.0 && c < 1.0))
    throw std::invalid_argument("spectral_normalize: c must lie in (0, 1)");
  const double sigma = spectral_norm(weights);
  if (sigma == 0.0) return weights;
  return weights.scaled(c / sigma);
}

MeanTransformNoise::MeanTransformNoise(StationaryKernel base_in, DenseMatrix w_in, Vec b_in,
                                       double c)
    : base(base_in), w(std::move(w_in)), b(std::move(b_in)), lipschitz_c(c) {
  if (w.rows() != w.cols()) throw std::invalid_argument("MeanTransformNoise: W must be square");
  if (b.size() != w.rows()) throw std::invalid_argument("MeanTransformNoise: bias size mismatch");
  if (!(c > 0.0 && c < 1.0)) throw std::invalid_argument("MeanTransformNoise: c must be in (0,1)");
}

Vec MeanTransformNoise::residual(std::span<const double> x) const {
  Vec h = w.matvec(x);
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = std::tanh(h[i] + b[i]);
  return h;
}

Vec mean_transform_apply(const MeanTransformNoise& n, std::span<const double> x) {
  Vec g = n.residual(x);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += x[i];
  return g;
}

Vec mean_transform_invert(const MeanTransformNoise& n, std::span<const double> y) {
  Vec x(y.begin(), y.end());
  for (int it = 0; it < 1000; ++it) {
    const Vec g = n.residual(x);
    double delta = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double next = y[i] - g[i];
      delta = std::max(delta, std::fabs(next - x[i]));
      x[i] = next;
    }
    if (delta <= 1e-13) return x;
  }
  throw ConvergenceError("mean_transform_invert: fixed-point iteration cap exceeded");
}

DiscreteSpreadMatrix::DiscreteSpreadMatrix(DenseMatrix p_in) : p(std::move(p_in)) {
  if (p.rows() != p.cols()) throw std::invalid_argument("DiscreteSpreadMatrix: P must be square");
  for (std::size_t j = 0; j < p.cols(); ++j) {
    double colsum = 0.0;
    for (std::size_t i = 0; i < p.rows(); ++i) {
      if (p(i, j) < 0.0)
        throw std::invalid_argument("DiscreteSpreadMatrix: negative entry");
      colsum += p(i, j);
    }
    if (std::fabs(colsum - 1.0) > 1e-12)
      throw std::invalid_argument("DiscreteSpreadMatrix: column does not sum to 1");
  }
}

Vec DiscreteSpreadMatrix::apply(std::span<const double> probs) const {
  return p.matvec(probs);
}

DiscreteSpreadCheck check_discrete_spread(const DiscreteSpreadMatrix& p) {
  DiscreteSpreadCheck out;
  const std::size_t n = p.p.rows();
  out.injective = std::fabs(determinant(p.p)) > 1e-12 * static_cast<double>(n);
  double min_entry = p.p(0, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) min_entry = std::min(min_entry, p.p(i, j));
  out.support_complete = min_entry > 0.0;
  return out;
}

Vec spread_sample(const NoiseModel& noise, std::span<const double> x, Rng& rng) {
  return std::visit(
      [&](const auto& n) -> Vec {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, StationaryKernel>) {
          Vec y(x.begin(), x.end());
          for (double& v : y) v += n.sample_1d(rng);
          return y;
        } else if constexpr (std::is_same_v<T, LowRankGaussianNoise>) {
          return lowrank_sample(n, x, rng);
        } else {
          Vec y = mean_transform_apply(n, x);
          for (double& v : y) v += n.base.sample_1d(rng);
          return y;
        }
      },
      noise);
}

}  // namespace spreaddiv
