#include "spreaddiv/divergence.hpp"

#include <cmath>
#include <limits>

#include "spreaddiv/errors.hpp"
#include "spreaddiv/linalg.hpp"

namespace spreaddiv {

DiscreteDist::DiscreteDist(Vec p) : probs(std::move(p)) {
  double total = 0.0;
  for (double v : probs) {
    if (!(v >= 0.0)) throw std::invalid_argument("DiscreteDist: negative or NaN probability");
    total += v;
  }
  if (std::fabs(total - 1.0) > 1e-12)
    throw std::invalid_argument("DiscreteDist: probabilities must sum to 1");
}

std::optional<double> f_divergence(FDivergenceKind kind, const DiscreteDist& p,
                                   const DiscreteDist& q) {
  if (p.size() != q.size()) throw std::invalid_argument("f_divergence: length mismatch");
  if (kind == FDivergenceKind::TotalVariation) {
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) acc += std::fabs(p.probs[i] - q.probs[i]);
    return acc;
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p.probs[i] == 0.0) continue;  // 0 log 0 = 0
    if (q.probs[i] == 0.0) return std::nullopt;
    acc += p.probs[i] * std::log(p.probs[i] / q.probs[i]);
  }
  return acc;
}

SpreadDivergenceResult spread_f_divergence_discrete(FDivergenceKind kind, const DiscreteDist& p,
                                                    const DiscreteDist& q,
                                                    const DiscreteSpreadMatrix& spread) {
  if (p.size() != spread.p.cols() || q.size() != spread.p.cols())
    throw std::invalid_argument("spread_f_divergence_discrete: length mismatch");
  const DiscreteSpreadCheck check = check_discrete_spread(spread);
  SpreadDivergenceResult out;
  out.injective = check.injective;
  out.support_complete = check.support_complete;
  out.value = f_divergence(kind, DiscreteDist(spread.apply(p.probs)),
                           DiscreteDist(spread.apply(q.probs)));
  return out;
}

namespace {

Vec mix(std::span<const double> a, std::span<const double> b, double alpha) {
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = alpha * a[i] + (1.0 - alpha) * b[i];
  return out;
}

}  // namespace

std::optional<double> mixture_divergence_discrete(FDivergenceKind kind, const DiscreteDist& p,
                                                  const DiscreteDist& q, const DiscreteDist& noise,
                                                  double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("mixture_divergence_discrete: alpha must lie in (0, 1)");
  if (p.size() != q.size() || p.size() != noise.size())
    throw std::invalid_argument("mixture_divergence_discrete: length mismatch");
  for (double v : noise.probs)
    if (!(v > 0.0))
      throw std::invalid_argument("mixture_divergence_discrete: noise must be strictly positive");
  return f_divergence(kind, DiscreteDist(mix(p.probs, noise.probs, alpha)),
                      DiscreteDist(mix(q.probs, noise.probs, alpha)));
}

std::optional<double> affine_divergence_discrete(FDivergenceKind kind, const DiscreteDist& p,
                                                 const DiscreteDist& q,
                                                 const DiscreteSpreadMatrix& spread,
                                                 const DiscreteDist& noise, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("affine_divergence_discrete: alpha must lie in (0, 1)");
  for (double v : noise.probs)
    if (!(v > 0.0))
      throw std::invalid_argument("affine_divergence_discrete: noise must be strictly positive");
  const Vec pp = spread.apply(p.probs);
  const Vec pq = spread.apply(q.probs);
  return f_divergence(kind, DiscreteDist(mix(pp, noise.probs, alpha)),
                      DiscreteDist(mix(pq, noise.probs, alpha)));
}

double gaussian_spread_kl(std::span<const double> mu_p, std::span<const double> mu_q,
                          double sigma2) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("gaussian_spread_kl: sigma2 must be > 0");
  if (mu_p.size() != mu_q.size())
    throw std::invalid_argument("gaussian_spread_kl: dimension mismatch");
  double ss = 0.0;
  for (std::size_t i = 0; i < mu_p.size(); ++i) {
    const double d = mu_p[i] - mu_q[i];
    ss += d * d;
  }
  return ss / (2.0 * sigma2);
}

SubspacePair::SubspacePair(Vec a_in, Vec b_in, DenseMatrix la, DenseMatrix lb, double s2,
                           Vec u_in)
    : a(std::move(a_in)), b(std::move(b_in)), loading_a(std::move(la)),
      loading_b(std::move(lb)), sigma2(s2), u(std::move(u_in)) {
  const std::size_t x = a.size();
  if (b.size() != x || loading_a.rows() != x || loading_b.rows() != x || u.size() != x)
    throw std::invalid_argument("SubspacePair: dimension mismatch");
  if (!(sigma2 > 0.0)) throw std::invalid_argument("SubspacePair: sigma2 must be > 0");
  if (std::fabs(norm2(u) - 1.0) > 1e-10)
    throw std::invalid_argument("SubspacePair: u must be a unit vector");
}

DenseMatrix SubspacePair::spread_covariance() const {
  const std::size_t x = a.size();
  DenseMatrix cov(x, x);
  for (std::size_t i = 0; i < x; ++i)
    for (std::size_t j = 0; j < x; ++j) cov(i, j) = u[i] * u[j];
  for (std::size_t i = 0; i < x; ++i) cov(i, i) += sigma2;
  return cov;
}

double subspace_spread_kl(const SubspacePair& s) {
  const DenseMatrix sigma = s.spread_covariance();
  const DenseMatrix cov_p = s.loading_a.aat() + sigma;
  const DenseMatrix cov_q = s.loading_b.aat() + sigma;
  return gaussian_kl_full(s.a, cov_p, s.b, cov_q);
}

namespace {

// KL as a function of the unit direction u, with A = B:
//   KL(u) = 1/2 v^T (C + u u^T)^{-1} v,  C = A A^T + sigma^2 I,  v = b - a.
// Sherman-Morrison gives KL(u) = 1/2 [v^T C^{-1} v - (u^T w)^2 / (1 + u^T C^{-1} u)]
// with w = C^{-1} v, so the maximum is attained exactly where u is orthogonal
// to w. The ascent direction below is the euclidean gradient
//   grad = -(u^T w) / (1 + u^T C^{-1} u) * [w - (u^T w) C^{-1} u / (1 + u^T C^{-1} u)] ...
// computed directly from the Sherman-Morrison form.
struct SubspaceObjective {
  DenseMatrix c_inv;
  Vec w;      // C^{-1} (b - a)
  double vcv; // v^T C^{-1} v

  double kl(std::span<const double> u) const {
    const double uw = dot(u, w);
    const Vec cu = c_inv.matvec(u);
    const double ucu = dot(u, cu);
    return 0.5 * (vcv - uw * uw / (1.0 + ucu));
  }

  Vec grad(std::span<const double> u) const {
    const double uw = dot(u, w);
    const Vec cu = c_inv.matvec(u);
    const double ucu = dot(u, cu);
    const double denom = 1.0 + ucu;
    Vec g(u.size());
    for (std::size_t i = 0; i < u.size(); ++i)
      g[i] = -(uw / denom) * w[i] + (uw * uw / (denom * denom)) * cu[i];
    return g;
  }
};

}  // namespace

NoiseDirectionResult optimize_noise_direction(const SubspacePair& s, int steps, double lr) {
  const DenseMatrix& a = s.loading_a;
  const DenseMatrix& b = s.loading_b;
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("optimize_noise_direction: A and B must have equal shape");
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (a(i, j) != b(i, j))
        throw std::invalid_argument("optimize_noise_direction: requires A == B");

  NoiseDirectionResult out;
  out.u = s.u;

  const Vec v = sub(s.b, s.a);
  if (norm2(v) == 0.0) {
    out.degenerate = true;
    out.final_alignment = 0.0;
    return out;
  }

  const std::size_t x = s.a.size();
  DenseMatrix c = a.aat();
  for (std::size_t i = 0; i < x; ++i) c(i, i) += s.sigma2;

  SubspaceObjective obj;
  obj.c_inv = inverse_spd(c);
  obj.w = obj.c_inv.matvec(v);
  obj.vcv = dot(v, obj.w);

  Vec vhat = obj.w;
  const double wn = norm2(vhat);
  for (double& e : vhat) e /= wn;

  Vec u = out.u;
  double kl = obj.kl(u);
  double step = lr;
  out.trace.push_back({0, kl, dot(u, vhat)});
  for (int it = 1; it <= steps; ++it) {
    Vec g = obj.grad(u);
    // Project onto the tangent space of the sphere.
    const double gu = dot(g, u);
    for (std::size_t i = 0; i < x; ++i) g[i] -= gu * u[i];
    bool moved = false;
    for (int attempt = 0; attempt < 60 && !moved; ++attempt) {
      Vec cand(x);
      for (std::size_t i = 0; i < x; ++i) cand[i] = u[i] + step * g[i];
      const double cn = norm2(cand);
      if (cn == 0.0) {
        step *= 0.5;
        continue;
      }
      for (double& e : cand) e /= cn;
      const double cand_kl = obj.kl(cand);
      if (cand_kl >= kl) {
        u = std::move(cand);
        kl = cand_kl;
        step *= 1.3;
        moved = true;
      } else {
        step *= 0.5;
      }
    }
    out.trace.push_back({it, kl, dot(u, vhat)});
    if (std::fabs(dot(u, vhat)) <= 1e-6) break;
    if (!moved) break;  // stagnant at float resolution
  }

  out.u = u;
  out.final_alignment = std::fabs(dot(u, vhat));
  if (out.final_alignment > 1e-4)
    throw ConvergenceError("optimize_noise_direction: |u . vhat| = " +
                           std::to_string(out.final_alignment) + " after step cap");
  return out;
}

MmdTvdResult mmd_vs_spread_tvd_grid(const DiscreteDist& p, const DiscreteDist& q,
                                    const StationaryKernel& kernel, double dx) {
  if (p.size() != q.size())
    throw std::invalid_argument("mmd_vs_spread_tvd_grid: length mismatch");
  if (!(dx > 0.0)) throw std::invalid_argument("mmd_vs_spread_tvd_grid: dx must be > 0");
  const std::size_t n = p.size();

  // Discretise the kernel on offsets -(n-1)..(n-1) and renormalise so it
  // integrates to 1 on the grid.
  std::vector<double> k(2 * n - 1);
  double total = 0.0;
  for (std::size_t i = 0; i < k.size(); ++i) {
    const double offset = (static_cast<double>(i) - static_cast<double>(n - 1)) * dx;
    k[i] = std::exp(kernel.log_density_1d(offset));
    total += k[i] * dx;
  }
  for (double& v : k) v /= total;

  // Smoothed densities by zero-padded direct convolution; p holds masses, so
  // density at a grid point is sum_j K(x_i - x_j) p_j.
  MmdTvdResult out;
  double l2 = 0.0, l1 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double di = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t off = i + (n - 1) - j;
      di += k[off] * (p.probs[j] - q.probs[j]);
    }
    l2 += di * di;
    l1 += std::fabs(di);
  }
  out.mmd_proxy = std::sqrt(l2 * dx);
  out.spread_tvd = l1 * dx;
  return out;
}

DpiResult dpi_check(FDivergenceKind kind, const DiscreteDist& p, const DiscreteDist& q,
                    const DiscreteSpreadMatrix& spread) {
  DpiResult out;
  out.before = f_divergence(kind, p, q);
  const auto spread_result = spread_f_divergence_discrete(kind, p, q, spread);
  out.after = spread_result.value.value_or(std::numeric_limits<double>::infinity());
  if (!out.before.has_value() || std::isinf(*out.before)) {
    out.holds = true;
  } else {
    out.holds = out.after <= *out.before + 1e-10;
  }
  return out;
}

double spread_mle_objective(std::span<const Vec> samples,
                            const std::function<double(std::span<const double>)>& model_logpdf) {
  if (samples.empty()) throw std::invalid_argument("spread_mle_objective: no samples");
  double acc = 0.0;
  for (const Vec& y : samples) acc += model_logpdf(y);
  return -acc / static_cast<double>(samples.size());
}

}  // namespace spreaddiv
