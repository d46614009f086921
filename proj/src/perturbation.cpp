#include "spreaddiv/perturbation.hpp"

#include <cmath>

#include "spreaddiv/linalg.hpp"

namespace spreaddiv {

double perturbation_expectation(const ScalarField& f, std::span<const double> x,
                                const DenseMatrix& cov) {
  const std::size_t d = x.size();
  if (cov.rows() != d || cov.cols() != d)
    throw std::invalid_argument("perturbation_expectation: covariance shape mismatch");
  if (d > 16)
    throw std::invalid_argument(
        "perturbation_expectation: dimension too large for dense differences; "
        "use the Hessian-vector variant");
  const double fx = f(x);
  Vec p(x.begin(), x.end());
  Vec h(d);
  for (std::size_t i = 0; i < d; ++i) h[i] = 5e-3 * std::max(1.0, std::fabs(x[i]));

  auto eval = [&](std::size_t i, double di, std::size_t j, double dj) {
    p.assign(x.begin(), x.end());
    p[i] += di;
    p[j] += dj;
    return f(p);
  };

  double trace_term = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    // Diagonal second difference.
    const double hii = (eval(i, h[i], i, 0.0) - 2.0 * fx + eval(i, -h[i], i, 0.0)) / (h[i] * h[i]);
    trace_term += cov(i, i) * hii;
    for (std::size_t j = i + 1; j < d; ++j) {
      if (cov(i, j) == 0.0 && cov(j, i) == 0.0) continue;
      const double hij = (eval(i, h[i], j, h[j]) - eval(i, h[i], j, -h[j]) -
                          eval(i, -h[i], j, h[j]) + eval(i, -h[i], j, -h[j])) /
                         (4.0 * h[i] * h[j]);
      trace_term += (cov(i, j) + cov(j, i)) * hij;
    }
  }
  return fx + 0.5 * trace_term;
}

double perturbation_expectation_hvp(const ScalarField& f, const GradientField& grad,
                                    std::span<const double> x, const DenseMatrix& cov,
                                    std::size_t probes, Rng& rng) {
  const std::size_t d = x.size();
  if (cov.rows() != d || cov.cols() != d)
    throw std::invalid_argument("perturbation_expectation_hvp: covariance shape mismatch");
  if (probes == 0) throw std::invalid_argument("perturbation_expectation_hvp: probes must be > 0");
  const DenseMatrix l = cholesky(cov);
  const double fx = f(x);

  Vec eta(d), xi(d), plus(d), minus(d);
  double acc = 0.0;
  for (std::size_t p = 0; p < probes; ++p) {
    rng.fill_normal(eta);
    xi.assign(d, 0.0);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j <= i; ++j) xi[i] += l(i, j) * eta[j];
    const double scale = 1e-3 / std::max(norm2(xi), 1e-12);
    for (std::size_t i = 0; i < d; ++i) {
      plus[i] = x[i] + scale * xi[i];
      minus[i] = x[i] - scale * xi[i];
    }
    const Vec gp = grad(plus);
    const Vec gm = grad(minus);
    // xi^T H xi from a directional difference of the gradient.
    double quad = 0.0;
    for (std::size_t i = 0; i < d; ++i) quad += xi[i] * (gp[i] - gm[i]) / (2.0 * scale);
    acc += quad;
  }
  return fx + 0.5 * acc / static_cast<double>(probes);
}

}  // namespace spreaddiv
