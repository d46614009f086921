#include "spreaddiv/ppca.hpp"

#include <cmath>

#include "spreaddiv/linalg.hpp"
#include "spreaddiv/rng.hpp"

namespace spreaddiv {

DenseMatrix sample_covariance(const DenseMatrix& data) {
  const std::size_t n = data.rows();
  const std::size_t x_dim = data.cols();
  if (n < 2) throw std::invalid_argument("sample_covariance: need at least 2 rows");
  Vec mean(x_dim, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < x_dim; ++c) mean[c] += data(r, c);
  for (double& v : mean) v /= static_cast<double>(n);
  DenseMatrix cov(x_dim, x_dim);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < x_dim; ++i) {
      const double di = data(r, i) - mean[i];
      for (std::size_t j = i; j < x_dim; ++j) cov(i, j) += di * (data(r, j) - mean[j]);
    }
  }
  for (std::size_t i = 0; i < x_dim; ++i)
    for (std::size_t j = i; j < x_dim; ++j) {
      cov(i, j) /= static_cast<double>(n);
      cov(j, i) = cov(i, j);
    }
  return cov;
}

namespace {

PpcaModel loading_from_eigs(const EighResult& eig, std::size_t z_dim, double deflate,
                            std::size_t x_dim) {
  const double scale = std::max(std::fabs(eig.eigenvalues.front()), 1.0);
  PpcaModel model{DenseMatrix(x_dim, z_dim), 0.0};
  for (std::size_t c = 0; c < z_dim; ++c) {
    const double lambda = eig.eigenvalues[c] - deflate;
    if (lambda <= 1e-12 * scale)
      throw std::invalid_argument("fit_spread_pca: non-positive eigenvalue after deflation "
                                  "(z_dim exceeds the covariance rank)");
    const double root = std::sqrt(lambda);
    for (std::size_t r = 0; r < x_dim; ++r) model.loading(r, c) = root * eig.vectors(r, c);
  }
  return model;
}

}  // namespace

PpcaModel fit_spread_pca(const DenseMatrix& data, std::size_t z_dim, double sigma2) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("fit_spread_pca: sigma2 must be > 0");
  if (z_dim == 0 || z_dim > data.cols())
    throw std::invalid_argument("fit_spread_pca: z_dim out of range");
  DenseMatrix inflated = sample_covariance(data);
  for (std::size_t i = 0; i < inflated.rows(); ++i) inflated(i, i) += sigma2;
  const EighResult eig = eigh_sym(inflated);
  return loading_from_eigs(eig, z_dim, sigma2, data.cols());
}

PpcaModel fit_classical_pca(const DenseMatrix& data, std::size_t z_dim) {
  if (z_dim == 0 || z_dim > data.cols())
    throw std::invalid_argument("fit_classical_pca: z_dim out of range");
  const EighResult eig = eigh_sym(sample_covariance(data));
  return loading_from_eigs(eig, z_dim, 0.0, data.cols());
}

BoundedLikelihoodDemo bounded_likelihood_from_samples(std::span<const double> y,
                                                      double sigma_f2) {
  if (y.size() < 2)
    throw std::invalid_argument("bounded_likelihood_from_samples: need at least 2 samples");
  if (!(sigma_f2 > 0.0))
    throw std::invalid_argument("bounded_likelihood_from_samples: sigma_f2 must be > 0");
  BoundedLikelihoodDemo out;
  out.n_y = y.size();
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double var = 0.0;
  for (double v : y) var += (v - mean) * (v - mean);
  var /= static_cast<double>(y.size());
  out.mu_hat = mean;
  out.sigma2_hat = std::max(0.0, var - sigma_f2);
  const double total_var = out.sigma2_hat + sigma_f2;
  constexpr double log_two_pi = 1.8378770664093454836;
  out.loglik_per_sample =
      -0.5 * (std::log(total_var) + log_two_pi) - var / (2.0 * total_var);
  return out;
}

BoundedLikelihoodDemo spread_bounded_likelihood_demo(double x, double sigma_f2, std::size_t n_y,
                                                     std::uint64_t seed) {
  if (n_y < 2) throw std::invalid_argument("spread_bounded_likelihood_demo: n_y must be >= 2");
  Rng rng(seed);
  Vec y(n_y);
  const double sigma_f = std::sqrt(sigma_f2);
  for (double& v : y) v = x + sigma_f * rng.normal();
  return bounded_likelihood_from_samples(y, sigma_f2);
}

}  // namespace spreaddiv
