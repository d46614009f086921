#pragma once

#include <cstdint>

#include "spreaddiv/matrix.hpp"

namespace spreaddiv {

struct PpcaModel {
  DenseMatrix loading;  // X x Z
  double gamma = 0.0;
};

/// Deterministic PCA recovered through the spread route: inflate the sample
/// covariance by sigma2, take the top-Z eigenpairs, deflate the eigenvalues by
/// sigma2 and return F = U_Z Lambda_Z^{1/2}. The result is independent of
/// sigma2. Covariance uses mean-centred data with 1/N normalisation.
PpcaModel fit_spread_pca(const DenseMatrix& data, std::size_t z_dim, double sigma2);

/// Classical PCA of the sample covariance; the oracle fit_spread_pca must match.
PpcaModel fit_classical_pca(const DenseMatrix& data, std::size_t z_dim);

DenseMatrix sample_covariance(const DenseMatrix& data);  // mean-centred, 1/N

struct BoundedLikelihoodDemo {
  double mu_hat = 0.0;
  double sigma2_hat = 0.0;       // max(0, var(y) - sigma_f^2)
  double loglik_per_sample = 0.0;  // finite for every input
  std::size_t n_y = 0;
};

/// Single-datapoint Gaussian whose plain likelihood is unbounded as the
/// variance collapses: after spreading with variance sigma_f2 the maximum
/// likelihood point has a finite per-sample log-likelihood.
BoundedLikelihoodDemo spread_bounded_likelihood_demo(double x, double sigma_f2, std::size_t n_y,
                                                     std::uint64_t seed);

/// Same computation on caller-supplied spread samples (used for the
/// degenerate all-equal case).
BoundedLikelihoodDemo bounded_likelihood_from_samples(std::span<const double> y, double sigma_f2);

}  // namespace spreaddiv
