#pragma once

#include <span>
#include <utility>

#include "spreaddiv/matrix.hpp"

namespace spreaddiv {

struct EighResult {
  Vec eigenvalues;      // descending
  DenseMatrix vectors;  // columns are eigenvectors, m = V diag(lambda) V^T
};

/// Symmetric eigendecomposition by cyclic Jacobi rotations. Input must be
/// symmetric within 1e-10 relative asymmetry. Eigenvector signs are
/// canonicalised (largest-magnitude component positive) so repeated calls on
/// shifted matrices m + c*I return identical vectors.
EighResult eigh_sym(const DenseMatrix& m);

/// Cholesky factor L (lower) of a symmetric positive definite matrix.
/// Throws std::invalid_argument when the matrix is not positive definite.
DenseMatrix cholesky(const DenseMatrix& spd);

Vec solve_lower(const DenseMatrix& l, std::span<const double> b);   // L y = b
Vec solve_upper_t(const DenseMatrix& l, std::span<const double> b); // L^T y = b
Vec solve_spd(const DenseMatrix& spd, std::span<const double> b);
DenseMatrix inverse_spd(const DenseMatrix& spd);
double logdet_spd(const DenseMatrix& spd);

/// Determinant via LU with partial pivoting (any square matrix).
double determinant(const DenseMatrix& m);
Vec solve_lu(const DenseMatrix& m, std::span<const double> b);

double gaussian_logpdf_diag(std::span<const double> x, std::span<const double> mean,
                            std::span<const double> variances);
double gaussian_logpdf_iso(std::span<const double> x, std::span<const double> mean,
                           double variance);

/// log N(x | mean, cov) for dense SPD covariance (Cholesky route).
double gaussian_logpdf_full(std::span<const double> x, std::span<const double> mean,
                            const DenseMatrix& cov);

/// KL(N(mu_p, cov_p) || N(mu_q, cov_q)), closed form.
double gaussian_kl_full(std::span<const double> mu_p, const DenseMatrix& cov_p,
                        std::span<const double> mu_q, const DenseMatrix& cov_q);

}  // namespace spreaddiv
