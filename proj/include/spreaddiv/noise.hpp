#pragma once

#include <variant>

#include "spreaddiv/matrix.hpp"
#include "spreaddiv/rng.hpp"

namespace spreaddiv {

enum class KernelFamily { Gaussian, Laplace };

/// Stationary spread noise p(y|x) = K(y - x), K a positive density applied
/// independently per coordinate. scale is sigma for Gaussian, b for Laplace.
struct StationaryKernel {
  KernelFamily family = KernelFamily::Gaussian;
  double scale = 1.0;

  StationaryKernel(KernelFamily f, double s);

  double log_density_1d(double r) const;
  double log_density(std::span<const double> y, std::span<const double> x) const;
  double sample_1d(Rng& rng) const;
  /// Closed-form transform of K: exp(-sigma^2 w^2 / 2) for Gaussian,
  /// sqrt(2/pi) * b^{-1} / (b^{-2} + w^2) for Laplace. Strictly positive.
  double fourier_transform(double omega) const;
};

enum class FtCondition { Nonvanishing, CountableZeros, Fails };

struct ValidityReport {
  bool positive_density = false;
  FtCondition ft_condition = FtCondition::Fails;
  Vec omega_grid;
  Vec transform_values;
};

/// Validity check for a stationary kernel: positive density everywhere and a
/// transform with at most countably many zeros. Evaluated analytically per
/// family; transform values are reported on the supplied omega grid.
ValidityReport check_stationary_validity(const StationaryKernel& k,
                                         std::span<const double> omega_grid);

/// Gaussian noise with covariance sigma^2 I + U U^T, U of size D x R, R << D.
struct LowRankGaussianNoise {
  std::size_t dim = 0;
  double sigma2 = 1.0;
  DenseMatrix u;  // D x R

  LowRankGaussianNoise(std::size_t d, double s2, DenseMatrix u_in);

  DenseMatrix dense_covariance() const;  // sigma^2 I + U U^T
};

/// log N(y | x, sigma^2 I + U U^T) computed through the low-rank identities:
/// only the R x R block I + U^T U / sigma^2 is factorised.
double lowrank_logpdf(const LowRankGaussianNoise& n, std::span<const double> y,
                      std::span<const double> x);

/// One draw y = x + U z + sigma * eps with z ~ N(0, I_R), eps ~ N(0, I_D).
Vec lowrank_sample(const LowRankGaussianNoise& n, std::span<const double> x, Rng& rng);

/// Rescale so the spectral norm is exactly c (power iteration on W^T W with a
/// deterministic start vector). Zero input returns zero.
DenseMatrix spectral_normalize(const DenseMatrix& weights, double c);
double spectral_norm(const DenseMatrix& m);

/// Injective mean transform f(x) = x + g(x) with g(x) = tanh(W x + b) and
/// ||W||_2 <= c < 1, so g is a contraction and f is invertible.
struct MeanTransformNoise {
  StationaryKernel base;
  DenseMatrix w;  // D x D, spectral norm <= c
  Vec b;
  double lipschitz_c = 0.9;

  MeanTransformNoise(StationaryKernel base_in, DenseMatrix w_in, Vec b_in, double c);

  Vec residual(std::span<const double> x) const;  // g(x)
};

Vec mean_transform_apply(const MeanTransformNoise& n, std::span<const double> x);
/// Solves y = x + g(x) by fixed-point iteration x <- y - g(x); throws
/// ConvergenceError after 1000 iterations (signals a Lipschitz violation).
Vec mean_transform_invert(const MeanTransformNoise& n, std::span<const double> y);

/// Column-stochastic matrix P with P(i, j) = p(y = i | x = j).
struct DiscreteSpreadMatrix {
  DenseMatrix p;

  explicit DiscreteSpreadMatrix(DenseMatrix p_in);

  Vec apply(std::span<const double> probs) const;  // P p
};

struct DiscreteSpreadCheck {
  bool injective = false;
  bool support_complete = false;
};

/// injective <=> |det P| > 1e-12 * n; support_complete <=> min entry > 0.
DiscreteSpreadCheck check_discrete_spread(const DiscreteSpreadMatrix& p);

using NoiseModel = std::variant<StationaryKernel, LowRankGaussianNoise, MeanTransformNoise>;

/// One draw of y given x under the selected noise family.
Vec spread_sample(const NoiseModel& noise, std::span<const double> x, Rng& rng);

}  // namespace spreaddiv
