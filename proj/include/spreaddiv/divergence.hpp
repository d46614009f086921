#pragma once

#include <functional>
#include <optional>

#include "spreaddiv/matrix.hpp"
#include "spreaddiv/noise.hpp"
#include "spreaddiv/rng.hpp"

namespace spreaddiv {

/// Finite probability vector: nonnegative, sums to 1 within 1e-12.
struct DiscreteDist {
  Vec probs;

  explicit DiscreteDist(Vec p);
  std::size_t size() const { return probs.size(); }
};

enum class FDivergenceKind { KL, TotalVariation };

/// f-divergence between discrete distributions. KL follows the convention
/// sum_i p_i log(p_i / q_i) (identical to the generic t log t form under the
/// q-expectation); TV is sum_i |p_i - q_i| with no 1/2 factor. Returns
/// nullopt when KL is requested and supp(p) is not contained in supp(q).
std::optional<double> f_divergence(FDivergenceKind kind, const DiscreteDist& p,
                                   const DiscreteDist& q);

struct SpreadDivergenceResult {
  std::optional<double> value;
  bool injective = false;         // zero implies p = q only when true
  bool support_complete = false;  // guarantees a finite value
};

/// Divergence between P p and P q for a column-stochastic spread matrix P.
SpreadDivergenceResult spread_f_divergence_discrete(FDivergenceKind kind, const DiscreteDist& p,
                                                    const DiscreteDist& q,
                                                    const DiscreteSpreadMatrix& spread);

/// Divergence between alpha p + (1-alpha) n and alpha q + (1-alpha) n.
std::optional<double> mixture_divergence_discrete(FDivergenceKind kind, const DiscreteDist& p,
                                                  const DiscreteDist& q, const DiscreteDist& noise,
                                                  double alpha);

/// Divergence between alpha P p + (1-alpha) n and alpha P q + (1-alpha) n.
std::optional<double> affine_divergence_discrete(FDivergenceKind kind, const DiscreteDist& p,
                                                 const DiscreteDist& q,
                                                 const DiscreteSpreadMatrix& spread,
                                                 const DiscreteDist& noise, double alpha);

/// KL between two isotropic Gaussians with shared variance:
/// ||mu_p - mu_q||^2 / (2 sigma^2). At sigma^2 = 0.5 this is the squared
/// distance between the means.
double gaussian_spread_kl(std::span<const double> mu_p, std::span<const double> mu_q,
                          double sigma2);

/// Two Gaussian distributions supported on linear subspaces (offsets a, b;
/// loading matrices A, B) with shared spread covariance sigma^2 I + u u^T.
struct SubspacePair {
  Vec a, b;
  DenseMatrix loading_a, loading_b;
  double sigma2 = 0.1;
  Vec u;  // unit vector

  SubspacePair(Vec a_in, Vec b_in, DenseMatrix la, DenseMatrix lb, double s2, Vec u_in);

  DenseMatrix spread_covariance() const;  // sigma^2 I + u u^T
};

/// Closed-form KL between N(a, A A^T + Sigma) and N(b, B B^T + Sigma).
double subspace_spread_kl(const SubspacePair& s);

struct NoiseDirectionResult {
  Vec u;
  bool degenerate = false;  // b == a: gradient vanishes everywhere
  double final_alignment = 0.0;  // |u . vhat|
  struct TracePoint {
    int step;
    double kl;
    double dot_with_v;
  };
  std::vector<TracePoint> trace;
};

/// Projected gradient ascent of the subspace spread KL over unit vectors u.
/// Requires A == B. The optimum is orthogonal to (A A^T + sigma^2 I)^{-1}(b-a);
/// throws ConvergenceError when |u . vhat| stays above 1e-4 at the step cap.
NoiseDirectionResult optimize_noise_direction(const SubspacePair& s, int steps = 2000,
                                              double lr = 0.05);

struct MmdTvdResult {
  double mmd_proxy = 0.0;   // L2 norm of the smoothed difference
  double spread_tvd = 0.0;  // L1 norm of the smoothed difference
};

/// Discretised comparison on a uniform 1-D grid with spacing dx: convolve both
/// distributions with the (renormalised) kernel and report the L2 and L1 norms
/// of the difference.
MmdTvdResult mmd_vs_spread_tvd_grid(const DiscreteDist& p, const DiscreteDist& q,
                                    const StationaryKernel& kernel, double dx);

struct DpiResult {
  std::optional<double> before;
  double after = 0.0;
  bool holds = false;
};

/// Data processing inequality check: divergence after spreading never exceeds
/// the original (holds vacuously when the original is undefined).
DpiResult dpi_check(FDivergenceKind kind, const DiscreteDist& p, const DiscreteDist& q,
                    const DiscreteSpreadMatrix& spread);

/// -(1/N) sum_n model_logpdf(y_n); the minimisation target for every trainer.
double spread_mle_objective(std::span<const Vec> samples,
                            const std::function<double(std::span<const double>)>& model_logpdf);

}  // namespace spreaddiv
