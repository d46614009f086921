#pragma once

#include <cstdint>
#include <optional>

#include "spreaddiv/matrix.hpp"
#include "spreaddiv/rng.hpp"

namespace spreaddiv {

/// Linear ICA with a unit-variance Laplace source prior (scale 1/sqrt(2)) and
/// isotropic Gaussian observation noise of std gamma.
struct IcaModel {
  DenseMatrix mixing;  // X x Z
  double gamma = 0.0;

  IcaModel(DenseMatrix a, double gamma_in);
};

constexpr double kIcaLaplaceScale = 0.70710678118654752440;  // 1/sqrt(2)

struct IcaDataset {
  std::vector<Vec> x;
  std::optional<DenseMatrix> a_true;

  std::size_t size() const { return x.size(); }
  std::size_t dim() const { return x.empty() ? 0 : x.front().size(); }
};

IcaDataset generate_ica_data(const DenseMatrix& a_true, std::size_t n, double gamma,
                             std::uint64_t seed);

struct IcaEmConfig {
  double sigma = -1.0;  // spread noise std; < 0 means the auto rule
  std::size_t s_y = 1;
  std::size_t s_z = 1000;
  int iterations = 500;
  std::uint64_t seed = 0;
  int threads = 0;  // 0: hardware_concurrency
};

/// sigma = max(0.001, 2.5 * sqrt(mean of the entries of A A^T)).
double auto_spread_sigma(const DenseMatrix& a);

/// One exact EM step for the Gaussian observation model: posterior statistics
/// in closed form with a standard normal prior on z. At gamma = 0 the
/// posterior collapses to the least-squares point and the update returns A_k
/// unchanged when A_k is square invertible (the freeze).
DenseMatrix standard_em_step(const DenseMatrix& a_k, const IcaDataset& data, double gamma);

struct SpreadPosterior {
  Vec mean;            // (A^T A)^{-1} A^T y
  DenseMatrix cov;     // (gamma^2 + sigma^2) (A^T A)^{-1}
};

SpreadPosterior spread_posterior_params(const DenseMatrix& a, double gamma, double sigma,
                                        std::span<const double> y);

/// One spread-EM step: for each datum draw s_y spread samples y ~ N(x, s^2 I),
/// for each y draw s_z proposals from the Gaussian pseudo-posterior and weight
/// them by the Laplace prior (self-normalised, log-sum-exp). Setting sigma = 0
/// yields the no-spread baseline; with gamma also 0 the proposal is the exact
/// least-squares point and no sampling happens.
DenseMatrix spread_em_step(const DenseMatrix& a_k, const IcaDataset& data, double gamma,
                           const IcaEmConfig& cfg, std::uint64_t iteration);

/// Mean relative entrywise error after greedy column matching by absolute
/// cosine similarity with sign correction.
double aligned_relative_error(const DenseMatrix& a_est, const DenseMatrix& a_true);

enum class IcaAlgo { Spread, Standard };

struct IcaRunResult {
  DenseMatrix a_est;
  std::vector<double> error_trace;  // per iteration, when a_true known
  bool aborted = false;
};

/// Full EM run from a random init (entries uniform on [-1, 1]). Spread mode
/// uses cfg.sigma (or the auto rule); Standard mode runs the same machinery
/// with sigma = 0. Aborts with the trace when the error exceeds 1e3.
IcaRunResult run_spread_em(const IcaDataset& data, std::size_t z_dim, double gamma,
                           const IcaEmConfig& cfg, IcaAlgo algo = IcaAlgo::Spread);

}  // namespace spreaddiv
