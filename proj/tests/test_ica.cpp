#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "spreaddiv/ica.hpp"
#include "spreaddiv/linalg.hpp"

using namespace spreaddiv;

namespace {

DenseMatrix random_invertible(std::size_t n, Rng& rng) {
  for (;;) {
    DenseMatrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) a(i, j) = rng.uniform_in(-1, 1);
    if (std::fabs(determinant(a)) > 0.05) return a;
  }
}

DenseMatrix random_sign(std::size_t r, std::size_t c, Rng& rng) {
  DenseMatrix a(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) a(i, j) = rng.uniform() < 0.5 ? -1.0 : 1.0;
  return a;
}

}  // namespace

TEST_CASE("IcaModel: shape and rank validation") {
  CHECK_THROWS_AS(IcaModel(DenseMatrix(2, 3, Vec(6, 1.0)), 0.0), std::invalid_argument);
  CHECK_THROWS_AS(IcaModel(DenseMatrix::identity(3), -0.1), std::invalid_argument);
  DenseMatrix collinear(3, 2);
  collinear(0, 0) = 1.0;
  collinear(0, 1) = 1.0;
  CHECK_THROWS_AS(IcaModel(collinear, 0.0), std::invalid_argument);
  const IcaModel ok(DenseMatrix::identity(3), 0.2);
  CHECK(ok.gamma == 0.2);
}

TEST_CASE("generate_ica_data: identity mixing reproduces unit-variance sources") {
  const DenseMatrix a = DenseMatrix::identity(3);
  const IcaDataset data = generate_ica_data(a, 10000, 0.0, 11);
  for (std::size_t d = 0; d < 3; ++d) {
    double mean = 0.0, sq = 0.0;
    for (const Vec& x : data.x) {
      mean += x[d];
      sq += x[d] * x[d];
    }
    mean /= static_cast<double>(data.size());
    sq /= static_cast<double>(data.size());
    CHECK(std::fabs(mean) < 0.05);
    CHECK(sq - mean * mean == doctest::Approx(1.0).epsilon(0.05));
  }
}

TEST_CASE("generate_ica_data: empty dataset and determinism") {
  const DenseMatrix a = DenseMatrix::identity(2);
  CHECK(generate_ica_data(a, 0, 0.0, 1).size() == 0);
  const IcaDataset d1 = generate_ica_data(a, 100, 0.3, 42);
  const IcaDataset d2 = generate_ica_data(a, 100, 0.3, 42);
  for (std::size_t i = 0; i < d1.size(); ++i) CHECK(d1.x[i] == d2.x[i]);
}

TEST_CASE("standard_em_step: the freeze at gamma = 0 for square invertible mixing") {
  Rng rng(13);
  for (int rep = 0; rep < 5; ++rep) {
    const DenseMatrix a_true = random_invertible(4, rng);
    const IcaDataset data = generate_ica_data(a_true, 500, 0.0, 100 + rep);
    const DenseMatrix a_k = random_invertible(4, rng);
    const DenseMatrix next = standard_em_step(a_k, data, 0.0);
    CHECK((next - a_k).max_abs() <= 1e-10);
  }
}

TEST_CASE("standard_em_step: truth is a fixed point at gamma = 0") {
  Rng rng(17);
  const DenseMatrix a_true = random_invertible(3, rng);
  const IcaDataset data = generate_ica_data(a_true, 400, 0.0, 7);
  const DenseMatrix next = standard_em_step(a_true, data, 0.0);
  CHECK((next - a_true).max_abs() <= 1e-10);
}

TEST_CASE("standard_em_step: large gamma breaks the freeze") {
  Rng rng(19);
  const DenseMatrix a_true = random_invertible(3, rng);
  const IcaDataset data = generate_ica_data(a_true, 2000, 2.0, 8);
  const DenseMatrix a_k = random_invertible(3, rng);
  const DenseMatrix next = standard_em_step(a_k, data, 2.0);
  CHECK((next - a_k).max_abs() > 1e-3);
}

TEST_CASE("spread_posterior_params: identity mixing") {
  const DenseMatrix a = DenseMatrix::identity(3);
  const Vec y = {0.5, -1.0, 2.0};
  const SpreadPosterior post = spread_posterior_params(a, 0.0, 1.0, y);
  CHECK(max_abs_diff(post.mean, y) <= 1e-12);
  CHECK((post.cov - DenseMatrix::identity(3)).max_abs() <= 1e-12);
}

TEST_CASE("spread_posterior_params: least-squares mean for a tall mixing matrix") {
  DenseMatrix a(2, 1, {1.0, 1.0});
  const Vec y = {1.0, 3.0};
  const double gamma = 0.2, sigma = 0.5;
  const SpreadPosterior post = spread_posterior_params(a, gamma, sigma, y);
  CHECK(post.mean[0] == doctest::Approx(2.0).epsilon(1e-12));  // (y1 + y2) / 2
  CHECK(post.cov(0, 0) ==
        doctest::Approx((gamma * gamma + sigma * sigma) / 2.0).epsilon(1e-12));

  // Scaling A by 2 scales the covariance by 1/4.
  const SpreadPosterior scaled = spread_posterior_params(a.scaled(2.0), gamma, sigma, y);
  CHECK(scaled.cov(0, 0) == doctest::Approx(post.cov(0, 0) / 4.0).epsilon(1e-12));
}

TEST_CASE("spread_posterior_params: rank-deficient mixing is rejected") {
  DenseMatrix a(3, 2);
  a(0, 0) = 1.0;
  a(0, 1) = 1.0;  // columns collinear
  CHECK_THROWS_AS(spread_posterior_params(a, 0.0, 1.0, Vec{1, 2, 3}), std::invalid_argument);
}

TEST_CASE("auto_spread_sigma: floor and formula") {
  CHECK(auto_spread_sigma(DenseMatrix(3, 2)) == doctest::Approx(0.001));
  DenseMatrix a = DenseMatrix::identity(2);
  // A A^T = I, mean entry = 0.5, sigma = 2.5 sqrt(0.5).
  CHECK(auto_spread_sigma(a) == doctest::Approx(2.5 * std::sqrt(0.5)).epsilon(1e-12));
}

TEST_CASE("spread_em_step: deterministic given a seed and thread-count independent") {
  Rng rng(23);
  const DenseMatrix a_true = random_sign(6, 3, rng);
  const IcaDataset data = generate_ica_data(a_true, 300, 0.0, 5);
  const DenseMatrix a_k = random_sign(6, 3, rng);
  IcaEmConfig cfg;
  cfg.sigma = 1.0;
  cfg.s_z = 50;
  cfg.seed = 77;
  cfg.threads = 1;
  const DenseMatrix r1 = spread_em_step(a_k, data, 0.0, cfg, 3);
  cfg.threads = 2;
  const DenseMatrix r2 = spread_em_step(a_k, data, 0.0, cfg, 3);
  cfg.threads = 0;
  const DenseMatrix r3 = spread_em_step(a_k, data, 0.0, cfg, 3);
  CHECK((r1 - r2).max_abs() == 0.0);
  CHECK((r1 - r3).max_abs() == 0.0);
}

TEST_CASE("spread_em_step: importance weights form a simplex (indirect check)") {
  // s_z = 1 degenerates the weights to one, so the update equals the
  // plain proposal-mean estimator; check the two code paths agree there.
  Rng rng(29);
  const DenseMatrix a_true = random_sign(4, 2, rng);
  const IcaDataset data = generate_ica_data(a_true, 200, 0.0, 9);
  const DenseMatrix a_k = random_sign(4, 2, rng);
  IcaEmConfig cfg;
  cfg.sigma = 0.8;
  cfg.s_z = 1;
  cfg.seed = 5;
  const DenseMatrix once = spread_em_step(a_k, data, 0.0, cfg, 0);
  const DenseMatrix again = spread_em_step(a_k, data, 0.0, cfg, 0);
  CHECK((once - again).max_abs() == 0.0);
  CHECK(once.all_finite());
}

TEST_CASE("spread_em_step: stays near the truth at the optimum") {
  Rng rng(31);
  const DenseMatrix a_true = random_sign(6, 3, rng);
  const IcaDataset data = generate_ica_data(a_true, 5000, 0.0, 21);
  IcaEmConfig cfg;
  cfg.sigma = -1.0;  // auto rule
  cfg.s_z = 1000;
  cfg.seed = 3;
  const DenseMatrix next = spread_em_step(a_true, data, 0.0, cfg, 0);
  CHECK(aligned_relative_error(next, a_true) < 0.05);
}

TEST_CASE("spread_em_step: one-step drift shrinks as s_z grows (median over seeds)") {
  // Estimator consistency: with the spread draws shared per seed, the update
  // converges to the exact-statistics step as the proposal count grows; the
  // reference uses the same seed at s_z = 20000.
  Rng rng(37);
  const DenseMatrix a_true = random_sign(6, 3, rng);
  const IcaDataset data = generate_ica_data(a_true, 200, 0.0, 2);
  Vec drift10, drift100, drift1000;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    IcaEmConfig ref_cfg;
    ref_cfg.sigma = 1.0;
    ref_cfg.s_z = 20000;
    ref_cfg.seed = seed;
    const DenseMatrix ref = spread_em_step(a_true, data, 0.0, ref_cfg, 0);
    for (auto [sz, bucket] :
         {std::pair{std::size_t{10}, &drift10}, {std::size_t{100}, &drift100},
          {std::size_t{1000}, &drift1000}}) {
      IcaEmConfig cfg;
      cfg.sigma = 1.0;
      cfg.s_z = sz;
      cfg.seed = seed;
      bucket->push_back((spread_em_step(a_true, data, 0.0, cfg, 0) - ref).frobenius_norm() /
                        ref.frobenius_norm());
    }
  }
  const double m10 = oracles::median_of(drift10);
  const double m100 = oracles::median_of(drift100);
  const double m1000 = oracles::median_of(drift1000);
  CHECK(m100 < m10);
  CHECK(m1000 < m100);
}

TEST_CASE("aligned_relative_error: resolves permutation and sign") {
  DenseMatrix a(3, 2, {1, -2, 0.5, 1, -1, 0.25});
  // Swap columns and flip the sign of one.
  DenseMatrix b(3, 2);
  for (std::size_t r = 0; r < 3; ++r) {
    b(r, 0) = -a(r, 1);
    b(r, 1) = a(r, 0);
  }
  CHECK(aligned_relative_error(b, a) <= 1e-12);
}

TEST_CASE("run_spread_em: zero iterations returns the seeded init; truth gives zero error") {
  Rng rng(41);
  const DenseMatrix a_true = random_sign(4, 2, rng);
  IcaEmConfig cfg;
  cfg.iterations = 0;
  cfg.seed = 99;
  const IcaDataset data = generate_ica_data(a_true, 50, 0.0, 1);
  const IcaRunResult first = run_spread_em(data, 2, 0.0, cfg);
  REQUIRE(first.error_trace.size() == 1);

  // Re-run with the same seed on a dataset whose truth is that init.
  IcaDataset rigged = generate_ica_data(first.a_est, 50, 0.0, 1);
  const IcaRunResult second = run_spread_em(rigged, 2, 0.0, cfg);
  CHECK(second.error_trace.front() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("run_spread_em: standard EM stays frozen at gamma = 0 on square mixing") {
  Rng rng(43);
  DenseMatrix a_true = random_sign(4, 4, rng);
  while (std::fabs(determinant(a_true)) < 0.5) a_true = random_sign(4, 4, rng);
  const IcaDataset data = generate_ica_data(a_true, 400, 0.0, 17);
  IcaEmConfig cfg;
  cfg.iterations = 10;
  cfg.seed = 4;
  cfg.s_z = 10;
  const IcaRunResult run = run_spread_em(data, 4, 0.0, cfg, IcaAlgo::Standard);
  // Error never moves from the initial value.
  for (double e : run.error_trace)
    CHECK(e == doctest::Approx(run.error_trace.front()).epsilon(1e-8));
}

TEST_CASE("run_spread_em: spread EM beats standard EM at small gamma (desk scale)") {
  Rng rng(47);
  const DenseMatrix a_true = random_sign(6, 3, rng);
  for (double gamma : {0.0, 0.01}) {
    Vec spread_err, standard_err;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const IcaDataset data =
          generate_ica_data(a_true, 400, gamma, 1000 + seed);
      IcaEmConfig cfg;
      cfg.iterations = 60;
      cfg.s_z = 200;
      cfg.seed = seed;
      spread_err.push_back(
          run_spread_em(data, 3, gamma, cfg, IcaAlgo::Spread).error_trace.back());
      standard_err.push_back(
          run_spread_em(data, 3, gamma, cfg, IcaAlgo::Standard).error_trace.back());
    }
    CHECK(oracles::median_of(spread_err) < oracles::median_of(standard_err));
  }
}

TEST_CASE("run_spread_em: deterministic trace") {
  Rng rng(53);
  const DenseMatrix a_true = random_sign(4, 2, rng);
  const IcaDataset data = generate_ica_data(a_true, 200, 0.0, 3);
  IcaEmConfig cfg;
  cfg.iterations = 5;
  cfg.s_z = 50;
  cfg.seed = 12;
  const IcaRunResult r1 = run_spread_em(data, 2, 0.0, cfg);
  const IcaRunResult r2 = run_spread_em(data, 2, 0.0, cfg);
  CHECK(r1.error_trace == r2.error_trace);
  CHECK((r1.a_est - r2.a_est).max_abs() == 0.0);
}
