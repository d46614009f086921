#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "spreaddiv/errors.hpp"
#include "spreaddiv/linalg.hpp"
#include "spreaddiv/matrix.hpp"
#include "spreaddiv/rng.hpp"
#include "spreaddiv/tape.hpp"

using namespace spreaddiv;

namespace {

DenseMatrix random_symmetric(std::size_t n, Rng& rng) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      m(i, j) = rng.uniform_in(-2.0, 2.0);
      m(j, i) = m(i, j);
    }
  return m;
}

double recon_error(const DenseMatrix& m, const EighResult& eig) {
  const std::size_t n = m.rows();
  DenseMatrix lam(n, n);
  for (std::size_t i = 0; i < n; ++i) lam(i, i) = eig.eigenvalues[i];
  const DenseMatrix recon = eig.vectors * lam * eig.vectors.transpose();
  return (recon - m).frobenius_norm() / std::max(m.frobenius_norm(), 1e-300);
}

}  // namespace

TEST_CASE("rng: identical seeds give identical streams") {
  Rng a(1234), b(1234);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(1234), d(1235);
  bool all_equal = true;
  for (int i = 0; i < 16; ++i) all_equal &= c.next_u64() == d.next_u64();
  CHECK_FALSE(all_equal);
}

TEST_CASE("rng: normal and laplace moments") {
  Rng rng(7);
  const int n = 200000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sumsq += x * x;
  }
  CHECK(std::fabs(sum / n) < 0.01);
  CHECK(std::fabs(sumsq / n - 1.0) < 0.02);

  // Laplace(scale b) has variance 2 b^2; scale 1/sqrt(2) gives unit variance.
  double lsum = 0.0, lsumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.laplace(0.70710678118654752440);
    lsum += x;
    lsumsq += x * x;
  }
  CHECK(std::fabs(lsum / n) < 0.01);
  CHECK(std::fabs(lsumsq / n - 1.0) < 0.03);
}

TEST_CASE("rng: fork produces decorrelated deterministic streams") {
  const Rng base(99);
  Rng f1 = base.fork(3, 4);
  Rng f2 = base.fork(3, 4);
  Rng f3 = base.fork(3, 5);
  CHECK(f1.next_u64() == f2.next_u64());
  CHECK(f1.next_u64() != f3.next_u64());
}

TEST_CASE("eigh: diagonal matrix") {
  DenseMatrix m(2, 2);
  m(0, 0) = 4.0;
  m(1, 1) = 1.0;
  const EighResult eig = eigh_sym(m);
  CHECK(eig.eigenvalues[0] == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(eig.eigenvalues[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::fabs(eig.vectors(0, 0)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::fabs(eig.vectors(1, 0)) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("eigh: identity") {
  const EighResult eig = eigh_sym(DenseMatrix::identity(3));
  for (double lambda : eig.eigenvalues) CHECK(lambda == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("eigh: reconstruction and orthonormality on random symmetric matrices") {
  Rng rng(42);
  for (std::size_t n : {5u, 13u, 50u}) {
    const DenseMatrix m = random_symmetric(n, rng);
    const EighResult eig = eigh_sym(m);
    CHECK(recon_error(m, eig) <= 1e-8);
    const DenseMatrix vtv = eig.vectors.transpose() * eig.vectors;
    const DenseMatrix err = vtv - DenseMatrix::identity(n);
    CHECK(err.max_abs() <= 1e-8);
    // eigenvalues descending
    CHECK(std::is_sorted(eig.eigenvalues.rbegin(), eig.eigenvalues.rend()));
    // residual m v = lambda v per pair
    for (std::size_t c = 0; c < n; ++c) {
      Vec v(n);
      for (std::size_t r = 0; r < n; ++r) v[r] = eig.vectors(r, c);
      const Vec mv = m.matvec(v);
      for (std::size_t r = 0; r < n; ++r)
        CHECK(mv[r] == doctest::Approx(eig.eigenvalues[c] * v[r]).epsilon(1e-7).scale(
                           std::max(1.0, m.max_abs())));
    }
  }
}

TEST_CASE("eigh: rejects asymmetric input") {
  DenseMatrix m(2, 2);
  m(0, 1) = 1.0;
  m(1, 0) = 0.5;
  CHECK_THROWS_AS(eigh_sym(m), std::invalid_argument);
}

TEST_CASE("gaussian_logpdf_diag: pinned values") {
  const Vec zero = {0.0};
  const Vec one = {1.0};
  const Vec v1 = {1.0};
  CHECK(gaussian_logpdf_diag(zero, zero, v1) ==
        doctest::Approx(-0.91893853320467274178).epsilon(1e-14));
  CHECK(gaussian_logpdf_diag(one, zero, v1) ==
        doctest::Approx(-0.5 - 0.91893853320467274178).epsilon(1e-14));
  const Vec bad = {0.0};
  CHECK_THROWS_AS(gaussian_logpdf_diag(zero, zero, bad), std::invalid_argument);
}

TEST_CASE("gaussian_logpdf_diag: random 4-D case vs long-double oracle") {
  Rng rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    Vec x(4), mu(4), var(4);
    for (int i = 0; i < 4; ++i) {
      x[i] = rng.uniform_in(-3, 3);
      mu[i] = rng.uniform_in(-3, 3);
      var[i] = rng.uniform_in(0.1, 4.0);
    }
    long double acc = 0.0L;
    const long double l2p = 1.837877066409345483560659472811L;
    for (int i = 0; i < 4; ++i) {
      const long double d = static_cast<long double>(x[i]) - mu[i];
      acc += d * d / var[i] + logl(var[i]) + l2p;
    }
    const double want = static_cast<double>(-0.5L * acc);
    CHECK(gaussian_logpdf_diag(x, mu, var) == doctest::Approx(want).epsilon(1e-14));
  }
}

TEST_CASE("cholesky solve and logdet agree with the long-double oracle") {
  Rng rng(11);
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t n = 4;
    DenseMatrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) a(i, j) = rng.uniform_in(-1, 1);
    DenseMatrix spd = a.aat();
    for (std::size_t i = 0; i < n; ++i) spd(i, i) += 1.0;
    auto [inv, det] = oracles::invert_ld(oracles::to_ld(spd));
    CHECK(logdet_spd(spd) == doctest::Approx(static_cast<double>(logl(det))).epsilon(1e-10));
    Vec b(n);
    for (double& v : b) v = rng.uniform_in(-2, 2);
    const Vec x = solve_spd(spd, b);
    for (std::size_t i = 0; i < n; ++i) {
      long double want = 0.0L;
      for (std::size_t j = 0; j < n; ++j) want += inv.at(i, j) * b[j];
      CHECK(x[i] == doctest::Approx(static_cast<double>(want)).epsilon(1e-9));
    }
  }
}

TEST_CASE("determinant: known values") {
  DenseMatrix m(2, 2);
  m(0, 0) = 0.75;
  m(0, 1) = 0.25;
  m(1, 0) = 0.25;
  m(1, 1) = 0.75;
  CHECK(determinant(m) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(determinant(DenseMatrix::identity(4)) == doctest::Approx(1.0));
  DenseMatrix sing(2, 2, {1.0, 1.0, 1.0, 1.0});
  CHECK(determinant(sing) == doctest::Approx(0.0));
}

TEST_CASE("tape: square root gradient") {
  Tape tape;
  const Vec x = {3.0};
  const TapeValue leaf = tape.leaf(x);
  const TapeValue y = tape.square(leaf);
  tape.backward(y);
  CHECK(leaf.grad()[0] == doctest::Approx(6.0).epsilon(1e-14));
}

TEST_CASE("tape: constant root has zero gradients") {
  Tape tape;
  const TapeValue leaf = tape.leaf(Vec{1.5, -2.0});
  const TapeValue c = tape.constant_scalar(4.0);
  const TapeValue root = tape.add(c, tape.scale(tape.sum(leaf), 0.0));
  tape.backward(root);
  CHECK(leaf.grad()[0] == 0.0);
  CHECK(leaf.grad()[1] == 0.0);
}

TEST_CASE("tape: backward requires a scalar root") {
  Tape tape;
  const TapeValue leaf = tape.leaf(Vec{1.0, 2.0});
  CHECK_THROWS_AS(tape.backward(leaf), std::invalid_argument);
}

TEST_CASE("tape: two-layer tanh MLP gradient matches finite differences") {
  Rng rng(21);
  ParamStore params;
  const std::vector<std::size_t> hidden = {4, 3};
  const MlpLayout net = add_mlp(params, "probe", 3, 2, hidden, rng, 0.6);
  const Vec input = {0.3, -1.2, 0.8};

  auto eval = [&]() {
    Tape tape;
    const TapeBinding bind = bind_params(tape, params);
    return tape.sum(mlp_forward(tape, bind, net, tape.constant(input))).scalar();
  };

  Tape tape;
  const TapeBinding bind = bind_params(tape, params);
  const TapeValue root = tape.sum(mlp_forward(tape, bind, net, tape.constant(input)));
  tape.backward(root);
  Vec ad;
  for (std::size_t t = 0; t < params.count(); ++t)
    for (double g : bind[static_cast<int>(t)].grad()) ad.push_back(g);

  const Vec fd = oracles::fd_gradient(params, eval);
  CHECK(oracles::max_rel_error(ad, fd) <= 1e-5);
}

TEST_CASE("tape: 100 random computation graphs match finite differences") {
  Rng rng(77);
  for (int graph = 0; graph < 100; ++graph) {
    ParamStore params;
    const std::size_t n = 2 + static_cast<std::size_t>(rng.next_u64() % 4);
    Vec init(n);
    for (double& v : init) v = rng.uniform_in(-1.2, 1.2);
    const int leaf_id = params.add("x", n, 0, init);
    const int ops = 3 + static_cast<int>(rng.next_u64() % 5);
    std::vector<int> choices;
    for (int i = 0; i < ops; ++i) choices.push_back(static_cast<int>(rng.next_u64() % 6));

    auto build = [&](Tape& tape) {
      const TapeBinding bind = bind_params(tape, params);
      TapeValue v = bind[leaf_id];
      for (int op : choices) {
        switch (op) {
          case 0: v = tape.tanh(v); break;
          case 1: v = tape.softplus(v); break;
          case 2: v = tape.scale(tape.square(v), 0.4); break;
          case 3: v = tape.scale(v, 0.7); break;
          case 4: v = tape.add_const(v, 0.3); break;
          case 5: v = tape.mul(v, tape.tanh(v)); break;
        }
      }
      return std::pair{tape.sum(v), bind};
    };

    Tape tape;
    auto [root, bind] = build(tape);
    tape.backward(root);
    const Vec ad = bind[leaf_id].grad();
    const Vec fd = oracles::fd_gradient(params, [&]() {
      Tape t2;
      return build(t2).first.scalar();
    });
    CHECK(oracles::max_rel_error(ad, fd) <= 1e-5);
  }
}

TEST_CASE("tape: gram, solve_sym and logdet_sym backward vs finite differences") {
  Rng rng(31);
  ParamStore params;
  const int u_id = params.add_random("u", 4, 2, rng, 0.8);
  const Vec r = {0.5, -0.3, 1.1, 0.2};

  auto build = [&](Tape& tape) {
    const TapeBinding bind = bind_params(tape, params);
    const TapeValue u = bind[u_id];
    const TapeValue t = tape.matvec_t(u, tape.constant(r));
    const TapeValue m = tape.add_scaled_identity(tape.scale(tape.gram(u), 0.5), 1.0);
    const TapeValue quad = tape.dot(t, tape.solve_sym(m, t));
    return std::pair{tape.add(quad, tape.logdet_sym(m)), bind};
  };

  Tape tape;
  auto [root, bind] = build(tape);
  tape.backward(root);
  const Vec ad = bind[u_id].grad();
  const Vec fd = oracles::fd_gradient(params, [&]() {
    Tape t2;
    return build(t2).first.scalar();
  });
  CHECK(oracles::max_rel_error(ad, fd) <= 1e-5);
}

TEST_CASE("tape: matvec and logsumexp2") {
  Tape tape;
  const Vec w_flat = {1.0, 2.0, 3.0, 4.0};
  const TapeValue w = tape.leaf(w_flat, 2, 2);
  const TapeValue x = tape.constant(Vec{0.5, -1.0});
  const TapeValue y = tape.matvec(w, x);
  CHECK(y.value()[0] == doctest::Approx(-1.5));
  CHECK(y.value()[1] == doctest::Approx(-2.5));

  const TapeValue a = tape.leaf(Vec{1.2});
  const TapeValue b = tape.leaf(Vec{-40.0});
  const TapeValue lse = tape.logsumexp2(a, b);
  CHECK(lse.scalar() == doctest::Approx(std::log(std::exp(1.2) + std::exp(-40.0))));
  tape.backward(lse);
  const double pa = std::exp(1.2) / (std::exp(1.2) + std::exp(-40.0));
  CHECK(a.grad()[0] == doctest::Approx(pa).epsilon(1e-12));
  CHECK(b.grad()[0] == doctest::Approx(1.0 - pa).epsilon(1e-9));
}

TEST_CASE("matrix: invariants") {
  CHECK_THROWS_AS(DenseMatrix(2, 2, Vec{1.0}), std::invalid_argument);
  DenseMatrix m(2, 3, {1, 2, 3, 4, 5, 6});
  const DenseMatrix t = m.transpose();
  CHECK(t(2, 1) == 6.0);
  const DenseMatrix g = m.ata();
  CHECK(g(0, 0) == doctest::Approx(17.0));
  CHECK(g(2, 1) == g(1, 2));
}
