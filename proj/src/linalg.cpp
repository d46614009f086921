#include "spreaddiv/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "spreaddiv/errors.hpp"

namespace spreaddiv {

namespace {

void require_square(const DenseMatrix& m, const char* who) {
  if (m.rows() != m.cols()) throw std::invalid_argument(std::string(who) + ": matrix not square");
}

void require_symmetric(const DenseMatrix& m, const char* who) {
  require_square(m, who);
  const double scale = std::max(m.max_abs(), 1e-300);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.cols(); ++j)
      if (std::fabs(m(i, j) - m(j, i)) > 1e-10 * scale)
        throw std::invalid_argument(std::string(who) + ": matrix not symmetric");
}

}  // namespace

EighResult eigh_sym(const DenseMatrix& m) {
  require_symmetric(m, "eigh_sym");
  const std::size_t n = m.rows();
  DenseMatrix a = m;
  DenseMatrix v = DenseMatrix::identity(n);

  auto offdiag_sq = [&]() {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s += a(i, j) * a(i, j);
    return s;
  };

  const double total_scale = std::max(m.frobenius_norm(), 1e-300);
  const double tol = 1e-28 * total_scale * total_scale;
  const int max_sweeps = 100;
  int sweep = 0;
  while (offdiag_sq() > tol) {
    if (++sweep > max_sweeps)
      throw ConvergenceError("eigh_sym: Jacobi sweeps exceeded iteration limit");
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double app = a(p, p), aqq = a(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

  EighResult out;
  out.eigenvalues.resize(n);
  out.vectors = DenseMatrix(n, n);
  for (std::size_t c = 0; c < n; ++c) {
    const std::size_t src = order[c];
    out.eigenvalues[c] = a(src, src);
    // Canonical sign: largest-magnitude component positive.
    std::size_t imax = 0;
    double vmax = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      if (std::fabs(v(r, src)) > vmax) {
        vmax = std::fabs(v(r, src));
        imax = r;
      }
    }
    const double sign = v(imax, src) < 0.0 ? -1.0 : 1.0;
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, c) = sign * v(r, src);
  }
  return out;
}

DenseMatrix cholesky(const DenseMatrix& spd) {
  require_square(spd, "cholesky");
  const std::size_t n = spd.rows();
  DenseMatrix l(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double acc = spd(i, j);
      for (std::size_t k = 0; k < j; ++k) acc -= l(i, k) * l(j, k);
      if (i == j) {
        if (acc <= 0.0) throw std::invalid_argument("cholesky: matrix not positive definite");
        l(i, i) = std::sqrt(acc);
      } else {
        l(i, j) = acc / l(j, j);
      }
    }
  }
  return l;
}

Vec solve_lower(const DenseMatrix& l, std::span<const double> b) {
  const std::size_t n = l.rows();
  Vec y(b.begin(), b.end());
  for (std::size_t i = 0; i < n; ++i) {
    double acc = y[i];
    for (std::size_t k = 0; k < i; ++k) acc -= l(i, k) * y[k];
    y[i] = acc / l(i, i);
  }
  return y;
}

Vec solve_upper_t(const DenseMatrix& l, std::span<const double> b) {
  const std::size_t n = l.rows();
  Vec y(b.begin(), b.end());
  for (std::size_t ii = n; ii-- > 0;) {
    double acc = y[ii];
    for (std::size_t k = ii + 1; k < n; ++k) acc -= l(k, ii) * y[k];
    y[ii] = acc / l(ii, ii);
  }
  return y;
}

Vec solve_spd(const DenseMatrix& spd, std::span<const double> b) {
  const DenseMatrix l = cholesky(spd);
  return solve_upper_t(l, solve_lower(l, b));
}

DenseMatrix inverse_spd(const DenseMatrix& spd) {
  const std::size_t n = spd.rows();
  const DenseMatrix l = cholesky(spd);
  DenseMatrix inv(n, n);
  Vec e(n, 0.0);
  for (std::size_t c = 0; c < n; ++c) {
    e.assign(n, 0.0);
    e[c] = 1.0;
    const Vec col = solve_upper_t(l, solve_lower(l, e));
    for (std::size_t r = 0; r < n; ++r) inv(r, c) = col[r];
  }
  return inv;
}

double logdet_spd(const DenseMatrix& spd) {
  const DenseMatrix l = cholesky(spd);
  double acc = 0.0;
  for (std::size_t i = 0; i < l.rows(); ++i) acc += std::log(l(i, i));
  return 2.0 * acc;
}

namespace {

struct Lu {
  DenseMatrix lu;
  std::vector<std::size_t> perm;
  int sign = 1;
  bool singular = false;
};

Lu lu_decompose(const DenseMatrix& m) {
  require_square(m, "lu");
  const std::size_t n = m.rows();
  Lu f{m, {}, 1, false};
  f.perm.resize(n);
  for (std::size_t i = 0; i < n; ++i) f.perm[i] = i;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    double best = std::fabs(f.lu(col, col));
    for (std::size_t r = col + 1; r < n; ++r) {
      const double v = std::fabs(f.lu(r, col));
      if (v > best) {
        best = v;
        piv = r;
      }
    }
    if (best == 0.0) {
      f.singular = true;
      return f;
    }
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(f.lu(piv, c), f.lu(col, c));
      std::swap(f.perm[piv], f.perm[col]);
      f.sign = -f.sign;
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double factor = f.lu(r, col) / f.lu(col, col);
      f.lu(r, col) = factor;
      for (std::size_t c = col + 1; c < n; ++c) f.lu(r, c) -= factor * f.lu(col, c);
    }
  }
  return f;
}

}  // namespace

double determinant(const DenseMatrix& m) {
  const Lu f = lu_decompose(m);
  if (f.singular) return 0.0;
  double det = f.sign;
  for (std::size_t i = 0; i < m.rows(); ++i) det *= f.lu(i, i);
  return det;
}

Vec solve_lu(const DenseMatrix& m, std::span<const double> b) {
  const Lu f = lu_decompose(m);
  if (f.singular) throw std::invalid_argument("solve_lu: singular matrix");
  const std::size_t n = m.rows();
  Vec y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = b[f.perm[i]];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < i; ++k) y[i] -= f.lu(i, k) * y[k];
  for (std::size_t ii = n; ii-- > 0;) {
    for (std::size_t k = ii + 1; k < n; ++k) y[ii] -= f.lu(ii, k) * y[k];
    y[ii] /= f.lu(ii, ii);
  }
  return y;
}

double gaussian_logpdf_diag(std::span<const double> x, std::span<const double> mean,
                            std::span<const double> variances) {
  if (x.size() != mean.size() || x.size() != variances.size())
    throw std::invalid_argument("gaussian_logpdf_diag: dimension mismatch");
  constexpr double log_two_pi = 1.8378770664093454836;
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(variances[i] > 0.0))
      throw std::invalid_argument("gaussian_logpdf_diag: non-positive variance");
    const double d = x[i] - mean[i];
    acc += d * d / variances[i] + std::log(variances[i]) + log_two_pi;
  }
  return -0.5 * acc;
}

double gaussian_logpdf_iso(std::span<const double> x, std::span<const double> mean,
                           double variance) {
  if (x.size() != mean.size())
    throw std::invalid_argument("gaussian_logpdf_iso: dimension mismatch");
  if (!(variance > 0.0)) throw std::invalid_argument("gaussian_logpdf_iso: non-positive variance");
  constexpr double log_two_pi = 1.8378770664093454836;
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - mean[i];
    ss += d * d;
  }
  const double n = static_cast<double>(x.size());
  return -0.5 * (ss / variance + n * (std::log(variance) + log_two_pi));
}

double gaussian_logpdf_full(std::span<const double> x, std::span<const double> mean,
                            const DenseMatrix& cov) {
  if (x.size() != mean.size() || cov.rows() != x.size())
    throw std::invalid_argument("gaussian_logpdf_full: dimension mismatch");
  constexpr double log_two_pi = 1.8378770664093454836;
  const DenseMatrix l = cholesky(cov);
  const Vec r = sub(x, mean);
  const Vec w = solve_lower(l, r);
  double quad = 0.0, logdet = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    quad += w[i] * w[i];
    logdet += std::log(l(i, i));
  }
  return -0.5 * (quad + static_cast<double>(x.size()) * log_two_pi) - logdet;
}

double gaussian_kl_full(std::span<const double> mu_p, const DenseMatrix& cov_p,
                        std::span<const double> mu_q, const DenseMatrix& cov_q) {
  const std::size_t n = mu_p.size();
  if (mu_q.size() != n || cov_p.rows() != n || cov_q.rows() != n)
    throw std::invalid_argument("gaussian_kl_full: dimension mismatch");
  const DenseMatrix lq = cholesky(cov_q);
  // tr(cov_q^{-1} cov_p)
  double trace = 0.0;
  Vec col(n);
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t r = 0; r < n; ++r) col[r] = cov_p(r, c);
    const Vec s = solve_upper_t(lq, solve_lower(lq, col));
    trace += s[c];
  }
  const Vec d = sub(mu_q, mu_p);
  const Vec w = solve_lower(lq, d);
  double quad = 0.0;
  for (double v : w) quad += v * v;
  const double logdet_q = logdet_spd(cov_q);
  const double logdet_p = logdet_spd(cov_p);
  return 0.5 * (trace + quad - static_cast<double>(n) + logdet_q - logdet_p);
}

}  // namespace spreaddiv
