#include "spreaddiv/tape.hpp"

#include <cmath>
#include <stdexcept>

#include "spreaddiv/linalg.hpp"

namespace spreaddiv {

std::size_t TapeValue::size() const { return tape->value_of(id).size(); }
const Vec& TapeValue::value() const { return tape->value_of(id); }
const Vec& TapeValue::grad() const { return tape->grad_of(id); }
double TapeValue::scalar() const {
  const Vec& v = tape->value_of(id);
  if (v.size() != 1) throw std::invalid_argument("TapeValue::scalar: node is not scalar");
  return v[0];
}

int Tape::push(Node n) {
  n.grad.assign(n.val.size(), 0.0);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

void Tape::check_same_size(const Node& a, const Node& b, const char* who) {
  if (a.val.size() != b.val.size())
    throw std::invalid_argument(std::string(who) + ": size mismatch");
}

TapeValue Tape::leaf(std::span<const double> v, std::size_t rows, std::size_t cols) {
  Node n;
  n.op = Op::Leaf;
  n.val.assign(v.begin(), v.end());
  n.rows = rows;
  n.cols = cols;
  return wrap(push(std::move(n)));
}

TapeValue Tape::constant(std::span<const double> v, std::size_t rows, std::size_t cols) {
  Node n;
  n.op = Op::Const;
  n.val.assign(v.begin(), v.end());
  n.rows = rows;
  n.cols = cols;
  return wrap(push(std::move(n)));
}

TapeValue Tape::constant_scalar(double v) {
  return constant(std::span<const double>(&v, 1));
}

TapeValue Tape::affine(TapeValue w, TapeValue x, TapeValue b) {
  const Node& wn = nodes_[w.id];
  const Node& xn = nodes_[x.id];
  if (wn.rows == 0 || wn.cols == 0)
    throw std::invalid_argument("affine: W is not a matrix node");
  if (wn.cols != xn.val.size()) throw std::invalid_argument("affine: W/x mismatch");
  Node n;
  n.op = Op::Affine;
  n.a = w.id;
  n.b = x.id;
  n.c = b.id;
  n.val.assign(wn.rows, 0.0);
  for (std::size_t r = 0; r < wn.rows; ++r) {
    double acc = 0.0;
    const double* row = wn.val.data() + r * wn.cols;
    for (std::size_t c = 0; c < wn.cols; ++c) acc += row[c] * xn.val[c];
    n.val[r] = acc;
  }
  if (b.id >= 0) {
    const Node& bn = nodes_[b.id];
    if (bn.val.size() != wn.rows) throw std::invalid_argument("affine: bias size mismatch");
    for (std::size_t r = 0; r < wn.rows; ++r) n.val[r] += bn.val[r];
  }
  return wrap(push(std::move(n)));
}

TapeValue Tape::matvec(TapeValue w, TapeValue x) { return affine(w, x, TapeValue{this, -1}); }

TapeValue Tape::matvec_t(TapeValue w, TapeValue x) {
  const Node& wn = nodes_[w.id];
  const Node& xn = nodes_[x.id];
  if (wn.rows == 0 || wn.cols == 0)
    throw std::invalid_argument("matvec_t: W is not a matrix node");
  if (wn.rows != xn.val.size()) throw std::invalid_argument("matvec_t: W/x mismatch");
  Node n;
  n.op = Op::MatVecT;
  n.a = w.id;
  n.b = x.id;
  n.val.assign(wn.cols, 0.0);
  for (std::size_t r = 0; r < wn.rows; ++r) {
    const double xr = xn.val[r];
    const double* row = wn.val.data() + r * wn.cols;
    for (std::size_t c = 0; c < wn.cols; ++c) n.val[c] += row[c] * xr;
  }
  return wrap(push(std::move(n)));
}

TapeValue Tape::add(TapeValue a, TapeValue b) {
  check_same_size(nodes_[a.id], nodes_[b.id], "add");
  Node n;
  n.op = Op::Add;
  n.a = a.id;
  n.b = b.id;
  n.rows = nodes_[a.id].rows;
  n.cols = nodes_[a.id].cols;
  n.val = nodes_[a.id].val;
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] += nodes_[b.id].val[i];
  return wrap(push(std::move(n)));
}

TapeValue Tape::sub(TapeValue a, TapeValue b) {
  check_same_size(nodes_[a.id], nodes_[b.id], "sub");
  Node n;
  n.op = Op::Sub;
  n.a = a.id;
  n.b = b.id;
  n.rows = nodes_[a.id].rows;
  n.cols = nodes_[a.id].cols;
  n.val = nodes_[a.id].val;
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] -= nodes_[b.id].val[i];
  return wrap(push(std::move(n)));
}

TapeValue Tape::mul(TapeValue a, TapeValue b) {
  check_same_size(nodes_[a.id], nodes_[b.id], "mul");
  Node n;
  n.op = Op::Mul;
  n.a = a.id;
  n.b = b.id;
  n.rows = nodes_[a.id].rows;
  n.cols = nodes_[a.id].cols;
  n.val = nodes_[a.id].val;
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] *= nodes_[b.id].val[i];
  return wrap(push(std::move(n)));
}

TapeValue Tape::scale(TapeValue a, double s) {
  Node n;
  n.op = Op::Scale;
  n.a = a.id;
  n.k = s;
  n.rows = nodes_[a.id].rows;
  n.cols = nodes_[a.id].cols;
  n.val = nodes_[a.id].val;
  for (double& v : n.val) v *= s;
  return wrap(push(std::move(n)));
}

TapeValue Tape::add_const(TapeValue a, double c) {
  Node n;
  n.op = Op::AddC;
  n.a = a.id;
  n.k = c;
  n.rows = nodes_[a.id].rows;
  n.cols = nodes_[a.id].cols;
  n.val = nodes_[a.id].val;
  for (double& v : n.val) v += c;
  return wrap(push(std::move(n)));
}

#define SPREADDIV_UNARY(NAME, OP, FWD)                 \
  TapeValue Tape::NAME(TapeValue a) {                  \
    Node n;                                            \
    n.op = Op::OP;                                     \
    n.a = a.id;                                        \
    n.rows = nodes_[a.id].rows;                        \
    n.cols = nodes_[a.id].cols;                        \
    n.val = nodes_[a.id].val;                          \
    for (double& v : n.val) v = FWD;                   \
    return wrap(push(std::move(n)));                   \
  }

SPREADDIV_UNARY(tanh, Tanh, std::tanh(v))
SPREADDIV_UNARY(relu, Relu, v > 0.0 ? v : 0.0)
SPREADDIV_UNARY(exp, Exp, std::exp(v))
SPREADDIV_UNARY(log, Log, std::log(v))
SPREADDIV_UNARY(square, Square, v* v)
#undef SPREADDIV_UNARY

TapeValue Tape::softplus(TapeValue a) {
  Node n;
  n.op = Op::Softplus;
  n.a = a.id;
  n.rows = nodes_[a.id].rows;
  n.cols = nodes_[a.id].cols;
  n.val = nodes_[a.id].val;
  for (double& v : n.val)
    v = v > 30.0 ? v : (v < -30.0 ? std::exp(v) : std::log1p(std::exp(v)));
  return wrap(push(std::move(n)));
}

TapeValue Tape::sum(TapeValue a) {
  Node n;
  n.op = Op::Sum;
  n.a = a.id;
  double acc = 0.0;
  for (double v : nodes_[a.id].val) acc += v;
  n.val = {acc};
  return wrap(push(std::move(n)));
}

TapeValue Tape::dot(TapeValue a, TapeValue b) {
  check_same_size(nodes_[a.id], nodes_[b.id], "dot");
  Node n;
  n.op = Op::Dot;
  n.a = a.id;
  n.b = b.id;
  double acc = 0.0;
  for (std::size_t i = 0; i < nodes_[a.id].val.size(); ++i)
    acc += nodes_[a.id].val[i] * nodes_[b.id].val[i];
  n.val = {acc};
  return wrap(push(std::move(n)));
}

TapeValue Tape::gram(TapeValue w) {
  const Node& wn = nodes_[w.id];
  if (wn.rows == 0 || wn.cols == 0) throw std::invalid_argument("gram: not a matrix node");
  Node n;
  n.op = Op::Gram;
  n.a = w.id;
  n.rows = wn.cols;
  n.cols = wn.cols;
  n.val.assign(wn.cols * wn.cols, 0.0);
  for (std::size_t r = 0; r < wn.rows; ++r) {
    const double* row = wn.val.data() + r * wn.cols;
    for (std::size_t i = 0; i < wn.cols; ++i)
      for (std::size_t j = 0; j < wn.cols; ++j) n.val[i * wn.cols + j] += row[i] * row[j];
  }
  return wrap(push(std::move(n)));
}

TapeValue Tape::add_scaled_identity(TapeValue m, double c) {
  const Node& mn = nodes_[m.id];
  if (mn.rows == 0 || mn.rows != mn.cols)
    throw std::invalid_argument("add_scaled_identity: not a square matrix node");
  Node n;
  n.op = Op::AddSI;
  n.a = m.id;
  n.k = c;
  n.rows = mn.rows;
  n.cols = mn.cols;
  n.val = mn.val;
  for (std::size_t i = 0; i < mn.rows; ++i) n.val[i * mn.cols + i] += c;
  return wrap(push(std::move(n)));
}

namespace {

DenseMatrix node_matrix(const Vec& flat, std::size_t rows, std::size_t cols) {
  return DenseMatrix(rows, cols, flat);
}

}  // namespace

TapeValue Tape::solve_sym(TapeValue m, TapeValue v) {
  const Node& mn = nodes_[m.id];
  const Node& vn = nodes_[v.id];
  if (mn.rows == 0 || mn.rows != mn.cols)
    throw std::invalid_argument("solve_sym: not a square matrix node");
  if (vn.val.size() != mn.rows) throw std::invalid_argument("solve_sym: size mismatch");
  const DenseMatrix l = cholesky(node_matrix(mn.val, mn.rows, mn.cols));
  Node n;
  n.op = Op::SolveSym;
  n.a = m.id;
  n.b = v.id;
  n.val = solve_upper_t(l, solve_lower(l, vn.val));
  n.aux = l.entries();
  n.rows = mn.rows;
  return wrap(push(std::move(n)));
}

TapeValue Tape::logdet_sym(TapeValue m) {
  const Node& mn = nodes_[m.id];
  if (mn.rows == 0 || mn.rows != mn.cols)
    throw std::invalid_argument("logdet_sym: not a square matrix node");
  const DenseMatrix l = cholesky(node_matrix(mn.val, mn.rows, mn.cols));
  double acc = 0.0;
  for (std::size_t i = 0; i < mn.rows; ++i) acc += std::log(l(i, i));
  Node n;
  n.op = Op::LogdetSym;
  n.a = m.id;
  n.val = {2.0 * acc};
  n.aux = l.entries();
  n.rows = mn.rows;
  return wrap(push(std::move(n)));
}

TapeValue Tape::logsumexp2(TapeValue a, TapeValue b) {
  if (nodes_[a.id].val.size() != 1 || nodes_[b.id].val.size() != 1)
    throw std::invalid_argument("logsumexp2: scalar nodes required");
  // log(e^a + e^b) = a + softplus(b - a); pick the larger as anchor for stability.
  if (nodes_[a.id].val[0] >= nodes_[b.id].val[0])
    return add(a, softplus(sub(b, a)));
  return add(b, softplus(sub(a, b)));
}

void Tape::backward(TapeValue root) {
  if (root.tape != this) throw std::invalid_argument("backward: foreign node");
  Node& rn = nodes_[root.id];
  if (rn.val.size() != 1) throw std::invalid_argument("backward: root is not scalar");
  for (Node& n : nodes_) n.grad.assign(n.grad.size(), 0.0);
  rn.grad[0] = 1.0;

  for (int idx = root.id; idx >= 0; --idx) {
    Node& n = nodes_[idx];
    bool any = false;
    for (double g : n.grad)
      if (g != 0.0) {
        any = true;
        break;
      }
    if (!any) continue;
    switch (n.op) {
      case Op::Leaf:
      case Op::Const:
        break;
      case Op::Affine: {
        Node& wn = nodes_[n.a];
        Node& xn = nodes_[n.b];
        const bool w_needs = wn.op != Op::Const;
        const bool x_needs = xn.op != Op::Const;
        for (std::size_t r = 0; r < wn.rows; ++r) {
          const double g = n.grad[r];
          if (g == 0.0) continue;
          const double* wrow = wn.val.data() + r * wn.cols;
          double* gwrow = wn.grad.data() + r * wn.cols;
          for (std::size_t c = 0; c < wn.cols; ++c) {
            if (w_needs) gwrow[c] += g * xn.val[c];
            if (x_needs) xn.grad[c] += g * wrow[c];
          }
        }
        if (n.c >= 0) {
          Node& bn = nodes_[n.c];
          if (bn.op != Op::Const)
            for (std::size_t r = 0; r < bn.grad.size(); ++r) bn.grad[r] += n.grad[r];
        }
        break;
      }
      case Op::MatVecT: {
        Node& wn = nodes_[n.a];
        Node& xn = nodes_[n.b];
        for (std::size_t r = 0; r < wn.rows; ++r) {
          const double xr = xn.val[r];
          const double* wrow = wn.val.data() + r * wn.cols;
          double* gwrow = wn.grad.data() + r * wn.cols;
          double acc = 0.0;
          for (std::size_t c = 0; c < wn.cols; ++c) {
            const double g = n.grad[c];
            gwrow[c] += xr * g;
            acc += wrow[c] * g;
          }
          xn.grad[r] += acc;
        }
        break;
      }
      case Op::Add:
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
          nodes_[n.a].grad[i] += n.grad[i];
          nodes_[n.b].grad[i] += n.grad[i];
        }
        break;
      case Op::Sub:
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
          nodes_[n.a].grad[i] += n.grad[i];
          nodes_[n.b].grad[i] -= n.grad[i];
        }
        break;
      case Op::Mul:
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
          nodes_[n.a].grad[i] += n.grad[i] * nodes_[n.b].val[i];
          nodes_[n.b].grad[i] += n.grad[i] * nodes_[n.a].val[i];
        }
        break;
      case Op::Scale:
        for (std::size_t i = 0; i < n.grad.size(); ++i) nodes_[n.a].grad[i] += n.k * n.grad[i];
        break;
      case Op::AddC:
        for (std::size_t i = 0; i < n.grad.size(); ++i) nodes_[n.a].grad[i] += n.grad[i];
        break;
      case Op::Tanh:
        for (std::size_t i = 0; i < n.grad.size(); ++i)
          nodes_[n.a].grad[i] += n.grad[i] * (1.0 - n.val[i] * n.val[i]);
        break;
      case Op::Relu:
        for (std::size_t i = 0; i < n.grad.size(); ++i)
          if (nodes_[n.a].val[i] > 0.0) nodes_[n.a].grad[i] += n.grad[i];
        break;
      case Op::Exp:
        for (std::size_t i = 0; i < n.grad.size(); ++i)
          nodes_[n.a].grad[i] += n.grad[i] * n.val[i];
        break;
      case Op::Log:
        for (std::size_t i = 0; i < n.grad.size(); ++i)
          nodes_[n.a].grad[i] += n.grad[i] / nodes_[n.a].val[i];
        break;
      case Op::Softplus:
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
          const double x = nodes_[n.a].val[i];
          const double sig = x > 0.0 ? 1.0 / (1.0 + std::exp(-x))
                                     : std::exp(x) / (1.0 + std::exp(x));
          nodes_[n.a].grad[i] += n.grad[i] * sig;
        }
        break;
      case Op::Square:
        for (std::size_t i = 0; i < n.grad.size(); ++i)
          nodes_[n.a].grad[i] += 2.0 * n.grad[i] * nodes_[n.a].val[i];
        break;
      case Op::Sum:
        for (double& g : nodes_[n.a].grad) g += n.grad[0];
        break;
      case Op::Dot:
        for (std::size_t i = 0; i < nodes_[n.a].grad.size(); ++i) {
          nodes_[n.a].grad[i] += n.grad[0] * nodes_[n.b].val[i];
          nodes_[n.b].grad[i] += n.grad[0] * nodes_[n.a].val[i];
        }
        break;
      case Op::Gram: {
        // G = W^T W  =>  dL/dW = W (Gbar + Gbar^T)
        Node& wn = nodes_[n.a];
        const std::size_t k = n.rows;
        for (std::size_t r = 0; r < wn.rows; ++r) {
          const double* wrow = wn.val.data() + r * wn.cols;
          double* gwrow = wn.grad.data() + r * wn.cols;
          for (std::size_t j = 0; j < k; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < k; ++i)
              acc += wrow[i] * (n.grad[i * k + j] + n.grad[j * k + i]);
            gwrow[j] += acc;
          }
        }
        break;
      }
      case Op::AddSI:
        for (std::size_t i = 0; i < n.grad.size(); ++i) nodes_[n.a].grad[i] += n.grad[i];
        break;
      case Op::SolveSym: {
        // w = M^{-1} v: vbar += M^{-1} wbar ; Mbar -= (M^{-1} wbar) w^T
        Node& mn = nodes_[n.a];
        Node& vn = nodes_[n.b];
        const std::size_t k = n.rows;
        const DenseMatrix l(k, k, n.aux);
        const Vec t = solve_upper_t(l, solve_lower(l, n.grad));
        for (std::size_t i = 0; i < k; ++i) {
          vn.grad[i] += t[i];
          for (std::size_t j = 0; j < k; ++j) mn.grad[i * k + j] -= t[i] * n.val[j];
        }
        break;
      }
      case Op::LogdetSym: {
        // d logdet M = tr(M^{-1} dM)
        Node& mn = nodes_[n.a];
        const std::size_t k = n.rows;
        const DenseMatrix l(k, k, n.aux);
        Vec e(k, 0.0);
        for (std::size_t c = 0; c < k; ++c) {
          e.assign(k, 0.0);
          e[c] = 1.0;
          const Vec col = solve_upper_t(l, solve_lower(l, e));
          for (std::size_t r = 0; r < k; ++r) mn.grad[r * k + c] += n.grad[0] * col[r];
        }
        break;
      }
    }
  }
}

}  // namespace spreaddiv
