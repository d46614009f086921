#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "spreaddiv/matrix.hpp"

namespace spreaddiv {

class Tape;

/// Handle to a node on a Tape. Nodes hold flat double vectors; matrix-valued
/// nodes additionally carry (rows, cols) so affine/gram/solve ops can check
/// shapes. Values are fixed at construction (forward runs eagerly); gradient
/// slots are filled by Tape::backward.
struct TapeValue {
  Tape* tape = nullptr;
  int id = -1;

  std::size_t size() const;
  const Vec& value() const;
  const Vec& grad() const;
  double scalar() const;
};

/// Reverse-mode tape over vector/matrix values. The op set is deliberately
/// small: affine maps, elementwise tanh/relu/exp/log/softplus/square,
/// add/sub/mul, sum/dot, and the R x R symmetric helpers (gram, solve,
/// logdet) needed for low-rank Gaussian terms. A tape is confined to one
/// thread; build a fresh tape per evaluation.
class Tape {
 public:
  TapeValue leaf(std::span<const double> v, std::size_t rows = 0, std::size_t cols = 0);
  TapeValue constant(std::span<const double> v, std::size_t rows = 0, std::size_t cols = 0);
  TapeValue constant_scalar(double v);

  // y = W x + b with W a (rows x cols) matrix node; b may be absent.
  TapeValue affine(TapeValue w, TapeValue x, TapeValue b);
  TapeValue matvec(TapeValue w, TapeValue x);
  TapeValue matvec_t(TapeValue w, TapeValue x);  // y = W^T x

  TapeValue add(TapeValue a, TapeValue b);
  TapeValue sub(TapeValue a, TapeValue b);
  TapeValue mul(TapeValue a, TapeValue b);  // elementwise
  TapeValue scale(TapeValue a, double s);
  TapeValue add_const(TapeValue a, double c);

  TapeValue tanh(TapeValue a);
  TapeValue relu(TapeValue a);
  TapeValue exp(TapeValue a);
  TapeValue log(TapeValue a);
  TapeValue softplus(TapeValue a);
  TapeValue square(TapeValue a);
  TapeValue neg(TapeValue a) { return scale(a, -1.0); }
  TapeValue abs(TapeValue a) { return add(relu(a), relu(neg(a))); }

  TapeValue sum(TapeValue a);                // -> scalar
  TapeValue dot(TapeValue a, TapeValue b);   // -> scalar

  // Symmetric small-matrix helpers (forward factorises once).
  TapeValue gram(TapeValue w);                         // W^T W
  TapeValue add_scaled_identity(TapeValue m, double c);  // M + c I
  TapeValue solve_sym(TapeValue m, TapeValue v);        // M^{-1} v, M SPD
  TapeValue logdet_sym(TapeValue m);                    // scalar, M SPD

  // log(exp(a) + exp(b)) for scalars, built from softplus.
  TapeValue logsumexp2(TapeValue a, TapeValue b);

  /// Accumulate d(root)/d(leaf) into every leaf's gradient slot.
  /// root must be scalar (size 1); throws std::invalid_argument otherwise.
  void backward(TapeValue root);

  std::size_t num_nodes() const { return nodes_.size(); }
  const Vec& value_of(int id) const { return nodes_[id].val; }
  const Vec& grad_of(int id) const { return nodes_[id].grad; }

 private:
  enum class Op {
    Leaf, Const, Affine, MatVecT, Add, Sub, Mul, Scale, AddC,
    Tanh, Relu, Exp, Log, Softplus, Square, Sum, Dot, Gram, AddSI,
    SolveSym, LogdetSym,
  };

  struct Node {
    Op op;
    int a = -1, b = -1, c = -1;
    double k = 0.0;
    std::size_t rows = 0, cols = 0;
    Vec val;
    Vec grad;
    Vec aux;  // Cholesky factor for SolveSym/LogdetSym
  };

  friend struct TapeValue;

  int push(Node n);
  TapeValue wrap(int id) { return TapeValue{this, id}; }
  static void check_same_size(const Node& a, const Node& b, const char* who);

  std::vector<Node> nodes_;
};

}  // namespace spreaddiv
