#pragma once

#include <string>

#include "spreaddiv/rng.hpp"
#include "spreaddiv/tape.hpp"

namespace spreaddiv {

/// Named parameter tensor; cols == 0 marks a plain vector.
struct Tensor {
  std::string name;
  std::size_t rows = 0, cols = 0;
  Vec value;

  std::size_t size() const { return value.size(); }
};

/// Flat bag of parameter tensors shared by a model. Supports flat indexing so
/// finite-difference checks can perturb single coordinates.
class ParamStore {
 public:
  int add(std::string name, std::size_t rows, std::size_t cols, Vec init);
  int add_random(std::string name, std::size_t rows, std::size_t cols, Rng& rng, double scale);

  Tensor& at(int id) { return tensors_[id]; }
  const Tensor& at(int id) const { return tensors_[id]; }
  std::size_t count() const { return tensors_.size(); }

  std::size_t total_params() const;
  double get_flat(std::size_t i) const;
  void set_flat(std::size_t i, double v);
  Vec snapshot() const;
  void restore(const Vec& flat);

 private:
  std::vector<Tensor> tensors_;
};

/// Per-evaluation binding of every tensor in a store to leaves on a tape.
struct TapeBinding {
  std::vector<TapeValue> leaves;

  TapeValue operator[](int id) const { return leaves[id]; }
};

TapeBinding bind_params(Tape& tape, const ParamStore& store);

/// Feed-forward net with tanh hidden layers and a linear output layer.
struct MlpLayout {
  std::vector<int> weights;  // tensor ids, one per layer
  std::vector<int> biases;
  std::vector<std::size_t> widths;  // in, hidden..., out
};

MlpLayout add_mlp(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out,
                  std::span<const std::size_t> hidden, Rng& rng, double init_scale = 0.3);

TapeValue mlp_forward(Tape& tape, const TapeBinding& bind, const MlpLayout& net, TapeValue input);

}  // namespace spreaddiv
