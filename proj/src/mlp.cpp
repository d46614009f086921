#include "spreaddiv/mlp.hpp"

#include <stdexcept>

namespace spreaddiv {

int ParamStore::add(std::string name, std::size_t rows, std::size_t cols, Vec init) {
  const std::size_t want = cols == 0 ? rows : rows * cols;
  if (init.size() != want) throw std::invalid_argument("ParamStore::add: init size mismatch");
  tensors_.push_back(Tensor{std::move(name), rows, cols, std::move(init)});
  return static_cast<int>(tensors_.size()) - 1;
}

int ParamStore::add_random(std::string name, std::size_t rows, std::size_t cols, Rng& rng,
                           double scale) {
  const std::size_t n = cols == 0 ? rows : rows * cols;
  Vec init(n);
  for (double& v : init) v = rng.uniform_in(-scale, scale);
  return add(std::move(name), rows, cols, std::move(init));
}

std::size_t ParamStore::total_params() const {
  std::size_t n = 0;
  for (const Tensor& t : tensors_) n += t.size();
  return n;
}

double ParamStore::get_flat(std::size_t i) const {
  for (const Tensor& t : tensors_) {
    if (i < t.size()) return t.value[i];
    i -= t.size();
  }
  throw std::out_of_range("ParamStore::get_flat");
}

void ParamStore::set_flat(std::size_t i, double v) {
  for (Tensor& t : tensors_) {
    if (i < t.size()) {
      t.value[i] = v;
      return;
    }
    i -= t.size();
  }
  throw std::out_of_range("ParamStore::set_flat");
}

Vec ParamStore::snapshot() const {
  Vec flat;
  flat.reserve(total_params());
  for (const Tensor& t : tensors_) flat.insert(flat.end(), t.value.begin(), t.value.end());
  return flat;
}

void ParamStore::restore(const Vec& flat) {
  if (flat.size() != total_params()) throw std::invalid_argument("ParamStore::restore: size");
  std::size_t off = 0;
  for (Tensor& t : tensors_) {
    std::copy(flat.begin() + off, flat.begin() + off + t.size(), t.value.begin());
    off += t.size();
  }
}

TapeBinding bind_params(Tape& tape, const ParamStore& store) {
  TapeBinding out;
  out.leaves.reserve(store.count());
  for (std::size_t i = 0; i < store.count(); ++i) {
    const Tensor& t = store.at(static_cast<int>(i));
    out.leaves.push_back(tape.leaf(t.value, t.cols == 0 ? 0 : t.rows, t.cols));
  }
  return out;
}

MlpLayout add_mlp(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out,
                  std::span<const std::size_t> hidden, Rng& rng, double init_scale) {
  MlpLayout net;
  net.widths.push_back(in);
  for (std::size_t h : hidden) net.widths.push_back(h);
  net.widths.push_back(out);
  for (std::size_t layer = 0; layer + 1 < net.widths.size(); ++layer) {
    const std::size_t rows = net.widths[layer + 1];
    const std::size_t cols = net.widths[layer];
    net.weights.push_back(store.add_random(prefix + ".w" + std::to_string(layer), rows, cols, rng,
                                           init_scale));
    net.biases.push_back(store.add(prefix + ".b" + std::to_string(layer), rows, 0, Vec(rows, 0.0)));
  }
  return net;
}

TapeValue mlp_forward(Tape& tape, const TapeBinding& bind, const MlpLayout& net,
                      TapeValue input) {
  TapeValue h = input;
  const std::size_t layers = net.weights.size();
  for (std::size_t l = 0; l < layers; ++l) {
    h = tape.affine(bind[net.weights[l]], h, bind[net.biases[l]]);
    if (l + 1 < layers) h = tape.tanh(h);
  }
  return h;
}

}  // namespace spreaddiv
