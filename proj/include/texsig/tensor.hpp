#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "texsig/errors.hpp"

namespace texsig {

// Dense n-dimensional array, row-major (last index fastest).
template <class T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;

  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(checked_numel(shape), T(0));
  }

  Tensor(std::vector<int> s, std::vector<T> d)
      : shape(std::move(s)), data(std::move(d)) {
    if (checked_numel(shape) != data.size())
      throw ShapeError("tensor data size " + std::to_string(data.size()) +
                       " does not match shape product " +
                       std::to_string(checked_numel(shape)));
  }

  static Tensor full(std::vector<int> s, T value) {
    Tensor t(std::move(s));
    for (auto& v : t.data) v = value;
    return t;
  }

  std::size_t numel() const { return data.size(); }

  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }

  static std::size_t checked_numel(const std::vector<int>& s) {
    if (s.empty()) throw ShapeError("tensor shape must not be empty");
    std::size_t n = 1;
    for (int e : s) {
      if (e < 1) throw ShapeError("tensor extent must be >= 1, got " + std::to_string(e));
      n *= static_cast<std::size_t>(e);
    }
    return n;
  }
};

inline std::string shape_str(const std::vector<int>& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

// Gradients of one layer: input gradient plus one tensor per parameter,
// shapes mirroring the forward pass exactly.
template <class T>
struct LayerGrad {
  Tensor<T> d_input;
  std::vector<Tensor<T>> d_params;
};

}  // namespace texsig
