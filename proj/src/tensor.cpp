#include "ltr/tensor.hpp"

#include <cmath>
#include <numeric>

namespace ltr {

static std::int64_t shape_numel(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int s : shape) {
    if (s <= 0) throw ShapeError("tensor dimension must be positive, got " + shape_str(shape));
    n *= s;
  }
  return n;
}

Tensor Tensor::zeros(std::vector<int> shape) {
  Tensor t;
  std::int64_t n = shape_numel(shape);
  t.shape = std::move(shape);
  t.data.assign(static_cast<std::size_t>(n), 0.0);
  return t;
}

Tensor Tensor::full(std::vector<int> shape, double v) {
  Tensor t = zeros(std::move(shape));
  for (double& x : t.data) x = v;
  return t;
}

Tensor Tensor::scalar(double v) {
  Tensor t;
  t.shape = {1};
  t.data = {v};
  return t;
}

Tensor Tensor::vec(std::vector<double> values) {
  Tensor t;
  t.shape = {static_cast<int>(values.size())};
  t.data = std::move(values);
  return t;
}

Tensor Tensor::mat(int rows, int cols, std::vector<double> values) {
  if (static_cast<std::int64_t>(values.size()) != static_cast<std::int64_t>(rows) * cols)
    throw ShapeError("matrix literal size does not match " + shape_str({rows, cols}));
  Tensor t;
  t.shape = {rows, cols};
  t.data = std::move(values);
  return t;
}

int Tensor::len() const {
  if (rank() != 1) throw ShapeError("expected rank-1 tensor, got " + shape_str(shape));
  return shape[0];
}

int Tensor::rows() const {
  if (rank() != 2) throw ShapeError("expected rank-2 tensor, got " + shape_str(shape));
  return shape[0];
}

int Tensor::cols() const {
  if (rank() != 2) throw ShapeError("expected rank-2 tensor, got " + shape_str(shape));
  return shape[1];
}

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string shape_str(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  s += "]";
  return s;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape) + " vs " +
                     shape_str(b.shape));
}

}  // namespace ltr
