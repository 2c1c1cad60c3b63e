#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ltr/error.hpp"

namespace ltr {

// Dense row-major tensor of doubles, rank 1 or 2. Scalars are rank-1
// tensors of length 1.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;

  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, double v);
  static Tensor scalar(double v);
  static Tensor vec(std::vector<double> values);
  static Tensor mat(int rows, int cols, std::vector<double> values);

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  bool empty() const { return data.empty(); }

  int len() const;   // rank-1 length
  int rows() const;  // rank-2 only
  int cols() const;  // rank-2 only

  double& operator[](std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
  double operator[](std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }
  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols() + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols() + c]; }

  double* row_ptr(int r) { return data.data() + static_cast<std::size_t>(r) * cols(); }
  const double* row_ptr(int r) const { return data.data() + static_cast<std::size_t>(r) * cols(); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;
};

std::string shape_str(const std::vector<int>& shape);

// Throws ShapeError naming both shapes when they differ.
void require_same_shape(const Tensor& a, const Tensor& b, const char* op);

}  // namespace ltr
