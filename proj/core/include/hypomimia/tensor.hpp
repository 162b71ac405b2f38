#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace hypomimia {

/// Dense row-major tensor of 64-bit reals. Value type: copies are deep,
/// shapes are fixed at construction. All reductions run in a fixed
/// sequential order so results are bitwise reproducible across runs.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  static Tensor from_data(std::vector<std::size_t> shape, std::vector<double> data);
  static Tensor scalar(double v);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t ndim() const { return shape_.size(); }
  std::size_t numel() const { return data_.size(); }
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  // 2-D accessors; throw ShapeError on other ranks.
  std::size_t rows() const;
  std::size_t cols() const;
  double& at(std::size_t r, std::size_t c);
  double at(std::size_t r, std::size_t c) const;

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool all_finite() const;
  std::string shape_str() const;

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && data_ == other.data_;
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// Shape helpers.
Tensor reshaped(const Tensor& t, std::vector<std::size_t> shape);
std::string shape_str(std::span<const std::size_t> shape);

// Matrix products. 1-D left operands are treated as a single row and the
// result collapses back to 1-D. Inner-dimension mismatch throws ShapeError
// naming both shapes.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // a * b^T
Tensor matmul_tn(const Tensor& a, const Tensor& b);  // a^T * b
Tensor transpose(const Tensor& a);

// Elementwise arithmetic (shapes must match exactly).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

// Nonlinearities.
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor gelu(const Tensor& x);  // exact erf form
Tensor exp(const Tensor& x);

// Max-subtracted softmax along `axis`.
Tensor softmax(const Tensor& x, std::size_t axis);

// Per-row normalization over the last axis of a 2-D tensor (1-D treated as
// one row): (x - mean) / sqrt(var + eps) * gamma + beta.
Tensor layer_norm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                       double eps = 1e-5);

// Reductions and layout ops.
double sum(const Tensor& x);
double mean(const Tensor& x);
Tensor mean_rows(const Tensor& x);                    // [r x c] -> [c]
Tensor concat_rows(std::span<const Tensor> parts);    // 1-D parts count as rows
Tensor concat_cols(std::span<const Tensor> parts);    // 1-D only if all parts are
Tensor slice_rows(const Tensor& x, std::size_t r0, std::size_t r1);
Tensor slice_cols(const Tensor& x, std::size_t c0, std::size_t c1);
Tensor add_row_broadcast(const Tensor& m, const Tensor& row);

// u . v / (|u| |v|); throws DataError on a zero-norm input.
double cosine_similarity(const Tensor& u, const Tensor& v);

}  // namespace hypomimia
