#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace reluhead {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles, rank 1 to 4. Four-dimensional tensors
/// hold batched feature maps in N x C x H x W order.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, double value) { return Tensor(std::move(shape), value); }
  /// Row-major literal: Tensor::matrix({{1, 2}, {3, 4}}).
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor vector(std::initializer_list<double> values);
  static Tensor identity(std::size_t n);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  double* raw() noexcept { return data_.data(); }
  const double* raw() const noexcept { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

  /// Same data, new shape of equal element count.
  Tensor reshaped(Shape shape) const;
  /// Rows `indices` of the leading axis, in the given order.
  Tensor gather_rows(std::span<const std::size_t> indices) const;
  Tensor transposed() const;

  void fill(double value);
  bool all_finite() const;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// xoshiro256** seeded through splitmix64. Gaussian draws use the
/// Box-Muller transform, so sequences depend only on the seed and this
/// code, never on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform();
  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);
  double gaussian();

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  /// Independent generator for a sub-task (fold, layer, ...).
  Rng split(std::uint64_t stream);

 private:
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

enum class Transpose { No, Yes };

/// a[m x k] * b[k x n].
Tensor matmul(const Tensor& a, const Tensor& b);
/// op(a) * op(b) with optional transposition of either operand.
Tensor matmul(const Tensor& a, Transpose ta, const Tensor& b, Transpose tb);

/// Adds bias[j] to column j of an N x K matrix, in place.
void add_row_bias(Tensor& m, const Tensor& bias);
/// Column sums of an N x K matrix.
Tensor column_sums(const Tensor& m);

/// Valid (no padding) 3x3 cross-correlation plus per-filter bias.
/// input N x C x H x W, kernels F x C x 3 x 3, bias F.
Tensor conv2d_valid(const Tensor& input, const Tensor& kernels, const Tensor& bias);

struct Conv2dGrads {
  Tensor input;
  Tensor kernels;
  Tensor bias;
};

Conv2dGrads conv2d_valid_backward(const Tensor& input, const Tensor& kernels,
                                  const Tensor& grad_out);

struct PoolResult {
  Tensor output;
  /// Flat input index of the winning element of each output cell.
  std::vector<std::size_t> argmax;
};

/// 2x2 window, stride 2; trailing odd rows/columns are dropped. Ties go to
/// the lowest flat index.
PoolResult maxpool2x2(const Tensor& input);
Tensor maxpool2x2_backward(const Tensor& grad_out, std::span<const std::size_t> argmax,
                           const Shape& input_shape);

enum class ElementwiseOp { Add, Sub, Mul, Scale, MaxWithScalar };

Tensor elementwise(ElementwiseOp op, const Tensor& a, const Tensor& b);
Tensor elementwise(ElementwiseOp op, const Tensor& a, double scalar);

inline Tensor add(const Tensor& a, const Tensor& b) { return elementwise(ElementwiseOp::Add, a, b); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(ElementwiseOp::Sub, a, b); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(ElementwiseOp::Mul, a, b); }
inline Tensor scale(double s, const Tensor& a) { return elementwise(ElementwiseOp::Scale, a, s); }
inline Tensor max_with_scalar(double s, const Tensor& a) {
  return elementwise(ElementwiseOp::MaxWithScalar, a, s);
}

/// Per-row index of the maximum of an N x K matrix; lowest index on ties.
std::vector<std::size_t> argmax_last(const Tensor& t);

Tensor randn(Shape shape, double stddev, Rng& rng);

}  // namespace reluhead
