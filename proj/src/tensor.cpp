#include "reluhead/tensor.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "reluhead/error.hpp"

namespace reluhead {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "x" : "") << shape[i];
  out << ')';
  return out.str();
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty() || shape.size() > 4)
    throw ShapeError("tensor rank must be 1-4, got " + std::to_string(shape.size()));
  for (std::size_t d : shape)
    if (d == 0) throw ShapeError("tensor dimensions must be positive: " + shape_string(shape));
}

// Row-major dgemm on raw buffers: C = op(A) * op(B) + beta * C.
void gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, const double* a,
          const double* b, double* c, double beta) {
  static const bool single_threaded = [] {
    // Fixed summation order regardless of core count.
    openblas_set_num_threads(1);
    return true;
  }();
  (void)single_threaded;
  const auto lda = static_cast<blasint>(ta ? m : k);
  const auto ldb = static_cast<blasint>(tb ? k : n);
  cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans,
              static_cast<blasint>(m), static_cast<blasint>(n), static_cast<blasint>(k), 1.0, a,
              lda, b, ldb, beta, c, static_cast<blasint>(n));
}

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank)
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(t.shape()));
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (data_.size() != shape_size(shape_))
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                     shape_string(shape_));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  std::vector<double> data;
  const std::size_t cols = rows.size() ? rows.begin()->size() : 0;
  for (const auto& row : rows) {
    if (row.size() != cols) throw ShapeError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({rows.size(), cols}, std::move(data));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size())
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_string(shape_));
  return shape_[axis];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size())
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  return Tensor(std::move(shape), data_);
}

Tensor Tensor::gather_rows(std::span<const std::size_t> indices) const {
  const std::size_t row = data_.size() / shape_[0];
  Shape shape = shape_;
  shape[0] = indices.size();
  std::vector<double> out(indices.size() * row);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= shape_[0]) throw ShapeError("row index out of range");
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(indices[i] * row), row,
                out.begin() + static_cast<std::ptrdiff_t>(i * row));
  }
  return Tensor(std::move(shape), std::move(out));
}

Tensor Tensor::transposed() const {
  require_rank(*this, 2, "transpose");
  Tensor out({shape_[1], shape_[0]});
  for (std::size_t r = 0; r < shape_[0]; ++r)
    for (std::size_t c = 0; c < shape_[1]; ++c) out.at(c, r) = at(r, c);
  return out;
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------------------
// Rng

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) {
  std::uint64_t x = seed;
  for (auto& s : s_) s = splitmix64(x);
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::below(std::uint64_t bound) {
  // Lemire's rejection keeps the draw unbiased.
  std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t r = next_u64();
    if (r >= threshold) return r % bound;
  }
}

double Rng::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

Rng Rng::split(std::uint64_t stream) {
  std::uint64_t x = next_u64() ^ (stream * 0xD1B54A32D192ED03ULL);
  return Rng(splitmix64(x));
}

// ---------------------------------------------------------------------------
// Linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
  return matmul(a, Transpose::No, b, Transpose::No);
}

Tensor matmul(const Tensor& a, Transpose ta, const Tensor& b, Transpose tb) {
  require_rank(a, 2, "matmul lhs");
  require_rank(b, 2, "matmul rhs");
  const bool at = ta == Transpose::Yes;
  const bool bt = tb == Transpose::Yes;
  const std::size_t m = at ? a.dim(1) : a.dim(0);
  const std::size_t k = at ? a.dim(0) : a.dim(1);
  const std::size_t kb = bt ? b.dim(1) : b.dim(0);
  const std::size_t n = bt ? b.dim(0) : b.dim(1);
  if (k != kb)
    throw ShapeError("matmul inner dimensions disagree: " + shape_string(a.shape()) + " * " +
                     shape_string(b.shape()));
  Tensor c({m, n});
  gemm(at, bt, m, n, k, a.raw(), b.raw(), c.raw(), 0.0);
  return c;
}

void add_row_bias(Tensor& m, const Tensor& bias) {
  require_rank(m, 2, "bias add");
  if (bias.size() != m.dim(1)) throw ShapeError("bias length does not match column count");
  const std::size_t cols = m.dim(1);
  for (std::size_t r = 0; r < m.dim(0); ++r)
    for (std::size_t c = 0; c < cols; ++c) m.at(r, c) += bias[c];
}

Tensor column_sums(const Tensor& m) {
  require_rank(m, 2, "column sums");
  Tensor out({m.dim(1)});
  for (std::size_t r = 0; r < m.dim(0); ++r)
    for (std::size_t c = 0; c < m.dim(1); ++c) out[c] += m.at(r, c);
  return out;
}

// ---------------------------------------------------------------------------
// Convolution (im2col + gemm)

namespace {

struct ConvGeometry {
  std::size_t n, c, h, w, f, ho, wo;
  std::size_t patch() const { return c * 9; }
  std::size_t positions() const { return ho * wo; }
};

ConvGeometry conv_geometry(const Tensor& input, const Tensor& kernels) {
  require_rank(input, 4, "conv2d input");
  require_rank(kernels, 4, "conv2d kernels");
  const auto& is = input.shape();
  const auto& ks = kernels.shape();
  if (ks[2] != 3 || ks[3] != 3) throw ShapeError("conv2d kernels must be 3x3");
  if (ks[1] != is[1])
    throw ShapeError("conv2d channel mismatch: input " + shape_string(is) + ", kernels " +
                     shape_string(ks));
  if (is[2] < 3 || is[3] < 3) throw ShapeError("conv2d input smaller than 3x3");
  return {is[0], is[1], is[2], is[3], ks[0], is[2] - 2, is[3] - 2};
}

// Row (n, y, x), column (c, ky, kx).
std::vector<double> im2col(const Tensor& input, const ConvGeometry& g) {
  std::vector<double> cols(g.n * g.positions() * g.patch());
  const double* in = input.raw();
  double* out = cols.data();
  for (std::size_t n = 0; n < g.n; ++n)
    for (std::size_t y = 0; y < g.ho; ++y)
      for (std::size_t x = 0; x < g.wo; ++x)
        for (std::size_t c = 0; c < g.c; ++c) {
          const double* base = in + ((n * g.c + c) * g.h + y) * g.w + x;
          for (std::size_t ky = 0; ky < 3; ++ky)
            for (std::size_t kx = 0; kx < 3; ++kx) *out++ = base[ky * g.w + kx];
        }
  return cols;
}

}  // namespace

Tensor conv2d_valid(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
  const ConvGeometry g = conv_geometry(input, kernels);
  if (bias.size() != g.f) throw ShapeError("conv2d bias length does not match filter count");
  const std::vector<double> cols = im2col(input, g);
  const std::size_t rows = g.n * g.positions();
  std::vector<double> prod(rows * g.f);
  gemm(false, true, rows, g.f, g.patch(), cols.data(), kernels.raw(), prod.data(), 0.0);

  Tensor out({g.n, g.f, g.ho, g.wo});
  double* o = out.raw();
  for (std::size_t n = 0; n < g.n; ++n)
    for (std::size_t p = 0; p < g.positions(); ++p) {
      const double* row = &prod[(n * g.positions() + p) * g.f];
      for (std::size_t f = 0; f < g.f; ++f) o[(n * g.f + f) * g.positions() + p] = row[f] + bias[f];
    }
  return out;
}

Conv2dGrads conv2d_valid_backward(const Tensor& input, const Tensor& kernels,
                                  const Tensor& grad_out) {
  const ConvGeometry g = conv_geometry(input, kernels);
  if (grad_out.shape() != Shape{g.n, g.f, g.ho, g.wo})
    throw ShapeError("conv2d upstream gradient has shape " + shape_string(grad_out.shape()));
  const std::size_t rows = g.n * g.positions();

  std::vector<double> grad_rows(rows * g.f);
  const double* go = grad_out.raw();
  for (std::size_t n = 0; n < g.n; ++n)
    for (std::size_t f = 0; f < g.f; ++f)
      for (std::size_t p = 0; p < g.positions(); ++p)
        grad_rows[(n * g.positions() + p) * g.f + f] = go[(n * g.f + f) * g.positions() + p];

  Conv2dGrads grads{Tensor(input.shape()), Tensor(kernels.shape()), Tensor({g.f})};
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t f = 0; f < g.f; ++f) grads.bias[f] += grad_rows[r * g.f + f];

  const std::vector<double> cols = im2col(input, g);
  gemm(true, false, g.f, g.patch(), rows, grad_rows.data(), cols.data(), grads.kernels.raw(), 0.0);

  std::vector<double> grad_cols(rows * g.patch());
  gemm(false, false, rows, g.patch(), g.f, grad_rows.data(), kernels.raw(), grad_cols.data(), 0.0);

  double* gi = grads.input.raw();
  const double* gc = grad_cols.data();
  for (std::size_t n = 0; n < g.n; ++n)
    for (std::size_t y = 0; y < g.ho; ++y)
      for (std::size_t x = 0; x < g.wo; ++x)
        for (std::size_t c = 0; c < g.c; ++c) {
          double* base = gi + ((n * g.c + c) * g.h + y) * g.w + x;
          for (std::size_t ky = 0; ky < 3; ++ky)
            for (std::size_t kx = 0; kx < 3; ++kx) base[ky * g.w + kx] += *gc++;
        }
  return grads;
}

// ---------------------------------------------------------------------------
// Pooling

PoolResult maxpool2x2(const Tensor& input) {
  require_rank(input, 4, "maxpool input");
  const auto& s = input.shape();
  if (s[2] < 2 || s[3] < 2) throw ShapeError("maxpool input smaller than 2x2");
  const std::size_t ho = s[2] / 2, wo = s[3] / 2;
  PoolResult result{Tensor({s[0], s[1], ho, wo}), {}};
  result.argmax.resize(result.output.size());
  const double* in = input.raw();
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < s[0] * s[1]; ++plane) {
    const std::size_t base = plane * s[2] * s[3];
    for (std::size_t y = 0; y < ho; ++y)
      for (std::size_t x = 0; x < wo; ++x, ++o) {
        std::size_t best = base + (2 * y) * s[3] + 2 * x;
        for (std::size_t dy = 0; dy < 2; ++dy)
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = base + (2 * y + dy) * s[3] + 2 * x + dx;
            if (in[idx] > in[best]) best = idx;
          }
        result.output[o] = in[best];
        result.argmax[o] = best;
      }
  }
  return result;
}

Tensor maxpool2x2_backward(const Tensor& grad_out, std::span<const std::size_t> argmax,
                           const Shape& input_shape) {
  if (grad_out.size() != argmax.size())
    throw ShapeError("maxpool gradient does not match its index map");
  Tensor grad(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) grad[argmax[i]] += grad_out[i];
  return grad;
}

// ---------------------------------------------------------------------------
// Elementwise

Tensor elementwise(ElementwiseOp op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ShapeError("elementwise shape mismatch: " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) {
    switch (op) {
      case ElementwiseOp::Add: out[i] = a[i] + b[i]; break;
      case ElementwiseOp::Sub: out[i] = a[i] - b[i]; break;
      case ElementwiseOp::Mul: out[i] = a[i] * b[i]; break;
      default: throw ShapeError("operation takes a scalar operand");
    }
  }
  return out;
}

Tensor elementwise(ElementwiseOp op, const Tensor& a, double scalar) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) {
    switch (op) {
      case ElementwiseOp::Add: out[i] = a[i] + scalar; break;
      case ElementwiseOp::Sub: out[i] = a[i] - scalar; break;
      case ElementwiseOp::Mul:
      case ElementwiseOp::Scale: out[i] = a[i] * scalar; break;
      case ElementwiseOp::MaxWithScalar: out[i] = std::max(a[i], scalar); break;
    }
  }
  return out;
}

std::vector<std::size_t> argmax_last(const Tensor& t) {
  require_rank(t, 2, "argmax");
  std::vector<std::size_t> out(t.dim(0));
  for (std::size_t r = 0; r < t.dim(0); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < t.dim(1); ++c)
      if (t.at(r, c) > t.at(r, best)) best = c;
    out[r] = best;
  }
  return out;
}

Tensor randn(Shape shape, double stddev, Rng& rng) {
  if (!(stddev > 0.0)) throw ConfigError("randn stddev must be positive");
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = stddev * rng.gaussian();
  return t;
}

}  // namespace reluhead
