#include "reluhead/preprocess.hpp"

#include <lapacke.h>

#include <cmath>
#include <cstdio>
#include <string>

#include "reluhead/error.hpp"
#include "reluhead/network.hpp"

namespace reluhead {

ScalerParams scaler_fit(const Tensor& x) {
  if (x.rank() != 2 || x.empty()) throw InputError("scaler_fit needs a non-empty N x D matrix");
  const std::size_t n = x.dim(0), d = x.dim(1);
  ScalerParams p{Tensor({d}), Tensor({d})};
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) p.mean[c] += x.at(r, c);
  for (std::size_t c = 0; c < d; ++c) p.mean[c] /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) {
      const double dev = x.at(r, c) - p.mean[c];
      p.stddev[c] += dev * dev;
    }
  for (std::size_t c = 0; c < d; ++c) p.stddev[c] = std::sqrt(p.stddev[c] / static_cast<double>(n));
  return p;
}

Tensor scaler_transform(const ScalerParams& p, const Tensor& x) {
  if (x.rank() != 2 || x.dim(1) != p.mean.size())
    throw ShapeError("scaler fitted on " + std::to_string(p.mean.size()) +
                     " features, got " + shape_string(x.shape()));
  Tensor z(x.shape());
  for (std::size_t r = 0; r < x.dim(0); ++r)
    for (std::size_t c = 0; c < x.dim(1); ++c)
      z.at(r, c) = p.stddev[c] > 0.0 ? (x.at(r, c) - p.mean[c]) / p.stddev[c] : 0.0;
  return z;
}

PcaParams pca_fit(const Tensor& x, std::size_t dims) {
  if (x.rank() != 2) throw ShapeError("pca_fit needs an N x D matrix");
  const std::size_t n = x.dim(0), d = x.dim(1);
  if (dims < 1 || dims > std::min(n, d))
    throw ConfigError("PCA dimensions must lie in [1, " + std::to_string(std::min(n, d)) +
                      "], got " + std::to_string(dims));

  PcaParams p;
  p.mean = Tensor({d});
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) p.mean[c] += x.at(r, c);
  for (std::size_t c = 0; c < d; ++c) p.mean[c] /= static_cast<double>(n);

  Tensor centred(x.shape());
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) centred.at(r, c) = x.at(r, c) - p.mean[c];

  // Row-major N x D is column-major D x N (the transpose), whose left
  // singular vectors are the principal directions.
  const std::size_t k = std::min(n, d);
  std::vector<double> s(k), u(d >= n ? 1 : d * d), vt(d >= n ? n * n : 1);
  const lapack_int info = LAPACKE_dgesdd(
      LAPACK_COL_MAJOR, 'O', static_cast<lapack_int>(d), static_cast<lapack_int>(n),
      centred.raw(), static_cast<lapack_int>(d), s.data(), u.data(), static_cast<lapack_int>(d),
      vt.data(), static_cast<lapack_int>(d >= n ? n : 1));
  if (info != 0) throw NumericError("SVD failed to converge (info " + std::to_string(info) + ")");
  const double* left = d >= n ? centred.raw() : u.data();

  const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
  p.components = Tensor({d, dims});
  p.explained_variance = Tensor({dims});
  for (std::size_t j = 0; j < dims; ++j) {
    const double* row = left + j * d;
    std::size_t big = 0;
    for (std::size_t c = 1; c < d; ++c)
      if (std::abs(row[c]) > std::abs(row[big])) big = c;
    const double sign = row[big] < 0.0 ? -1.0 : 1.0;
    for (std::size_t c = 0; c < d; ++c) p.components.at(c, j) = sign * row[c];
    p.explained_variance[j] = s[j] * s[j] / denom;
  }
  for (std::size_t j = 0; j < k; ++j) p.total_variance += s[j] * s[j] / denom;
  return p;
}

Tensor pca_transform(const PcaParams& p, const Tensor& x) {
  if (x.rank() != 2 || x.dim(1) != p.mean.size())
    throw ShapeError("PCA fitted on " + std::to_string(p.mean.size()) + " features, got " +
                     shape_string(x.shape()));
  Tensor centred(x.shape());
  for (std::size_t r = 0; r < x.dim(0); ++r)
    for (std::size_t c = 0; c < x.dim(1); ++c) centred.at(r, c) = x.at(r, c) - p.mean[c];
  return matmul(centred, p.components);
}

Tensor pca_inverse_transform(const PcaParams& p, const Tensor& projected) {
  Tensor back = matmul(projected, Transpose::No, p.components, Transpose::Yes);
  add_row_bias(back, p.mean);
  return back;
}

Tensor explained_variance_ratio(const PcaParams& p) {
  Tensor r = p.explained_variance;
  for (double& v : r.data()) v = p.total_variance > 0.0 ? v / p.total_variance : 0.0;
  return r;
}

void save_scaler(const ScalerParams& p, const std::filesystem::path& path) {
  Container c{"scaler;features=" + std::to_string(p.mean.size()), {}};
  c.values.assign(p.mean.data().begin(), p.mean.data().end());
  c.values.insert(c.values.end(), p.stddev.data().begin(), p.stddev.data().end());
  write_container(path, c);
}

ScalerParams load_scaler(const std::filesystem::path& path) {
  const Container c = read_container(path);
  const std::string prefix = "scaler;features=";
  if (c.descriptor.rfind(prefix, 0) != 0) throw CorruptError("not a scaler container");
  const std::size_t d = std::stoull(c.descriptor.substr(prefix.size()));
  if (c.values.size() != 2 * d) throw CorruptError("scaler payload length mismatch");
  return {Tensor({d}, {c.values.begin(), c.values.begin() + static_cast<std::ptrdiff_t>(d)}),
          Tensor({d}, {c.values.begin() + static_cast<std::ptrdiff_t>(d), c.values.end()})};
}

void save_pca(const PcaParams& p, const std::filesystem::path& path) {
  const std::size_t d = p.components.dim(0), k = p.components.dim(1);
  Container c{"pca;features=" + std::to_string(d) + ";dims=" + std::to_string(k), {}};
  c.values.push_back(p.total_variance);
  c.values.insert(c.values.end(), p.mean.data().begin(), p.mean.data().end());
  c.values.insert(c.values.end(), p.explained_variance.data().begin(),
                  p.explained_variance.data().end());
  c.values.insert(c.values.end(), p.components.data().begin(), p.components.data().end());
  write_container(path, c);
}

PcaParams load_pca(const std::filesystem::path& path) {
  const Container c = read_container(path);
  std::size_t d = 0, k = 0;
  if (std::sscanf(c.descriptor.c_str(), "pca;features=%zu;dims=%zu", &d, &k) != 2 || d == 0 ||
      k == 0)
    throw CorruptError("not a PCA container");
  if (c.values.size() != 1 + d + k + d * k) throw CorruptError("PCA payload length mismatch");
  PcaParams p;
  auto it = c.values.begin();
  p.total_variance = *it++;
  p.mean = Tensor({d}, {it, it + static_cast<std::ptrdiff_t>(d)});
  it += static_cast<std::ptrdiff_t>(d);
  p.explained_variance = Tensor({k}, {it, it + static_cast<std::ptrdiff_t>(k)});
  it += static_cast<std::ptrdiff_t>(k);
  p.components = Tensor({d, k}, {it, c.values.end()});
  return p;
}

}  // namespace reluhead
