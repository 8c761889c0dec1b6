#pragma once

#include <filesystem>

#include "reluhead/tensor.hpp"

namespace reluhead {

/// Per-feature statistics for z-score standardization.
struct ScalerParams {
  Tensor mean;    // D
  Tensor stddev;  // D, population (divide-by-N) standard deviation
};

ScalerParams scaler_fit(const Tensor& x);
/// (x - mean) / stddev per column; zero-variance columns map to 0.
Tensor scaler_transform(const ScalerParams& params, const Tensor& x);

struct PcaParams {
  Tensor components;          // D x d, orthonormal columns
  Tensor mean;                // D
  Tensor explained_variance;  // d, non-increasing; divide-by-(N-1) convention
  double total_variance = 0;  // sum of all D feature variances
};

/// Top-`dims` principal directions of the mean-centred data from a thin SVD.
/// Each component is sign-normalized so its largest-magnitude entry is
/// positive.
PcaParams pca_fit(const Tensor& x, std::size_t dims);
/// (x - mean) * components.
Tensor pca_transform(const PcaParams& params, const Tensor& x);
/// projected * components^T + mean.
Tensor pca_inverse_transform(const PcaParams& params, const Tensor& projected);

/// Share of total variance captured by each kept component.
Tensor explained_variance_ratio(const PcaParams& params);

void save_scaler(const ScalerParams& params, const std::filesystem::path& path);
ScalerParams load_scaler(const std::filesystem::path& path);
void save_pca(const PcaParams& params, const std::filesystem::path& path);
PcaParams load_pca(const std::filesystem::path& path);

}  // namespace reluhead
