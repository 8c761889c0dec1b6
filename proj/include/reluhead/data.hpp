#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "reluhead/tensor.hpp"

namespace reluhead {

enum class Split { Train, Test, All };

struct Dataset {
  Tensor features;                  // N x D
  std::vector<std::size_t> labels;  // N, each in [0, K)
  std::vector<std::string> class_names;
  Split split = Split::All;

  std::size_t size() const { return labels.size(); }
  std::size_t classes() const { return class_names.size(); }
  std::size_t feature_dim() const { return features.dim(1); }
  std::vector<std::size_t> class_counts() const;
  /// Rows `indices`, in order.
  Dataset subset(std::span<const std::size_t> indices) const;
};

/// IDX image/label pair (big-endian headers, gzip or plain). Pixels are
/// flattened row-major and scaled to [0, 1].
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::vector<std::string> class_names = {});

/// Writes an IDX image/label pair (uncompressed); used to build fixtures.
void write_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
               std::size_t rows, std::size_t cols, const std::vector<std::uint8_t>& pixels,
               const std::vector<std::uint8_t>& label_bytes);

/// UCI WDBC rows: id, diagnosis (M or B), 30 features. M -> 1, B -> 0. A
/// non-numeric first line is treated as a header and skipped.
Dataset load_wdbc(const std::filesystem::path& csv);

/// Stratified by class and deterministic under `rng`'s seed.
std::pair<Dataset, Dataset> split_train_test(const Dataset& ds, double test_fraction, Rng& rng);

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

struct FoldPlan {
  std::size_t k = 0;
  std::vector<Fold> folds;
};

/// Shuffled indices cut into k near-equal validation folds (the first n % k
/// folds get one extra index).
FoldPlan kfold(std::size_t n, std::size_t k, Rng& rng);
/// Like kfold, but each class is dealt round-robin across folds.
FoldPlan stratified_kfold(std::span<const std::size_t> labels, std::size_t k, Rng& rng);

// ---------------------------------------------------------------------------
// Dataset cache

enum class DatasetId { Mnist, Fashion, Wdbc };

DatasetId parse_dataset(const std::string& name);
std::string to_string(DatasetId id);

struct RemoteFile {
  std::string name;
  /// Expected payload length after decompression, or 0 when the check is
  /// structural (wdbc.data).
  std::uint64_t payload_bytes;
};

std::vector<RemoteFile> dataset_files(DatasetId id);
std::string default_mirror(DatasetId id);

/// $RELUHEAD_DATA_DIR, else $HOME/.cache/reluhead.
std::filesystem::path default_data_dir();

struct FetchResult {
  std::vector<std::filesystem::path> files;
  std::size_t downloaded = 0;  // files transferred in this call
  /// Cached files that failed their integrity check and were replaced.
  std::vector<std::string> repaired;
};

/// Ensures every file of `id` is cached under `dir/<id>/` and passes its
/// integrity check. Valid cached files are not re-transferred; a cached
/// file failing the check is deleted and fetched again once.
/// `mirror` overrides the base URL (any scheme libcurl accepts, including
/// file://).
FetchResult fetch(DatasetId id, const std::filesystem::path& dir,
                  const std::optional<std::string>& mirror = std::nullopt);

/// Throws IntegrityError when a cached file fails its check.
void verify_file(DatasetId id, const RemoteFile& file, const std::filesystem::path& path);

struct LoadedSplits {
  Dataset train;
  Dataset test;
  std::vector<std::filesystem::path> files;
};

/// Published train/test split for the image sets; the whole WDBC table as
/// `train` (with an empty `test`) for wdbc.
LoadedSplits load_cached(DatasetId id, const std::filesystem::path& dir);

}  // namespace reluhead
