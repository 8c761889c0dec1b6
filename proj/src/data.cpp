#include "reluhead/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>
#include <sstream>

#include "reluhead/error.hpp"

namespace reluhead {

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(classes(), 0);
  for (std::size_t y : labels) ++counts.at(y);
  return counts;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.features = features.gather_rows(indices);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) out.labels.push_back(labels.at(i));
  out.class_names = class_names;
  out.split = split;
  return out;
}

// ---------------------------------------------------------------------------
// IDX

namespace {

struct GzCloser {
  void operator()(gzFile f) const { gzclose(f); }
};
using GzHandle = std::unique_ptr<std::remove_pointer_t<gzFile>, GzCloser>;

/// Whole file, decompressed when gzip-framed.
std::string read_maybe_gzip(const std::filesystem::path& path) {
  GzHandle f(gzopen(path.c_str(), "rb"));
  if (!f) throw IoError("cannot open " + path.string());
  std::string out;
  char buf[1 << 16];
  for (;;) {
    const int got = gzread(f.get(), buf, sizeof buf);
    if (got < 0) throw FormatError("corrupt gzip stream in " + path.string());
    if (got == 0) break;
    out.append(buf, static_cast<std::size_t>(got));
  }
  return out;
}

std::uint32_t be32(const std::string& bytes, std::size_t pos) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
         std::uint32_t{p[3]};
}

void put_be32(std::string& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<char>((v >> shift) & 0xFF));
}

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

}  // namespace

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::vector<std::string> class_names) {
  const std::string img = read_maybe_gzip(images);
  const std::string lab = read_maybe_gzip(labels);
  if (img.size() < 16 || be32(img, 0) != kImageMagic)
    throw FormatError(images.string() + ": bad IDX image magic");
  if (lab.size() < 8 || be32(lab, 0) != kLabelMagic)
    throw FormatError(labels.string() + ": bad IDX label magic");
  const std::size_t n = be32(img, 4), rows = be32(img, 8), cols = be32(img, 12);
  const std::size_t n_labels = be32(lab, 4);
  if (n != n_labels)
    throw ConsistencyError("IDX image count " + std::to_string(n) + " != label count " +
                           std::to_string(n_labels));
  if (img.size() != 16 + n * rows * cols)
    throw FormatError(images.string() + ": payload holds " + std::to_string(img.size() - 16) +
                      " bytes, header promises " + std::to_string(n * rows * cols));
  if (lab.size() != 8 + n) throw FormatError(labels.string() + ": truncated label payload");
  if (n == 0 || rows * cols == 0) throw FormatError(images.string() + ": empty IDX file");

  Dataset ds;
  ds.features = Tensor({n, rows * cols});
  const auto* px = reinterpret_cast<const unsigned char*>(img.data() + 16);
  for (std::size_t i = 0; i < n * rows * cols; ++i) ds.features[i] = px[i] / 255.0;
  std::size_t max_label = 0;
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    ds.labels[i] = static_cast<unsigned char>(lab[8 + i]);
    max_label = std::max(max_label, ds.labels[i]);
  }
  if (class_names.empty())
    for (std::size_t c = 0; c <= max_label; ++c) class_names.push_back(std::to_string(c));
  if (max_label >= class_names.size())
    throw FormatError(labels.string() + ": label " + std::to_string(max_label) +
                      " outside the class list");
  ds.class_names = std::move(class_names);
  return ds;
}

void write_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
               std::size_t rows, std::size_t cols, const std::vector<std::uint8_t>& pixels,
               const std::vector<std::uint8_t>& label_bytes) {
  const std::size_t n = label_bytes.size();
  if (pixels.size() != n * rows * cols) throw ShapeError("pixel count does not match labels");
  std::string img, lab;
  put_be32(img, kImageMagic);
  put_be32(img, static_cast<std::uint32_t>(n));
  put_be32(img, static_cast<std::uint32_t>(rows));
  put_be32(img, static_cast<std::uint32_t>(cols));
  img.append(pixels.begin(), pixels.end());
  put_be32(lab, kLabelMagic);
  put_be32(lab, static_cast<std::uint32_t>(n));
  lab.append(label_bytes.begin(), label_bytes.end());
  std::ofstream(images, std::ios::binary).write(img.data(), static_cast<std::streamsize>(img.size()));
  std::ofstream(labels, std::ios::binary).write(lab.data(), static_cast<std::streamsize>(lab.size()));
}

// ---------------------------------------------------------------------------
// WDBC

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && std::isfinite(out);
}

}  // namespace

Dataset load_wdbc(const std::filesystem::path& csv) {
  std::ifstream in(csv);
  if (!in) throw IoError("cannot open " + csv.string());
  constexpr std::size_t kFeatures = 30;
  std::vector<double> values;
  Dataset ds;
  ds.class_names = {"benign", "malignant"};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    double probe = 0.0;
    if (line_no == 1 && (fields.empty() || !parse_double(fields[0], probe))) continue;  // header
    if (fields.size() != 2 + kFeatures)
      throw ParseError(csv.string() + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(2 + kFeatures) + " fields, found " +
                       std::to_string(fields.size()));
    if (fields[1] == "M") ds.labels.push_back(1);
    else if (fields[1] == "B") ds.labels.push_back(0);
    else
      throw ParseError(csv.string() + ":" + std::to_string(line_no) + ": diagnosis '" + fields[1] +
                       "' is neither M nor B");
    for (std::size_t f = 0; f < kFeatures; ++f) {
      double v = 0.0;
      if (!parse_double(fields[2 + f], v))
        throw ParseError(csv.string() + ":" + std::to_string(line_no) + ": feature " +
                         std::to_string(f + 1) + " '" + fields[2 + f] + "' is not numeric");
      values.push_back(v);
    }
  }
  if (ds.labels.empty()) throw ParseError(csv.string() + ": no data rows");
  ds.features = Tensor({ds.labels.size(), kFeatures}, std::move(values));
  return ds;
}

// ---------------------------------------------------------------------------
// Splits

std::pair<Dataset, Dataset> split_train_test(const Dataset& ds, double test_fraction, Rng& rng) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ConfigError("test fraction must lie in (0, 1)");
  std::vector<std::vector<std::size_t>> by_class(ds.classes());
  for (std::size_t i = 0; i < ds.size(); ++i) by_class.at(ds.labels[i]).push_back(i);
  std::vector<std::size_t> train, test;
  for (auto& members : by_class) {
    rng.shuffle(members);
    const auto n_test = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(members.size())));
    test.insert(test.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_test));
    train.insert(train.end(), members.begin() + static_cast<std::ptrdiff_t>(n_test), members.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  Dataset tr = ds.subset(train), te = ds.subset(test);
  tr.split = Split::Train;
  te.split = Split::Test;
  return {std::move(tr), std::move(te)};
}

namespace {

FoldPlan plan_from_assignment(std::size_t n, std::size_t k,
                              const std::vector<std::vector<std::size_t>>& validation) {
  FoldPlan plan;
  plan.k = k;
  std::vector<std::size_t> owner(n);
  for (std::size_t f = 0; f < k; ++f)
    for (std::size_t i : validation[f]) owner[i] = f;
  for (std::size_t f = 0; f < k; ++f) {
    Fold fold;
    fold.validation = validation[f];
    std::sort(fold.validation.begin(), fold.validation.end());
    for (std::size_t i = 0; i < n; ++i)
      if (owner[i] != f) fold.train.push_back(i);
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

}  // namespace

FoldPlan kfold(std::size_t n, std::size_t k, Rng& rng) {
  if (k < 2 || k > n)
    throw ConfigError("fold count must lie in [2, " + std::to_string(n) + "], got " +
                      std::to_string(k));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> validation(k);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    validation[f].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                         order.begin() + static_cast<std::ptrdiff_t>(pos + size));
    pos += size;
  }
  return plan_from_assignment(n, k, validation);
}

FoldPlan stratified_kfold(std::span<const std::size_t> labels, std::size_t k, Rng& rng) {
  const std::size_t n = labels.size();
  if (k < 2 || k > n)
    throw ConfigError("fold count must lie in [2, " + std::to_string(n) + "], got " +
                      std::to_string(k));
  const std::size_t classes = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<std::vector<std::size_t>> by_class(classes);
  for (std::size_t i = 0; i < n; ++i) by_class[labels[i]].push_back(i);
  std::vector<std::vector<std::size_t>> validation(k);
  std::size_t next = 0;
  for (auto& members : by_class) {
    rng.shuffle(members);
    for (std::size_t i : members) validation[next++ % k].push_back(i);
  }
  return plan_from_assignment(n, k, validation);
}

}  // namespace reluhead
