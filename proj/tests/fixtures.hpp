#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <algorithm>

#include "reluhead/tensor.hpp"

namespace fixture {

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "reluhead_tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// A WDBC-shaped table: 212 malignant and 357 benign rows whose features
/// separate the classes along a few directions, with noise.
inline void write_wdbc(const std::filesystem::path& path, std::uint64_t seed = 1,
                       std::size_t malignant = 212, std::size_t benign = 357) {
  std::ofstream out(path);
  reluhead::Rng rng(seed);
  const std::size_t n = malignant + benign;
  // Interleave deterministically: row i is malignant when the running share
  // of malignant rows falls behind the target.
  std::size_t m_written = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool is_m = m_written * n < malignant * (i + 1) && m_written < malignant;
    if (is_m) ++m_written;
    out << (842300 + i) << ',' << (is_m ? 'M' : 'B');
    for (std::size_t f = 0; f < 30; ++f) {
      const double centre = (is_m ? 1.0 : -1.0) * (f % 3 == 0 ? 1.5 : 0.3);
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.6g", 10.0 + 2.0 * f + centre + rng.gaussian());
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace fixture
