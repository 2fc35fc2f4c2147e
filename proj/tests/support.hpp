#pragma once

#include "vifi/imgrid.hpp"
#include "vifi/random.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

namespace vifi::test {

inline ImageGrid random_grid(Rng& rng, int h, int w, int c, double lo, double hi) {
  ImageGrid g(h, w, c);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = uniform(rng, lo, hi);
  return g;
}

inline double max_abs_diff(const ImageGrid& a, const ImageGrid& b) {
  return (a.data() - b.data()).cwiseAbs().maxCoeff();
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("vifi_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace vifi::test
