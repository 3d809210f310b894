#include "tacs/grid.hpp"

#include <limits>

namespace tacs {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 1D squared distance transform of a sampled function (Felzenszwalb & Huttenlocher).
void distance_transform_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
                           std::vector<double>& z) {
  const int n = int(f.size());
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    double s;
    while (true) {
      const int p = v[k];
      s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
      if (s <= z[k] && k > 0) {
        --k;
      } else {
        break;
      }
    }
    if (s <= z[k]) {
      // k == 0 and the new parabola dominates everywhere
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  if (k < 0) {
    std::fill(d.begin(), d.end(), kInf);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const double diff = q - v[j];
    d[q] = diff * diff + f[v[j]];
  }
}

}  // namespace

std::vector<double> squared_distance_transform(int width, int height, std::span<const std::uint8_t> sources) {
  if (sources.size() != std::size_t(width) * height) throw std::invalid_argument("distance transform: size mismatch");
  std::vector<double> grid(sources.size());
  for (std::size_t i = 0; i < sources.size(); ++i) grid[i] = sources[i] ? 0.0 : kInf;

  const int n = std::max(width, height);
  std::vector<double> f(n), d(n), z(n + 1);
  std::vector<int> v(n);

  // columns
  f.resize(height);
  d.resize(height);
  for (int x = 0; x < width; ++x) {
    for (int y = 0; y < height; ++y) f[y] = grid[std::size_t(y) * width + x];
    distance_transform_1d(f, d, v, z);
    for (int y = 0; y < height; ++y) grid[std::size_t(y) * width + x] = d[y];
  }
  // rows
  f.resize(width);
  d.resize(width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) f[x] = grid[std::size_t(y) * width + x];
    distance_transform_1d(f, d, v, z);
    for (int x = 0; x < width; ++x) grid[std::size_t(y) * width + x] = d[x];
  }
  return grid;
}

}  // namespace tacs
