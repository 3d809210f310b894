#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "tacs/geometry.hpp"

namespace tacs {

/// Integer grid cell. x indexes columns, y indexes rows.
struct Cell {
  int x = 0;
  int y = 0;

  friend bool operator==(const Cell&, const Cell&) = default;
  friend auto operator<=>(const Cell& a, const Cell& b) {
    if (auto c = a.x <=> b.x; c != 0) return c;
    return a.y <=> b.y;
  }
};

struct CellHash {
  std::size_t operator()(const Cell& c) const noexcept {
    return std::hash<std::uint64_t>{}((std::uint64_t(std::uint32_t(c.x)) << 32) | std::uint32_t(c.y));
  }
};

inline Cell cell_of(const Vec2d& p, double resolution) {
  return {int(std::floor(p.x() / resolution)), int(std::floor(p.y() / resolution))};
}

inline Vec2d cell_center(const Cell& c, double resolution) {
  return {(c.x + 0.5) * resolution, (c.y + 0.5) * resolution};
}

inline constexpr Cell kNeighbors8[8] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {1, -1}, {-1, 1}, {-1, -1}};

/// Sorted, duplicate-free set of cells. Set algebra is linear in the sizes.
class CellSet {
 public:
  CellSet() = default;
  explicit CellSet(std::vector<Cell> cells) : cells_(std::move(cells)) {
    std::sort(cells_.begin(), cells_.end());
    cells_.erase(std::unique(cells_.begin(), cells_.end()), cells_.end());
  }

  std::size_t size() const { return cells_.size(); }
  bool empty() const { return cells_.empty(); }
  bool contains(const Cell& c) const { return std::binary_search(cells_.begin(), cells_.end(), c); }

  std::span<const Cell> cells() const { return cells_; }
  auto begin() const { return cells_.begin(); }
  auto end() const { return cells_.end(); }

  CellSet united(const CellSet& other) const {
    CellSet out;
    out.cells_.reserve(size() + other.size());
    std::set_union(begin(), end(), other.begin(), other.end(), std::back_inserter(out.cells_));
    return out;
  }

  std::size_t intersection_size(const CellSet& other) const {
    std::size_t n = 0;
    auto a = begin(), b = other.begin();
    while (a != end() && b != other.end()) {
      if (*a < *b) {
        ++a;
      } else if (*b < *a) {
        ++b;
      } else {
        ++n;
        ++a;
        ++b;
      }
    }
    return n;
  }

  friend bool operator==(const CellSet&, const CellSet&) = default;

 private:
  std::vector<Cell> cells_;
};

/// Dense rectangular block of cells [origin, origin + size).
template <typename T>
class DenseGrid {
 public:
  DenseGrid() = default;
  DenseGrid(Cell origin, int width, int height, T fill = T{})
      : origin_(origin), width_(width), height_(height), data_(std::size_t(width) * height, fill) {
    if (width < 0 || height < 0) throw std::invalid_argument("DenseGrid: negative size");
  }

  Cell origin() const { return origin_; }
  int width() const { return width_; }
  int height() const { return height_; }

  bool contains(const Cell& c) const {
    return c.x >= origin_.x && c.y >= origin_.y && c.x < origin_.x + width_ && c.y < origin_.y + height_;
  }
  std::size_t index(const Cell& c) const {
    return std::size_t(c.y - origin_.y) * width_ + std::size_t(c.x - origin_.x);
  }
  Cell cell(std::size_t index) const {
    return {origin_.x + int(index % width_), origin_.y + int(index / width_)};
  }

  T& operator[](const Cell& c) { return data_[index(c)]; }
  const T& operator[](const Cell& c) const { return data_[index(c)]; }
  std::size_t size() const { return data_.size(); }
  T& at(std::size_t i) { return data_[i]; }
  const T& at(std::size_t i) const { return data_[i]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

 private:
  Cell origin_{};
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// Exact squared Euclidean distance transform (in cells) over a grid whose
/// `true` entries are sources. Cells with no source get +infinity.
std::vector<double> squared_distance_transform(int width, int height, std::span<const std::uint8_t> sources);

/// Calls fn(cell, t_enter, t_exit) for every cell crossed by the ray from
/// `origin` along unit `dir` up to `max_t` (meters), starting with the origin cell.
/// fn returns false to stop marching.
template <typename Fn>
void march_ray(const Vec2d& origin, const Vec2d& dir, double max_t, double resolution, Fn&& fn) {
  Cell c = cell_of(origin, resolution);
  const int step_x = dir.x() > 0 ? 1 : (dir.x() < 0 ? -1 : 0);
  const int step_y = dir.y() > 0 ? 1 : (dir.y() < 0 ? -1 : 0);
  constexpr double inf = std::numeric_limits<double>::infinity();
  auto boundary_t = [&](int idx, int step, double o, double d) {
    if (step == 0) return inf;
    const double b = (step > 0 ? (idx + 1) : idx) * resolution;
    return (b - o) / d;
  };
  double t_max_x = boundary_t(c.x, step_x, origin.x(), dir.x());
  double t_max_y = boundary_t(c.y, step_y, origin.y(), dir.y());
  const double t_delta_x = step_x != 0 ? resolution / std::abs(dir.x()) : inf;
  const double t_delta_y = step_y != 0 ? resolution / std::abs(dir.y()) : inf;
  double t = 0.0;
  while (t <= max_t) {
    const double t_next = std::min(t_max_x, t_max_y);
    if (!fn(c, t, std::min(t_next, max_t))) return;
    if (t_max_x < t_max_y) {
      c.x += step_x;
      t = t_max_x;
      t_max_x += t_delta_x;
    } else {
      c.y += step_y;
      t = t_max_y;
      t_max_y += t_delta_y;
    }
  }
}

}  // namespace tacs
