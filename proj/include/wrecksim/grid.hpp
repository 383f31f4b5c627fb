#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wrecksim {

/// Thrown when caller-supplied data violates a precondition (shape, range,
/// format). The CLI maps it to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Row-major 2D grid. Rows are v (image y), columns are u (image x).
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(std::size_t width, std::size_t height, T fill = T{})
      : width_(width), height_(height), data_(width * height, fill) {}

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& at(std::size_t u, std::size_t v) { return data_[v * width_ + u]; }
  const T& at(std::size_t u, std::size_t v) const { return data_[v * width_ + u]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> row(std::size_t v) { return {data_.data() + v * width_, width_}; }
  std::span<const T> row(std::size_t v) const { return {data_.data() + v * width_, width_}; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool same_shape(std::size_t w, std::size_t h) const { return width_ == w && height_ == h; }
  template <typename U>
  bool same_shape(const Grid<U>& other) const {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<T> data_;
};

using GrayImage = Grid<std::uint8_t>;

/// Per-pixel class map; 0 = terrain, 1 = shipwreck.
class LabelMask : public Grid<std::uint8_t> {
 public:
  using Grid::Grid;
  explicit LabelMask(Grid<std::uint8_t> g) : Grid(std::move(g)) {}
  std::size_t count() const;
};

/// Binary acoustic-shadow map; never set where LabelMask is 1.
class ShadowMask : public Grid<std::uint8_t> {
 public:
  using Grid::Grid;
  explicit ShadowMask(Grid<std::uint8_t> g) : Grid(std::move(g)) {}
  std::size_t count() const;
};

inline constexpr std::uint8_t kTerrain = 0;
inline constexpr std::uint8_t kShipwreck = 1;

template <typename A, typename B>
void require_same_shape(const Grid<A>& a, const Grid<B>& b, const std::string& what) {
  if (!a.same_shape(b)) {
    throw DataError(what + ": shape mismatch (" + std::to_string(a.width()) + "x" +
                    std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                    std::to_string(b.height()) + ")");
  }
}

/// Round half up; the single rounding rule used for every quantization.
inline long long round_half_up(double x) { return static_cast<long long>(std::floor(x + 0.5)); }

}  // namespace wrecksim
