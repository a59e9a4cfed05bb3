#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "regflow/error.hpp"

namespace regflow {

struct Dims3 {
  std::int64_t nx = 1;
  std::int64_t ny = 1;
  std::int64_t nz = 1;

  [[nodiscard]] constexpr std::int64_t count() const { return nx * ny * nz; }
  friend constexpr bool operator==(const Dims3&, const Dims3&) = default;
};

struct Dims2 {
  std::int64_t nx = 1;
  std::int64_t ny = 1;

  [[nodiscard]] constexpr std::int64_t count() const { return nx * ny; }
  friend constexpr bool operator==(const Dims2&, const Dims2&) = default;
};

// Physical voxel size in mm.
struct Spacing3 {
  double x = 1.0;
  double y = 1.0;
  double z = 1.0;

  [[nodiscard]] constexpr double voxel_volume() const { return x * y * z; }
  friend constexpr bool operator==(const Spacing3&, const Spacing3&) = default;
};

inline std::string to_string(const Dims3& d) {
  return std::to_string(d.nx) + "x" + std::to_string(d.ny) + "x" + std::to_string(d.nz);
}

inline std::string to_string(const Dims2& d) {
  return std::to_string(d.nx) + "x" + std::to_string(d.ny);
}

/// Dense 3D grid stored x-fastest: index = x + nx * (y + ny * z).
template <typename T>
class Grid3 {
 public:
  using value_type = T;

  Grid3() = default;

  Grid3(Dims3 dims, Spacing3 spacing, T fill = T{})
      : dims_(dims), spacing_(spacing) {
    validate_shape(dims, spacing);
    data_.assign(static_cast<std::size_t>(dims.count()), fill);
  }

  Grid3(Dims3 dims, Spacing3 spacing, std::vector<T> data)
      : dims_(dims), spacing_(spacing), data_(std::move(data)) {
    validate_shape(dims, spacing);
    if (static_cast<std::int64_t>(data_.size()) != dims.count()) {
      throw InvalidArgument("grid data length " + std::to_string(data_.size()) +
                            " does not match dims " + to_string(dims));
    }
  }

  [[nodiscard]] const Dims3& dims() const { return dims_; }
  [[nodiscard]] const Spacing3& spacing() const { return spacing_; }
  [[nodiscard]] std::int64_t size() const { return dims_.count(); }
  [[nodiscard]] std::span<const T> data() const { return data_; }
  [[nodiscard]] std::span<T> data() { return data_; }
  [[nodiscard]] const std::vector<T>& values() const { return data_; }

  [[nodiscard]] std::int64_t index(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return x + dims_.nx * (y + dims_.ny * z);
  }
  [[nodiscard]] bool contains(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return x >= 0 && y >= 0 && z >= 0 && x < dims_.nx && y < dims_.ny && z < dims_.nz;
  }

  T& operator()(std::int64_t x, std::int64_t y, std::int64_t z) {
    return data_[static_cast<std::size_t>(index(x, y, z))];
  }
  const T& operator()(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return data_[static_cast<std::size_t>(index(x, y, z))];
  }
  T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  const T& operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  // Zero outside the grid.
  [[nodiscard]] T at_or_zero(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return contains(x, y, z) ? (*this)(x, y, z) : T{};
  }

  [[nodiscard]] bool same_grid(const Grid3& other) const { return dims_ == other.dims_; }
  template <typename U>
  [[nodiscard]] bool same_grid(const Grid3<U>& other) const { return dims_ == other.dims(); }

  friend bool operator==(const Grid3&, const Grid3&) = default;

 private:
  static void validate_shape(const Dims3& dims, const Spacing3& spacing) {
    if (dims.nx < 1 || dims.ny < 1 || dims.nz < 1) {
      throw InvalidArgument("grid dims must be >= 1 per axis, got " + to_string(dims));
    }
    if (!(spacing.x > 0.0) || !(spacing.y > 0.0) || !(spacing.z > 0.0)) {
      throw InvalidArgument("grid spacing must be > 0 per axis");
    }
  }

  Dims3 dims_{};
  Spacing3 spacing_{};
  std::vector<T> data_ = std::vector<T>(1);
};

/// Dense 2D grid stored x-fastest; parent_z records the axial index it was cut from.
template <typename T>
class Grid2 {
 public:
  using value_type = T;

  Grid2() = default;

  Grid2(Dims2 dims, T fill = T{}, std::int64_t parent_z = 0) : dims_(dims), parent_z_(parent_z) {
    validate(dims);
    data_.assign(static_cast<std::size_t>(dims.count()), fill);
  }

  Grid2(Dims2 dims, std::vector<T> data, std::int64_t parent_z = 0)
      : dims_(dims), parent_z_(parent_z), data_(std::move(data)) {
    validate(dims);
    if (static_cast<std::int64_t>(data_.size()) != dims.count()) {
      throw InvalidArgument("slice data length " + std::to_string(data_.size()) +
                            " does not match dims " + to_string(dims));
    }
  }

  [[nodiscard]] const Dims2& dims() const { return dims_; }
  [[nodiscard]] std::int64_t nx() const { return dims_.nx; }
  [[nodiscard]] std::int64_t ny() const { return dims_.ny; }
  [[nodiscard]] std::int64_t size() const { return dims_.count(); }
  [[nodiscard]] std::int64_t parent_z() const { return parent_z_; }
  [[nodiscard]] std::span<const T> data() const { return data_; }
  [[nodiscard]] std::span<T> data() { return data_; }
  [[nodiscard]] const std::vector<T>& values() const { return data_; }

  [[nodiscard]] std::int64_t index(std::int64_t x, std::int64_t y) const { return x + dims_.nx * y; }
  [[nodiscard]] bool contains(std::int64_t x, std::int64_t y) const {
    return x >= 0 && y >= 0 && x < dims_.nx && y < dims_.ny;
  }
  T& operator()(std::int64_t x, std::int64_t y) { return data_[static_cast<std::size_t>(index(x, y))]; }
  const T& operator()(std::int64_t x, std::int64_t y) const {
    return data_[static_cast<std::size_t>(index(x, y))];
  }
  T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  const T& operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  [[nodiscard]] T at_or_zero(std::int64_t x, std::int64_t y) const {
    return contains(x, y) ? (*this)(x, y) : T{};
  }

  friend bool operator==(const Grid2&, const Grid2&) = default;

 private:
  static void validate(const Dims2& dims) {
    if (dims.nx < 1 || dims.ny < 1) {
      throw InvalidArgument("slice dims must be >= 1 per axis, got " + to_string(dims));
    }
  }

  Dims2 dims_{};
  std::int64_t parent_z_ = 0;
  std::vector<T> data_ = std::vector<T>(1);
};

using Volume = Grid3<float>;
using Slice = Grid2<float>;
/// Binary mask; every value is exactly 0 or 1.
using LabelMask = Grid3<std::uint8_t>;

template <typename T>
[[nodiscard]] Grid2<T> extract_slice(const Grid3<T>& v, std::int64_t z) {
  if (z < 0 || z >= v.dims().nz) {
    throw InvalidArgument("slice index " + std::to_string(z) + " out of range");
  }
  const auto n = v.dims().nx * v.dims().ny;
  auto first = v.values().begin() + static_cast<std::ptrdiff_t>(n * z);
  return Grid2<T>({v.dims().nx, v.dims().ny}, std::vector<T>(first, first + n), z);
}

template <typename T, typename U>
void insert_slice(Grid3<T>& v, const Grid2<U>& s, std::int64_t z) {
  if (s.nx() != v.dims().nx || s.ny() != v.dims().ny) {
    throw InvalidArgument("slice dims " + to_string(s.dims()) + " do not match volume " +
                          to_string(v.dims()));
  }
  if (z < 0 || z >= v.dims().nz) {
    throw InvalidArgument("slice index " + std::to_string(z) + " out of range");
  }
  const auto n = s.size();
  for (std::int64_t i = 0; i < n; ++i) {
    v[i + n * z] = static_cast<T>(s[i]);
  }
}

/// Throws DegenerateInput when any value is NaN or infinite.
template <typename T>
void require_finite(std::span<const T> values, const std::string& what) {
  for (const T& v : values) {
    if (!std::isfinite(static_cast<double>(v))) {
      throw DegenerateInput(what + " contains non-finite values");
    }
  }
}

[[nodiscard]] inline bool is_binary(const LabelMask& m) {
  return std::all_of(m.data().begin(), m.data().end(), [](std::uint8_t v) { return v <= 1; });
}

}  // namespace regflow
