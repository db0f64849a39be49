#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <optional>
#include <span>
#include <vector>

#include "gridshield/error.hpp"

namespace gridshield {

inline constexpr std::size_t kMaxDim = 6;

/// Fixed-capacity point in R^k. Kept on the stack so that simulation inner
/// loops never allocate.
class State {
 public:
  State() = default;
  explicit State(std::size_t dim) : size_(dim) { check(dim); }
  State(std::initializer_list<double> values) : size_(values.size()) {
    check(size_);
    std::size_t i = 0;
    for (double v : values) data_[i++] = v;
  }
  explicit State(std::span<const double> values) : size_(values.size()) {
    check(size_);
    for (std::size_t i = 0; i < size_; ++i) data_[i] = values[i];
  }

  std::size_t size() const noexcept { return size_; }
  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }
  const double* begin() const noexcept { return data_.data(); }
  const double* end() const noexcept { return data_.data() + size_; }
  double* begin() noexcept { return data_.data(); }
  double* end() noexcept { return data_.data() + size_; }
  std::span<const double> values() const noexcept { return {data_.data(), size_}; }

  friend bool operator==(const State& a, const State& b) noexcept {
    if (a.size_ != b.size_) return false;
    for (std::size_t i = 0; i < a.size_; ++i)
      if (a.data_[i] != b.data_[i]) return false;
    return true;
  }

 private:
  static void check(std::size_t dim) {
    if (dim > kMaxDim) throw Error(ErrorCode::ConfigError, "state dimension exceeds kMaxDim");
  }

  std::array<double, kMaxDim> data_{};
  std::size_t size_ = 0;
};

/// Row-major ordinal of a grid cell; the unit every table is indexed by.
using CellIndex = std::uint64_t;

/// Per-dimension integer coordinates of a grid cell.
class CellId {
 public:
  CellId() = default;
  explicit CellId(std::size_t dim) : size_(dim) {}
  CellId(std::initializer_list<std::int64_t> idx) : size_(idx.size()) {
    std::size_t i = 0;
    for (auto v : idx) indices_[i++] = v;
  }

  std::size_t size() const noexcept { return size_; }
  std::int64_t& operator[](std::size_t i) noexcept { return indices_[i]; }
  std::int64_t operator[](std::size_t i) const noexcept { return indices_[i]; }

  friend bool operator==(const CellId& a, const CellId& b) noexcept {
    if (a.size_ != b.size_) return false;
    for (std::size_t i = 0; i < a.size_; ++i)
      if (a.indices_[i] != b.indices_[i]) return false;
    return true;
  }

 private:
  std::array<std::int64_t, kMaxDim> indices_{};
  std::size_t size_ = 0;
};

/// Half-open box [low, high) per dimension.
struct CellBox {
  State low;
  State high;

  bool contains(const State& s) const noexcept;
};

/// Uniform grid over a bounded box. Cells are half-open, so the upper face of
/// the global box belongs to no cell.
class PartitionSpec {
 public:
  PartitionSpec(std::vector<double> lower, std::vector<double> upper, std::vector<double> gamma);

  std::size_t dim() const noexcept { return lower_.size(); }
  const std::vector<double>& lower() const noexcept { return lower_; }
  const std::vector<double>& upper() const noexcept { return upper_; }
  const std::vector<double>& gamma() const noexcept { return gamma_; }
  std::int64_t cells_along(std::size_t d) const noexcept { return counts_[d]; }
  CellIndex cell_count() const noexcept { return total_; }

  bool in_bounds(const State& s) const noexcept;
  bool in_bounds(const CellId& id) const noexcept;

  /// Grid coordinate of x along dimension d, with sub-ulp snapping onto the
  /// next grid plane. Not range checked.
  std::int64_t index_along(std::size_t d, double x) const noexcept;

  CellId cell_of(const State& s) const;
  std::optional<CellIndex> try_index_of(const State& s) const noexcept;
  CellBox cell_box(const CellId& id) const;
  CellBox cell_box(CellIndex ordinal) const { return cell_box(cell_id(ordinal)); }

  CellIndex ordinal(const CellId& id) const;
  CellId cell_id(CellIndex ordinal) const;

  /// Visits every cell once in row-major order (last dimension fastest).
  void iterate_cells(const std::function<void(CellIndex, const CellId&)>& visit) const;

  friend bool operator==(const PartitionSpec& a, const PartitionSpec& b) noexcept {
    return a.lower_ == b.lower_ && a.upper_ == b.upper_ && a.gamma_ == b.gamma_;
  }

 private:
  std::vector<double> lower_;
  std::vector<double> upper_;
  std::vector<double> gamma_;
  std::vector<std::int64_t> counts_;
  CellIndex total_ = 0;
};

/// Relative distance below a grid plane that still counts as on the plane.
inline constexpr double kSnapTolerance = 1e-12;

}  // namespace gridshield
