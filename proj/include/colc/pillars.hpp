#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "colc/geometry.hpp"

namespace colc {

/// Number of handcrafted per-pillar statistics; channels beyond this are
/// zero padding.
inline constexpr int kPillarStatChannels = 8;
/// Point counts saturate here before normalization.
inline constexpr int kCountSaturation = 31;
/// Heights are divided by this many meters.
inline constexpr double kHeightScale = 4.0;

struct GridSpec {
  double x_min = -40.0;
  double y_min = -40.0;
  double cell = 0.4;
  int H = 200;  // rows, along y
  int W = 200;  // cols, along x
  int C = kPillarStatChannels;

  void validate() const;
  std::size_t cells() const { return static_cast<std::size_t>(H) * W; }
  std::size_t values() const { return cells() * static_cast<std::size_t>(C); }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// H x W x C tensor, row-major (row, col, channel). Empty cells are all zero.
class PillarGrid {
 public:
  PillarGrid() = default;
  explicit PillarGrid(const GridSpec& spec)
      : spec_(spec), data_(spec.values(), 0.0) {}
  PillarGrid(const GridSpec& spec, std::vector<double> data);

  const GridSpec& spec() const { return spec_; }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  std::size_t offset(int row, int col) const {
    return (static_cast<std::size_t>(row) * spec_.W + col) * spec_.C;
  }
  double& at(int row, int col, int ch) { return data_[offset(row, col) + ch]; }
  double at(int row, int col, int ch) const { return data_[offset(row, col) + ch]; }

  /// True when any channel of the cell is non-zero.
  bool occupied(int row, int col) const;

  friend bool operator==(const PillarGrid&, const PillarGrid&) = default;

 private:
  GridSpec spec_;
  std::vector<double> data_;
};

/// H x W binary mask, row-major.
struct OccupancyMask {
  GridSpec spec;
  std::vector<std::uint8_t> data;

  std::size_t count() const;
  friend bool operator==(const OccupancyMask&, const OccupancyMask&) = default;
};

struct PatchLayout {
  int p = 4;  // patch edge in cells

  int patch_count(const GridSpec& spec) const { return (spec.H / p) * (spec.W / p); }
  int patch_dim(const GridSpec& spec) const { return p * p * spec.C; }
  /// Throws ParameterError unless H and W are divisible by p.
  void check(const GridSpec& spec) const;
};

/// Row-major dense matrix used for patch and code vectors.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double* row(std::size_t r) { return data.data() + r * cols; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

/// Cell index of a point, or false when it lies outside the grid.
bool cell_of(const GridSpec& spec, double x, double y, int& row, int& col);

/// Bins points into pillars and fills each non-empty cell with
/// [min(n,31)/31, mean dx/cell, mean dy/cell, mean z/4, max z/4, min z/4,
///  mean intensity, 1], where dx, dy are offsets from the cell's lower
/// corner. Points outside the grid are dropped.
PillarGrid pillarize(const PointCloud& cloud, const GridSpec& spec);
PillarGrid pillarize(std::span<const PointCloud* const> clouds, const GridSpec& spec);

/// 1 where the channel absolute sum is positive.
OccupancyMask occupancy_of(const PillarGrid& grid);

/// Non-overlapping p x p tiles in row-major tile order, each flattened
/// row-major as (cell row, cell col, channel).
Matrix patchify(const PillarGrid& grid, const PatchLayout& layout);
PillarGrid unpatchify(const Matrix& patches, const PatchLayout& layout,
                      const GridSpec& spec);

/// Same tiling for a single-channel H x W field (occupancy patches).
Matrix patchify_field(const std::vector<double>& field, const GridSpec& spec,
                      const PatchLayout& layout);
std::vector<double> unpatchify_field(const Matrix& patches, const GridSpec& spec,
                                     const PatchLayout& layout);

// CGRD binary format: "CGRD", u8 version=1, u32 H, u32 W, u32 C,
// 8 x f64 (x_min, y_min, cell, H, W, C, count saturation, height scale),
// then H*W*C f32.
void write_grid(std::ostream& out, const PillarGrid& grid);
PillarGrid read_grid(std::istream& in);
void save_grid(const std::filesystem::path& path, const PillarGrid& grid);
PillarGrid load_grid(const std::filesystem::path& path);

}  // namespace colc
