#include "colc/pillars.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <tuple>

#include "colc/binary_io.hpp"
#include "colc/error.hpp"

namespace colc {

void GridSpec::validate() const {
  if (!(cell > 0.0) || !std::isfinite(cell)) {
    throw ParameterError("grid.cell must be > 0");
  }
  if (H <= 0 || W <= 0) throw ParameterError("grid.H and grid.W must be > 0");
  if (C < kPillarStatChannels) {
    throw ParameterError("grid.C must be >= " + std::to_string(kPillarStatChannels));
  }
  if (!std::isfinite(x_min) || !std::isfinite(y_min)) {
    throw ParameterError("grid origin must be finite");
  }
}

PillarGrid::PillarGrid(const GridSpec& spec, std::vector<double> data)
    : spec_(spec), data_(std::move(data)) {
  if (data_.size() != spec_.values()) {
    throw ParameterError("PillarGrid: data size does not match H*W*C");
  }
}

bool PillarGrid::occupied(int row, int col) const {
  const double* v = data_.data() + offset(row, col);
  for (int c = 0; c < spec_.C; ++c) {
    if (v[c] != 0.0) return true;
  }
  return false;
}

std::size_t OccupancyMask::count() const {
  return static_cast<std::size_t>(std::count(data.begin(), data.end(), 1));
}

void PatchLayout::check(const GridSpec& spec) const {
  if (p <= 0) throw ParameterError("patch edge must be > 0");
  if (spec.H % p != 0 || spec.W % p != 0) {
    throw ParameterError("grid H=" + std::to_string(spec.H) + ", W=" +
                         std::to_string(spec.W) +
                         " not divisible by patch edge " + std::to_string(p));
  }
}

bool cell_of(const GridSpec& spec, double x, double y, int& row, int& col) {
  const double fc = std::floor((x - spec.x_min) / spec.cell);
  const double fr = std::floor((y - spec.y_min) / spec.cell);
  if (!(fc >= 0.0 && fc < spec.W && fr >= 0.0 && fr < spec.H)) return false;
  col = static_cast<int>(fc);
  row = static_cast<int>(fr);
  return true;
}

PillarGrid pillarize(std::span<const PointCloud* const> clouds,
                     const GridSpec& spec) {
  spec.validate();
  PillarGrid grid(spec);

  struct Binned {
    std::size_t cell;
    const Point3* p;
  };
  std::vector<Binned> binned;
  std::size_t total = 0;
  for (const auto* c : clouds) total += c->size();
  binned.reserve(total);
  for (const auto* cloud : clouds) {
    for (const auto& p : cloud->points) {
      int row = 0, col = 0;
      if (!cell_of(spec, p.x, p.y, row, col)) continue;
      binned.push_back({static_cast<std::size_t>(row) * spec.W + col, &p});
    }
  }
  // A fixed order inside each cell makes the floating-point sums, and
  // therefore the grid, independent of input point order.
  std::sort(binned.begin(), binned.end(), [](const Binned& a, const Binned& b) {
    return std::tie(a.cell, a.p->x, a.p->y, a.p->z, a.p->intensity) <
           std::tie(b.cell, b.p->x, b.p->y, b.p->z, b.p->intensity);
  });

  for (std::size_t i = 0; i < binned.size();) {
    const std::size_t cell = binned[i].cell;
    const int row = static_cast<int>(cell / spec.W);
    const int col = static_cast<int>(cell % spec.W);
    const double x0 = spec.x_min + col * spec.cell;
    const double y0 = spec.y_min + row * spec.cell;
    double sdx = 0, sdy = 0, sz = 0, si = 0;
    double zmax = -1e300, zmin = 1e300;
    std::size_t n = 0;
    for (; i < binned.size() && binned[i].cell == cell; ++i, ++n) {
      const Point3& p = *binned[i].p;
      sdx += p.x - x0;
      sdy += p.y - y0;
      sz += p.z;
      si += p.intensity;
      zmax = std::max(zmax, p.z);
      zmin = std::min(zmin, p.z);
    }
    const double dn = static_cast<double>(n);
    double* v = grid.data().data() + grid.offset(row, col);
    v[0] = static_cast<double>(std::min<std::size_t>(n, kCountSaturation)) / kCountSaturation;
    v[1] = sdx / dn / spec.cell;
    v[2] = sdy / dn / spec.cell;
    v[3] = sz / dn / kHeightScale;
    v[4] = zmax / kHeightScale;
    v[5] = zmin / kHeightScale;
    v[6] = si / dn;
    v[7] = 1.0;
  }
  return grid;
}

PillarGrid pillarize(const PointCloud& cloud, const GridSpec& spec) {
  const PointCloud* one[] = {&cloud};
  return pillarize(std::span<const PointCloud* const>(one), spec);
}

OccupancyMask occupancy_of(const PillarGrid& grid) {
  const GridSpec& spec = grid.spec();
  OccupancyMask mask{spec, std::vector<std::uint8_t>(spec.cells(), 0)};
  for (int r = 0; r < spec.H; ++r) {
    for (int c = 0; c < spec.W; ++c) {
      const double* v = grid.data().data() + grid.offset(r, c);
      double sum = 0.0;
      for (int ch = 0; ch < spec.C; ++ch) sum += std::abs(v[ch]);
      mask.data[static_cast<std::size_t>(r) * spec.W + c] = sum > 0.0 ? 1 : 0;
    }
  }
  return mask;
}

namespace {

// Visits every (patch, cell-within-patch) pair in layout order.
template <typename Fn>
void for_each_patch_cell(const GridSpec& spec, const PatchLayout& layout, Fn&& fn) {
  const int p = layout.p;
  const int tiles_w = spec.W / p;
  const int tiles_h = spec.H / p;
  for (int tr = 0; tr < tiles_h; ++tr) {
    for (int tc = 0; tc < tiles_w; ++tc) {
      const auto patch = static_cast<std::size_t>(tr) * tiles_w + tc;
      for (int r = 0; r < p; ++r) {
        for (int c = 0; c < p; ++c) {
          fn(patch, static_cast<std::size_t>(r) * p + c, tr * p + r, tc * p + c);
        }
      }
    }
  }
}

}  // namespace

Matrix patchify(const PillarGrid& grid, const PatchLayout& layout) {
  const GridSpec& spec = grid.spec();
  layout.check(spec);
  Matrix out(static_cast<std::size_t>(layout.patch_count(spec)),
             static_cast<std::size_t>(layout.patch_dim(spec)));
  const auto C = static_cast<std::size_t>(spec.C);
  for_each_patch_cell(spec, layout, [&](std::size_t patch, std::size_t k, int row, int col) {
    const double* src = grid.data().data() + grid.offset(row, col);
    std::copy(src, src + C, out.row(patch) + k * C);
  });
  return out;
}

PillarGrid unpatchify(const Matrix& patches, const PatchLayout& layout,
                      const GridSpec& spec) {
  layout.check(spec);
  if (patches.rows != static_cast<std::size_t>(layout.patch_count(spec)) ||
      patches.cols != static_cast<std::size_t>(layout.patch_dim(spec))) {
    throw ParameterError("unpatchify: matrix is " + std::to_string(patches.rows) +
                         "x" + std::to_string(patches.cols) +
                         ", layout expects " + std::to_string(layout.patch_count(spec)) +
                         "x" + std::to_string(layout.patch_dim(spec)));
  }
  PillarGrid grid(spec);
  const auto C = static_cast<std::size_t>(spec.C);
  for_each_patch_cell(spec, layout, [&](std::size_t patch, std::size_t k, int row, int col) {
    const double* src = patches.row(patch) + k * C;
    std::copy(src, src + C, grid.data().data() + grid.offset(row, col));
  });
  return grid;
}

Matrix patchify_field(const std::vector<double>& field, const GridSpec& spec,
                      const PatchLayout& layout) {
  layout.check(spec);
  if (field.size() != spec.cells()) {
    throw ParameterError("patchify_field: field size does not match H*W");
  }
  Matrix out(static_cast<std::size_t>(layout.patch_count(spec)),
             static_cast<std::size_t>(layout.p) * layout.p);
  for_each_patch_cell(spec, layout, [&](std::size_t patch, std::size_t k, int row, int col) {
    out(patch, k) = field[static_cast<std::size_t>(row) * spec.W + col];
  });
  return out;
}

std::vector<double> unpatchify_field(const Matrix& patches, const GridSpec& spec,
                                     const PatchLayout& layout) {
  layout.check(spec);
  if (patches.rows != static_cast<std::size_t>(layout.patch_count(spec)) ||
      patches.cols != static_cast<std::size_t>(layout.p) * layout.p) {
    throw ParameterError("unpatchify_field: matrix shape does not match layout");
  }
  std::vector<double> field(spec.cells(), 0.0);
  for_each_patch_cell(spec, layout, [&](std::size_t patch, std::size_t k, int row, int col) {
    field[static_cast<std::size_t>(row) * spec.W + col] = patches(patch, k);
  });
  return field;
}

// ---------------------------------------------------------------------------
// Serialization

void write_grid(std::ostream& out, const PillarGrid& grid) {
  const GridSpec& s = grid.spec();
  io::write_magic(out, "CGRD", 1);
  io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.H));
  io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.W));
  io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.C));
  for (const double v : {s.x_min, s.y_min, s.cell, static_cast<double>(s.H),
                         static_cast<double>(s.W), static_cast<double>(s.C),
                         static_cast<double>(kCountSaturation), kHeightScale}) {
    io::write_pod<double>(out, v);
  }
  for (const double v : grid.data()) io::write_pod<float>(out, static_cast<float>(v));
}

PillarGrid read_grid(std::istream& in) {
  io::expect_magic(in, "CGRD", 1);
  GridSpec s;
  s.H = static_cast<int>(io::read_pod<std::uint32_t>(in, "H"));
  s.W = static_cast<int>(io::read_pod<std::uint32_t>(in, "W"));
  s.C = static_cast<int>(io::read_pod<std::uint32_t>(in, "C"));
  double fields[8];
  for (double& f : fields) f = io::read_pod<double>(in, "grid spec");
  s.x_min = fields[0];
  s.y_min = fields[1];
  s.cell = fields[2];
  if (fields[3] != s.H || fields[4] != s.W || fields[5] != s.C) {
    throw IoError("CGRD: spec block disagrees with header dimensions");
  }
  try {
    s.validate();
  } catch (const ParameterError& e) {
    throw IoError(std::string("CGRD: ") + e.what());
  }
  std::vector<double> data(s.values());
  for (double& v : data) v = io::read_pod<float>(in, "grid data");
  return PillarGrid(s, std::move(data));
}

void save_grid(const std::filesystem::path& path, const PillarGrid& grid) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  write_grid(out, grid);
  if (!out) throw IoError("write failed: " + path.string());
}

PillarGrid load_grid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  try {
    return read_grid(in);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace colc
