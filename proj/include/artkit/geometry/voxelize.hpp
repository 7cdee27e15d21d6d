#pragma once

#include <bit>
#include <cstdint>
#include <vector>

#include "artkit/geometry/analytic_sdf.hpp"
#include "artkit/geometry/mesh.hpp"

namespace artkit::geom {

// Cubic occupancy grid: res^3 cells of edge `cell`, anchored at `origin`
// (minimum corner). Occupancy is packed into 64-bit blocks.
struct VoxelGrid {
  Vec3 origin = Vec3::Zero();
  double cell = 1.0;
  int res = 0;
  std::vector<uint64_t> bits;

  static VoxelGrid make(const Vec3& origin, double cell, int res) {
    VoxelGrid g;
    g.origin = origin;
    g.cell = cell;
    g.res = res;
    size_t n = size_t(res) * size_t(res) * size_t(res);
    g.bits.assign((n + 63) / 64, 0);
    return g;
  }

  size_t index(int x, int y, int z) const {
    return (size_t(z) * size_t(res) + size_t(y)) * size_t(res) + size_t(x);
  }
  bool get(int x, int y, int z) const {
    size_t i = index(x, y, z);
    return (bits[i >> 6] >> (i & 63)) & 1;
  }
  void set(int x, int y, int z) {
    size_t i = index(x, y, z);
    bits[i >> 6] |= uint64_t(1) << (i & 63);
  }

  Vec3 cell_center(int x, int y, int z) const {
    return origin + cell * Vec3(x + 0.5, y + 0.5, z + 0.5);
  }

  int64_t count() const {
    int64_t c = 0;
    for (uint64_t b : bits) c += std::popcount(b);
    return c;
  }

  double cell_volume() const { return cell * cell * cell; }
  double volume() const { return double(count()) * cell_volume(); }

  bool same_frame(const VoxelGrid& o) const {
    return res == o.res && cell == o.cell &&
           (origin - o.origin).norm() < 1e-12;
  }
};

// Cell occupied iff its center lies inside (SDF <= 0).
inline VoxelGrid voxelize_sdf(const ScalarField& field, const Vec3& origin,
                              double cell, int res) {
  VoxelGrid g = VoxelGrid::make(origin, cell, res);
  for (int z = 0; z < res; ++z)
    for (int y = 0; y < res; ++y)
      for (int x = 0; x < res; ++x)
        if (field(g.cell_center(x, y, z)) <= 0.0) g.set(x, y, z);
  return g;
}

// Cell-center parity test against the mesh: cast a +z ray per (x, y) cell
// column, collect triangle crossings, occupy centers between odd/even pairs.
// Column coordinates carry a tiny deterministic offset so rays do not pass
// exactly through shared edges or vertices.
inline VoxelGrid voxelize_mesh(const Mesh& mesh, const Vec3& origin,
                               double cell, int res) {
  VoxelGrid g = VoxelGrid::make(origin, cell, res);
  if (mesh.empty()) return g;
  const double jx = 0.49999741 * cell;  // just off center, deterministic
  const double jy = 0.50000259 * cell;
  std::vector<double> crossings;
  for (int y = 0; y < res; ++y) {
    double cy = origin.y() + y * cell + jy;
    for (int x = 0; x < res; ++x) {
      double cx = origin.x() + x * cell + jx;
      crossings.clear();
      for (const auto& tri : mesh.triangles) {
        const Vec3& a = mesh.vertices[size_t(tri[0])];
        const Vec3& b = mesh.vertices[size_t(tri[1])];
        const Vec3& c = mesh.vertices[size_t(tri[2])];
        // 2D barycentric test in the xy plane.
        double d00x = b.x() - a.x(), d00y = b.y() - a.y();
        double d01x = c.x() - a.x(), d01y = c.y() - a.y();
        double det = d00x * d01y - d01x * d00y;
        if (det == 0.0) continue;
        double px = cx - a.x(), py = cy - a.y();
        double u = (px * d01y - d01x * py) / det;
        double v = (d00x * py - px * d00y) / det;
        if (u < 0.0 || v < 0.0 || u + v > 1.0) continue;
        crossings.push_back(a.z() + u * (b.z() - a.z()) + v * (c.z() - a.z()));
      }
      if (crossings.size() < 2) continue;
      std::sort(crossings.begin(), crossings.end());
      for (size_t k = 0; k + 1 < crossings.size(); k += 2) {
        double z0 = crossings[k], z1 = crossings[k + 1];
        int i0 = int(std::ceil((z0 - origin.z()) / cell - 0.5));
        int i1 = int(std::floor((z1 - origin.z()) / cell - 0.5));
        i0 = std::max(i0, 0);
        i1 = std::min(i1, res - 1);
        for (int zc = i0; zc <= i1; ++zc) {
          double center_z = origin.z() + (zc + 0.5) * cell;
          if (center_z >= z0 && center_z <= z1) g.set(x, y, zc);
        }
      }
    }
  }
  return g;
}

// Volume intersection over union of two grids in the same frame. An empty
// union gives 0.
inline double viou(const VoxelGrid& a, const VoxelGrid& b) {
  if (!a.same_frame(b))
    throw std::invalid_argument("viou: grids are not in the same frame");
  int64_t inter = 0, uni = 0;
  for (size_t i = 0; i < a.bits.size(); ++i) {
    inter += std::popcount(a.bits[i] & b.bits[i]);
    uni += std::popcount(a.bits[i] | b.bits[i]);
  }
  if (uni == 0) return 0.0;
  return double(inter) / double(uni);
}

}  // namespace artkit::geom
