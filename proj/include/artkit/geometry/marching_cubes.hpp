#pragma once

#include <unordered_map>
#include <vector>

#include "artkit/geometry/analytic_sdf.hpp"
#include "artkit/geometry/mc_tables.hpp"
#include "artkit/geometry/mesh.hpp"

namespace artkit::geom {

// Standard 256-case marching cubes over a sampled scalar grid.
// `values` holds (res+1)^3 samples at the lattice corners, x fastest.
// Vertices land on cell edges via linear interpolation, so they sit within
// one cell of the true iso-surface. Shared edges are welded through an edge
// key map, which keeps the output watertight whenever the surface does not
// leave the sampled box.
inline Mesh marching_cubes_grid(const std::vector<double>& values, int res,
                                const Vec3& lo, const Vec3& hi,
                                double iso = 0.0) {
  const int n = res + 1;
  auto at = [&](int x, int y, int z) -> double {
    return values[(size_t(z) * n + size_t(y)) * n + size_t(x)];
  };
  Vec3 cell = (hi - lo) / double(res);
  Mesh mesh;
  std::unordered_map<uint64_t, int> edge_vertex;

  auto corner_pos = [&](int x, int y, int z) -> Vec3 {
    return lo + Vec3(x * cell.x(), y * cell.y(), z * cell.z());
  };
  // Unique key for the lattice edge between two corner indices.
  auto edge_key = [&](int x0, int y0, int z0, int x1, int y1, int z1) {
    uint64_t a = (uint64_t(z0) * n + uint64_t(y0)) * n + uint64_t(x0);
    uint64_t b = (uint64_t(z1) * n + uint64_t(y1)) * n + uint64_t(x1);
    if (a > b) std::swap(a, b);
    return a * uint64_t(n) * n * n + b;
  };

  int corner_xyz[8][3];
  for (int z = 0; z < res; ++z)
    for (int y = 0; y < res; ++y)
      for (int x = 0; x < res; ++x) {
        double corner_val[8];
        int cube_index = 0;
        for (int c = 0; c < 8; ++c) {
          corner_xyz[c][0] = x + mc::kCornerOffset[size_t(c)][0];
          corner_xyz[c][1] = y + mc::kCornerOffset[size_t(c)][1];
          corner_xyz[c][2] = z + mc::kCornerOffset[size_t(c)][2];
          corner_val[c] =
              at(corner_xyz[c][0], corner_xyz[c][1], corner_xyz[c][2]);
          if (corner_val[c] < iso) cube_index |= 1 << c;
        }
        uint16_t edges = mc::kEdgeTable[size_t(cube_index)];
        if (edges == 0) continue;

        int edge_vid[12];
        for (int e = 0; e < 12; ++e) {
          if (!(edges & (1 << e))) continue;
          int ca = mc::kEdgeCorners[size_t(e)][0];
          int cb = mc::kEdgeCorners[size_t(e)][1];
          uint64_t key =
              edge_key(corner_xyz[ca][0], corner_xyz[ca][1], corner_xyz[ca][2],
                       corner_xyz[cb][0], corner_xyz[cb][1], corner_xyz[cb][2]);
          auto it = edge_vertex.find(key);
          if (it != edge_vertex.end()) {
            edge_vid[e] = it->second;
            continue;
          }
          double va = corner_val[ca], vb = corner_val[cb];
          double t = (va == vb) ? 0.5 : (iso - va) / (vb - va);
          t = std::min(1.0, std::max(0.0, t));
          Vec3 pa = corner_pos(corner_xyz[ca][0], corner_xyz[ca][1],
                               corner_xyz[ca][2]);
          Vec3 pb = corner_pos(corner_xyz[cb][0], corner_xyz[cb][1],
                               corner_xyz[cb][2]);
          edge_vid[e] = int(mesh.vertices.size());
          mesh.vertices.push_back(pa + t * (pb - pa));
          edge_vertex[key] = edge_vid[e];
        }

        const auto& tris = mc::kTriTable[size_t(cube_index)];
        for (int k = 0; tris[size_t(k)] != -1; k += 3) {
          mesh.triangles.push_back({edge_vid[tris[size_t(k)]],
                                    edge_vid[tris[size_t(k) + 1]],
                                    edge_vid[tris[size_t(k) + 2]]});
        }
      }
  return cleanup_mesh(mesh);
}

inline Mesh marching_cubes(const ScalarField& field, const Vec3& lo,
                           const Vec3& hi, int res, double iso = 0.0) {
  if (res < 2)
    throw std::invalid_argument("marching_cubes: res must be >= 2");
  const int n = res + 1;
  std::vector<double> values(size_t(n) * n * n);
  Vec3 cell = (hi - lo) / double(res);
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x)
        values[(size_t(z) * n + size_t(y)) * n + size_t(x)] =
            field(lo + Vec3(x * cell.x(), y * cell.y(), z * cell.z()));
  return marching_cubes_grid(values, res, lo, hi, iso);
}

}  // namespace artkit::geom
