#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "artkit/rng.hpp"

namespace artkit::geom {

using Vec3 = Eigen::Vector3d;
using Mat4 = Eigen::Matrix4d;

struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;

  bool empty() const { return triangles.empty(); }

  double triangle_area(size_t f) const {
    const Vec3& a = vertices[size_t(triangles[f][0])];
    const Vec3& b = vertices[size_t(triangles[f][1])];
    const Vec3& c = vertices[size_t(triangles[f][2])];
    return 0.5 * (b - a).cross(c - a).norm();
  }

  double surface_area() const {
    double s = 0;
    for (size_t f = 0; f < triangles.size(); ++f) s += triangle_area(f);
    return s;
  }

  Vec3 bbox_min() const {
    Vec3 m = Vec3::Constant(1e30);
    for (const auto& v : vertices) m = m.cwiseMin(v);
    return m;
  }
  Vec3 bbox_max() const {
    Vec3 m = Vec3::Constant(-1e30);
    for (const auto& v : vertices) m = m.cwiseMax(v);
    return m;
  }

  void transform(const Mat4& t) {
    for (auto& v : vertices)
      v = t.block<3, 3>(0, 0) * v + t.block<3, 1>(0, 3);
  }

  void append(const Mesh& other) {
    int base = int(vertices.size());
    vertices.insert(vertices.end(), other.vertices.begin(),
                    other.vertices.end());
    for (auto tri : other.triangles) {
      for (int k = 0; k < 3; ++k) tri[size_t(k)] += base;
      triangles.push_back(tri);
    }
  }
};

// Merges vertices closer than `weld_eps` and drops zero-area triangles.
inline Mesh cleanup_mesh(const Mesh& in, double weld_eps = 1e-9) {
  Mesh out;
  std::map<std::array<int64_t, 3>, int> lookup;
  std::vector<int> remap(in.vertices.size());
  const double inv = 1.0 / weld_eps;
  for (size_t i = 0; i < in.vertices.size(); ++i) {
    const Vec3& v = in.vertices[i];
    std::array<int64_t, 3> key = {int64_t(std::llround(v.x() * inv)),
                                  int64_t(std::llround(v.y() * inv)),
                                  int64_t(std::llround(v.z() * inv))};
    auto it = lookup.find(key);
    if (it == lookup.end()) {
      lookup[key] = int(out.vertices.size());
      remap[i] = int(out.vertices.size());
      out.vertices.push_back(v);
    } else {
      remap[i] = it->second;
    }
  }
  for (const auto& tri : in.triangles) {
    std::array<int, 3> t = {remap[size_t(tri[0])], remap[size_t(tri[1])],
                            remap[size_t(tri[2])]};
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) continue;
    const Vec3& a = out.vertices[size_t(t[0])];
    const Vec3& b = out.vertices[size_t(t[1])];
    const Vec3& c = out.vertices[size_t(t[2])];
    if ((b - a).cross(c - a).norm() < 1e-18) continue;
    out.triangles.push_back(t);
  }
  return out;
}

// Area-weighted triangle pick, then uniform barycentric point.
inline std::vector<Vec3> sample_surface(const Mesh& mesh, int n, Rng& rng) {
  if (mesh.empty())
    throw std::invalid_argument("sample_surface: empty mesh");
  std::vector<double> cdf(mesh.triangles.size());
  double acc = 0;
  for (size_t f = 0; f < mesh.triangles.size(); ++f) {
    acc += mesh.triangle_area(f);
    cdf[f] = acc;
  }
  if (acc <= 0)
    throw std::invalid_argument("sample_surface: zero total area");
  std::vector<Vec3> pts;
  pts.reserve(size_t(n));
  for (int i = 0; i < n; ++i) {
    double u = rng.uniform() * acc;
    size_t f = size_t(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    if (f >= cdf.size()) f = cdf.size() - 1;
    double r1 = std::sqrt(rng.uniform());
    double r2 = rng.uniform();
    double wa = 1.0 - r1, wb = r1 * (1.0 - r2), wc = r1 * r2;
    const auto& tri = mesh.triangles[f];
    pts.push_back(wa * mesh.vertices[size_t(tri[0])] +
                  wb * mesh.vertices[size_t(tri[1])] +
                  wc * mesh.vertices[size_t(tri[2])]);
  }
  return pts;
}

// Wavefront OBJ with 1-based indices.
inline void write_obj(const Mesh& mesh, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_obj: cannot open " + path);
  out.precision(17);
  for (const auto& v : mesh.vertices)
    out << "v " << v.x() << " " << v.y() << " " << v.z() << "\n";
  for (const auto& f : mesh.triangles)
    out << "f " << f[0] + 1 << " " << f[1] + 1 << " " << f[2] + 1 << "\n";
  if (!out) throw std::runtime_error("write_obj: write failed: " + path);
}

// f32 little-endian xyz triples.
inline void write_pointcloud(const std::vector<Vec3>& pts,
                             const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("write_pointcloud: cannot open " + path);
  for (const auto& p : pts) {
    float xyz[3] = {float(p.x()), float(p.y()), float(p.z())};
    out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
  }
}

}  // namespace artkit::geom
