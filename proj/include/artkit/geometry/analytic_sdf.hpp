#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace artkit::geom {

using Vec3 = Eigen::Vector3d;

using ScalarField = std::function<double(const Vec3&)>;

// Exact signed distances; negative inside.

inline double sdf_sphere(const Vec3& p, double r) { return p.norm() - r; }

inline double sdf_box(const Vec3& p, const Vec3& half) {
  Vec3 q = p.cwiseAbs() - half;
  Vec3 qp = q.cwiseMax(0.0);
  double outside = qp.norm();
  double inside = std::min(0.0, q.maxCoeff());
  return outside + inside;
}

inline double sdf_rounded_box(const Vec3& p, const Vec3& half, double round) {
  return sdf_box(p, half - Vec3::Constant(round)) - round;
}

// Capped cylinder, radius r, half-height hh, aligned with `axis` (0/1/2).
inline double sdf_cylinder(const Vec3& p, double r, double hh, int axis = 1) {
  int a = axis, u = (axis + 1) % 3, v = (axis + 2) % 3;
  double radial = std::hypot(p[u], p[v]) - r;
  double along = std::abs(p[a]) - hh;
  double outside = std::hypot(std::max(radial, 0.0), std::max(along, 0.0));
  double inside = std::min(0.0, std::max(radial, along));
  return outside + inside;
}

inline double sdf_union(double a, double b) { return std::min(a, b); }

// One translated primitive; a part is a union of these.
struct SdfPrim {
  enum class Kind { kBox, kSphere, kCylinder, kRoundedBox };
  Kind kind = Kind::kBox;
  Vec3 center = Vec3::Zero();
  // box/rounded_box: half extents; sphere: half.x() = radius;
  // cylinder: half radius in the two cross axes, half along `axis` = half height.
  Vec3 half = Vec3::Ones();
  double round = 0.0;
  int axis = 1;  // cylinder axis

  double eval(const Vec3& p) const {
    Vec3 q = p - center;
    switch (kind) {
      case Kind::kBox: return sdf_box(q, half);
      case Kind::kSphere: return sdf_sphere(q, half.x());
      case Kind::kCylinder: return sdf_cylinder(q, cylinder_radius(), half[axis], axis);
      case Kind::kRoundedBox: return sdf_rounded_box(q, half, round);
    }
    return 1e30;
  }

  double cylinder_radius() const {
    int u = (axis + 1) % 3;
    return half[u];
  }

  Vec3 bbox_min() const { return center - half; }
  Vec3 bbox_max() const { return center + half; }

  static const char* kind_name(Kind k) {
    switch (k) {
      case Kind::kBox: return "box";
      case Kind::kSphere: return "sphere";
      case Kind::kCylinder: return "cylinder";
      case Kind::kRoundedBox: return "rounded_box";
    }
    return "?";
  }
  static Kind kind_from_name(const std::string& s) {
    if (s == "box") return Kind::kBox;
    if (s == "sphere") return Kind::kSphere;
    if (s == "cylinder") return Kind::kCylinder;
    if (s == "rounded_box") return Kind::kRoundedBox;
    throw std::invalid_argument("unknown sdf primitive kind: " + s);
  }
};

// Union-of-primitives shape with an exact SDF (exact for disjoint or
// overlapping primitives alike outside; the union min is the standard
// combinator and is exact everywhere for these primitives' exteriors).
struct PartSdf {
  std::vector<SdfPrim> prims;

  bool empty() const { return prims.empty(); }

  double eval(const Vec3& p) const {
    double d = 1e30;
    for (const auto& prim : prims) d = std::min(d, prim.eval(p));
    return d;
  }

  ScalarField field() const {
    return [copy = *this](const Vec3& p) { return copy.eval(p); };
  }

  Vec3 bbox_min() const {
    Vec3 m = Vec3::Constant(1e30);
    for (const auto& p : prims) m = m.cwiseMin(p.bbox_min());
    return m;
  }
  Vec3 bbox_max() const {
    Vec3 m = Vec3::Constant(-1e30);
    for (const auto& p : prims) m = m.cwiseMax(p.bbox_max());
    return m;
  }

  // Structural rewrite under x -> (x - center) .* scale. Boxes rescale
  // exactly; cylinders require equal scale on their two cross axes.
  PartSdf normalized(const Vec3& center, const Vec3& scale) const {
    PartSdf out;
    out.prims.reserve(prims.size());
    for (SdfPrim p : prims) {
      p.center = (p.center - center).cwiseProduct(scale);
      if (p.kind == SdfPrim::Kind::kCylinder) {
        int u = (p.axis + 1) % 3, v = (p.axis + 2) % 3;
        if (std::abs(scale[u] - scale[v]) > 1e-9 * std::abs(scale[u]))
          throw std::invalid_argument(
              "PartSdf::normalized: anisotropic cross-section scale on a "
              "cylinder");
      } else if (p.kind == SdfPrim::Kind::kSphere) {
        double smin = scale.minCoeff(), smax = scale.maxCoeff();
        if (smax - smin > 1e-9 * smax)
          throw std::invalid_argument(
              "PartSdf::normalized: anisotropic scale on a sphere");
      } else if (p.kind == SdfPrim::Kind::kRoundedBox) {
        double smin = scale.minCoeff(), smax = scale.maxCoeff();
        if (smax - smin > 1e-9 * smax)
          throw std::invalid_argument(
              "PartSdf::normalized: anisotropic scale on a rounded box");
        p.round *= smin;
      }
      p.half = p.half.cwiseProduct(scale);
      out.prims.push_back(p);
    }
    return out;
  }
};

}  // namespace artkit::geom
