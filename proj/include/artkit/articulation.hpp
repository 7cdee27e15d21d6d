#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace artkit::artic {

using Vec3 = Eigen::Vector3d;
using Mat4 = Eigen::Matrix4d;

inline constexpr int kNoParent = -1;
inline constexpr double kUnitDirTol = 1e-6;

// One rigid part. Joint fields describe motion relative to the parent:
// axis j = (origin, unit direction), limit l = [t_min, t_max, r_min, r_max]
// (translation in length units, rotation in radians). A fixed joint has all
// four limit entries equal to zero. All coordinates are global rest pose.
struct PartNode {
  int fa = kNoParent;
  std::array<double, 6> b{};  // [xmin, ymin, zmin, xmax, ymax, zmax]
  std::vector<double> z;      // geometry latent, length d_z
  std::array<double, 6> j{0, 0, 0, 0, 0, 1};
  std::array<double, 4> l{};
  std::string label;

  Vec3 axis_origin() const { return Vec3(j[0], j[1], j[2]); }
  Vec3 axis_dir() const { return Vec3(j[3], j[4], j[5]); }
  Vec3 bbox_min() const { return Vec3(b[0], b[1], b[2]); }
  Vec3 bbox_max() const { return Vec3(b[3], b[4], b[5]); }
  Vec3 bbox_center() const { return 0.5 * (bbox_min() + bbox_max()); }

  double t_min() const { return l[0]; }
  double t_max() const { return l[1]; }
  double r_min() const { return l[2]; }
  double r_max() const { return l[3]; }

  bool is_fixed_joint() const {
    return l[0] == 0 && l[1] == 0 && l[2] == 0 && l[3] == 0;
  }
  bool has_translation() const { return l[1] - l[0] != 0; }
  bool has_rotation() const { return l[3] - l[2] != 0; }
};

// Parts in topological order: node 0 is the root (fa == kNoParent) and every
// other node references an earlier index.
struct ArticTree {
  std::vector<PartNode> nodes;

  int root() const {
    for (size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i].fa == kNoParent) return int(i);
    return -1;
  }

  std::vector<std::vector<int>> children() const {
    std::vector<std::vector<int>> out(nodes.size());
    for (size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i].fa != kNoParent && nodes[i].fa >= 0 &&
          nodes[i].fa < int(nodes.size()))
        out[size_t(nodes[i].fa)].push_back(int(i));
    return out;
  }

  // Indices on the root -> i path, inclusive of both ends.
  std::vector<int> path_from_root(int i) const {
    std::vector<int> path;
    int cur = i;
    while (cur != kNoParent) {
      path.push_back(cur);
      cur = nodes[size_t(cur)].fa;
      if (path.size() > nodes.size())
        throw std::logic_error("path_from_root: parent cycle at node " +
                               std::to_string(i));
    }
    std::reverse(path.begin(), path.end());
    return path;
  }

  int depth_of(int i) const { return int(path_from_root(i).size()); }

  int max_depth() const {
    int d = 0;
    for (size_t i = 0; i < nodes.size(); ++i)
      d = std::max(d, depth_of(int(i)));
    return d;
  }
};

// Per-node joint state: translation amount and rotation angle.
struct JointState {
  std::vector<std::pair<double, double>> tr;  // (t, r) per node
};

struct Violation {
  int node;
  std::string rule;
  std::string message;
};

// Empty result iff every type invariant holds. Violations are data.
inline std::vector<Violation> validate_tree(const ArticTree& tree) {
  std::vector<Violation> out;
  if (tree.nodes.empty()) {
    out.push_back({-1, "empty-tree", "tree has no nodes"});
    return out;
  }
  int roots = 0;
  for (size_t i = 0; i < tree.nodes.size(); ++i) {
    const PartNode& n = tree.nodes[i];
    int idx = int(i);
    if (n.fa == kNoParent) {
      ++roots;
    } else if (n.fa < 0 || n.fa >= int(tree.nodes.size()) || n.fa >= idx) {
      out.push_back({idx, "forward-parent-reference",
                     "node " + std::to_string(idx) + " references parent " +
                         std::to_string(n.fa) +
                         " which is not an earlier index"});
    }
    for (int k = 0; k < 3; ++k) {
      if (!(n.b[size_t(k)] <= n.b[size_t(k) + 3]))
        out.push_back({idx, "bbox-order",
                       "bbox min exceeds max on axis " + std::to_string(k) +
                           " at node " + std::to_string(idx)});
    }
    double norm = n.axis_dir().norm();
    if (std::abs(norm - 1.0) > kUnitDirTol)
      out.push_back({idx, "non-unit-direction",
                     "non-unit direction at node " + std::to_string(idx) +
                         " (norm " + std::to_string(norm) + ")"});
    if (!(n.l[0] <= n.l[1]))
      out.push_back({idx, "limit-order",
                     "t_min > t_max at node " + std::to_string(idx)});
    if (!(n.l[2] <= n.l[3]))
      out.push_back({idx, "limit-order",
                     "r_min > r_max at node " + std::to_string(idx)});
    for (double v : n.b)
      if (!std::isfinite(v))
        out.push_back({idx, "non-finite", "non-finite bbox at node " +
                                              std::to_string(idx)});
    for (double v : n.z)
      if (!std::isfinite(v)) {
        out.push_back({idx, "non-finite", "non-finite latent at node " +
                                              std::to_string(idx)});
        break;
      }
  }
  if (roots != 1)
    out.push_back({-1, "root-count", "expected exactly one parentless node, found " +
                                         std::to_string(roots)});
  return out;
}

// Packed token layout: [fa, b(6), z(d_z), j(6), l(4)]; the root stores -1 in
// the fa slot.
inline std::vector<double> pack_token(const PartNode& node, int d_z) {
  if (int(node.z.size()) != d_z)
    throw std::invalid_argument("pack_token: latent dimension " +
                                std::to_string(node.z.size()) +
                                " does not match d_z " + std::to_string(d_z));
  std::vector<double> tok;
  tok.reserve(size_t(1 + 6 + d_z + 6 + 4));
  tok.push_back(double(node.fa));
  tok.insert(tok.end(), node.b.begin(), node.b.end());
  tok.insert(tok.end(), node.z.begin(), node.z.end());
  tok.insert(tok.end(), node.j.begin(), node.j.end());
  tok.insert(tok.end(), node.l.begin(), node.l.end());
  return tok;
}

inline PartNode unpack_token(const std::vector<double>& tok, int d_z) {
  if (int(tok.size()) != 1 + 6 + d_z + 6 + 4)
    throw std::invalid_argument("unpack_token: token length " +
                                std::to_string(tok.size()) +
                                " does not match d_z " + std::to_string(d_z));
  PartNode n;
  n.fa = int(std::llround(tok[0]));
  size_t off = 1;
  for (int k = 0; k < 6; ++k) n.b[size_t(k)] = tok[off++];
  n.z.assign(tok.begin() + long(off), tok.begin() + long(off) + d_z);
  off += size_t(d_z);
  for (int k = 0; k < 6; ++k) n.j[size_t(k)] = tok[off++];
  for (int k = 0; k < 4; ++k) n.l[size_t(k)] = tok[off++];
  return n;
}

inline Mat4 translation(const Vec3& t) {
  Mat4 m = Mat4::Identity();
  m.block<3, 1>(0, 3) = t;
  return m;
}

// Right-hand-rule rotation about the unit axis d through the origin.
inline Mat4 rotation_about(const Vec3& d, double angle) {
  Mat4 m = Mat4::Identity();
  m.block<3, 3>(0, 0) = Eigen::AngleAxisd(angle, d).toRotationMatrix();
  return m;
}

// Rigid transform of a joint at state (t, r): rotate by r about the axis
// through the origin point, after translating by t along the direction.
//   T = Translate(o) * Rotate(d, r) * Translate(-o) * Translate(d * t)
inline Mat4 joint_transform(const std::array<double, 6>& j, double t,
                            double r) {
  Vec3 o(j[0], j[1], j[2]);
  Vec3 d(j[3], j[4], j[5]);
  return translation(o) * rotation_about(d, r) * translation(-o) *
         translation(d * t);
}

inline Mat4 joint_transform(const PartNode& n, double t, double r) {
  return joint_transform(n.j, t, r);
}

// Per-node global transforms for the given joint state; the root is pinned
// at identity, children compose down the tree.
inline std::vector<Mat4> pose_tree(const ArticTree& tree,
                                   const JointState& state) {
  if (state.tr.size() != tree.nodes.size())
    throw std::invalid_argument("pose_tree: state has " +
                                std::to_string(state.tr.size()) +
                                " entries for " +
                                std::to_string(tree.nodes.size()) + " nodes");
  std::vector<Mat4> out(tree.nodes.size(), Mat4::Identity());
  for (size_t i = 0; i < tree.nodes.size(); ++i) {
    const PartNode& n = tree.nodes[i];
    if (n.fa == kNoParent) {
      out[i] = Mat4::Identity();
    } else {
      auto [t, r] = state.tr[i];
      out[i] = out[size_t(n.fa)] * joint_transform(n, t, r);
    }
  }
  return out;
}

// Joint state at openness ratio rho: each joint linearly interpolated
// between its lower and upper limits.
inline JointState state_at_openness(const ArticTree& tree, double rho) {
  JointState s;
  s.tr.reserve(tree.nodes.size());
  for (const PartNode& n : tree.nodes) {
    double t = n.t_min() + rho * (n.t_max() - n.t_min());
    double r = n.r_min() + rho * (n.r_max() - n.r_min());
    s.tr.emplace_back(t, r);
  }
  return s;
}

inline std::vector<Mat4> pose_at_openness(const ArticTree& tree, double rho) {
  return pose_tree(tree, state_at_openness(tree, rho));
}

inline Vec3 apply(const Mat4& m, const Vec3& p) {
  return m.block<3, 3>(0, 0) * p + m.block<3, 1>(0, 3);
}

}  // namespace artkit::artic
