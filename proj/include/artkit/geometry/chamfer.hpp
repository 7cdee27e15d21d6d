#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "artkit/geometry/mesh.hpp"

namespace artkit::geom {

// Exact nearest-neighbor structure: median-split kd-tree with
// branch-and-bound queries. No approximation anywhere.
class KdTree {
 public:
  explicit KdTree(const std::vector<Vec3>& points) : pts_(points) {
    if (pts_.empty()) throw std::invalid_argument("KdTree: empty point set");
    order_.resize(pts_.size());
    std::iota(order_.begin(), order_.end(), 0);
    nodes_.reserve(2 * pts_.size());
    root_ = build(0, int(pts_.size()));
  }

  // Squared distance to the nearest stored point.
  double nearest_sq(const Vec3& q) const {
    double best = std::numeric_limits<double>::max();
    search(root_, q, best);
    return best;
  }

 private:
  struct Node {
    int axis = 0;
    double split = 0;
    int point = -1;          // leaf payload start in order_
    int count = 0;           // leaf payload length
    int left = -1, right = -1;
  };

  int build(int begin, int end) {
    Node node;
    if (end - begin <= 8) {
      node.point = begin;
      node.count = end - begin;
      nodes_.push_back(node);
      return int(nodes_.size()) - 1;
    }
    Vec3 lo = Vec3::Constant(1e30), hi = Vec3::Constant(-1e30);
    for (int i = begin; i < end; ++i) {
      lo = lo.cwiseMin(pts_[size_t(order_[size_t(i)])]);
      hi = hi.cwiseMax(pts_[size_t(order_[size_t(i)])]);
    }
    Vec3 extent = hi - lo;
    int axis = 0;
    if (extent.y() > extent.x()) axis = 1;
    if (extent.z() > extent[axis]) axis = 2;
    int mid = (begin + end) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid,
                     order_.begin() + end, [&](int a, int b) {
                       return pts_[size_t(a)][axis] < pts_[size_t(b)][axis];
                     });
    node.axis = axis;
    node.split = pts_[size_t(order_[size_t(mid)])][axis];
    int self = int(nodes_.size());
    nodes_.push_back(node);
    int left = build(begin, mid);
    int right = build(mid, end);
    nodes_[size_t(self)].left = left;
    nodes_[size_t(self)].right = right;
    return self;
  }

  void search(int idx, const Vec3& q, double& best) const {
    const Node& node = nodes_[size_t(idx)];
    if (node.point >= 0) {
      for (int i = 0; i < node.count; ++i) {
        double d = (pts_[size_t(order_[size_t(node.point + i)])] - q).squaredNorm();
        best = std::min(best, d);
      }
      return;
    }
    double delta = q[node.axis] - node.split;
    int near = delta < 0 ? node.left : node.right;
    int far = delta < 0 ? node.right : node.left;
    search(near, q, best);
    if (delta * delta < best) search(far, q, best);
  }

  const std::vector<Vec3>& pts_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

// Symmetric chamfer distance between point sets: the average of the two
// directed means of squared nearest-neighbor distances. Singleton sets at
// distance d give exactly d^2.
inline double chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("chamfer: empty point set");
  KdTree ta(a), tb(b);
  double sum_ab = 0, sum_ba = 0;
  for (const auto& p : a) sum_ab += tb.nearest_sq(p);
  for (const auto& p : b) sum_ba += ta.nearest_sq(p);
  return 0.5 * (sum_ab / double(a.size()) + sum_ba / double(b.size()));
}

}  // namespace artkit::geom
