#include "asdf/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "asdf/common.hpp"

namespace asdf::metrics {

namespace {

constexpr int kLeafSize = 12;

// Same expression in the tree and the brute-force oracle so results are
// bitwise identical.
inline double dist2(const Vec3& a, const Vec3& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

inline double box_dist2(const Vec3& lo, const Vec3& hi, const Vec3& q) {
  double acc = 0;
  for (int a = 0; a < 3; ++a) {
    double d = 0;
    if (q[a] < lo[a]) d = lo[a] - q[a];
    else if (q[a] > hi[a]) d = q[a] - hi[a];
    acc += d * d;
  }
  return acc;
}

}  // namespace

KdTree::KdTree(std::span<const Vec3> reference) : pts_(reference.begin(), reference.end()) {
  if (pts_.empty()) throw InvalidParameter("KdTree: reference cloud is empty");
  order_.resize(pts_.size());
  for (std::size_t i = 0; i < pts_.size(); ++i) order_[i] = static_cast<int>(i);
  nodes_.reserve(2 * pts_.size() / kLeafSize + 8);
  root_ = build(0, static_cast<int>(pts_.size()));
}

int KdTree::build(int begin, int end) {
  Node n;
  n.begin = begin;
  n.end = end;
  Aabb box;
  for (int i = begin; i < end; ++i) box.expand(pts_[static_cast<std::size_t>(order_[static_cast<std::size_t>(i)])]);
  n.lo = box.lo;
  n.hi = box.hi;
  if (end - begin > kLeafSize) {
    const Vec3 ext = box.hi - box.lo;
    int axis = 0;
    if (ext.y > ext[axis]) axis = 1;
    if (ext.z > ext[axis]) axis = 2;
    const int mid = (begin + end) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [this, axis](int a, int b) {
                       const double va = pts_[static_cast<std::size_t>(a)][axis];
                       const double vb = pts_[static_cast<std::size_t>(b)][axis];
                       return va < vb || (va == vb && a < b);
                     });
    n.axis = axis;
    n.split = pts_[static_cast<std::size_t>(order_[static_cast<std::size_t>(mid)])][axis];
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(n);
    const int l = build(begin, mid);
    const int r = build(mid, end);
    nodes_[static_cast<std::size_t>(id)].left = l;
    nodes_[static_cast<std::size_t>(id)].right = r;
    return id;
  }
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(n);
  return id;
}

void KdTree::search(int node, const Vec3& q, double& best_d2, int& best_idx) const {
  const Node& n = nodes_[static_cast<std::size_t>(node)];
  // Strict > keeps candidates at exactly the best distance alive so the
  // lowest-index tie-break matches the linear scan.
  if (best_idx >= 0 && box_dist2(n.lo, n.hi, q) > best_d2) return;
  if (n.left < 0) {
    for (int i = n.begin; i < n.end; ++i) {
      const int idx = order_[static_cast<std::size_t>(i)];
      const double d2 = dist2(pts_[static_cast<std::size_t>(idx)], q);
      if (best_idx < 0 || d2 < best_d2 || (d2 == best_d2 && idx < best_idx)) {
        best_d2 = d2;
        best_idx = idx;
      }
    }
    return;
  }
  const int near = q[n.axis] <= n.split ? n.left : n.right;
  const int far = near == n.left ? n.right : n.left;
  search(near, q, best_d2, best_idx);
  search(far, q, best_d2, best_idx);
}

KdTree::Hit KdTree::nearest(const Vec3& query) const {
  double best_d2 = 0;
  int best_idx = -1;
  search(root_, query, best_d2, best_idx);
  return {best_idx, std::sqrt(best_d2)};
}

NnResult nearest_neighbor_index(std::span<const Vec3> queries, std::span<const Vec3> reference) {
  KdTree tree(reference);
  NnResult out;
  out.index.resize(queries.size());
  out.dist.resize(queries.size());
  parallel_for(queries.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const KdTree::Hit h = tree.nearest(queries[i]);
      out.index[i] = h.index;
      out.dist[i] = h.dist;
    }
  });
  return out;
}

namespace {

double mean_nearest(std::span<const Vec3> from, const KdTree& tree) {
  std::vector<double> d(from.size());
  parallel_for(from.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) d[i] = tree.nearest(from[i]).dist;
  });
  double acc = 0;
  for (double v : d) acc += v;
  return acc / static_cast<double>(from.size());
}

}  // namespace

double chamfer_l1(const PointCloud& a, const PointCloud& b, double report_scale) {
  if (a.points.empty() || b.points.empty()) throw InvalidParameter("chamfer_l1: empty point cloud");
  KdTree ta(a.points), tb(b.points);
  const double acc = mean_nearest(a.points, tb);
  const double comp = mean_nearest(b.points, ta);
  return 0.5 * (acc + comp) * report_scale;
}

double chamfer_one_way(const PointCloud& from, const PointCloud& to, double report_scale) {
  if (from.points.empty() || to.points.empty())
    throw InvalidParameter("chamfer_one_way: empty point cloud");
  KdTree tree(to.points);
  return mean_nearest(from.points, tree) * report_scale;
}

AngleError joint_angle_error(std::span<const double> psi_hat, std::span<const double> psi_true) {
  if (psi_hat.size() != psi_true.size()) throw ShapeError("joint_angle_error: dimension mismatch");
  AngleError e;
  e.per_joint.resize(psi_hat.size());
  double acc = 0;
  for (std::size_t i = 0; i < psi_hat.size(); ++i) {
    e.per_joint[i] = std::fabs(psi_hat[i] - psi_true[i]);
    acc += e.per_joint[i];
  }
  e.mean = acc / static_cast<double>(psi_hat.size());
  return e;
}

}  // namespace asdf::metrics
