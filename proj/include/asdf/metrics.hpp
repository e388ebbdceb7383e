#pragma once

#include <span>
#include <vector>

#include "asdf/vec3.hpp"

namespace asdf::metrics {

struct PointCloud {
  std::vector<Vec3> points;
};

// Exact nearest neighbors over a fixed reference set. Ties break to the
// lowest reference index, identically to a linear scan.
class KdTree {
 public:
  explicit KdTree(std::span<const Vec3> reference);  // reference must be nonempty

  struct Hit {
    int index = -1;
    double dist = 0.0;
  };
  Hit nearest(const Vec3& query) const;

 private:
  struct Node {
    Vec3 lo, hi;      // bounding box
    int begin, end;   // leaf range in order_
    int left = -1, right = -1;
    int axis = 0;
    double split = 0.0;
  };
  int build(int begin, int end);
  void search(int node, const Vec3& q, double& best_d2, int& best_idx) const;

  std::vector<Vec3> pts_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

struct NnResult {
  std::vector<int> index;
  std::vector<double> dist;
};

NnResult nearest_neighbor_index(std::span<const Vec3> queries, std::span<const Vec3> reference);

// 0.5 * [mean_a min_b |a-b| + mean_b min_a |b-a|] * report_scale.
double chamfer_l1(const PointCloud& a, const PointCloud& b, double report_scale = 1000.0);

// Directed mean nearest distance, * report_scale.
double chamfer_one_way(const PointCloud& from, const PointCloud& to, double report_scale = 1000.0);

struct AngleError {
  std::vector<double> per_joint;
  double mean = 0.0;
};

AngleError joint_angle_error(std::span<const double> psi_hat, std::span<const double> psi_true);

}  // namespace asdf::metrics
