#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "asdf/rng.hpp"
#include "asdf/vec3.hpp"

namespace asdf::mesh {

// Batch-evaluable implicit field; `labels` is empty when the model has no
// part head.
struct Field {
  std::function<void(std::span<const Vec3>, std::span<double>)> sdf;
  std::function<void(std::span<const Vec3>, std::span<int>)> labels;
};

Field analytic_field(const std::function<double(const Vec3&)>& f);

struct ScalarGrid {
  int res = 0;            // lattice points per axis, >= 2
  Vec3 lo{-1, -1, -1}, hi{1, 1, 1};
  std::vector<double> values;  // x fastest, then y, then z

  double at(int i, int j, int k) const {
    return values[(static_cast<std::size_t>(k) * res + j) * res + i];
  }
  Vec3 pos(int i, int j, int k) const {
    const double t = 1.0 / (res - 1);
    return {lo.x + (hi.x - lo.x) * (i * t), lo.y + (hi.y - lo.y) * (j * t),
            lo.z + (hi.z - lo.z) * (k * t)};
  }
};

// Evaluates the field at the res^3 cell-corner lattice. Parallel over z-slabs
// and deterministic. Throws NumericsError naming the lattice point on a
// non-finite value.
ScalarGrid eval_grid(const Field& field, int res, Vec3 lo = {-1, -1, -1}, Vec3 hi = {1, 1, 1});

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<int> labels;  // per-vertex part labels, optional

  bool empty() const { return triangles.empty(); }
};

// Standard 256-case marching cubes with linear edge interpolation. Vertices
// on shared edges are deduplicated; triangles wind so normals point toward
// increasing field values. An all-positive (or all-negative) grid gives an
// empty mesh.
TriangleMesh marching_cubes(const ScalarGrid& grid, double iso = 0.0);

// Labels every vertex by argmax of the field's part logits.
void label_mesh(TriangleMesh& mesh, const Field& field);

void export_obj(const TriangleMesh& mesh, const std::filesystem::path& path);

// Binary little-endian PLY with float32 x,y,z and an optional uchar label.
void export_ply_points(std::span<const Vec3> points, std::span<const int> labels,
                       const std::filesystem::path& path);

double mesh_area(const TriangleMesh& mesh);
// Signed volume via the divergence theorem; positive for outward orientation.
double mesh_volume(const TriangleMesh& mesh);
std::vector<Vec3> sample_mesh_surface(const TriangleMesh& mesh, int n, Rng& rng);

}  // namespace asdf::mesh
