#include "asdf/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "asdf/common.hpp"
#include "asdf/mesh_tables.hpp"

namespace asdf::mesh {

Field analytic_field(const std::function<double(const Vec3&)>& f) {
  Field field;
  field.sdf = [f](std::span<const Vec3> pts, std::span<double> out) {
    for (std::size_t i = 0; i < pts.size(); ++i) out[i] = f(pts[i]);
  };
  return field;
}

ScalarGrid eval_grid(const Field& field, int res, Vec3 lo, Vec3 hi) {
  if (res < 2) throw InvalidParameter("eval_grid: resolution must be >= 2");
  ScalarGrid g;
  g.res = res;
  g.lo = lo;
  g.hi = hi;
  g.values.assign(static_cast<std::size_t>(res) * res * res, 0.0);

  parallel_for(static_cast<std::size_t>(res), [&](std::size_t kbegin, std::size_t kend) {
    std::vector<Vec3> pts(static_cast<std::size_t>(res) * res);
    for (std::size_t k = kbegin; k < kend; ++k) {
      std::size_t c = 0;
      for (int j = 0; j < res; ++j)
        for (int i = 0; i < res; ++i) pts[c++] = g.pos(i, j, static_cast<int>(k));
      field.sdf(pts, std::span<double>(g.values).subspan(k * pts.size(), pts.size()));
    }
  });

  for (int k = 0; k < res; ++k)
    for (int j = 0; j < res; ++j)
      for (int i = 0; i < res; ++i)
        if (!std::isfinite(g.at(i, j, k))) {
          const Vec3 p = g.pos(i, j, k);
          std::ostringstream msg;
          msg << "eval_grid: non-finite field value at lattice (" << i << "," << j << "," << k
              << ") position (" << p.x << "," << p.y << "," << p.z << ")";
          throw NumericsError(msg.str());
        }
  return g;
}

TriangleMesh marching_cubes(const ScalarGrid& grid, double iso) {
  if (grid.res < 2) throw InvalidParameter("marching_cubes: grid resolution must be >= 2");
  TriangleMesh mesh;
  const int res = grid.res;
  // Global edge id -> mesh vertex, keyed by (base lattice point, axis).
  std::unordered_map<std::uint64_t, int> edge_vertex;
  edge_vertex.reserve(1024);

  auto edge_key = [res](int i, int j, int k, int axis) {
    return ((static_cast<std::uint64_t>(k) * res + j) * res + i) * 3 + static_cast<std::uint64_t>(axis);
  };

  auto vertex_on_edge = [&](int i, int j, int k, int corner_a, int corner_b) {
    int ax = i + kCornerOffset[corner_a][0], ay = j + kCornerOffset[corner_a][1],
        az = k + kCornerOffset[corner_a][2];
    int bx = i + kCornerOffset[corner_b][0], by = j + kCornerOffset[corner_b][1],
        bz = k + kCornerOffset[corner_b][2];
    int axis = (ax != bx) ? 0 : (ay != by ? 1 : 2);
    // canonical base = lower lattice point of the edge
    if (ax > bx || ay > by || az > bz) {
      std::swap(ax, bx);
      std::swap(ay, by);
      std::swap(az, bz);
    }
    const std::uint64_t key = edge_key(ax, ay, az, axis);
    auto it = edge_vertex.find(key);
    if (it != edge_vertex.end()) return it->second;
    const double va = grid.at(ax, ay, az);
    const double vb = grid.at(bx, by, bz);
    const Vec3 pa = grid.pos(ax, ay, az);
    const Vec3 pb = grid.pos(bx, by, bz);
    const double t = (iso - va) / (vb - va);  // va != vb on a crossing edge
    const int id = static_cast<int>(mesh.vertices.size());
    mesh.vertices.push_back(pa + (pb - pa) * t);
    edge_vertex.emplace(key, id);
    return id;
  };

  for (int k = 0; k + 1 < res; ++k)
    for (int j = 0; j + 1 < res; ++j)
      for (int i = 0; i + 1 < res; ++i) {
        int cube = 0;
        for (int c = 0; c < 8; ++c) {
          const double v = grid.at(i + kCornerOffset[c][0], j + kCornerOffset[c][1],
                                   k + kCornerOffset[c][2]);
          if (v < iso) cube |= 1 << c;
        }
        const signed char* tris = kTriTable[cube];
        for (int t = 0; tris[t] >= 0; t += 3) {
          const int e0 = tris[t], e1 = tris[t + 1], e2 = tris[t + 2];
          const int v0 = vertex_on_edge(i, j, k, kEdgeCorner[e0][0], kEdgeCorner[e0][1]);
          const int v1 = vertex_on_edge(i, j, k, kEdgeCorner[e1][0], kEdgeCorner[e1][1]);
          const int v2 = vertex_on_edge(i, j, k, kEdgeCorner[e2][0], kEdgeCorner[e2][1]);
          if (v0 == v1 || v1 == v2 || v0 == v2) continue;  // degenerate after welding
          mesh.triangles.push_back({v0, v1, v2});
        }
      }
  return mesh;
}

void label_mesh(TriangleMesh& mesh, const Field& field) {
  if (!field.labels) throw UnsupportedOperation("label_mesh: field has no part output");
  mesh.labels.assign(mesh.vertices.size(), 0);
  field.labels(mesh.vertices, mesh.labels);
}

void export_obj(const TriangleMesh& mesh, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw IoError("export_obj: cannot open " + path.string());
  f.precision(17);
  for (const Vec3& v : mesh.vertices) f << "v " << v.x << " " << v.y << " " << v.z << "\n";
  for (const auto& t : mesh.triangles)
    f << "f " << t[0] + 1 << " " << t[1] + 1 << " " << t[2] + 1 << "\n";
  if (!f) throw IoError("export_obj: write failed for " + path.string());
}

void export_ply_points(std::span<const Vec3> points, std::span<const int> labels,
                       const std::filesystem::path& path) {
  const bool with_labels = !labels.empty();
  if (with_labels && labels.size() != points.size())
    throw ShapeError("export_ply_points: label count does not match points");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("export_ply_points: cannot open " + path.string());
  f << "ply\nformat binary_little_endian 1.0\nelement vertex " << points.size()
    << "\nproperty float x\nproperty float y\nproperty float z\n";
  if (with_labels) f << "property uchar label\n";
  f << "end_header\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    const float xyz[3] = {static_cast<float>(points[i].x), static_cast<float>(points[i].y),
                          static_cast<float>(points[i].z)};
    f.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
    if (with_labels) {
      const unsigned char l = static_cast<unsigned char>(labels[i]);
      f.write(reinterpret_cast<const char*>(&l), 1);
    }
  }
  if (!f) throw IoError("export_ply_points: write failed for " + path.string());
}

double mesh_area(const TriangleMesh& mesh) {
  double acc = 0;
  for (const auto& t : mesh.triangles) {
    const Vec3& a = mesh.vertices[static_cast<std::size_t>(t[0])];
    const Vec3& b = mesh.vertices[static_cast<std::size_t>(t[1])];
    const Vec3& c = mesh.vertices[static_cast<std::size_t>(t[2])];
    acc += 0.5 * (b - a).cross(c - a).norm();
  }
  return acc;
}

double mesh_volume(const TriangleMesh& mesh) {
  double acc = 0;
  for (const auto& t : mesh.triangles) {
    const Vec3& a = mesh.vertices[static_cast<std::size_t>(t[0])];
    const Vec3& b = mesh.vertices[static_cast<std::size_t>(t[1])];
    const Vec3& c = mesh.vertices[static_cast<std::size_t>(t[2])];
    acc += a.dot(b.cross(c)) / 6.0;
  }
  return acc;
}

std::vector<Vec3> sample_mesh_surface(const TriangleMesh& mesh, int n, Rng& rng) {
  if (mesh.triangles.empty()) throw InvalidParameter("sample_mesh_surface: empty mesh");
  std::vector<double> cdf(mesh.triangles.size());
  double acc = 0;
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    const auto& t = mesh.triangles[i];
    const Vec3& a = mesh.vertices[static_cast<std::size_t>(t[0])];
    const Vec3& b = mesh.vertices[static_cast<std::size_t>(t[1])];
    const Vec3& c = mesh.vertices[static_cast<std::size_t>(t[2])];
    acc += 0.5 * (b - a).cross(c - a).norm();
    cdf[i] = acc;
  }
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform() * acc;
    const std::size_t ti = static_cast<std::size_t>(
        std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    const auto& t = mesh.triangles[std::min(ti, mesh.triangles.size() - 1)];
    double r1 = std::sqrt(rng.uniform());
    double r2 = rng.uniform();
    const Vec3& a = mesh.vertices[static_cast<std::size_t>(t[0])];
    const Vec3& b = mesh.vertices[static_cast<std::size_t>(t[1])];
    const Vec3& c = mesh.vertices[static_cast<std::size_t>(t[2])];
    out.push_back(a * (1 - r1) + b * (r1 * (1 - r2)) + c * (r1 * r2));
  }
  return out;
}

}  // namespace asdf::mesh
