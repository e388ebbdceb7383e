#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "asdf/shapes.hpp"
#include "asdf/vec3.hpp"

namespace asdf::depthsim {

struct Camera {
  int width = 128, height = 128;
  double fx = 128, fy = 128, cx = 64, cy = 64;
  Mat3 rot;  // camera -> object rotation
  Vec3 pos;  // camera origin in object frame

  static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, int w, int h,
                        double fov_deg);

  // Ray through the pixel center, in object frame (normalized).
  Vec3 pixel_ray(double u, double v) const;
  // z-depth back-projection / projection; project returns (u, v) pixel coords.
  Vec3 back_project(double u, double v, double z_depth) const;
  void project(const Vec3& p_obj, double& u, double& v, double& z) const;
};

struct DepthSimConfig {
  double eta = 0.025;       // +-eta SDF pair offset
  double trace_tol = 1e-4;
  int max_steps = 256;
  double max_range = 8.0;
};

struct DepthObservation {
  Camera camera;               // first view's camera
  std::vector<double> depth;   // z-depth per pixel, 0 = no hit (first view)
  std::vector<Vec3> points;    // union over views, object frame
  std::vector<Vec3> normals;   // outward unit normals per point
  int views = 1;
};

// Per-pixel sphere tracing against the exact instance SDF. Throws if the
// camera origin is inside the shape.
DepthObservation render_depth(const shapes::ArticulatedInstance& inst, std::span<const double> psi_deg,
                              const Camera& camera, const DepthSimConfig& cfg);

// Normalized central-difference gradient of the instance SDF (step 1e-4).
std::vector<Vec3> estimate_normals(std::span<const Vec3> points,
                                   const shapes::ArticulatedInstance& inst,
                                   std::span<const double> psi_deg);

// The +-eta surface pairs: (p + eta n, +eta) and (p - eta n, -eta) per
// observed point. No free-space samples.
std::vector<shapes::SdfSample> make_sdf_pairs(const DepthObservation& obs, const DepthSimConfig& cfg);

// Fixed evaluation viewpoints: view 0 is a three-quarter view, view 1 is its
// azimuth-opposed counterpart.
Camera default_view(int index, int width = 128, int height = 128);

// Union of several renders (for the 2-view protocol).
DepthObservation merge_views(const std::vector<DepthObservation>& views);

// 16-bit PGM depth plus a text sidecar with camera parameters and scale.
void export_pgm16(const DepthObservation& obs, const std::filesystem::path& pgm_path);

}  // namespace asdf::depthsim
