#include "asdf/depthsim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "asdf/common.hpp"

namespace asdf::depthsim {

namespace {
constexpr double kDegToRad = 0.017453292519943295;
}

Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up, int w, int h,
                       double fov_deg) {
  Camera c;
  c.width = w;
  c.height = h;
  const double f = (w / 2.0) / std::tan(0.5 * fov_deg * kDegToRad);
  c.fx = c.fy = f;
  c.cx = w / 2.0;
  c.cy = h / 2.0;
  c.pos = eye;
  const Vec3 fwd = (target - eye).normalized();          // camera +z
  const Vec3 right = fwd.cross(up).normalized();         // camera +x
  const Vec3 down = fwd.cross(right);                    // camera +y (image rows grow downward)
  for (int r = 0; r < 3; ++r) {
    c.rot(r, 0) = right[r];
    c.rot(r, 1) = down[r];
    c.rot(r, 2) = fwd[r];
  }
  return c;
}

Vec3 Camera::pixel_ray(double u, double v) const {
  const Vec3 d_cam{(u - cx) / fx, (v - cy) / fy, 1.0};
  return (rot * d_cam).normalized();
}

Vec3 Camera::back_project(double u, double v, double z_depth) const {
  const Vec3 p_cam{(u - cx) / fx * z_depth, (v - cy) / fy * z_depth, z_depth};
  return rot * p_cam + pos;
}

void Camera::project(const Vec3& p_obj, double& u, double& v, double& z) const {
  const Vec3 p_cam = rot.transposed() * (p_obj - pos);
  z = p_cam.z;
  u = cx + fx * p_cam.x / p_cam.z;
  v = cy + fy * p_cam.y / p_cam.z;
}

DepthObservation render_depth(const shapes::ArticulatedInstance& inst, std::span<const double> psi_deg,
                              const Camera& camera, const DepthSimConfig& cfg) {
  shapes::PosedInstance posed(inst, psi_deg, true);
  if (posed.sdf(camera.pos).s <= 0.0)
    throw InvalidParameter("render_depth: camera origin is inside the shape");

  DepthObservation obs;
  obs.camera = camera;
  obs.depth.assign(static_cast<std::size_t>(camera.width) * camera.height, 0.0);

  parallel_for(static_cast<std::size_t>(camera.height), [&](std::size_t vb, std::size_t ve) {
    for (std::size_t v = vb; v < ve; ++v) {
      for (int u = 0; u < camera.width; ++u) {
        const Vec3 dir = camera.pixel_ray(u + 0.5, static_cast<double>(v) + 0.5);
        double t = 0.0;
        for (int step = 0; step < cfg.max_steps; ++step) {
          const Vec3 p = camera.pos + dir * t;
          const double s = posed.sdf(p).s;
          if (s < cfg.trace_tol) {
            const Vec3 p_cam = camera.rot.transposed() * (p - camera.pos);
            obs.depth[v * static_cast<std::size_t>(camera.width) + static_cast<std::size_t>(u)] =
                p_cam.z;
            break;
          }
          t += s;
          if (t > cfg.max_range) break;
        }
      }
    }
  });

  std::vector<Vec3> pts;
  for (int v = 0; v < camera.height; ++v)
    for (int u = 0; u < camera.width; ++u) {
      const double z = obs.depth[static_cast<std::size_t>(v) * camera.width + static_cast<std::size_t>(u)];
      if (z > 0.0) pts.push_back(camera.back_project(u + 0.5, v + 0.5, z));
    }
  obs.points = std::move(pts);
  obs.normals = estimate_normals(obs.points, inst, psi_deg);
  return obs;
}

std::vector<Vec3> estimate_normals(std::span<const Vec3> points,
                                   const shapes::ArticulatedInstance& inst,
                                   std::span<const double> psi_deg) {
  shapes::PosedInstance posed(inst, psi_deg, true);
  const double h = 1e-4;
  std::vector<Vec3> normals(points.size());
  parallel_for(points.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const Vec3& p = points[i];
      Vec3 g;
      for (int a = 0; a < 3; ++a) {
        Vec3 pp = p, pm = p;
        pp[a] += h;
        pm[a] -= h;
        g[a] = (posed.sdf(pp).s - posed.sdf(pm).s) / (2 * h);
      }
      const double n = g.norm();
      if (n < 1e-12)
        throw NumericsError("estimate_normals: vanishing SDF gradient at an observed point");
      normals[i] = g / n;
    }
  });
  return normals;
}

std::vector<shapes::SdfSample> make_sdf_pairs(const DepthObservation& obs, const DepthSimConfig& cfg) {
  if (obs.normals.size() != obs.points.size())
    throw ShapeError("make_sdf_pairs: normals missing for observed points");
  if (!(cfg.eta > 0)) throw InvalidParameter("make_sdf_pairs: eta must be positive");
  std::vector<shapes::SdfSample> out;
  out.reserve(2 * obs.points.size());
  for (std::size_t i = 0; i < obs.points.size(); ++i) {
    const Vec3& p = obs.points[i];
    const Vec3& n = obs.normals[i];
    out.push_back({p + n * cfg.eta, cfg.eta, -1});
    out.push_back({p - n * cfg.eta, -cfg.eta, -1});
  }
  return out;
}

Camera default_view(int index, int width, int height) {
  const double radius = 2.4, elev = 30.0 * kDegToRad;
  const double azim = (45.0 + 180.0 * index) * kDegToRad;
  const Vec3 eye{radius * std::cos(elev) * std::cos(azim), radius * std::sin(elev),
                 radius * std::cos(elev) * std::sin(azim)};
  return Camera::look_at(eye, {0, 0, 0}, {0, 1, 0}, width, height, 45.0);
}

DepthObservation merge_views(const std::vector<DepthObservation>& views) {
  if (views.empty()) throw InvalidParameter("merge_views: no views");
  DepthObservation out = views.front();
  for (std::size_t i = 1; i < views.size(); ++i) {
    out.points.insert(out.points.end(), views[i].points.begin(), views[i].points.end());
    out.normals.insert(out.normals.end(), views[i].normals.begin(), views[i].normals.end());
  }
  out.views = static_cast<int>(views.size());
  return out;
}

void export_pgm16(const DepthObservation& obs, const std::filesystem::path& pgm_path) {
  const double scale = 4.0 / 65535.0;  // depth = pixel * scale
  std::ofstream f(pgm_path, std::ios::binary);
  if (!f) throw IoError("export_pgm16: cannot open " + pgm_path.string());
  f << "P5\n" << obs.camera.width << " " << obs.camera.height << "\n65535\n";
  for (double d : obs.depth) {
    const double q = std::clamp(d / scale, 0.0, 65535.0);
    const unsigned v = static_cast<unsigned>(std::lround(q));
    const unsigned char be[2] = {static_cast<unsigned char>(v >> 8),
                                 static_cast<unsigned char>(v & 0xff)};
    f.write(reinterpret_cast<const char*>(be), 2);
  }
  std::ofstream side(pgm_path.string() + ".txt");
  side.precision(17);
  side << "asdf-depth 1\n"
       << "width " << obs.camera.width << "\nheight " << obs.camera.height << "\n"
       << "fx " << obs.camera.fx << "\nfy " << obs.camera.fy << "\ncx " << obs.camera.cx
       << "\ncy " << obs.camera.cy << "\n"
       << "depth_scale " << scale << "\nviews " << obs.views << "\n";
  side << "rot";
  for (double v : obs.camera.rot.m) side << " " << v;
  side << "\npos " << obs.camera.pos.x << " " << obs.camera.pos.y << " " << obs.camera.pos.z
       << "\n";
}

}  // namespace asdf::depthsim
