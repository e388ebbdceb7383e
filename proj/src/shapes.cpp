#include "asdf/shapes.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "asdf/common.hpp"

namespace asdf::shapes {

namespace {

constexpr double kDegToRad = 0.017453292519943295;

std::vector<std::vector<double>> grid_1d(double lo, double hi, double step) {
  std::vector<std::vector<double>> g;
  for (double a = lo; a <= hi + 1e-9; a += step) g.push_back({a});
  return g;
}

std::vector<std::vector<double>> grid_2d(const std::vector<double>& axis) {
  std::vector<std::vector<double>> g;
  for (double a : axis)
    for (double b : axis) g.push_back({a, b});
  return g;
}

std::map<std::string, FamilySpec> build_registry() {
  std::map<std::string, FamilySpec> reg;
  {
    FamilySpec f;
    f.name = "laptop-1dof";
    f.dof = 1;
    f.part_count = 2;
    f.joint_lo = {0.0};
    f.joint_hi = {150.0};
    f.train_grid = grid_1d(0.0, 90.0, 15.0);       // 0,15,...,90
    f.test_angles = grid_1d(7.5, 82.5, 15.0);      // off-grid midpoints
    reg[f.name] = f;
  }
  {
    FamilySpec f;
    f.name = "eyeglasses-2dof";
    f.dof = 2;
    f.part_count = 3;
    f.joint_lo = {0.0, 0.0};
    f.joint_hi = {90.0, 90.0};
    f.train_grid = grid_2d({0.0, 30.0, 60.0, 90.0});
    f.test_angles = grid_2d({15.0, 45.0, 75.0});
    reg[f.name] = f;
  }
  {
    FamilySpec f;
    f.name = "door-1dof";
    f.dof = 1;
    f.part_count = 2;
    f.joint_lo = {0.0};
    f.joint_hi = {120.0};
    f.train_grid = grid_1d(0.0, 120.0, 20.0);
    f.test_angles = grid_1d(10.0, 110.0, 20.0);
    reg[f.name] = f;
  }
  return reg;
}

const std::map<std::string, FamilySpec>& registry() {
  static const std::map<std::string, FamilySpec> reg = build_registry();
  return reg;
}

Aabb part_aabb(const PartPrimitive& part, const RigidTransform& xform) {
  Aabb box;
  for (int c = 0; c < 8; ++c) {
    Vec3 corner{(c & 1) ? part.half_extents.x : -part.half_extents.x,
                (c & 2) ? part.half_extents.y : -part.half_extents.y,
                (c & 4) ? part.half_extents.z : -part.half_extents.z};
    box.expand(xform.apply(part.rot * corner + part.pos));
  }
  return box;
}

// Scale-and-center so the canonical pose is origin-centered and the whole
// articulation sweep stays inside [-margin, margin]^3.
void normalize_instance(ArticulatedInstance& inst, double margin) {
  Aabb canonical;
  for (const auto& part : inst.parts) canonical.expand(part_aabb(part, RigidTransform::identity()));
  const Vec3 center = canonical.center();
  for (auto& part : inst.parts) part.pos = part.pos - center;
  for (auto& joint : inst.joints) joint.pivot = joint.pivot - center;

  Aabb sweep;
  const int steps = 25;
  std::vector<double> psi(static_cast<std::size_t>(inst.dof()), 0.0);
  // All joints move independent single parts, so sweeping each joint alone
  // covers the union of per-part extents.
  for (std::size_t j = 0; j < inst.joints.size(); ++j) {
    for (int s = 0; s < steps; ++s) {
      std::fill(psi.begin(), psi.end(), 0.0);
      psi[j] = inst.joints[j].lo_deg +
               (inst.joints[j].hi_deg - inst.joints[j].lo_deg) * s / (steps - 1);
      auto xf = articulate(inst, psi);
      for (std::size_t p = 0; p < inst.parts.size(); ++p)
        sweep.expand(part_aabb(inst.parts[p], xf[p]));
    }
  }
  double extent = 0.0;
  for (int a = 0; a < 3; ++a)
    extent = std::max(extent, std::max(std::fabs(sweep.lo[a]), std::fabs(sweep.hi[a])));
  const double scale = margin / extent;
  for (auto& part : inst.parts) {
    part.half_extents = part.half_extents * scale;
    part.pos = part.pos * scale;
  }
  for (auto& joint : inst.joints) joint.pivot = joint.pivot * scale;
}

ArticulatedInstance build_laptop(int index, Rng& rng) {
  ArticulatedInstance inst;
  inst.family = "laptop-1dof";
  inst.id = index;
  const double w = rng.uniform(0.38, 0.52);
  const double tb = rng.uniform(0.035, 0.06);
  const double d = rng.uniform(0.26, 0.36);
  const double tl = rng.uniform(0.018, 0.032);
  const double wl = w * rng.uniform(0.94, 1.0);
  const double dl = d * rng.uniform(0.92, 1.0);

  PartPrimitive base;
  base.half_extents = {w, tb, d};
  base.pos = {0.0, -tb, 0.0};
  PartPrimitive lid;
  lid.half_extents = {wl, tl, dl};
  lid.pos = {0.0, tl, d - dl};  // closed, back edges aligned
  inst.parts = {base, lid};

  RevoluteJoint hinge;
  hinge.pivot = {0.0, 0.0, d};
  hinge.axis = {1.0, 0.0, 0.0};  // positive angle opens the lid upward
  hinge.moving_part = 1;
  hinge.lo_deg = 0.0;
  hinge.hi_deg = 150.0;
  inst.joints = {hinge};
  return inst;
}

ArticulatedInstance build_eyeglasses(int index, Rng& rng) {
  ArticulatedInstance inst;
  inst.family = "eyeglasses-2dof";
  inst.id = index;
  const double a = rng.uniform(0.42, 0.55);
  const double b = rng.uniform(0.10, 0.16);
  const double c = rng.uniform(0.015, 0.03);
  const double temple_len = rng.uniform(0.38, 0.5);
  const double tt = rng.uniform(0.012, 0.022);
  const double tb = b * rng.uniform(0.25, 0.5);
  const double yc = b * rng.uniform(0.2, 0.5);

  PartPrimitive frame;
  frame.half_extents = {a, b, c};
  frame.pos = {0.0, 0.0, 0.0};

  PartPrimitive left;
  left.half_extents = {tt, tb, temple_len * 0.5};
  left.pos = {-(a - tt), yc, -c - temple_len * 0.5};
  PartPrimitive right = left;
  right.pos.x = a - tt;
  inst.parts = {frame, left, right};

  RevoluteJoint jl;
  jl.pivot = {-(a - tt), yc, -c};
  jl.axis = {0.0, -1.0, 0.0};  // mirrored: positive angle folds inward
  jl.moving_part = 1;
  jl.lo_deg = 0.0;
  jl.hi_deg = 90.0;
  RevoluteJoint jr = jl;
  jr.pivot.x = a - tt;
  jr.axis = {0.0, 1.0, 0.0};
  jr.moving_part = 2;
  inst.joints = {jl, jr};
  return inst;
}

ArticulatedInstance build_door(int index, Rng& rng) {
  ArticulatedInstance inst;
  inst.family = "door-1dof";
  inst.id = index;
  const double wd = rng.uniform(0.30, 0.42);
  const double h = rng.uniform(0.45, 0.60);
  const double th = rng.uniform(0.015, 0.03);
  const double pp = rng.uniform(0.03, 0.05);
  const double ph = h * rng.uniform(1.02, 1.10);

  PartPrimitive post;
  post.half_extents = {pp, ph, pp};
  post.pos = {-(wd + pp), 0.0, 0.0};
  PartPrimitive panel;
  panel.half_extents = {wd, h, th};
  panel.pos = {0.0, 0.0, 0.0};
  inst.parts = {post, panel};

  RevoluteJoint hinge;
  hinge.pivot = {-wd, 0.0, 0.0};
  hinge.axis = {0.0, 1.0, 0.0};  // positive angle swings the panel toward -z
  hinge.moving_part = 1;
  hinge.lo_deg = 0.0;
  hinge.hi_deg = 120.0;
  inst.joints = {hinge};
  return inst;
}

struct Face {
  int part;
  int axis;      // face normal axis in part frame
  double sign;   // +1 or -1
  double area;
};

std::vector<Face> face_table(const ArticulatedInstance& inst) {
  std::vector<Face> faces;
  for (int p = 0; p < inst.part_count(); ++p) {
    const Vec3 h = inst.parts[static_cast<std::size_t>(p)].half_extents;
    const double areas[3] = {4.0 * h.y * h.z, 4.0 * h.x * h.z, 4.0 * h.x * h.y};
    for (int axis = 0; axis < 3; ++axis)
      for (double sign : {1.0, -1.0}) faces.push_back({p, axis, sign, areas[axis]});
  }
  return faces;
}

Vec3 face_point(const PartPrimitive& part, const Face& face, Rng& rng) {
  const Vec3 h = part.half_extents;
  Vec3 local;
  local[face.axis] = face.sign * h[face.axis];
  const int u = (face.axis + 1) % 3, v = (face.axis + 2) % 3;
  local[u] = rng.uniform(-h[u], h[u]);
  local[v] = rng.uniform(-h[v], h[v]);
  return local;
}

// One visible surface point (area-weighted over faces, occluded draws rejected).
Vec3 sample_one_surface_point(const PosedInstance& posed, const std::vector<Face>& faces,
                              const std::vector<double>& cdf, Rng& rng, int* face_out = nullptr) {
  const ArticulatedInstance& inst = posed.instance();
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const double u = rng.uniform() * cdf.back();
    const std::size_t fi = static_cast<std::size_t>(
        std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    const Face& face = faces[std::min(fi, faces.size() - 1)];
    const PartPrimitive& part = inst.parts[static_cast<std::size_t>(face.part)];
    const Vec3 local = face_point(part, face, rng);
    const Vec3 world = posed.part_to_world()[static_cast<std::size_t>(face.part)].apply(
        part.rot * local + part.pos);
    if (std::fabs(posed.sdf(world).s) < 1e-6) {
      if (face_out) *face_out = static_cast<int>(std::min(fi, faces.size() - 1));
      return world;
    }
  }
  throw Error("sample_surface_points: rejection sampling failed to find a visible point");
}

}  // namespace

const std::vector<std::string>& family_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& [k, _] : registry()) v.push_back(k);
    return v;
  }();
  return names;
}

const FamilySpec& family_spec(const std::string& name) {
  auto it = registry().find(name);
  if (it == registry().end()) throw InvalidParameter("unknown shape family '" + name + "'");
  return it->second;
}

ArticulatedInstance make_instance(const std::string& name, int index, std::uint64_t seed) {
  family_spec(name);  // validate
  Rng rng = Rng::derive(seed, {0x5eedULL, static_cast<std::uint64_t>(index), fnv1a64(name)});
  ArticulatedInstance inst;
  if (name == "laptop-1dof")
    inst = build_laptop(index, rng);
  else if (name == "eyeglasses-2dof")
    inst = build_eyeglasses(index, rng);
  else
    inst = build_door(index, rng);
  normalize_instance(inst, 0.92);
  return inst;
}

std::vector<ArticulatedInstance> make_family(const std::string& name, int count, std::uint64_t seed) {
  if (count < 1) throw InvalidParameter("make_family: count must be >= 1");
  std::vector<ArticulatedInstance> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(make_instance(name, i, seed));
  return out;
}

std::vector<RigidTransform> articulate(const ArticulatedInstance& inst, std::span<const double> psi_deg,
                                       bool allow_out_of_range) {
  if (static_cast<int>(psi_deg.size()) != inst.dof())
    throw ShapeError("articulate: articulation code has dimension " +
                     std::to_string(psi_deg.size()) + ", instance has " + std::to_string(inst.dof()) +
                     " DoF");
  std::vector<RigidTransform> xf(inst.parts.size(), RigidTransform::identity());
  for (std::size_t j = 0; j < inst.joints.size(); ++j) {
    const RevoluteJoint& joint = inst.joints[j];
    const double angle = psi_deg[j];
    if (!allow_out_of_range && (angle < joint.lo_deg - 1e-9 || angle > joint.hi_deg + 1e-9))
      throw InvalidParameter("articulate: joint " + std::to_string(j) + " angle " +
                             std::to_string(angle) + " outside [" + std::to_string(joint.lo_deg) +
                             ", " + std::to_string(joint.hi_deg) + "]");
    xf[static_cast<std::size_t>(joint.moving_part)] =
        RigidTransform::about_pivot(joint.pivot, joint.axis, angle * kDegToRad);
  }
  return xf;
}

double box_sdf(const Vec3& p, const Vec3& half_extents) {
  if (!(half_extents.x > 0 && half_extents.y > 0 && half_extents.z > 0))
    throw InvalidParameter("box_sdf: half extents must be positive");
  const Vec3 q = p.cwise_abs() - half_extents;
  const Vec3 outside = q.cwise_max({0, 0, 0});
  const double inside = std::fmin(q.max_component(), 0.0);
  return outside.norm() + inside;
}

PosedInstance::PosedInstance(const ArticulatedInstance& inst, std::span<const double> psi_deg,
                             bool allow_out_of_range)
    : inst_(&inst), fwd_(articulate(inst, psi_deg, allow_out_of_range)) {
  inv_.reserve(fwd_.size());
  for (std::size_t p = 0; p < fwd_.size(); ++p) {
    // world -> part local: undo the joint motion, then the local pose
    RigidTransform local;
    local.rot = inst.parts[p].rot;
    local.trans = inst.parts[p].pos;
    inv_.push_back(local.inverse().compose(fwd_[p].inverse()));
  }
}

SdfLabel PosedInstance::sdf(const Vec3& p) const {
  SdfLabel best{1e300, 0};
  for (std::size_t i = 0; i < inv_.size(); ++i) {
    const double s = box_sdf(inv_[i].apply(p), inst_->parts[i].half_extents);
    if (s < best.s) best = {s, static_cast<int>(i)};
  }
  return best;
}

SdfLabel shape_sdf(const ArticulatedInstance& inst, std::span<const double> psi_deg, const Vec3& p) {
  return PosedInstance(inst, psi_deg, true).sdf(p);
}

std::vector<SdfSample> sample_sdf_points(const ArticulatedInstance& inst, std::span<const double> psi_deg,
                                         int k, Rng& rng, const SampleMix& mix) {
  if (k < 1) throw InvalidParameter("sample_sdf_points: k must be >= 1");
  PosedInstance posed(inst, psi_deg, true);
  const auto faces = face_table(inst);
  std::vector<double> cdf(faces.size());
  double acc = 0;
  for (std::size_t i = 0; i < faces.size(); ++i) cdf[i] = (acc += faces[i].area);

  const int k1 = static_cast<int>(std::lround(mix.near_fraction_1 * k));
  const int k2 = static_cast<int>(std::lround(mix.near_fraction_2 * k));
  const int ku = std::max(0, k - k1 - k2);

  std::vector<SdfSample> out;
  out.reserve(static_cast<std::size_t>(k));
  auto emit = [&](const Vec3& x) {
    const SdfLabel sl = posed.sdf(x);
    out.push_back({x, sl.s, sl.part});
  };
  for (int i = 0; i < k1; ++i)
    emit(sample_one_surface_point(posed, faces, cdf, rng) + rng.gaussian_vec3(mix.sigma_1));
  for (int i = 0; i < k2; ++i)
    emit(sample_one_surface_point(posed, faces, cdf, rng) + rng.gaussian_vec3(mix.sigma_2));
  for (int i = 0; i < ku; ++i)
    emit({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
  return out;
}

std::vector<Vec3> sample_surface_points(const ArticulatedInstance& inst, std::span<const double> psi_deg,
                                        int n, Rng& rng) {
  if (n < 1) throw InvalidParameter("sample_surface_points: n must be >= 1");
  PosedInstance posed(inst, psi_deg, true);
  const auto faces = face_table(inst);
  std::vector<double> cdf(faces.size());
  double acc = 0;
  for (std::size_t i = 0; i < faces.size(); ++i) cdf[i] = (acc += faces[i].area);
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(sample_one_surface_point(posed, faces, cdf, rng));
  return out;
}

void write_samples(const std::filesystem::path& path, const SampleFileHeader& header,
                   std::span<const SdfSample> samples) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("write_samples: cannot open " + path.string());
  std::ostringstream psi;
  for (std::size_t i = 0; i < header.psi_deg.size(); ++i) {
    if (i) psi << ",";
    psi << header.psi_deg[i];
  }
  f << "asdf-samples 1\n"
    << "family " << header.family << "\n"
    << "instance " << header.instance << "\n"
    << "psi_deg " << psi.str() << "\n"
    << "seed " << header.seed << "\n"
    << "count " << samples.size() << "\n\n";
  for (const SdfSample& s : samples) {
    const float rec[4] = {static_cast<float>(s.x.x), static_cast<float>(s.x.y),
                          static_cast<float>(s.x.z), static_cast<float>(s.s)};
    unsigned char label = s.part < 0 ? 255 : static_cast<unsigned char>(s.part);
    f.write(reinterpret_cast<const char*>(rec), sizeof(rec));
    f.write(reinterpret_cast<const char*>(&label), 1);
  }
  if (!f) throw IoError("write_samples: write failed for " + path.string());
}

std::vector<SdfSample> read_samples(const std::filesystem::path& path, SampleFileHeader* header) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("read_samples: cannot open " + path.string());
  std::string line;
  std::getline(f, line);
  if (line != "asdf-samples 1") throw IntegrityError("read_samples: bad magic/version in " + path.string());
  SampleFileHeader h;
  while (std::getline(f, line) && !line.empty()) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "family")
      ls >> h.family;
    else if (key == "instance")
      ls >> h.instance;
    else if (key == "seed")
      ls >> h.seed;
    else if (key == "count")
      ls >> h.count;
    else if (key == "psi_deg") {
      std::string rest;
      ls >> rest;
      std::istringstream ps(rest);
      std::string tok;
      while (std::getline(ps, tok, ',')) h.psi_deg.push_back(std::stod(tok));
    } else {
      throw IntegrityError("read_samples: unknown header key '" + key + "'");
    }
  }
  std::vector<SdfSample> out;
  out.reserve(static_cast<std::size_t>(h.count));
  for (int i = 0; i < h.count; ++i) {
    float rec[4];
    unsigned char label;
    f.read(reinterpret_cast<char*>(rec), sizeof(rec));
    f.read(reinterpret_cast<char*>(&label), 1);
    if (!f) throw IntegrityError("read_samples: truncated sample payload in " + path.string());
    out.push_back({{rec[0], rec[1], rec[2]}, rec[3], label == 255 ? -1 : static_cast<int>(label)});
  }
  if (header) *header = h;
  return out;
}

}  // namespace asdf::shapes
