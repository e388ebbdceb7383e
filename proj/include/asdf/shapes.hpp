#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "asdf/rng.hpp"
#include "asdf/vec3.hpp"

namespace asdf::shapes {

// One oriented box in the canonical object frame.
struct PartPrimitive {
  Vec3 half_extents;
  Mat3 rot;   // local orientation (orthonormal, det +1)
  Vec3 pos;   // local translation
};

struct RevoluteJoint {
  Vec3 pivot;
  Vec3 axis;  // unit
  int moving_part = 0;
  double lo_deg = 0.0, hi_deg = 0.0;
};

// Analytic articulated object: exact SDF ground truth for training and
// evaluation. One joint per degree of freedom; joints move single parts.
struct ArticulatedInstance {
  std::string family;
  int id = 0;
  std::vector<PartPrimitive> parts;
  std::vector<RevoluteJoint> joints;

  int dof() const { return static_cast<int>(joints.size()); }
  int part_count() const { return static_cast<int>(parts.size()); }
};

struct SdfSample {
  Vec3 x;
  double s = 0.0;
  int part = -1;  // -1 = unlabeled
};

struct SdfLabel {
  double s = 0.0;
  int part = 0;
};

// Static family description: DoF, part count, joint limits and the default
// systematic articulation grids (degrees).
struct FamilySpec {
  std::string name;
  int dof = 1;
  int part_count = 2;
  std::vector<double> joint_lo, joint_hi;
  std::vector<std::vector<double>> train_grid;
  std::vector<std::vector<double>> test_angles;
};

const std::vector<std::string>& family_names();
const FamilySpec& family_spec(const std::string& name);  // throws on unknown family

// Deterministic instance synthesis: instance i depends only on (family, seed, i).
std::vector<ArticulatedInstance> make_family(const std::string& name, int count, std::uint64_t seed);
ArticulatedInstance make_instance(const std::string& name, int index, std::uint64_t seed);

// Per-part rigid transforms for an articulation (degrees). Throws if the
// angles leave the joint ranges unless allow_out_of_range is set.
std::vector<RigidTransform> articulate(const ArticulatedInstance& inst, std::span<const double> psi_deg,
                                       bool allow_out_of_range = false);

// Exact Euclidean signed distance to an axis-aligned box centered at origin.
double box_sdf(const Vec3& p, const Vec3& half_extents);

// Min-union SDF over parts with the articulation applied. Exact outside the
// union and on its surface; an upper-bound approximation strictly inside
// overlaps. Label = argmin part, ties to the lowest index.
SdfLabel shape_sdf(const ArticulatedInstance& inst, std::span<const double> psi_deg, const Vec3& p);

// Precomputed world-to-part transforms for one articulation; use for hot loops.
class PosedInstance {
 public:
  PosedInstance(const ArticulatedInstance& inst, std::span<const double> psi_deg,
                bool allow_out_of_range = false);
  SdfLabel sdf(const Vec3& p) const;
  const ArticulatedInstance& instance() const { return *inst_; }
  const std::vector<RigidTransform>& part_to_world() const { return fwd_; }

 private:
  const ArticulatedInstance* inst_;
  std::vector<RigidTransform> fwd_, inv_;
};

// Sample mix for DeepSDF-style SDF supervision.
struct SampleMix {
  double near_fraction_1 = 0.475, sigma_1 = 0.005;
  double near_fraction_2 = 0.475, sigma_2 = 0.05;
  // remainder uniform in [-1,1]^3
};

// K supervised samples: near-surface jittered points at two noise scales plus
// uniform fillers. Deterministic given the rng.
std::vector<SdfSample> sample_sdf_points(const ArticulatedInstance& inst, std::span<const double> psi_deg,
                                         int k, Rng& rng, const SampleMix& mix = {});

// n area-weighted points on the visible union surface (|sdf| < 1e-6).
std::vector<Vec3> sample_surface_points(const ArticulatedInstance& inst, std::span<const double> psi_deg,
                                        int n, Rng& rng);

// Dataset sample files: versioned text header, then K little-endian records of
// (x, y, z, s) float32 plus one label byte (255 = unlabeled).
struct SampleFileHeader {
  std::string family;
  int instance = 0;
  std::vector<double> psi_deg;
  std::uint64_t seed = 0;
  int count = 0;
};

void write_samples(const std::filesystem::path& path, const SampleFileHeader& header,
                   std::span<const SdfSample> samples);
std::vector<SdfSample> read_samples(const std::filesystem::path& path, SampleFileHeader* header = nullptr);

}  // namespace asdf::shapes
