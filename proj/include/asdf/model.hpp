#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "asdf/autodiff.hpp"
#include "asdf/rng.hpp"
#include "asdf/tensor.hpp"
#include "asdf/vec3.hpp"

namespace asdf::model {

enum class Kind { Asdf, Baseline };

struct ModelConfig {
  Kind kind = Kind::Asdf;
  int shape_code_dim = 16;        // C
  int dof = 1;                    // D
  int shape_feature_dim = 64;     // F
  std::vector<int> fs_hidden = {128, 128, 128};
  std::vector<int> fa_hidden = {128, 128, 128, 128};
  int part_count = 2;             // P; 0 disables the part head
  double angle_scale = 0.017453292519943295;  // degrees -> radians at the input

  int code_dim() const { return kind == Kind::Baseline ? shape_code_dim + dof : shape_code_dim; }
  // Width of the articulation embedding input/output per the wiring contract.
  int emb_in() const { return dof + 3; }
  int emb_out() const { return shape_code_dim + 3; }
  int fa_in() const { return (shape_feature_dim + shape_code_dim) + emb_out(); }
  // The entangled baseline reuses the combined depth at the same width.
  std::vector<int> baseline_hidden() const;
  void validate() const;
};

struct LinearLayer {
  Tensor w;  // [in x out]
  Tensor b;  // [out]
};

struct Mlp {
  std::vector<LinearLayer> hidden;
  LinearLayer out;
};

// All trainables of the A-SDF network (codes live in the CodeBook).
struct ASDFParams {
  Mlp fs;                 // shape encoder, output width F
  LinearLayer emb;        // articulation embedding, (D+3) -> (C+3), affine
  Mlp fa;                 // articulation network, output width 1
  LinearLayer part_head;  // last fa hidden -> P (empty tensors when P == 0)
  bool has_part_head = false;
};

// Tagged container so training/inference/serialization can treat both model
// kinds uniformly.
struct Model {
  ModelConfig cfg;
  ASDFParams asdf;  // kind == Asdf
  Mlp baseline;     // kind == Baseline

  void for_each_param(const std::function<void(const std::string&, Tensor&)>& fn);
  void for_each_param(const std::function<void(const std::string&, const Tensor&)>& fn) const;
  long param_count() const;
};

Model init_model(const ModelConfig& cfg, Rng& rng);

// Leaf ids of all parameters attached to a graph.
struct ParamLeaves {
  std::vector<std::pair<int, int>> fs;  // (w, b)
  std::pair<int, int> emb{-1, -1};
  std::vector<std::pair<int, int>> fa;
  std::pair<int, int> fa_out{-1, -1};
  std::pair<int, int> part_head{-1, -1};
  std::vector<std::pair<int, int>> baseline;
  std::pair<int, int> baseline_out{-1, -1};
};

enum class Trainable { None, All, EncoderOnly };

ParamLeaves attach_params(ad::Graph& g, const Model& m, Trainable which);

struct ForwardNodes {
  int pred = -1;        // [B x 1]
  int logits = -1;      // [B x P] or -1
  int shape_emb = -1;   // [B x (F+C)]
  int art_emb = -1;     // [B x (C+3)]
};

// Eq.-1 wiring: f_a[concat(shape embedding, articulation embedding)].
// x_leaf: [B x 3]; phi_leaf: [C]; psi_leaf: [D] in degrees.
ForwardNodes build_asdf_forward(ad::Graph& g, const ModelConfig& cfg, const ParamLeaves& p,
                                int x_leaf, int phi_leaf, int psi_leaf);

// Plain MLP on concat(z, x) for the entangled single-code baseline.
ForwardNodes build_baseline_forward(ad::Graph& g, const ModelConfig& cfg, const ParamLeaves& p,
                                    int x_leaf, int z_leaf);

// Instrumentation hook for the disentanglement property: same wiring but the
// articulation embedding is replaced by a caller-supplied [B x (C+3)] node.
ForwardNodes build_asdf_forward_with_embedding(ad::Graph& g, const ModelConfig& cfg,
                                               const ParamLeaves& p, int x_leaf, int phi_leaf,
                                               int art_emb_node);

// Forward-only conveniences (fresh scratch graph per call).
Tensor shape_embedding(const Model& m, std::span<const Vec3> x, const Tensor& phi);
Tensor articulation_embedding(const Model& m, std::span<const Vec3> x, std::span<const double> psi_deg);
struct ForwardResult {
  std::vector<double> sdf;
  std::vector<int> part_labels;  // argmax, empty when no head
  Tensor logits;
};
ForwardResult asdf_forward(const Model& m, std::span<const Vec3> x, const Tensor& phi,
                           std::span<const double> psi_deg);
std::vector<double> baseline_forward(const Model& m, std::span<const Vec3> x, const Tensor& z);

Tensor points_to_tensor(std::span<const Vec3> pts);

}  // namespace asdf::model
