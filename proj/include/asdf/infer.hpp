#pragma once

#include <optional>
#include <span>
#include <vector>

#include "asdf/mesh.hpp"
#include "asdf/model.hpp"
#include "asdf/shapes.hpp"
#include "asdf/train.hpp"

namespace asdf::infer {

// Observed articulation range (from the training grid) plus the hard family
// limits, used for midpoint init and post-estimation clamping.
struct ArticulationRange {
  std::vector<double> observed_lo, observed_hi;  // training grid extremes
  std::vector<double> family_lo, family_hi;      // joint limits

  std::vector<double> midpoint() const;
};

struct InferenceConfig {
  int iterations = 800;  // per stage
  double lr_code = 1e-2;
  double lr_psi = 1e-2;
  double lr_tta = 1e-4;
  int points_per_iter = 1024;
  double clamp_delta = 0.1;
  double lambda_code = 1e-4;
  double code_init_std = 0.01;
  bool tta = true;
  bool allow_extrapolation = false;  // skip the post-stage-2 range clamp
  int tta_eval_every = 100;          // full-set loss snapshots during TTA
  std::uint64_t seed = 0;
};

struct StageTrace {
  std::vector<double> loss;  // per-iteration objective on the iteration batch
};

struct InferenceResult {
  Tensor phi;
  std::vector<double> psi_deg;
  bool tta_ran = false;
  model::Model adapted;  // full model with the adapted encoder (tta_ran only)
  StageTrace joint_trace, shape_trace, tta_trace;
  double pre_tta_loss = 0, post_tta_loss = 0;  // Eq. 2 on the full sample set
};

// Alg. 1 steps 1-2: joint (phi, psi) estimation with frozen weights. The
// returned phi is the noisy initial estimate the caller discards.
std::pair<Tensor, std::vector<double>> estimate_joint(const model::Model& m,
                                                      std::span<const shapes::SdfSample> samples,
                                                      const ArticulationRange& range,
                                                      const InferenceConfig& cfg,
                                                      StageTrace* trace = nullptr);

// Alg. 1 steps 3-4: fresh phi optimized with psi frozen.
Tensor estimate_shape(const model::Model& m, std::span<const shapes::SdfSample> samples,
                      std::span<const double> psi_deg, const InferenceConfig& cfg,
                      StageTrace* trace = nullptr);

// Alg. 1 step 5: encoder-only finetuning with both codes frozen. Everything
// except the f_s tensors is bitwise-preserved. Returns the adapted model; the
// caller keeps the original for reverting. The kept weights are the best
// full-set iterate (the initial state is a candidate, so the post loss never
// exceeds the pre loss).
model::Model tta(const model::Model& m, std::span<const shapes::SdfSample> samples,
                 const Tensor& phi, std::span<const double> psi_deg, const InferenceConfig& cfg,
                 StageTrace* trace = nullptr, double* pre_loss = nullptr,
                 double* post_loss = nullptr);

// Full pipeline (stages 1-5; stage 5 iff cfg.tta).
InferenceResult run_pipeline(const model::Model& m, std::span<const shapes::SdfSample> samples,
                             const ArticulationRange& range, const InferenceConfig& cfg);

// Single-stage code fit for the entangled baseline.
Tensor estimate_code_baseline(const model::Model& m, std::span<const shapes::SdfSample> samples,
                              const InferenceConfig& cfg, StageTrace* trace = nullptr);

// Implicit field f_theta(., phi, psi_new); carries part labels when the model
// has a head. The model is copied into the handle.
mesh::Field generate(const model::Model& m, const Tensor& phi, std::span<const double> psi_deg);
mesh::Field generate_baseline(const model::Model& m, const Tensor& z);

// Separate linear blends of the disentangled codes (t outside [0,1] is
// extrapolation).
std::pair<Tensor, std::vector<double>> interpolate_codes(const InferenceResult& a,
                                                         const InferenceResult& b, double t);
Tensor interpolate_baseline(const Tensor& za, const Tensor& zb, double t);

// Structured text record with codes, per-stage final losses and the TTA flag.
void write_result_record(const std::filesystem::path& path, const InferenceResult& r);

}  // namespace asdf::infer
