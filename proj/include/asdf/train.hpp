#pragma once

#include <span>
#include <string>
#include <vector>

#include "asdf/autodiff.hpp"
#include "asdf/model.hpp"
#include "asdf/shapes.hpp"

namespace asdf::train {

struct TrainConfig {
  int epochs = 400;
  double lr_net = 5e-4;
  double lr_codes = 1e-3;
  double lambda_part = 1e-3;   // 0 exactly when part labels are disabled
  double lambda_code = 1e-4;
  double clamp_delta = 0.1;
  double code_init_std = 0.01;
  int shapes_per_batch = 8;
  int points_per_shape = 512;
  std::uint64_t seed = 0;
};

// One articulated training shape: instance id, its fixed articulation code
// (ground truth, never optimized) and the stored SDF samples.
struct ShapeRecord {
  int instance = 0;
  int art_index = 0;
  std::vector<double> psi_deg;
  std::vector<shapes::SdfSample> samples;
};

struct Dataset {
  std::string family;
  int dof = 1;
  int part_count = 0;
  int instance_count = 0;
  std::vector<ShapeRecord> shapes;  // N x M
};

// Latent codes: one per instance for the A-SDF model (shared across
// articulations), one per shape for the entangled baseline. Each code carries
// its own Adam state so sparse updates stay exact.
struct CodeBook {
  std::vector<Tensor> codes;
  std::vector<ad::AdamState> opt;

  const Tensor& code_for(const Dataset& ds, int shape_index, model::Kind kind) const;
  int code_index(const Dataset& ds, int shape_index, model::Kind kind) const;
};

struct EpochLoss {
  double sdf = 0, part = 0, total = 0;
};

struct TrainState {
  model::Model model;
  CodeBook codes;
  ad::AdamState net_opt;
  int epoch = 0;  // epochs completed
  std::vector<EpochLoss> history;
};

struct LossWeights {
  double lambda_part = 0;
  double lambda_code = 0;
  double delta = 0.1;
};

// Eq. 2: (1/K) sum |clamp(pred, delta) - clamp(target, delta)|.
double loss_sdf(std::span<const double> pred, std::span<const double> target, double delta);
// Eq. 3: mean cross entropy over points.
double loss_part(const Tensor& logits, std::span<const int> labels);

struct LossBreakdown {
  double sdf = 0, part = 0, reg = 0, total = 0;
};

// Eq. 4 evaluated forward-only on a sample set (lambda_part ignored unless the
// model has a part head and labels are present).
LossBreakdown eval_loss(const model::Model& m, const Tensor& code, std::span<const double> psi_deg,
                        std::span<const shapes::SdfSample> samples, const LossWeights& w);

// Parameter list in serialization order (names aligned with pointers).
std::vector<std::string> param_names(const model::Model& m);
std::vector<Tensor*> param_ptrs(model::Model& m);

TrainState init_training(const Dataset& ds, const model::ModelConfig& cfg, const TrainConfig& tc);

// Runs epochs [state.epoch, until_epoch). Deterministic given (config, seed):
// every random draw is derived from (seed, epoch, step, slot).
void train_epochs(TrainState& state, const Dataset& ds, const TrainConfig& tc, int until_epoch);

// Full run: init + all epochs.
TrainState train(const Dataset& ds, const model::ModelConfig& cfg, const TrainConfig& tc);

void write_loss_csv(const std::string& path, const std::vector<EpochLoss>& history);

}  // namespace asdf::train
