#include "asdf/infer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "asdf/common.hpp"
#include "asdf/kernels.hpp"

namespace asdf::infer {

namespace {

constexpr std::uint64_t kJointStage = 0x10ULL;
constexpr std::uint64_t kShapeStage = 0x20ULL;
constexpr std::uint64_t kTtaStage = 0x30ULL;
constexpr std::uint64_t kBaselineStage = 0x40ULL;
constexpr std::uint64_t kPhiInit = 0xf1ULL;
constexpr double kRadPerDeg = 0.017453292519943295;

struct SampleArrays {
  std::vector<Vec3> pts;
  std::vector<double> targets;  // unclamped
};

SampleArrays to_arrays(std::span<const shapes::SdfSample> samples) {
  SampleArrays a;
  a.pts.resize(samples.size());
  a.targets.resize(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    a.pts[i] = samples[i].x;
    a.targets[i] = samples[i].s;
  }
  return a;
}

Tensor clamped_target_tensor(std::span<const double> targets, std::span<const int> pick,
                             double delta) {
  Tensor t = Tensor::zeros({static_cast<int>(pick.size()), 1});
  for (std::size_t i = 0; i < pick.size(); ++i)
    t.data[i] = std::clamp(targets[static_cast<std::size_t>(pick[i])], -delta, delta);
  return t;
}

Tensor gather_points(std::span<const Vec3> pts, std::span<const int> pick) {
  Tensor t = Tensor::zeros({static_cast<int>(pick.size()), 3});
  for (std::size_t i = 0; i < pick.size(); ++i) {
    const Vec3& p = pts[static_cast<std::size_t>(pick[i])];
    t.data[i * 3 + 0] = p.x;
    t.data[i * 3 + 1] = p.y;
    t.data[i * 3 + 2] = p.z;
  }
  return t;
}

Tensor random_code(int dim, double stddev, Rng& rng) {
  Tensor c = Tensor::zeros({dim});
  for (double& v : c.data) v = rng.gaussian(0.0, stddev);
  return c;
}

enum class StageKind { Joint, Shape, Tta, BaselineFit };

const char* stage_name(StageKind k) {
  switch (k) {
    case StageKind::Joint: return "articulation estimation";
    case StageKind::Shape: return "shape code estimation";
    case StageKind::Tta: return "test-time adaptation";
    default: return "baseline code fit";
  }
}

// Eq. 2 on the full sample set, forward only.
double full_set_sdf_loss(const model::Model& m, const Tensor& code,
                         std::span<const double> psi_deg, const SampleArrays& a, double delta) {
  std::vector<double> pred;
  if (m.cfg.kind == model::Kind::Asdf)
    pred = model::asdf_forward(m, a.pts, code, psi_deg).sdf;
  else
    pred = model::baseline_forward(m, a.pts, code);
  return train::loss_sdf(pred, a.targets, delta);
}

struct StageResult {
  Tensor phi;
  Tensor psi_rad;  // empty unless Joint
  model::Model adapted;
  double pre_loss = 0, post_loss = 0;
};

// One optimization stage of Alg. 1. Exactly one of {codes, encoder} moves:
// Joint updates (phi, psi), Shape updates phi, Tta updates f_s, BaselineFit
// updates z. Everything else is bitwise-preserved.
StageResult run_stage(const model::Model& m_in, std::span<const shapes::SdfSample> samples,
                      const InferenceConfig& cfg, StageKind kind, Tensor phi0,
                      std::vector<double> psi_deg, std::uint64_t stage_tag, StageTrace* trace) {
  if (samples.empty()) throw InvalidParameter("inference: empty sample set");
  const SampleArrays arrays = to_arrays(samples);
  const int total = static_cast<int>(samples.size());
  const bool subsample = total > cfg.points_per_iter;

  model::Model m = m_in;  // Tta mutates the copy's encoder
  const bool opt_phi = kind == StageKind::Joint || kind == StageKind::Shape || kind == StageKind::BaselineFit;
  const bool opt_psi = kind == StageKind::Joint;
  const bool opt_enc = kind == StageKind::Tta;

  Tensor phi = std::move(phi0);
  Tensor psi_rad = Tensor::zeros({std::max<int>(1, m.cfg.dof)});
  if (m.cfg.kind == model::Kind::Asdf) {
    if (static_cast<int>(psi_deg.size()) != m.cfg.dof)
      throw ShapeError("inference: articulation dimension mismatch");
    for (std::size_t d = 0; d < psi_deg.size(); ++d) psi_rad.data[d] = psi_deg[d] * kRadPerDeg;
  }

  // The articulation code is optimized in network units (radians); the
  // degree-space code is recovered at the end. Adam's per-step magnitude is
  // ~lr, so 1e-2 traverses the radian-scale range comfortably within 800
  // iterations where a degree-scale variable would stall.
  model::ModelConfig fwd_cfg = m.cfg;
  fwd_cfg.angle_scale = 1.0;

  ad::AdamConfig phi_cfg;
  phi_cfg.lr = cfg.lr_code;
  ad::AdamState phi_opt = ad::AdamState::init(phi_cfg, {&phi}, {"phi"});
  ad::AdamConfig psi_cfg;
  psi_cfg.lr = cfg.lr_psi;
  ad::AdamState psi_opt = ad::AdamState::init(psi_cfg, {&psi_rad}, {"psi"});

  std::vector<Tensor*> enc_params;
  ad::AdamState enc_opt;
  if (opt_enc) {
    std::vector<const Tensor*> cparams;
    std::vector<std::string> names;
    for (auto& l : m.asdf.fs.hidden) {
      enc_params.push_back(&l.w);
      enc_params.push_back(&l.b);
    }
    enc_params.push_back(&m.asdf.fs.out.w);
    enc_params.push_back(&m.asdf.fs.out.b);
    for (std::size_t i = 0; i < enc_params.size(); ++i) {
      cparams.push_back(enc_params[i]);
      names.push_back("fs[" + std::to_string(i) + "]");
    }
    ad::AdamConfig enc_cfg;
    enc_cfg.lr = cfg.lr_tta;
    enc_opt = ad::AdamState::init(enc_cfg, cparams, names);
  }

  // TTA keeps the best full-set iterate; the initial encoder is candidate 0,
  // so the adapted loss can never exceed the pre-adaptation loss.
  StageResult result;
  double best_loss = 0;
  std::vector<Tensor> best_enc;
  std::vector<double> cur_psi_deg(psi_deg);
  if (opt_enc) {
    best_loss = full_set_sdf_loss(m, phi, cur_psi_deg, arrays, cfg.clamp_delta);
    result.pre_loss = best_loss;
    best_enc.reserve(enc_params.size());
    for (Tensor* t : enc_params) best_enc.push_back(*t);
  }

  std::vector<int> all_idx(static_cast<std::size_t>(total));
  for (int i = 0; i < total; ++i) all_idx[static_cast<std::size_t>(i)] = i;

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    std::vector<int> pick;
    if (subsample) {
      Rng rng = Rng::derive(cfg.seed, {stage_tag, 0xBA7CULL, static_cast<std::uint64_t>(iter)});
      pick = rng.sample_without_replacement(total, cfg.points_per_iter);
    } else {
      pick = all_idx;
    }

    ad::Graph g;
    model::ParamLeaves p = model::attach_params(
        g, m, opt_enc ? model::Trainable::EncoderOnly : model::Trainable::None);
    const int x_leaf = g.leaf(gather_points(arrays.pts, pick));
    const int target_leaf = g.leaf(clamped_target_tensor(arrays.targets, pick, cfg.clamp_delta));
    const int phi_leaf = g.leaf(phi, opt_phi);

    model::ForwardNodes fwd;
    int psi_leaf = -1;
    if (m.cfg.kind == model::Kind::Asdf) {
      psi_leaf = g.leaf(psi_rad, opt_psi);
      fwd = build_asdf_forward(g, fwd_cfg, p, x_leaf, phi_leaf, psi_leaf);
    } else {
      fwd = build_baseline_forward(g, fwd_cfg, p, x_leaf, phi_leaf);
    }
    // Part labels are never assumed at test time; the objective is Eq. 4 with
    // lambda_p = 0 and the prior on the code being optimized.
    int loss = g.l1_loss(g.clamp(fwd.pred, cfg.clamp_delta), target_leaf);
    if (opt_phi && cfg.lambda_code != 0.0)
      loss = g.add(loss, g.scale(g.sum_squares(phi_leaf), cfg.lambda_code));
    g.backward(loss);

    const double loss_val = g.value(loss).data[0];
    if (!std::isfinite(loss_val)) {
      std::ostringstream msg;
      msg << "inference diverged during " << stage_name(kind) << " at iteration " << iter
          << "; trace tail:";
      if (trace)
        for (std::size_t i = trace->loss.size() > 5 ? trace->loss.size() - 5 : 0;
             i < trace->loss.size(); ++i)
          msg << " " << trace->loss[i];
      throw NumericsError(msg.str());
    }
    if (trace) trace->loss.push_back(loss_val);

    if (opt_phi) {
      const Tensor grad = g.gradient(phi_leaf);
      ad::adam_step({&phi}, {&grad}, phi_opt);
    }
    if (opt_psi) {
      const Tensor grad = g.gradient(psi_leaf);
      ad::adam_step({&psi_rad}, {&grad}, psi_opt);
    }
    if (opt_enc) {
      std::vector<Tensor> grads;
      grads.reserve(enc_params.size());
      std::vector<int> ids;
      for (const auto& l : p.fs) {
        ids.push_back(l.first);
        ids.push_back(l.second);
      }
      std::vector<const Tensor*> gptrs;
      for (int id : ids) grads.push_back(g.gradient(id));
      for (const Tensor& t : grads) gptrs.push_back(&t);
      ad::adam_step(enc_params, gptrs, enc_opt);

      if ((iter + 1) % cfg.tta_eval_every == 0 || iter + 1 == cfg.iterations) {
        const double full = full_set_sdf_loss(m, phi, cur_psi_deg, arrays, cfg.clamp_delta);
        if (full < best_loss) {
          best_loss = full;
          for (std::size_t i = 0; i < enc_params.size(); ++i) best_enc[i] = *enc_params[i];
        }
      }
    }
  }

  if (opt_enc) {
    for (std::size_t i = 0; i < enc_params.size(); ++i) *enc_params[i] = best_enc[i];
    result.post_loss = best_loss;
    result.adapted = std::move(m);
  }
  result.phi = std::move(phi);
  result.psi_rad = std::move(psi_rad);
  return result;
}

}  // namespace

std::vector<double> ArticulationRange::midpoint() const {
  std::vector<double> mid(observed_lo.size());
  for (std::size_t d = 0; d < observed_lo.size(); ++d)
    mid[d] = 0.5 * (observed_lo[d] + observed_hi[d]);
  return mid;
}

std::pair<Tensor, std::vector<double>> estimate_joint(const model::Model& m,
                                                      std::span<const shapes::SdfSample> samples,
                                                      const ArticulationRange& range,
                                                      const InferenceConfig& cfg,
                                                      StageTrace* trace) {
  if (m.cfg.kind != model::Kind::Asdf)
    throw UnsupportedOperation("estimate_joint: baseline model has no articulation code");
  Rng rng = Rng::derive(cfg.seed, {kJointStage, kPhiInit});
  Tensor phi0 = random_code(m.cfg.shape_code_dim, cfg.code_init_std, rng);
  StageResult r = run_stage(m, samples, cfg, StageKind::Joint, std::move(phi0), range.midpoint(),
                            kJointStage, trace);
  std::vector<double> psi_deg(static_cast<std::size_t>(m.cfg.dof));
  for (int d = 0; d < m.cfg.dof; ++d) {
    double deg = r.psi_rad.data[static_cast<std::size_t>(d)] / kRadPerDeg;
    if (!cfg.allow_extrapolation)
      deg = std::clamp(deg, range.family_lo[static_cast<std::size_t>(d)],
                       range.family_hi[static_cast<std::size_t>(d)]);
    psi_deg[static_cast<std::size_t>(d)] = deg;
  }
  return {std::move(r.phi), std::move(psi_deg)};
}

Tensor estimate_shape(const model::Model& m, std::span<const shapes::SdfSample> samples,
                      std::span<const double> psi_deg, const InferenceConfig& cfg,
                      StageTrace* trace) {
  Rng rng = Rng::derive(cfg.seed, {kShapeStage, kPhiInit});
  Tensor phi0 = random_code(m.cfg.shape_code_dim, cfg.code_init_std, rng);
  StageResult r = run_stage(m, samples, cfg, StageKind::Shape, std::move(phi0),
                            {psi_deg.begin(), psi_deg.end()}, kShapeStage, trace);
  return std::move(r.phi);
}

model::Model tta(const model::Model& m, std::span<const shapes::SdfSample> samples,
                 const Tensor& phi, std::span<const double> psi_deg, const InferenceConfig& cfg,
                 StageTrace* trace, double* pre_loss, double* post_loss) {
  if (m.cfg.kind != model::Kind::Asdf)
    throw UnsupportedOperation("tta: only the A-SDF model has a shape encoder");
  StageResult r = run_stage(m, samples, cfg, StageKind::Tta, phi,
                            {psi_deg.begin(), psi_deg.end()}, kTtaStage, trace);
  if (pre_loss) *pre_loss = r.pre_loss;
  if (post_loss) *post_loss = r.post_loss;
  return std::move(r.adapted);
}

InferenceResult run_pipeline(const model::Model& m, std::span<const shapes::SdfSample> samples,
                             const ArticulationRange& range, const InferenceConfig& cfg) {
  InferenceResult res;
  auto [phi0, psi_hat] = estimate_joint(m, samples, range, cfg, &res.joint_trace);
  (void)phi0;  // discarded: the joint stage's shape estimate is noisy
  res.psi_deg = psi_hat;
  res.phi = estimate_shape(m, samples, res.psi_deg, cfg, &res.shape_trace);
  const SampleArrays arrays = to_arrays(samples);
  res.pre_tta_loss = full_set_sdf_loss(m, res.phi, res.psi_deg, arrays, cfg.clamp_delta);
  res.post_tta_loss = res.pre_tta_loss;
  if (cfg.tta) {
    res.adapted = tta(m, samples, res.phi, res.psi_deg, cfg, &res.tta_trace, &res.pre_tta_loss,
                      &res.post_tta_loss);
    res.tta_ran = true;
  }
  return res;
}

Tensor estimate_code_baseline(const model::Model& m, std::span<const shapes::SdfSample> samples,
                              const InferenceConfig& cfg, StageTrace* trace) {
  if (m.cfg.kind != model::Kind::Baseline)
    throw UnsupportedOperation("estimate_code_baseline: expected the baseline model");
  Rng rng = Rng::derive(cfg.seed, {kBaselineStage, kPhiInit});
  Tensor z0 = random_code(m.cfg.code_dim(), cfg.code_init_std, rng);
  StageResult r =
      run_stage(m, samples, cfg, StageKind::BaselineFit, std::move(z0), {}, kBaselineStage, trace);
  return std::move(r.phi);
}

namespace {

constexpr std::size_t kFieldChunk = 2048;

}  // namespace

mesh::Field generate(const model::Model& m, const Tensor& phi, std::span<const double> psi_deg) {
  if (m.cfg.kind != model::Kind::Asdf) throw UnsupportedOperation("generate: expected A-SDF model");
  if (static_cast<int>(psi_deg.size()) != m.cfg.dof)
    throw ShapeError("generate: articulation dimension mismatch");
  auto model_copy = std::make_shared<model::Model>(m);
  auto phi_copy = std::make_shared<Tensor>(phi);
  auto psi_copy = std::make_shared<std::vector<double>>(psi_deg.begin(), psi_deg.end());

  mesh::Field field;
  field.sdf = [model_copy, phi_copy, psi_copy](std::span<const Vec3> pts, std::span<double> out) {
    for (std::size_t base = 0; base < pts.size(); base += kFieldChunk) {
      const std::size_t n = std::min(kFieldChunk, pts.size() - base);
      model::ForwardResult r =
          model::asdf_forward(*model_copy, pts.subspan(base, n), *phi_copy, *psi_copy);
      std::copy(r.sdf.begin(), r.sdf.end(), out.begin() + static_cast<std::ptrdiff_t>(base));
    }
  };
  if (m.asdf.has_part_head) {
    field.labels = [model_copy, phi_copy, psi_copy](std::span<const Vec3> pts, std::span<int> out) {
      for (std::size_t base = 0; base < pts.size(); base += kFieldChunk) {
        const std::size_t n = std::min(kFieldChunk, pts.size() - base);
        model::ForwardResult r =
            model::asdf_forward(*model_copy, pts.subspan(base, n), *phi_copy, *psi_copy);
        std::copy(r.part_labels.begin(), r.part_labels.end(),
                  out.begin() + static_cast<std::ptrdiff_t>(base));
      }
    };
  }
  return field;
}

mesh::Field generate_baseline(const model::Model& m, const Tensor& z) {
  if (m.cfg.kind != model::Kind::Baseline)
    throw UnsupportedOperation("generate_baseline: expected baseline model");
  auto model_copy = std::make_shared<model::Model>(m);
  auto z_copy = std::make_shared<Tensor>(z);
  mesh::Field field;
  field.sdf = [model_copy, z_copy](std::span<const Vec3> pts, std::span<double> out) {
    for (std::size_t base = 0; base < pts.size(); base += kFieldChunk) {
      const std::size_t n = std::min(kFieldChunk, pts.size() - base);
      std::vector<double> r = model::baseline_forward(*model_copy, pts.subspan(base, n), *z_copy);
      std::copy(r.begin(), r.end(), out.begin() + static_cast<std::ptrdiff_t>(base));
    }
  };
  return field;
}

std::pair<Tensor, std::vector<double>> interpolate_codes(const InferenceResult& a,
                                                         const InferenceResult& b, double t) {
  if (!a.phi.same_shape(b.phi) || a.psi_deg.size() != b.psi_deg.size())
    throw ShapeError("interpolate_codes: code dimensions disagree");
  Tensor phi = Tensor::zeros(a.phi.shape);
  for (std::size_t i = 0; i < phi.size(); ++i)
    phi.data[i] = (1.0 - t) * a.phi.data[i] + t * b.phi.data[i];
  std::vector<double> psi(a.psi_deg.size());
  for (std::size_t d = 0; d < psi.size(); ++d)
    psi[d] = (1.0 - t) * a.psi_deg[d] + t * b.psi_deg[d];
  return {std::move(phi), std::move(psi)};
}

Tensor interpolate_baseline(const Tensor& za, const Tensor& zb, double t) {
  if (!za.same_shape(zb)) throw ShapeError("interpolate_baseline: code dimensions disagree");
  Tensor z = Tensor::zeros(za.shape);
  for (std::size_t i = 0; i < z.size(); ++i) z.data[i] = (1.0 - t) * za.data[i] + t * zb.data[i];
  return z;
}

void write_result_record(const std::filesystem::path& path, const InferenceResult& r) {
  std::ofstream f(path);
  if (!f) throw IoError("write_result_record: cannot open " + path.string());
  f.precision(17);
  f << "asdf-inference 1\n";
  f << "phi";
  for (double v : r.phi.data) f << " " << v;
  f << "\npsi_deg";
  for (double v : r.psi_deg) f << " " << v;
  f << "\ntta " << (r.tta_ran ? 1 : 0) << "\n";
  auto last = [](const StageTrace& t) { return t.loss.empty() ? 0.0 : t.loss.back(); };
  f << "loss_joint " << last(r.joint_trace) << "\n";
  f << "loss_shape " << last(r.shape_trace) << "\n";
  f << "loss_tta_pre " << r.pre_tta_loss << "\n";
  f << "loss_tta_post " << r.post_tta_loss << "\n";
}

}  // namespace asdf::infer
