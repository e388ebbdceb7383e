#include "asdf/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "asdf/common.hpp"
#include "asdf/kernels.hpp"

namespace asdf::train {

namespace {

constexpr std::uint64_t kWeightInit = 0x11eaULL;
constexpr std::uint64_t kCodeInit = 0xc0deULL;
constexpr std::uint64_t kEpochOrder = 0xe70cULL;
constexpr std::uint64_t kPointPick = 0x907ULL;

std::vector<int> flatten_leaves(const model::ParamLeaves& p, model::Kind kind) {
  std::vector<int> ids;
  auto push = [&ids](const std::pair<int, int>& l) {
    ids.push_back(l.first);
    ids.push_back(l.second);
  };
  if (kind == model::Kind::Asdf) {
    for (const auto& l : p.fs) push(l);
    push(p.emb);
    for (const auto& l : p.fa) push(l);
    push(p.fa_out);
    if (p.part_head.first >= 0) push(p.part_head);
  } else {
    for (const auto& l : p.baseline) push(l);
    push(p.baseline_out);
  }
  return ids;
}

struct SlotResult {
  std::vector<Tensor> param_grads;
  Tensor code_grad;
  int code_index = -1;
  double loss_sdf = 0, loss_part = 0, loss_total = 0;
};

// Forward + backward for one shape; pure given its rng.
SlotResult run_slot(const model::Model& m, const Dataset& ds, const TrainConfig& tc,
                    const ShapeRecord& shape, const Tensor& code, int code_index, Rng& rng) {
  const int total = static_cast<int>(shape.samples.size());
  const int take = std::min(tc.points_per_shape, total);
  std::vector<int> pick = rng.sample_without_replacement(total, take);

  std::vector<Vec3> pts(static_cast<std::size_t>(take));
  Tensor targets = Tensor::zeros({take, 1});
  std::vector<int> labels;
  const bool use_part =
      m.cfg.kind == model::Kind::Asdf && m.asdf.has_part_head && tc.lambda_part != 0.0;
  if (use_part) labels.resize(static_cast<std::size_t>(take));
  for (int i = 0; i < take; ++i) {
    const shapes::SdfSample& s = shape.samples[static_cast<std::size_t>(pick[static_cast<std::size_t>(i)])];
    pts[static_cast<std::size_t>(i)] = s.x;
    double t = s.s;
    if (t > tc.clamp_delta) t = tc.clamp_delta;
    if (t < -tc.clamp_delta) t = -tc.clamp_delta;
    targets.data[static_cast<std::size_t>(i)] = t;
    if (use_part) {
      if (s.part < 0)
        throw InvalidParameter("train: part loss enabled but sample has no part label");
      labels[static_cast<std::size_t>(i)] = s.part;
    }
  }

  ad::Graph g;
  model::ParamLeaves p = attach_params(g, m, model::Trainable::All);
  const int x_leaf = g.leaf(model::points_to_tensor(pts));
  const int code_leaf = g.leaf(code, /*trainable=*/true);
  const int target_leaf = g.leaf(std::move(targets));

  model::ForwardNodes fwd;
  if (m.cfg.kind == model::Kind::Asdf) {
    const int psi_leaf = g.leaf(Tensor::row_vector({shape.psi_deg.begin(), shape.psi_deg.end()}));
    fwd = build_asdf_forward(g, m.cfg, p, x_leaf, code_leaf, psi_leaf);
  } else {
    fwd = build_baseline_forward(g, m.cfg, p, x_leaf, code_leaf);
  }

  const int sdf_term = g.l1_loss(g.clamp(fwd.pred, tc.clamp_delta), target_leaf);
  int loss = sdf_term;
  int part_term = -1;
  if (use_part && fwd.logits >= 0) {
    part_term = g.cross_entropy(fwd.logits, labels);
    loss = g.add(loss, g.scale(part_term, tc.lambda_part));
  }
  if (tc.lambda_code != 0.0) loss = g.add(loss, g.scale(g.sum_squares(code_leaf), tc.lambda_code));
  g.backward(loss);

  SlotResult r;
  r.code_index = code_index;
  r.loss_sdf = g.value(sdf_term).data[0];
  r.loss_part = part_term >= 0 ? g.value(part_term).data[0] : 0.0;
  r.loss_total = g.value(loss).data[0];
  const std::vector<int> leaf_ids = flatten_leaves(p, m.cfg.kind);
  r.param_grads.reserve(leaf_ids.size());
  for (int id : leaf_ids) r.param_grads.push_back(g.gradient(id));
  r.code_grad = g.gradient(code_leaf);
  (void)ds;
  return r;
}

}  // namespace

const Tensor& CodeBook::code_for(const Dataset& ds, int shape_index, model::Kind kind) const {
  return codes[static_cast<std::size_t>(code_index(ds, shape_index, kind))];
}

int CodeBook::code_index(const Dataset& ds, int shape_index, model::Kind kind) const {
  if (kind == model::Kind::Asdf) return ds.shapes[static_cast<std::size_t>(shape_index)].instance;
  return shape_index;
}

double loss_sdf(std::span<const double> pred, std::span<const double> target, double delta) {
  if (pred.empty()) throw InvalidParameter("loss_sdf: empty batch");
  if (pred.size() != target.size()) throw ShapeError("loss_sdf: length mismatch");
  if (!(delta > 0)) throw InvalidParameter("loss_sdf: delta must be positive");
  double acc = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double a = std::clamp(pred[i], -delta, delta);
    const double b = std::clamp(target[i], -delta, delta);
    acc += std::fabs(a - b);
  }
  return acc / static_cast<double>(pred.size());
}

double loss_part(const Tensor& logits, std::span<const int> labels) {
  ad::Graph g;
  const int l = g.leaf(logits);
  return g.value(g.cross_entropy(l, {labels.begin(), labels.end()})).data[0];
}

LossBreakdown eval_loss(const model::Model& m, const Tensor& code, std::span<const double> psi_deg,
                        std::span<const shapes::SdfSample> samples, const LossWeights& w) {
  if (samples.empty()) throw InvalidParameter("eval_loss: empty sample set");
  std::vector<Vec3> pts(samples.size());
  std::vector<double> targets(samples.size());
  std::vector<int> labels(samples.size(), -1);
  bool have_labels = true;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    pts[i] = samples[i].x;
    targets[i] = samples[i].s;
    labels[i] = samples[i].part;
    have_labels = have_labels && samples[i].part >= 0;
  }
  LossBreakdown out;
  if (m.cfg.kind == model::Kind::Asdf) {
    model::ForwardResult fr = model::asdf_forward(m, pts, code, psi_deg);
    out.sdf = loss_sdf(fr.sdf, targets, w.delta);
    if (w.lambda_part != 0.0 && m.asdf.has_part_head && have_labels)
      out.part = loss_part(fr.logits, labels);
  } else {
    std::vector<double> pred = model::baseline_forward(m, pts, code);
    out.sdf = loss_sdf(pred, targets, w.delta);
  }
  out.reg = kernels::active().sum_squares(code.data.data(), code.size());
  out.total = out.sdf + w.lambda_part * out.part + w.lambda_code * out.reg;
  return out;
}

std::vector<std::string> param_names(const model::Model& m) {
  std::vector<std::string> names;
  m.for_each_param([&names](const std::string& n, const Tensor&) { names.push_back(n); });
  return names;
}

std::vector<Tensor*> param_ptrs(model::Model& m) {
  std::vector<Tensor*> ptrs;
  m.for_each_param([&ptrs](const std::string&, Tensor& t) { ptrs.push_back(&t); });
  return ptrs;
}

TrainState init_training(const Dataset& ds, const model::ModelConfig& cfg, const TrainConfig& tc) {
  if (ds.shapes.empty()) throw InvalidParameter("train: empty dataset");
  if (cfg.part_count == 0 && tc.lambda_part != 0.0)
    throw ConfigError("train: lambda_part must be 0 exactly when part labels are disabled");
  for (const ShapeRecord& s : ds.shapes)
    if (static_cast<int>(s.psi_deg.size()) != ds.dof)
      throw ShapeError("train: shape articulation dimension disagrees with dataset DoF");

  TrainState st;
  Rng wrng = Rng::derive(tc.seed, {kWeightInit});
  st.model = model::init_model(cfg, wrng);

  const int code_count =
      cfg.kind == model::Kind::Asdf ? ds.instance_count : static_cast<int>(ds.shapes.size());
  const int code_dim = cfg.code_dim();
  ad::AdamConfig code_opt_cfg;
  code_opt_cfg.lr = tc.lr_codes;
  for (int i = 0; i < code_count; ++i) {
    Rng crng = Rng::derive(tc.seed, {kCodeInit, static_cast<std::uint64_t>(i)});
    Tensor c = Tensor::zeros({code_dim});
    for (double& v : c.data) v = crng.gaussian(0.0, tc.code_init_std);
    st.codes.opt.push_back(
        ad::AdamState::init(code_opt_cfg, {&c}, {"code." + std::to_string(i)}));
    st.codes.codes.push_back(std::move(c));
  }

  ad::AdamConfig net_cfg;
  net_cfg.lr = tc.lr_net;
  std::vector<const Tensor*> params;
  st.model.for_each_param(
      [&params](const std::string&, Tensor& t) { params.push_back(&t); });
  st.net_opt = ad::AdamState::init(net_cfg, params, param_names(st.model));
  return st;
}

void train_epochs(TrainState& st, const Dataset& ds, const TrainConfig& tc, int until_epoch) {
  const int n_shapes = static_cast<int>(ds.shapes.size());
  std::vector<Tensor*> params = param_ptrs(st.model);

  for (int epoch = st.epoch; epoch < until_epoch; ++epoch) {
    Rng order_rng = Rng::derive(tc.seed, {kEpochOrder, static_cast<std::uint64_t>(epoch)});
    std::vector<int> order(static_cast<std::size_t>(n_shapes));
    for (int i = 0; i < n_shapes; ++i) order[static_cast<std::size_t>(i)] = i;
    order_rng.shuffle(order);

    double ep_sdf = 0, ep_part = 0, ep_total = 0;
    int ep_slots = 0;
    int step = 0;
    for (int begin = 0; begin < n_shapes; begin += tc.shapes_per_batch, ++step) {
      const int nslots = std::min(tc.shapes_per_batch, n_shapes - begin);
      std::vector<SlotResult> slots(static_cast<std::size_t>(nslots));

      parallel_for(static_cast<std::size_t>(nslots), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t s = lo; s < hi; ++s) {
          const int shape_idx = order[static_cast<std::size_t>(begin) + s];
          const ShapeRecord& shape = ds.shapes[static_cast<std::size_t>(shape_idx)];
          const int code_idx = st.codes.code_index(ds, shape_idx, st.model.cfg.kind);
          Rng rng = Rng::derive(tc.seed, {kPointPick, static_cast<std::uint64_t>(epoch),
                                          static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(s)});
          slots[s] = run_slot(st.model, ds, tc, shape,
                              st.codes.codes[static_cast<std::size_t>(code_idx)], code_idx, rng);
        }
      });

      // Ordered accumulation keeps the step bitwise-deterministic regardless
      // of how the slots were scheduled.
      const double inv = 1.0 / nslots;
      std::vector<Tensor> net_grads;
      std::vector<std::pair<int, Tensor>> code_grads;  // (code index, grad)
      for (int s = 0; s < nslots; ++s) {
        SlotResult& r = slots[static_cast<std::size_t>(s)];
        if (!std::isfinite(r.loss_total))
          throw NumericsError("train: non-finite loss at epoch " + std::to_string(epoch) +
                              " step " + std::to_string(step) + " slot " + std::to_string(s));
        if (net_grads.empty()) {
          net_grads = std::move(r.param_grads);
          for (Tensor& t : net_grads)
            for (double& v : t.data) v *= inv;
        } else {
          for (std::size_t i = 0; i < net_grads.size(); ++i)
            kernels::active().axpy(inv, r.param_grads[i].data.data(), net_grads[i].data.data(),
                                   net_grads[i].size());
        }
        auto it = std::find_if(code_grads.begin(), code_grads.end(),
                               [&r](const auto& kv) { return kv.first == r.code_index; });
        if (it == code_grads.end()) {
          Tensor cg = Tensor::zeros(r.code_grad.shape);
          kernels::active().axpy(inv, r.code_grad.data.data(), cg.data.data(), cg.size());
          code_grads.emplace_back(r.code_index, std::move(cg));
        } else {
          kernels::active().axpy(inv, r.code_grad.data.data(), it->second.data.data(),
                                 it->second.size());
        }
        ep_sdf += r.loss_sdf;
        ep_part += r.loss_part;
        ep_total += r.loss_total;
        ++ep_slots;
      }

      std::vector<const Tensor*> grad_ptrs(net_grads.size());
      for (std::size_t i = 0; i < net_grads.size(); ++i) grad_ptrs[i] = &net_grads[i];
      ad::adam_step(params, grad_ptrs, st.net_opt);

      std::sort(code_grads.begin(), code_grads.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      for (const auto& [idx, grad] : code_grads) {
        ad::adam_step({&st.codes.codes[static_cast<std::size_t>(idx)]}, {&grad},
                      st.codes.opt[static_cast<std::size_t>(idx)]);
      }
    }

    st.history.push_back({ep_sdf / ep_slots, ep_part / ep_slots, ep_total / ep_slots});
    st.epoch = epoch + 1;
  }
}

TrainState train(const Dataset& ds, const model::ModelConfig& cfg, const TrainConfig& tc) {
  TrainState st = init_training(ds, cfg, tc);
  train_epochs(st, ds, tc, tc.epochs);
  return st;
}

void write_loss_csv(const std::string& path, const std::vector<EpochLoss>& history) {
  std::ofstream f(path);
  if (!f) throw IoError("write_loss_csv: cannot open " + path);
  f << "epoch,loss_sdf,loss_part,loss_total\n";
  for (std::size_t e = 0; e < history.size(); ++e)
    f << e << "," << history[e].sdf << "," << history[e].part << "," << history[e].total << "\n";
}

}  // namespace asdf::train
