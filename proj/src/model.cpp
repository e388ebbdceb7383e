#include "asdf/model.hpp"

#include <cmath>

#include "asdf/common.hpp"

namespace asdf::model {

std::vector<int> ModelConfig::baseline_hidden() const {
  std::vector<int> h = fs_hidden;
  h.insert(h.end(), fa_hidden.begin(), fa_hidden.end());
  return h;
}

void ModelConfig::validate() const {
  if (shape_code_dim < 1 || shape_feature_dim < 1 || dof < 1)
    throw ConfigError("model: C, F and D must all be >= 1");
  if (fs_hidden.empty() || fa_hidden.empty())
    throw ConfigError("model: encoder and articulation nets need at least one hidden layer");
  for (int w : fs_hidden)
    if (w < 1) throw ConfigError("model: non-positive fs hidden width");
  for (int w : fa_hidden)
    if (w < 1) throw ConfigError("model: non-positive fa hidden width");
  if (part_count < 0) throw ConfigError("model: part_count must be >= 0");
}

namespace {

LinearLayer init_layer(int in, int out, double std, Rng& rng) {
  LinearLayer l;
  l.w = Tensor::zeros({in, out});
  l.b = Tensor::zeros({out});
  for (double& v : l.w.data) v = rng.gaussian(0.0, std);
  return l;
}

// He init on hidden (ReLU) layers, Xavier-style on linear outputs.
Mlp init_mlp(int in, const std::vector<int>& hidden, int out, Rng& rng) {
  Mlp mlp;
  int cur = in;
  for (int w : hidden) {
    mlp.hidden.push_back(init_layer(cur, w, std::sqrt(2.0 / cur), rng));
    cur = w;
  }
  mlp.out = init_layer(cur, out, std::sqrt(1.0 / cur), rng);
  return mlp;
}

void mlp_params(Mlp& mlp, const std::string& prefix,
                const std::function<void(const std::string&, Tensor&)>& fn) {
  for (std::size_t i = 0; i < mlp.hidden.size(); ++i) {
    fn(prefix + "." + std::to_string(i) + ".w", mlp.hidden[i].w);
    fn(prefix + "." + std::to_string(i) + ".b", mlp.hidden[i].b);
  }
  fn(prefix + ".out.w", mlp.out.w);
  fn(prefix + ".out.b", mlp.out.b);
}

}  // namespace

void Model::for_each_param(const std::function<void(const std::string&, Tensor&)>& fn) {
  if (cfg.kind == Kind::Asdf) {
    mlp_params(asdf.fs, "fs", fn);
    fn("emb.w", asdf.emb.w);
    fn("emb.b", asdf.emb.b);
    mlp_params(asdf.fa, "fa", fn);
    if (asdf.has_part_head) {
      fn("head.w", asdf.part_head.w);
      fn("head.b", asdf.part_head.b);
    }
  } else {
    mlp_params(baseline, "bl", fn);
  }
}

void Model::for_each_param(const std::function<void(const std::string&, const Tensor&)>& fn) const {
  const_cast<Model*>(this)->for_each_param(
      [&fn](const std::string& name, Tensor& t) { fn(name, t); });
}

long Model::param_count() const {
  long n = 0;
  for_each_param([&n](const std::string&, const Tensor& t) { n += static_cast<long>(t.size()); });
  return n;
}

Model init_model(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  Model m;
  m.cfg = cfg;
  if (cfg.kind == Kind::Asdf) {
    m.asdf.fs = init_mlp(cfg.shape_code_dim + 3, cfg.fs_hidden, cfg.shape_feature_dim, rng);
    m.asdf.emb = init_layer(cfg.emb_in(), cfg.emb_out(), std::sqrt(1.0 / cfg.emb_in()), rng);
    m.asdf.fa = init_mlp(cfg.fa_in(), cfg.fa_hidden, 1, rng);
    if (cfg.part_count > 0) {
      m.asdf.part_head =
          init_layer(cfg.fa_hidden.back(), cfg.part_count, std::sqrt(1.0 / cfg.fa_hidden.back()), rng);
      m.asdf.has_part_head = true;
    }
  } else {
    m.baseline = init_mlp(cfg.code_dim() + 3, cfg.baseline_hidden(), 1, rng);
  }
  return m;
}

namespace {

std::pair<int, int> attach_layer(ad::Graph& g, const LinearLayer& l, bool trainable) {
  return {g.leaf(l.w, trainable), g.leaf(l.b, trainable)};
}

int run_mlp(ad::Graph& g, const std::vector<std::pair<int, int>>& hidden,
            const std::pair<int, int>& out, int x, int* last_hidden = nullptr) {
  int cur = x;
  for (const auto& [w, b] : hidden) cur = g.relu(g.linear(cur, w, b));
  if (last_hidden) *last_hidden = cur;
  return g.linear(cur, out.first, out.second);
}

}  // namespace

ParamLeaves attach_params(ad::Graph& g, const Model& m, Trainable which) {
  ParamLeaves p;
  const bool all = which == Trainable::All;
  const bool enc = all || which == Trainable::EncoderOnly;
  if (m.cfg.kind == Kind::Asdf) {
    for (const auto& l : m.asdf.fs.hidden) p.fs.push_back(attach_layer(g, l, enc));
    p.fs.push_back(attach_layer(g, m.asdf.fs.out, enc));  // p.fs.back() is the output layer
    p.emb = attach_layer(g, m.asdf.emb, all);
    for (const auto& l : m.asdf.fa.hidden) p.fa.push_back(attach_layer(g, l, all));
    p.fa_out = attach_layer(g, m.asdf.fa.out, all);
    if (m.asdf.has_part_head) p.part_head = attach_layer(g, m.asdf.part_head, all);
  } else {
    for (const auto& l : m.baseline.hidden) p.baseline.push_back(attach_layer(g, l, all));
    p.baseline_out = attach_layer(g, m.baseline.out, all);
  }
  return p;
}

ForwardNodes build_asdf_forward_with_embedding(ad::Graph& g, const ModelConfig& cfg,
                                               const ParamLeaves& p, int x_leaf, int phi_leaf,
                                               int art_emb_node) {
  const int batch = g.value(x_leaf).rows();
  const int phi_rows = g.broadcast_row(phi_leaf, batch);
  const int fs_in = g.concat_cols(phi_rows, x_leaf);  // [B x (C+3)]
  std::vector<std::pair<int, int>> fs_hidden(p.fs.begin(), p.fs.end() - 1);
  const int fs_out = run_mlp(g, fs_hidden, p.fs.back(), fs_in);
  const int shape_emb = g.concat_cols(fs_out, phi_rows);  // [B x (F+C)]

  ForwardNodes out;
  out.shape_emb = shape_emb;
  out.art_emb = art_emb_node;
  const int fa_in = g.concat_cols(shape_emb, art_emb_node);
  int last_hidden = -1;
  out.pred = run_mlp(g, p.fa, p.fa_out, fa_in, &last_hidden);
  if (p.part_head.first >= 0 && cfg.part_count > 0)
    out.logits = g.linear(last_hidden, p.part_head.first, p.part_head.second);
  return out;
}

ForwardNodes build_asdf_forward(ad::Graph& g, const ModelConfig& cfg, const ParamLeaves& p,
                                int x_leaf, int phi_leaf, int psi_leaf) {
  const int batch = g.value(x_leaf).rows();
  const int psi_scaled = g.scale(psi_leaf, cfg.angle_scale);
  const int psi_rows = g.broadcast_row(psi_scaled, batch);
  const int emb_in = g.concat_cols(psi_rows, x_leaf);  // [B x (D+3)]
  const int art_emb = g.linear(emb_in, p.emb.first, p.emb.second);  // affine, no nonlinearity
  return build_asdf_forward_with_embedding(g, cfg, p, x_leaf, phi_leaf, art_emb);
}

ForwardNodes build_baseline_forward(ad::Graph& g, const ModelConfig& cfg, const ParamLeaves& p,
                                    int x_leaf, int z_leaf) {
  (void)cfg;
  const int batch = g.value(x_leaf).rows();
  const int z_rows = g.broadcast_row(z_leaf, batch);
  const int in = g.concat_cols(z_rows, x_leaf);
  ForwardNodes out;
  out.pred = run_mlp(g, p.baseline, p.baseline_out, in);
  return out;
}

Tensor points_to_tensor(std::span<const Vec3> pts) {
  Tensor t = Tensor::zeros({static_cast<int>(pts.size()), 3});
  for (std::size_t i = 0; i < pts.size(); ++i) {
    t.data[i * 3 + 0] = pts[i].x;
    t.data[i * 3 + 1] = pts[i].y;
    t.data[i * 3 + 2] = pts[i].z;
  }
  return t;
}

Tensor shape_embedding(const Model& m, std::span<const Vec3> x, const Tensor& phi) {
  if (m.cfg.kind != Kind::Asdf) throw UnsupportedOperation("shape_embedding: baseline model");
  if (static_cast<int>(phi.size()) != m.cfg.shape_code_dim)
    throw ShapeError("shape_embedding: code dimension mismatch");
  ad::Graph g;
  ParamLeaves p = attach_params(g, m, Trainable::None);
  const int x_leaf = g.leaf(points_to_tensor(x));
  const int phi_leaf = g.leaf(phi);
  const int phi_rows = g.broadcast_row(phi_leaf, static_cast<int>(x.size()));
  const int fs_in = g.concat_cols(phi_rows, x_leaf);
  std::vector<std::pair<int, int>> fs_hidden(p.fs.begin(), p.fs.end() - 1);
  const int fs_out = run_mlp(g, fs_hidden, p.fs.back(), fs_in);
  return g.value(g.concat_cols(fs_out, phi_rows));
}

Tensor articulation_embedding(const Model& m, std::span<const Vec3> x, std::span<const double> psi_deg) {
  if (m.cfg.kind != Kind::Asdf) throw UnsupportedOperation("articulation_embedding: baseline model");
  if (static_cast<int>(psi_deg.size()) != m.cfg.dof)
    throw ShapeError("articulation_embedding: articulation dimension mismatch");
  ad::Graph g;
  ParamLeaves p = attach_params(g, m, Trainable::None);
  const int x_leaf = g.leaf(points_to_tensor(x));
  const int psi_leaf = g.leaf(Tensor::row_vector({psi_deg.begin(), psi_deg.end()}));
  const int psi_scaled = g.scale(psi_leaf, m.cfg.angle_scale);
  const int psi_rows = g.broadcast_row(psi_scaled, static_cast<int>(x.size()));
  const int emb_in = g.concat_cols(psi_rows, x_leaf);
  return g.value(g.linear(emb_in, p.emb.first, p.emb.second));
}

ForwardResult asdf_forward(const Model& m, std::span<const Vec3> x, const Tensor& phi,
                           std::span<const double> psi_deg) {
  if (m.cfg.kind != Kind::Asdf) throw UnsupportedOperation("asdf_forward: baseline model");
  if (static_cast<int>(phi.size()) != m.cfg.shape_code_dim)
    throw ShapeError("asdf_forward: code dimension mismatch");
  if (static_cast<int>(psi_deg.size()) != m.cfg.dof)
    throw ShapeError("asdf_forward: articulation dimension mismatch");
  ad::Graph g;
  ParamLeaves p = attach_params(g, m, Trainable::None);
  const int x_leaf = g.leaf(points_to_tensor(x));
  const int phi_leaf = g.leaf(phi);
  const int psi_leaf = g.leaf(Tensor::row_vector({psi_deg.begin(), psi_deg.end()}));
  ForwardNodes nodes = build_asdf_forward(g, m.cfg, p, x_leaf, phi_leaf, psi_leaf);
  ForwardResult r;
  r.sdf = g.value(nodes.pred).data;
  if (nodes.logits >= 0) {
    r.logits = g.value(nodes.logits);
    const int rows = r.logits.rows(), classes = r.logits.cols();
    r.part_labels.resize(static_cast<std::size_t>(rows));
    for (int i = 0; i < rows; ++i) {
      int best = 0;
      for (int c = 1; c < classes; ++c)
        if (r.logits.at(i, c) > r.logits.at(i, best)) best = c;
      r.part_labels[static_cast<std::size_t>(i)] = best;
    }
  }
  return r;
}

std::vector<double> baseline_forward(const Model& m, std::span<const Vec3> x, const Tensor& z) {
  if (m.cfg.kind != Kind::Baseline) throw UnsupportedOperation("baseline_forward: A-SDF model");
  if (static_cast<int>(z.size()) != m.cfg.code_dim())
    throw ShapeError("baseline_forward: code dimension mismatch");
  ad::Graph g;
  ParamLeaves p = attach_params(g, m, Trainable::None);
  const int x_leaf = g.leaf(points_to_tensor(x));
  const int z_leaf = g.leaf(z);
  ForwardNodes nodes = build_baseline_forward(g, m.cfg, p, x_leaf, z_leaf);
  return g.value(nodes.pred).data;
}

}  // namespace asdf::model
