#include "asdf/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "asdf/kernels.hpp"

namespace asdf::ad {

namespace {
const kernels::Kernels& K() { return kernels::active(); }
}  // namespace

int Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

const Node& Graph::at(int id) const {
  if (id < 0 || id >= static_cast<int>(nodes_.size())) throw InvalidParameter("Graph: bad node id");
  return nodes_[static_cast<std::size_t>(id)];
}

int Graph::leaf(Tensor value, bool trainable) {
  Node n;
  n.op = Op::Leaf;
  n.val = std::move(value);
  n.trainable = trainable;
  n.needs_grad = trainable;
  return push(std::move(n));
}

int Graph::broadcast_row(int v, int rows) {
  const Node& src = at(v);
  if (src.val.shape.size() != 1) throw ShapeError("broadcast_row: input must be rank 1");
  if (rows < 1) throw InvalidParameter("broadcast_row: rows must be >= 1");
  const int c = static_cast<int>(src.val.size());
  Node n;
  n.op = Op::BroadcastRow;
  n.in0 = v;
  n.needs_grad = src.needs_grad;
  n.val = Tensor::zeros({rows, c});
  for (int r = 0; r < rows; ++r)
    std::copy(src.val.data.begin(), src.val.data.end(),
              n.val.data.begin() + static_cast<std::size_t>(r) * c);
  return push(std::move(n));
}

int Graph::concat_cols(int a, int b) {
  const Node& na = at(a);
  const Node& nb = at(b);
  if (na.val.shape.size() != 2 || nb.val.shape.size() != 2)
    throw ShapeError("concat_cols: inputs must be rank 2");
  if (na.val.rows() != nb.val.rows())
    throw ShapeError("concat_cols: operands disagree on leading dimension");
  const int rows = na.val.rows(), ca = na.val.cols(), cb = nb.val.cols();
  Node n;
  n.op = Op::ConcatCols;
  n.in0 = a;
  n.in1 = b;
  n.needs_grad = na.needs_grad || nb.needs_grad;
  n.val = Tensor::zeros({rows, ca + cb});
  for (int r = 0; r < rows; ++r) {
    double* dst = n.val.data.data() + static_cast<std::size_t>(r) * (ca + cb);
    std::copy_n(na.val.data.data() + static_cast<std::size_t>(r) * ca, ca, dst);
    std::copy_n(nb.val.data.data() + static_cast<std::size_t>(r) * cb, cb, dst + ca);
  }
  return push(std::move(n));
}

int Graph::linear(int input, int weight, int bias) {
  const Node& x = at(input);
  const Node& w = at(weight);
  const Node& b = at(bias);
  if (x.val.shape.size() != 2 || w.val.shape.size() != 2 || b.val.shape.size() != 1)
    throw ShapeError("linear: expected input [BxI], weight [IxO], bias [O]");
  const int batch = x.val.rows(), in_dim = x.val.cols(), out_dim = w.val.cols();
  if (w.val.rows() != in_dim)
    throw ShapeError("linear: inner dimensions disagree (input cols " + std::to_string(in_dim) +
                     " vs weight rows " + std::to_string(w.val.rows()) + ")");
  if (static_cast<int>(b.val.size()) != out_dim)
    throw ShapeError("linear: bias length does not match weight cols");
  Node n;
  n.op = Op::Linear;
  n.in0 = input;
  n.in1 = weight;
  n.in2 = bias;
  n.needs_grad = x.needs_grad || w.needs_grad || b.needs_grad;
  n.val = Tensor::zeros({batch, out_dim});
  K().linear_forward(x.val.data.data(), w.val.data.data(), b.val.data.data(), n.val.data.data(),
                     batch, in_dim, out_dim);
  return push(std::move(n));
}

int Graph::relu(int x) {
  const Node& src = at(x);
  Node n;
  n.op = Op::Relu;
  n.in0 = x;
  n.needs_grad = src.needs_grad;
  n.val = Tensor::zeros(src.val.shape);
  K().relu_forward(src.val.data.data(), n.val.data.data(), src.val.size());
  return push(std::move(n));
}

int Graph::tanh_op(int x) {
  const Node& src = at(x);
  Node n;
  n.op = Op::Tanh;
  n.in0 = x;
  n.needs_grad = src.needs_grad;
  n.val = Tensor::zeros(src.val.shape);
  K().tanh_forward(src.val.data.data(), n.val.data.data(), src.val.size());
  return push(std::move(n));
}

int Graph::clamp(int x, double delta) {
  if (!(delta > 0.0)) throw InvalidParameter("clamp: delta must be positive");
  const Node& src = at(x);
  Node n;
  n.op = Op::Clamp;
  n.in0 = x;
  n.attr = delta;
  n.needs_grad = src.needs_grad;
  n.val = Tensor::zeros(src.val.shape);
  K().clamp_forward(src.val.data.data(), n.val.data.data(), src.val.size(), delta);
  return push(std::move(n));
}

int Graph::add(int a, int b) {
  const Node& na = at(a);
  const Node& nb = at(b);
  if (!na.val.same_shape(nb.val)) throw ShapeError("add: shape mismatch");
  Node n;
  n.op = Op::Add;
  n.in0 = a;
  n.in1 = b;
  n.needs_grad = na.needs_grad || nb.needs_grad;
  n.val = na.val;
  for (std::size_t k = 0; k < n.val.size(); ++k) n.val.data[k] += nb.val.data[k];
  return push(std::move(n));
}

int Graph::scale(int x, double factor) {
  const Node& src = at(x);
  Node n;
  n.op = Op::Scale;
  n.in0 = x;
  n.attr = factor;
  n.needs_grad = src.needs_grad;
  n.val = src.val;
  for (double& v : n.val.data) v *= factor;
  return push(std::move(n));
}

int Graph::l1_loss(int pred, int target) {
  const Node& p = at(pred);
  const Node& t = at(target);
  if (p.val.size() == 0) throw InvalidParameter("l1_loss: empty input");
  if (!p.val.same_shape(t.val)) throw ShapeError("l1_loss: shape mismatch");
  Node n;
  n.op = Op::L1Loss;
  n.in0 = pred;
  n.in1 = target;
  n.needs_grad = p.needs_grad || t.needs_grad;
  const double sum = K().sum_abs_diff(p.val.data.data(), t.val.data.data(), p.val.size());
  n.val = Tensor::scalar(sum / static_cast<double>(p.val.size()));
  return push(std::move(n));
}

int Graph::cross_entropy(int logits, std::vector<int> labels) {
  const Node& l = at(logits);
  if (l.val.shape.size() != 2) throw ShapeError("cross_entropy: logits must be [KxP]");
  const int rows = l.val.rows(), classes = l.val.cols();
  if (static_cast<int>(labels.size()) != rows)
    throw ShapeError("cross_entropy: label count does not match logit rows");
  for (int y : labels)
    if (y < 0 || y >= classes)
      throw InvalidParameter("cross_entropy: label " + std::to_string(y) + " outside [0, " +
                             std::to_string(classes) + ")");
  Node n;
  n.op = Op::CrossEntropy;
  n.in0 = logits;
  n.needs_grad = l.needs_grad;
  n.cache = Tensor::zeros(l.val.shape);  // softmax probabilities
  double total = 0.0;
  for (int r = 0; r < rows; ++r) {
    const double* row = l.val.data.data() + static_cast<std::size_t>(r) * classes;
    double* prow = n.cache.data.data() + static_cast<std::size_t>(r) * classes;
    double mx = row[0];
    for (int c = 1; c < classes; ++c) mx = std::max(mx, row[c]);
    double denom = 0.0;
    for (int c = 0; c < classes; ++c) {
      prow[c] = std::exp(row[c] - mx);
      denom += prow[c];
    }
    for (int c = 0; c < classes; ++c) prow[c] /= denom;
    total += std::log(denom) - (row[labels[static_cast<std::size_t>(r)]] - mx);
  }
  n.labels = std::move(labels);
  n.val = Tensor::scalar(total / rows);
  return push(std::move(n));
}

int Graph::sum_squares(int x) {
  const Node& src = at(x);
  Node n;
  n.op = Op::SumSquares;
  n.in0 = x;
  n.needs_grad = src.needs_grad;
  n.val = Tensor::scalar(K().sum_squares(src.val.data.data(), src.val.size()));
  return push(std::move(n));
}

void Graph::backward(int loss) {
  const Node& top = at(loss);
  if (!top.val.is_scalar()) throw InvalidParameter("backward: loss node must be scalar");

  for (Node& n : nodes_) n.grad = Tensor::zeros(n.val.shape);
  nodes_[static_cast<std::size_t>(loss)].grad.data[0] = 1.0;

  for (int id = loss; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad) continue;
    const Tensor& g = n.grad;
    switch (n.op) {
      case Op::Leaf:
        break;
      case Op::BroadcastRow: {
        Node& src = nodes_[static_cast<std::size_t>(n.in0)];
        const int c = static_cast<int>(src.val.size());
        for (int r = 0; r < n.val.rows(); ++r)
          K().axpy(1.0, g.data.data() + static_cast<std::size_t>(r) * c, src.grad.data.data(),
                   static_cast<std::size_t>(c));
        break;
      }
      case Op::ConcatCols: {
        Node& a = nodes_[static_cast<std::size_t>(n.in0)];
        Node& b = nodes_[static_cast<std::size_t>(n.in1)];
        const int rows = n.val.rows(), ca = a.val.cols(), cb = b.val.cols();
        for (int r = 0; r < rows; ++r) {
          const double* gr = g.data.data() + static_cast<std::size_t>(r) * (ca + cb);
          if (a.needs_grad)
            K().axpy(1.0, gr, a.grad.data.data() + static_cast<std::size_t>(r) * ca,
                     static_cast<std::size_t>(ca));
          if (b.needs_grad)
            K().axpy(1.0, gr + ca, b.grad.data.data() + static_cast<std::size_t>(r) * cb,
                     static_cast<std::size_t>(cb));
        }
        break;
      }
      case Op::Linear: {
        Node& x = nodes_[static_cast<std::size_t>(n.in0)];
        Node& w = nodes_[static_cast<std::size_t>(n.in1)];
        Node& b = nodes_[static_cast<std::size_t>(n.in2)];
        const int batch = x.val.rows(), in_dim = x.val.cols(), out_dim = w.val.cols();
        if (x.needs_grad)
          K().linear_backward_input(g.data.data(), w.val.data.data(), x.grad.data.data(), batch,
                                    in_dim, out_dim);
        if (w.needs_grad)
          K().linear_backward_weight(x.val.data.data(), g.data.data(), w.grad.data.data(), batch,
                                     in_dim, out_dim);
        if (b.needs_grad) K().linear_backward_bias(g.data.data(), b.grad.data.data(), batch, out_dim);
        break;
      }
      case Op::Relu: {
        Node& x = nodes_[static_cast<std::size_t>(n.in0)];
        K().relu_backward(x.val.data.data(), g.data.data(), x.grad.data.data(), x.val.size());
        break;
      }
      case Op::Tanh: {
        Node& x = nodes_[static_cast<std::size_t>(n.in0)];
        K().tanh_backward(n.val.data.data(), g.data.data(), x.grad.data.data(), x.val.size());
        break;
      }
      case Op::Clamp: {
        Node& x = nodes_[static_cast<std::size_t>(n.in0)];
        K().clamp_backward(x.val.data.data(), g.data.data(), x.grad.data.data(), x.val.size(),
                           n.attr);
        break;
      }
      case Op::Add: {
        Node& a = nodes_[static_cast<std::size_t>(n.in0)];
        Node& b = nodes_[static_cast<std::size_t>(n.in1)];
        if (a.needs_grad) K().axpy(1.0, g.data.data(), a.grad.data.data(), g.size());
        if (b.needs_grad) K().axpy(1.0, g.data.data(), b.grad.data.data(), g.size());
        break;
      }
      case Op::Scale: {
        Node& x = nodes_[static_cast<std::size_t>(n.in0)];
        K().axpy(n.attr, g.data.data(), x.grad.data.data(), g.size());
        break;
      }
      case Op::L1Loss: {
        Node& p = nodes_[static_cast<std::size_t>(n.in0)];
        Node& t = nodes_[static_cast<std::size_t>(n.in1)];
        const double g0 = g.data[0] / static_cast<double>(p.val.size());
        for (std::size_t k = 0; k < p.val.size(); ++k) {
          const double d = p.val.data[k] - t.val.data[k];
          const double s = d > 0.0 ? g0 : (d < 0.0 ? -g0 : 0.0);
          if (p.needs_grad) p.grad.data[k] += s;
          if (t.needs_grad) t.grad.data[k] -= s;
        }
        break;
      }
      case Op::CrossEntropy: {
        Node& l = nodes_[static_cast<std::size_t>(n.in0)];
        const int rows = l.val.rows(), classes = l.val.cols();
        const double g0 = g.data[0] / rows;
        for (int r = 0; r < rows; ++r) {
          const double* prow = n.cache.data.data() + static_cast<std::size_t>(r) * classes;
          double* grow = l.grad.data.data() + static_cast<std::size_t>(r) * classes;
          const int y = n.labels[static_cast<std::size_t>(r)];
          for (int c = 0; c < classes; ++c) grow[c] += g0 * (prow[c] - (c == y ? 1.0 : 0.0));
        }
        break;
      }
      case Op::SumSquares: {
        Node& x = nodes_[static_cast<std::size_t>(n.in0)];
        K().axpy(2.0 * g.data[0], x.val.data.data(), x.grad.data.data(), x.val.size());
        break;
      }
    }
  }
}

AdamState AdamState::init(const AdamConfig& cfg, const std::vector<const Tensor*>& params,
                          std::vector<std::string> names) {
  AdamState st;
  st.cfg = cfg;
  st.m.reserve(params.size());
  st.v.reserve(params.size());
  for (const Tensor* p : params) {
    st.m.push_back(Tensor::zeros(p->shape));
    st.v.push_back(Tensor::zeros(p->shape));
  }
  if (names.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) names.push_back("param[" + std::to_string(i) + "]");
  }
  st.names = std::move(names);
  return st;
}

void adam_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
               AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw ShapeError("adam_step: parameter/gradient/state counts disagree");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(*grads[i]) || !params[i]->same_shape(state.m[i]))
      throw ShapeError("adam_step: shape mismatch in slot " + state.names[i]);
    if (!grads[i]->all_finite())
      throw NumericsError("adam_step: non-finite gradient in tensor '" + state.names[i] + "'");
  }
  ++state.step_count;
  const double bc1 = 1.0 - std::pow(state.cfg.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.cfg.beta2, static_cast<double>(state.step_count));
  for (std::size_t i = 0; i < params.size(); ++i) {
    kernels::active().adam_update(params[i]->data.data(), grads[i]->data.data(),
                                  state.m[i].data.data(), state.v[i].data.data(),
                                  params[i]->size(), state.cfg.lr, state.cfg.beta1,
                                  state.cfg.beta2, state.cfg.eps, bc1, bc2);
  }
}

double grad_check(const std::function<double(std::span<const double>)>& f, std::span<double> x,
                  std::span<const double> analytic, double step) {
  if (x.size() != analytic.size()) throw ShapeError("grad_check: size mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + step;
    const double fp = f(x);
    x[i] = x0 - step;
    const double fm = f(x);
    x[i] = x0;
    const double fd = (fp - fm) / (2.0 * step);
    const double err = std::fabs(analytic[i] - fd) / std::max(1.0, std::fabs(analytic[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace asdf::ad
