#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "asdf/tensor.hpp"

namespace asdf::ad {

enum class Op : unsigned char {
  Leaf,
  BroadcastRow,
  ConcatCols,
  Linear,
  Relu,
  Tanh,
  Clamp,
  Add,
  Scale,
  L1Loss,
  CrossEntropy,
  SumSquares,
};

struct Node {
  Op op = Op::Leaf;
  int in0 = -1, in1 = -1, in2 = -1;
  Tensor val;
  Tensor grad;               // allocated by backward()
  double attr = 0.0;         // clamp delta / scale factor
  std::vector<int> labels;   // cross-entropy targets
  Tensor cache;              // cross-entropy softmax
  bool trainable = false;
  bool needs_grad = false;
};

// Define-by-run tape. A graph is built fresh per forward pass; nodes reference
// strictly earlier nodes by construction. Single-threaded by contract;
// separate graphs may run concurrently over shared read-only tensors.
class Graph {
 public:
  // Leaves. `trainable` registers the leaf as a differentiable input: its
  // gradient is retained and needs_grad propagates from it.
  int leaf(Tensor value, bool trainable = false);

  // [C] -> [rows x C]; backward sums over rows.
  int broadcast_row(int v, int rows);
  // [B x A], [B x C] -> [B x (A+C)]. Operands must agree on every dimension
  // except the last.
  int concat_cols(int a, int b);
  // input [B x I], weight [I x O], bias [O] -> [B x O]
  int linear(int input, int weight, int bias);
  int relu(int x);
  int tanh_op(int x);
  // min(delta, max(-delta, x)); subgradient 0 at |x| >= delta. delta > 0.
  int clamp(int x, double delta);
  int add(int a, int b);
  int scale(int x, double factor);
  // (1/K) sum |pred - target|; scalar output.
  int l1_loss(int pred, int target);
  // mean over rows of -log softmax(logits)[label], max-subtraction stabilized.
  int cross_entropy(int logits, std::vector<int> labels);
  // sum of squares of all entries; scalar output.
  int sum_squares(int x);

  const Tensor& value(int id) const { return nodes_[static_cast<std::size_t>(id)].val; }
  // Valid after backward(); zero tensor for nodes off the loss path.
  const Tensor& gradient(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

  // Reverse sweep from a scalar loss node. Populates gradients for every node
  // reachable from a trainable leaf; others get zeros.
  void backward(int loss);

  std::size_t node_count() const { return nodes_.size(); }

 private:
  int push(Node n);
  const Node& at(int id) const;

  std::vector<Node> nodes_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Per-parameter-list optimizer state. Slot i of m/v tracks params[i];
// shapes must match exactly for the lifetime of the state.
struct AdamState {
  AdamConfig cfg;
  std::vector<Tensor> m, v;
  std::vector<std::string> names;  // used in diagnostics
  long step_count = 0;

  static AdamState init(const AdamConfig& cfg, const std::vector<const Tensor*>& params,
                        std::vector<std::string> names = {});
};

// Standard bias-corrected Adam step over an aligned parameter/gradient list.
// Throws NumericsError naming the offending tensor if a gradient is
// non-finite. Deterministic: identical inputs give bitwise-identical outputs.
void adam_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
               AdamState& state);

// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
// `f` must be evaluable at perturbed inputs; x is restored on return.
double grad_check(const std::function<double(std::span<const double>)>& f, std::span<double> x,
                  std::span<const double> analytic, double step);

}  // namespace asdf::ad
