#include <cmath>
#include <cstddef>

#include "asdf/kernels.hpp"

// Reference lane. Loop order matters: the AVX2 lane reproduces these
// accumulation orders exactly for everything except the reductions, and the
// equivalence tests assert bitwise equality on that basis.

namespace asdf::kernels {
namespace {

void s_linear_forward(const double* in, const double* w, const double* bias, double* out,
                      int batch, int in_dim, int out_dim) {
  for (int b = 0; b < batch; ++b) {
    const double* xr = in + static_cast<std::size_t>(b) * in_dim;
    double* yr = out + static_cast<std::size_t>(b) * out_dim;
    for (int o = 0; o < out_dim; ++o) yr[o] = bias[o];
    for (int i = 0; i < in_dim; ++i) {
      const double xi = xr[i];
      const double* wr = w + static_cast<std::size_t>(i) * out_dim;
      for (int o = 0; o < out_dim; ++o) yr[o] += xi * wr[o];
    }
  }
}

void s_linear_backward_input(const double* dout, const double* w, double* din, int batch,
                             int in_dim, int out_dim) {
  for (int b = 0; b < batch; ++b) {
    const double* gr = dout + static_cast<std::size_t>(b) * out_dim;
    double* dr = din + static_cast<std::size_t>(b) * in_dim;
    for (int i = 0; i < in_dim; ++i) {
      const double* wr = w + static_cast<std::size_t>(i) * out_dim;
      double acc = 0.0;
      for (int o = 0; o < out_dim; ++o) acc += gr[o] * wr[o];
      dr[i] += acc;
    }
  }
}

void s_linear_backward_weight(const double* in, const double* dout, double* dw, int batch,
                              int in_dim, int out_dim) {
  for (int b = 0; b < batch; ++b) {
    const double* xr = in + static_cast<std::size_t>(b) * in_dim;
    const double* gr = dout + static_cast<std::size_t>(b) * out_dim;
    for (int i = 0; i < in_dim; ++i) {
      const double xi = xr[i];
      double* dwr = dw + static_cast<std::size_t>(i) * out_dim;
      for (int o = 0; o < out_dim; ++o) dwr[o] += xi * gr[o];
    }
  }
}

void s_linear_backward_bias(const double* dout, double* db, int batch, int out_dim) {
  for (int b = 0; b < batch; ++b) {
    const double* gr = dout + static_cast<std::size_t>(b) * out_dim;
    for (int o = 0; o < out_dim; ++o) db[o] += gr[o];
  }
}

void s_relu_forward(const double* x, double* y, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) y[k] = x[k] > 0.0 ? x[k] : 0.0;
}

void s_relu_backward(const double* x, const double* dy, double* dx, std::size_t n) {
  // Unconditional add of a masked value, mirroring the SIMD lane exactly.
  for (std::size_t k = 0; k < n; ++k) dx[k] += x[k] > 0.0 ? dy[k] : 0.0;
}

void s_tanh_forward(const double* x, double* y, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) y[k] = std::tanh(x[k]);
}

void s_tanh_backward(const double* y, const double* dy, double* dx, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) dx[k] += dy[k] * (1.0 - y[k] * y[k]);
}

void s_clamp_forward(const double* x, double* y, std::size_t n, double delta) {
  for (std::size_t k = 0; k < n; ++k) {
    double v = x[k];
    if (v > delta) v = delta;
    if (v < -delta) v = -delta;
    y[k] = v;
  }
}

void s_clamp_backward(const double* x, const double* dy, double* dx, std::size_t n, double delta) {
  for (std::size_t k = 0; k < n; ++k) dx[k] += (x[k] > -delta && x[k] < delta) ? dy[k] : 0.0;
}

void s_axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) y[k] += a * x[k];
}

double s_sum_abs_diff(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) acc += std::fabs(a[k] - b[k]);
  return acc;
}

double s_sum_squares(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) acc += x[k] * x[k];
  return acc;
}

void s_adam_update(double* p, const double* g, double* m, double* v, std::size_t n, double lr,
                   double beta1, double beta2, double eps, double bc1, double bc2) {
  for (std::size_t k = 0; k < n; ++k) {
    m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
    v[k] = beta2 * v[k] + (1.0 - beta2) * (g[k] * g[k]);
    const double mhat = m[k] / bc1;
    const double vhat = v[k] / bc2;
    p[k] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace

const Kernels& scalar() {
  static const Kernels table = {
      "scalar",
      s_linear_forward,
      s_linear_backward_input,
      s_linear_backward_weight,
      s_linear_backward_bias,
      s_relu_forward,
      s_relu_backward,
      s_tanh_forward,
      s_tanh_backward,
      s_clamp_forward,
      s_clamp_backward,
      s_axpy,
      s_sum_abs_diff,
      s_sum_squares,
      s_adam_update,
  };
  return table;
}

}  // namespace asdf::kernels
