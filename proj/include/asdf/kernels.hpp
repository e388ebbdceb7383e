#pragma once

#include <cstddef>
#include <string>

namespace asdf::kernels {

// Hot inner loops of the project, grouped behind one table so a SIMD variant
// can be swapped in at runtime. Conventions:
//   - matrices are row-major; `w` is [I x O] so the output dim is contiguous
//   - forward kernels overwrite their output
//   - backward kernels accumulate (dst += ...)
//   - iteration order is part of the contract: lanes that preserve the
//     per-element accumulation order (everything except *_reduce_order fns,
//     see kernels_avx2.cpp) must match the scalar lane bitwise.
struct Kernels {
  const char* name;

  // out[b,o] = bias[o] + sum_i in[b,i] * w[i,o], i ascending
  void (*linear_forward)(const double* in, const double* w, const double* bias, double* out,
                         int batch, int in_dim, int out_dim);
  // din[b,i] += sum_o dout[b,o] * w[i,o]   (horizontal reduction; tolerance lane)
  void (*linear_backward_input)(const double* dout, const double* w, double* din, int batch,
                                int in_dim, int out_dim);
  // dw[i,o] += sum_b in[b,i] * dout[b,o], b ascending
  void (*linear_backward_weight)(const double* in, const double* dout, double* dw, int batch,
                                 int in_dim, int out_dim);
  // db[o] += sum_b dout[b,o], b ascending
  void (*linear_backward_bias)(const double* dout, double* db, int batch, int out_dim);

  void (*relu_forward)(const double* x, double* y, std::size_t n);
  void (*relu_backward)(const double* x, const double* dy, double* dx, std::size_t n);
  void (*tanh_forward)(const double* x, double* y, std::size_t n);
  // dx += dy * (1 - y^2), y = tanh(x)
  void (*tanh_backward)(const double* y, const double* dy, double* dx, std::size_t n);
  void (*clamp_forward)(const double* x, double* y, std::size_t n, double delta);
  // dx += dy inside (-delta, delta), 0 outside (including the boundary)
  void (*clamp_backward)(const double* x, const double* dy, double* dx, std::size_t n,
                         double delta);

  // y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // sum_k |a_k - b_k|   (reduction; tolerance lane)
  double (*sum_abs_diff)(const double* a, const double* b, std::size_t n);
  // sum_k x_k^2        (reduction; tolerance lane)
  double (*sum_squares)(const double* x, std::size_t n);

  // Bias-corrected Adam update. bc1 = 1 - beta1^t, bc2 = 1 - beta2^t are
  // precomputed by the caller so the kernel stays elementwise.
  void (*adam_update)(double* p, const double* g, double* m, double* v, std::size_t n, double lr,
                      double beta1, double beta2, double eps, double bc1, double bc2);
};

// Plain-loop reference lane. Always available; also the oracle the SIMD lane
// is equivalence-tested against.
const Kernels& scalar();

// AVX2 lane, or nullptr when the binary or the CPU lacks it.
const Kernels* avx2();

// Lane selected at startup: AVX2 when the CPU supports it, else scalar.
// ASDF_KERNELS=scalar|avx2|auto overrides (avx2 on an unsupported CPU throws).
const Kernels& active();

// Name of the lane `active()` resolved to.
std::string active_name();

}  // namespace asdf::kernels
