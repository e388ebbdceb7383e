#ifndef __AVX2__
#error "kernels_avx2.cpp must be compiled with -mavx2"
#endif

#include <immintrin.h>

#include <cmath>
#include <cstddef>

#include "asdf/kernels.hpp"

// AVX2 lane (4 doubles per vector). Deliberately built from mul+add rather
// than FMA: every order-preserving kernel then executes the exact IEEE
// operation sequence of the scalar lane and matches it bitwise. Only the
// horizontal reductions (linear_backward_input, sum_abs_diff, sum_squares)
// reassociate and are held to a tolerance instead.

namespace asdf::kernels {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(lo) + _mm_cvtsd_f64(_mm_unpackhi_pd(lo, lo));
}

void v_linear_forward(const double* in, const double* w, const double* bias, double* out,
                      int batch, int in_dim, int out_dim) {
  const int o16 = out_dim & ~15;
  const int o4 = out_dim & ~3;
  for (int b = 0; b < batch; ++b) {
    const double* xr = in + static_cast<std::size_t>(b) * in_dim;
    double* yr = out + static_cast<std::size_t>(b) * out_dim;
    int o = 0;
    for (; o < o16; o += 16) {
      __m256d a0 = _mm256_loadu_pd(bias + o);
      __m256d a1 = _mm256_loadu_pd(bias + o + 4);
      __m256d a2 = _mm256_loadu_pd(bias + o + 8);
      __m256d a3 = _mm256_loadu_pd(bias + o + 12);
      for (int i = 0; i < in_dim; ++i) {
        const __m256d xi = _mm256_set1_pd(xr[i]);
        const double* wr = w + static_cast<std::size_t>(i) * out_dim + o;
        a0 = _mm256_add_pd(a0, _mm256_mul_pd(xi, _mm256_loadu_pd(wr)));
        a1 = _mm256_add_pd(a1, _mm256_mul_pd(xi, _mm256_loadu_pd(wr + 4)));
        a2 = _mm256_add_pd(a2, _mm256_mul_pd(xi, _mm256_loadu_pd(wr + 8)));
        a3 = _mm256_add_pd(a3, _mm256_mul_pd(xi, _mm256_loadu_pd(wr + 12)));
      }
      _mm256_storeu_pd(yr + o, a0);
      _mm256_storeu_pd(yr + o + 4, a1);
      _mm256_storeu_pd(yr + o + 8, a2);
      _mm256_storeu_pd(yr + o + 12, a3);
    }
    for (; o < o4; o += 4) {
      __m256d a0 = _mm256_loadu_pd(bias + o);
      for (int i = 0; i < in_dim; ++i) {
        const __m256d xi = _mm256_set1_pd(xr[i]);
        a0 = _mm256_add_pd(a0, _mm256_mul_pd(xi, _mm256_loadu_pd(w + static_cast<std::size_t>(i) * out_dim + o)));
      }
      _mm256_storeu_pd(yr + o, a0);
    }
    for (; o < out_dim; ++o) {
      double acc = bias[o];
      for (int i = 0; i < in_dim; ++i) acc += xr[i] * w[static_cast<std::size_t>(i) * out_dim + o];
      yr[o] = acc;
    }
  }
}

void v_linear_backward_input(const double* dout, const double* w, double* din, int batch,
                             int in_dim, int out_dim) {
  const int o4 = out_dim & ~3;
  for (int b = 0; b < batch; ++b) {
    const double* gr = dout + static_cast<std::size_t>(b) * out_dim;
    double* dr = din + static_cast<std::size_t>(b) * in_dim;
    for (int i = 0; i < in_dim; ++i) {
      const double* wr = w + static_cast<std::size_t>(i) * out_dim;
      __m256d acc = _mm256_setzero_pd();
      int o = 0;
      for (; o < o4; o += 4)
        acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(gr + o), _mm256_loadu_pd(wr + o)));
      double s = hsum(acc);
      for (; o < out_dim; ++o) s += gr[o] * wr[o];
      dr[i] += s;
    }
  }
}

void v_linear_backward_weight(const double* in, const double* dout, double* dw, int batch,
                              int in_dim, int out_dim) {
  // b stays the outer loop so each dw[i,o] accumulates in ascending-b order,
  // matching the scalar lane bitwise.
  const int o4 = out_dim & ~3;
  for (int b = 0; b < batch; ++b) {
    const double* xr = in + static_cast<std::size_t>(b) * in_dim;
    const double* gr = dout + static_cast<std::size_t>(b) * out_dim;
    for (int i = 0; i < in_dim; ++i) {
      const __m256d xi = _mm256_set1_pd(xr[i]);
      double* dwr = dw + static_cast<std::size_t>(i) * out_dim;
      int o = 0;
      for (; o < o4; o += 4) {
        __m256d acc = _mm256_loadu_pd(dwr + o);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(xi, _mm256_loadu_pd(gr + o)));
        _mm256_storeu_pd(dwr + o, acc);
      }
      for (; o < out_dim; ++o) dwr[o] += xr[i] * gr[o];
    }
  }
}

void v_linear_backward_bias(const double* dout, double* db, int batch, int out_dim) {
  const int o4 = out_dim & ~3;
  for (int b = 0; b < batch; ++b) {
    const double* gr = dout + static_cast<std::size_t>(b) * out_dim;
    int o = 0;
    for (; o < o4; o += 4)
      _mm256_storeu_pd(db + o, _mm256_add_pd(_mm256_loadu_pd(db + o), _mm256_loadu_pd(gr + o)));
    for (; o < out_dim; ++o) db[o] += gr[o];
  }
}

void v_relu_forward(const double* x, double* y, std::size_t n) {
  const std::size_t n4 = n & ~std::size_t(3);
  const __m256d zero = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k < n4; k += 4) {
    const __m256d v = _mm256_loadu_pd(x + k);
    const __m256d mask = _mm256_cmp_pd(v, zero, _CMP_GT_OQ);
    _mm256_storeu_pd(y + k, _mm256_blendv_pd(zero, v, mask));
  }
  for (; k < n; ++k) y[k] = x[k] > 0.0 ? x[k] : 0.0;
}

void v_relu_backward(const double* x, const double* dy, double* dx, std::size_t n) {
  const std::size_t n4 = n & ~std::size_t(3);
  const __m256d zero = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k < n4; k += 4) {
    const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + k), zero, _CMP_GT_OQ);
    const __m256d g = _mm256_blendv_pd(zero, _mm256_loadu_pd(dy + k), mask);
    _mm256_storeu_pd(dx + k, _mm256_add_pd(_mm256_loadu_pd(dx + k), g));
  }
  for (; k < n; ++k) dx[k] += x[k] > 0.0 ? dy[k] : 0.0;
}

void v_tanh_forward(const double* x, double* y, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) y[k] = std::tanh(x[k]);
}

void v_tanh_backward(const double* y, const double* dy, double* dx, std::size_t n) {
  const std::size_t n4 = n & ~std::size_t(3);
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t k = 0;
  for (; k < n4; k += 4) {
    const __m256d yv = _mm256_loadu_pd(y + k);
    const __m256d g = _mm256_mul_pd(_mm256_loadu_pd(dy + k),
                                    _mm256_sub_pd(one, _mm256_mul_pd(yv, yv)));
    _mm256_storeu_pd(dx + k, _mm256_add_pd(_mm256_loadu_pd(dx + k), g));
  }
  for (; k < n; ++k) dx[k] += dy[k] * (1.0 - y[k] * y[k]);
}

void v_clamp_forward(const double* x, double* y, std::size_t n, double delta) {
  const std::size_t n4 = n & ~std::size_t(3);
  const __m256d hi = _mm256_set1_pd(delta);
  const __m256d lo = _mm256_set1_pd(-delta);
  std::size_t k = 0;
  for (; k < n4; k += 4)
    _mm256_storeu_pd(y + k, _mm256_min_pd(hi, _mm256_max_pd(lo, _mm256_loadu_pd(x + k))));
  for (; k < n; ++k) {
    double v = x[k];
    if (v > delta) v = delta;
    if (v < -delta) v = -delta;
    y[k] = v;
  }
}

void v_clamp_backward(const double* x, const double* dy, double* dx, std::size_t n, double delta) {
  const std::size_t n4 = n & ~std::size_t(3);
  const __m256d hi = _mm256_set1_pd(delta);
  const __m256d lo = _mm256_set1_pd(-delta);
  const __m256d zero = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k < n4; k += 4) {
    const __m256d v = _mm256_loadu_pd(x + k);
    const __m256d mask = _mm256_and_pd(_mm256_cmp_pd(v, lo, _CMP_GT_OQ),
                                       _mm256_cmp_pd(v, hi, _CMP_LT_OQ));
    const __m256d g = _mm256_blendv_pd(zero, _mm256_loadu_pd(dy + k), mask);
    _mm256_storeu_pd(dx + k, _mm256_add_pd(_mm256_loadu_pd(dx + k), g));
  }
  for (; k < n; ++k) dx[k] += (x[k] > -delta && x[k] < delta) ? dy[k] : 0.0;
}

void v_axpy(double a, const double* x, double* y, std::size_t n) {
  const std::size_t n4 = n & ~std::size_t(3);
  const __m256d av = _mm256_set1_pd(a);
  std::size_t k = 0;
  for (; k < n4; k += 4)
    _mm256_storeu_pd(y + k, _mm256_add_pd(_mm256_loadu_pd(y + k),
                                          _mm256_mul_pd(av, _mm256_loadu_pd(x + k))));
  for (; k < n; ++k) y[k] += a * x[k];
}

double v_sum_abs_diff(const double* a, const double* b, std::size_t n) {
  const std::size_t n4 = n & ~std::size_t(3);
  const __m256d signmask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
  __m256d acc = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k < n4; k += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + k), _mm256_loadu_pd(b + k));
    acc = _mm256_add_pd(acc, _mm256_and_pd(d, signmask));
  }
  double s = hsum(acc);
  for (; k < n; ++k) s += std::fabs(a[k] - b[k]);
  return s;
}

double v_sum_squares(const double* x, std::size_t n) {
  const std::size_t n4 = n & ~std::size_t(3);
  __m256d acc = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k < n4; k += 4) {
    const __m256d v = _mm256_loadu_pd(x + k);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(v, v));
  }
  double s = hsum(acc);
  for (; k < n; ++k) s += x[k] * x[k];
  return s;
}

void v_adam_update(double* p, const double* g, double* m, double* v, std::size_t n, double lr,
                   double beta1, double beta2, double eps, double bc1, double bc2) {
  const std::size_t n4 = n & ~std::size_t(3);
  const __m256d b1 = _mm256_set1_pd(beta1);
  const __m256d b2 = _mm256_set1_pd(beta2);
  const __m256d ob1 = _mm256_set1_pd(1.0 - beta1);
  const __m256d ob2 = _mm256_set1_pd(1.0 - beta2);
  const __m256d lrv = _mm256_set1_pd(lr);
  const __m256d epsv = _mm256_set1_pd(eps);
  const __m256d bc1v = _mm256_set1_pd(bc1);
  const __m256d bc2v = _mm256_set1_pd(bc2);
  std::size_t k = 0;
  for (; k < n4; k += 4) {
    const __m256d gv = _mm256_loadu_pd(g + k);
    __m256d mv = _mm256_loadu_pd(m + k);
    __m256d vv = _mm256_loadu_pd(v + k);
    mv = _mm256_add_pd(_mm256_mul_pd(b1, mv), _mm256_mul_pd(ob1, gv));
    vv = _mm256_add_pd(_mm256_mul_pd(b2, vv), _mm256_mul_pd(ob2, _mm256_mul_pd(gv, gv)));
    _mm256_storeu_pd(m + k, mv);
    _mm256_storeu_pd(v + k, vv);
    const __m256d mhat = _mm256_div_pd(mv, bc1v);
    const __m256d vhat = _mm256_div_pd(vv, bc2v);
    const __m256d step = _mm256_div_pd(_mm256_mul_pd(lrv, mhat),
                                       _mm256_add_pd(_mm256_sqrt_pd(vhat), epsv));
    _mm256_storeu_pd(p + k, _mm256_sub_pd(_mm256_loadu_pd(p + k), step));
  }
  for (; k < n; ++k) {
    m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
    v[k] = beta2 * v[k] + (1.0 - beta2) * (g[k] * g[k]);
    const double mhat = m[k] / bc1;
    const double vhat = v[k] / bc2;
    p[k] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace

const Kernels* avx2_lane_table() {
  static const Kernels table = {
      "avx2",
      v_linear_forward,
      v_linear_backward_input,
      v_linear_backward_weight,
      v_linear_backward_bias,
      v_relu_forward,
      v_relu_backward,
      v_tanh_forward,
      v_tanh_backward,
      v_clamp_forward,
      v_clamp_backward,
      v_axpy,
      v_sum_abs_diff,
      v_sum_squares,
      v_adam_update,
  };
  return &table;
}

}  // namespace asdf::kernels
