#pragma once

#include <cstddef>

namespace tollopt::kernels {

// Dense double-precision kernels for the BPR arithmetic and linear-algebra
// inner loops (equilibrium line search, simplex row operations). Scalar
// reference implementations always exist; on x86-64 an AVX2+FMA backend is
// selected at startup when the CPU supports it. The environment variable
// TOLLOPT_KERNELS=scalar|avx2 forces a backend.
//
// Every `mult` parameter is an optional per-element weight vector; pass
// nullptr to treat it as all ones.
struct Backend {
  const char* name;

  double (*dot)(const double* x, const double* y, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);

  // out[e] = a[e] + b[e] * w[e]^4
  void (*bpr_latency)(const double* a, const double* b, const double* w,
                      double* out, std::size_t n);
  // out[e] = mult[e] * (a[e] + 5 b[e] w[e]^4)
  void (*bpr_marginal)(const double* mult, const double* a, const double* b,
                       const double* w, double* out, std::size_t n);
  // sum_e a[e] w[e] + b[e] w[e]^5 / 5
  double (*bpr_latency_integral)(const double* a, const double* b,
                                 const double* w, std::size_t n);
  // sum_e mult[e] * w[e] * (a[e] + b[e] w[e]^4)
  double (*bpr_total_travel_time)(const double* mult, const double* a,
                                  const double* b, const double* w,
                                  std::size_t n);
  // sum_e (a[e] + b[e] (w[e] + t d[e])^4) * d[e]
  double (*bpr_latency_dir)(const double* a, const double* b, const double* w,
                            const double* d, double t, std::size_t n);
  // sum_e mult[e] * (a[e] + 5 b[e] (w[e] + t d[e])^4) * d[e]
  double (*bpr_marginal_dir)(const double* mult, const double* a,
                             const double* b, const double* w, const double* d,
                             double t, std::size_t n);
};

const Backend& scalar();

bool avx2_supported();
// Valid to call only when avx2_supported() is true.
const Backend& avx2();

// Backend chosen at first use: AVX2 when supported, else scalar.
const Backend& active();

}  // namespace tollopt::kernels
