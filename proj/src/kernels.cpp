#include "tollopt/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace tollopt::kernels {

namespace {

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void bpr_latency_scalar(const double* a, const double* b, const double* w,
                        double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double w2 = w[i] * w[i];
    out[i] = a[i] + b[i] * (w2 * w2);
  }
}

void bpr_marginal_scalar(const double* mult, const double* a, const double* b,
                         const double* w, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double w2 = w[i] * w[i];
    const double v = a[i] + 5.0 * b[i] * (w2 * w2);
    out[i] = mult ? mult[i] * v : v;
  }
}

double bpr_latency_integral_scalar(const double* a, const double* b,
                                   const double* w, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w2 = w[i] * w[i];
    acc += a[i] * w[i] + b[i] * (w2 * w2 * w[i]) * 0.2;
  }
  return acc;
}

double bpr_total_travel_time_scalar(const double* mult, const double* a,
                                    const double* b, const double* w,
                                    std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w2 = w[i] * w[i];
    const double v = w[i] * (a[i] + b[i] * (w2 * w2));
    acc += mult ? mult[i] * v : v;
  }
  return acc;
}

double bpr_latency_dir_scalar(const double* a, const double* b,
                              const double* w, const double* d, double t,
                              std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double wt = w[i] + t * d[i];
    const double w2 = wt * wt;
    acc += (a[i] + b[i] * (w2 * w2)) * d[i];
  }
  return acc;
}

double bpr_marginal_dir_scalar(const double* mult, const double* a,
                               const double* b, const double* w,
                               const double* d, double t, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double wt = w[i] + t * d[i];
    const double w2 = wt * wt;
    const double v = (a[i] + 5.0 * b[i] * (w2 * w2)) * d[i];
    acc += mult ? mult[i] * v : v;
  }
  return acc;
}

const Backend kScalar = {
    "scalar",
    dot_scalar,
    axpy_scalar,
    bpr_latency_scalar,
    bpr_marginal_scalar,
    bpr_latency_integral_scalar,
    bpr_total_travel_time_scalar,
    bpr_latency_dir_scalar,
    bpr_marginal_dir_scalar,
};

const Backend& select() {
  if (const char* env = std::getenv("TOLLOPT_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return scalar();
    if (std::strcmp(env, "avx2") == 0 && avx2_supported()) return avx2();
  }
  return avx2_supported() ? avx2() : scalar();
}

}  // namespace

const Backend& scalar() { return kScalar; }

const Backend& active() {
  static const Backend& chosen = select();
  return chosen;
}

}  // namespace tollopt::kernels
