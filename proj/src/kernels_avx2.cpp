#include "tollopt/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define TOLLOPT_X86 1
#include <immintrin.h>
#else
#define TOLLOPT_X86 0
#endif

namespace tollopt::kernels {

#if TOLLOPT_X86

namespace {

#define TARGET_AVX2 __attribute__((target("avx2,fma")))

TARGET_AVX2 double hsum4(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swap = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swap));
}

TARGET_AVX2 double dot_avx2(const double* x, const double* y, std::size_t n) {
  std::size_t i = 0;
  __m256d acc = _mm256_setzero_pd();
  for (; i + 4 <= n; i += 4)
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc);
  double out = hsum4(acc);
  for (; i < n; ++i) out += x[i] * y[i];
  return out;
}

TARGET_AVX2 void axpy_avx2(double alpha, const double* x, double* y,
                           std::size_t n) {
  std::size_t i = 0;
  const __m256d va = _mm256_set1_pd(alpha);
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

TARGET_AVX2 inline __m256d pow4(__m256d w) {
  const __m256d w2 = _mm256_mul_pd(w, w);
  return _mm256_mul_pd(w2, w2);
}

TARGET_AVX2 void bpr_latency_avx2(const double* a, const double* b,
                                  const double* w, double* out,
                                  std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vw = _mm256_loadu_pd(w + i);
    const __m256d v =
        _mm256_fmadd_pd(_mm256_loadu_pd(b + i), pow4(vw), _mm256_loadu_pd(a + i));
    _mm256_storeu_pd(out + i, v);
  }
  for (; i < n; ++i) {
    const double w2 = w[i] * w[i];
    out[i] = a[i] + b[i] * (w2 * w2);
  }
}

TARGET_AVX2 void bpr_marginal_avx2(const double* mult, const double* a,
                                   const double* b, const double* w,
                                   double* out, std::size_t n) {
  std::size_t i = 0;
  const __m256d five = _mm256_set1_pd(5.0);
  for (; i + 4 <= n; i += 4) {
    const __m256d vb5 = _mm256_mul_pd(five, _mm256_loadu_pd(b + i));
    __m256d v = _mm256_fmadd_pd(vb5, pow4(_mm256_loadu_pd(w + i)),
                                _mm256_loadu_pd(a + i));
    if (mult) v = _mm256_mul_pd(v, _mm256_loadu_pd(mult + i));
    _mm256_storeu_pd(out + i, v);
  }
  for (; i < n; ++i) {
    const double w2 = w[i] * w[i];
    const double v = a[i] + 5.0 * b[i] * (w2 * w2);
    out[i] = mult ? mult[i] * v : v;
  }
}

TARGET_AVX2 double bpr_latency_integral_avx2(const double* a, const double* b,
                                             const double* w, std::size_t n) {
  std::size_t i = 0;
  __m256d acc = _mm256_setzero_pd();
  const __m256d fifth = _mm256_set1_pd(0.2);
  for (; i + 4 <= n; i += 4) {
    const __m256d vw = _mm256_loadu_pd(w + i);
    const __m256d w5 = _mm256_mul_pd(pow4(vw), vw);
    __m256d term = _mm256_mul_pd(_mm256_loadu_pd(a + i), vw);
    term = _mm256_fmadd_pd(_mm256_mul_pd(_mm256_loadu_pd(b + i), w5), fifth,
                           term);
    acc = _mm256_add_pd(acc, term);
  }
  double out = hsum4(acc);
  for (; i < n; ++i) {
    const double w2 = w[i] * w[i];
    out += a[i] * w[i] + b[i] * (w2 * w2 * w[i]) * 0.2;
  }
  return out;
}

TARGET_AVX2 double bpr_total_travel_time_avx2(const double* mult,
                                              const double* a, const double* b,
                                              const double* w, std::size_t n) {
  std::size_t i = 0;
  __m256d acc = _mm256_setzero_pd();
  for (; i + 4 <= n; i += 4) {
    const __m256d vw = _mm256_loadu_pd(w + i);
    const __m256d lat =
        _mm256_fmadd_pd(_mm256_loadu_pd(b + i), pow4(vw), _mm256_loadu_pd(a + i));
    __m256d term = _mm256_mul_pd(vw, lat);
    if (mult) term = _mm256_mul_pd(term, _mm256_loadu_pd(mult + i));
    acc = _mm256_add_pd(acc, term);
  }
  double out = hsum4(acc);
  for (; i < n; ++i) {
    const double w2 = w[i] * w[i];
    const double v = w[i] * (a[i] + b[i] * (w2 * w2));
    out += mult ? mult[i] * v : v;
  }
  return out;
}

TARGET_AVX2 double bpr_latency_dir_avx2(const double* a, const double* b,
                                        const double* w, const double* d,
                                        double t, std::size_t n) {
  std::size_t i = 0;
  __m256d acc = _mm256_setzero_pd();
  const __m256d vt = _mm256_set1_pd(t);
  for (; i + 4 <= n; i += 4) {
    const __m256d vd = _mm256_loadu_pd(d + i);
    const __m256d wt = _mm256_fmadd_pd(vt, vd, _mm256_loadu_pd(w + i));
    const __m256d lat =
        _mm256_fmadd_pd(_mm256_loadu_pd(b + i), pow4(wt), _mm256_loadu_pd(a + i));
    acc = _mm256_fmadd_pd(lat, vd, acc);
  }
  double out = hsum4(acc);
  for (; i < n; ++i) {
    const double wt = w[i] + t * d[i];
    const double w2 = wt * wt;
    out += (a[i] + b[i] * (w2 * w2)) * d[i];
  }
  return out;
}

TARGET_AVX2 double bpr_marginal_dir_avx2(const double* mult, const double* a,
                                         const double* b, const double* w,
                                         const double* d, double t,
                                         std::size_t n) {
  std::size_t i = 0;
  __m256d acc = _mm256_setzero_pd();
  const __m256d vt = _mm256_set1_pd(t);
  const __m256d five = _mm256_set1_pd(5.0);
  for (; i + 4 <= n; i += 4) {
    const __m256d vd = _mm256_loadu_pd(d + i);
    const __m256d wt = _mm256_fmadd_pd(vt, vd, _mm256_loadu_pd(w + i));
    const __m256d vb5 = _mm256_mul_pd(five, _mm256_loadu_pd(b + i));
    __m256d v = _mm256_fmadd_pd(vb5, pow4(wt), _mm256_loadu_pd(a + i));
    v = _mm256_mul_pd(v, vd);
    if (mult) v = _mm256_mul_pd(v, _mm256_loadu_pd(mult + i));
    acc = _mm256_add_pd(acc, v);
  }
  double out = hsum4(acc);
  for (; i < n; ++i) {
    const double wt = w[i] + t * d[i];
    const double w2 = wt * wt;
    const double v = (a[i] + 5.0 * b[i] * (w2 * w2)) * d[i];
    out += mult ? mult[i] * v : v;
  }
  return out;
}

#undef TARGET_AVX2

const Backend kAvx2 = {
    "avx2",
    dot_avx2,
    axpy_avx2,
    bpr_latency_avx2,
    bpr_marginal_avx2,
    bpr_latency_integral_avx2,
    bpr_total_travel_time_avx2,
    bpr_latency_dir_avx2,
    bpr_marginal_dir_avx2,
};

}  // namespace

bool avx2_supported() {
  static const bool ok = __builtin_cpu_supports("avx2") != 0 &&
                         __builtin_cpu_supports("fma") != 0;
  return ok;
}

const Backend& avx2() { return kAvx2; }

#else  // !TOLLOPT_X86

bool avx2_supported() { return false; }

const Backend& avx2() { return scalar(); }

#endif

}  // namespace tollopt::kernels
